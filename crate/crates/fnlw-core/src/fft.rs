//! Cached 2D complex FFTs on square lattices.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry((size, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
            planner.plan_fft(size, dir)
        })
        .clone()
}

fn transpose_square(buf: &mut [Complex64], size: usize) {
    for i in 0..size {
        for j in (i + 1)..size {
            buf.swap(i * size + j, j * size + i);
        }
    }
}

/// In-place unnormalized 2D DFT of a row-major `size x size` buffer.
/// Forward uses `e^{-i n.x}`, inverse `e^{+i n.x}`; the caller owns the
/// `1/M^2` normalization.
pub(crate) fn transform_2d(buf: &mut [Complex64], size: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), size * size);
    let fft = plan(size, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, size);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, size);
}

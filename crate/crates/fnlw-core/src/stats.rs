//! Ensemble summaries, least-squares fits, and chain statistics.
//!
//! All reductions run in a fixed order over the sample index, so results are
//! bit-identical at any worker count.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Monte Carlo summary for one observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub observable: String,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub master_seed: u64,
}

/// Sample mean and unbiased variance, accumulated in index order.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

pub fn summarize(observable: &str, values: &[f64], master_seed: u64) -> EnsembleReport {
    let (mean, variance) = mean_var(values);
    let std_error = if values.is_empty() { 0.0 } else { (variance / values.len() as f64).sqrt() };
    EnsembleReport {
        observable: observable.to_string(),
        count: values.len(),
        mean,
        variance,
        std_error,
        master_seed,
    }
}

/// Ordinary least squares `y = a + b x`; returns `(slope, intercept, slope_se)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (x.len().max(3) - 2) as f64;
    let resid_var: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum::<f64>()
        / dof;
    let slope_se = (resid_var / sxx).sqrt();
    (slope, intercept, slope_se)
}

/// Integrated autocorrelation time with Sokal's adaptive window
/// (`W` is the smallest lag with `W >= 5 tau_W`). Infinite for a constant
/// series.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let (mean, var) = mean_var(series);
    if var <= 0.0 {
        return f64::INFINITY;
    }
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut tau = 1.0;
    let max_lag = n / 3;
    for lag in 1..=max_lag {
        let c: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * c / c0;
        if (lag as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, e)| **e > 0.0)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Upper quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, quantile: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(quantile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_var_basics() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-14);
        assert!((v - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 1.5 * v).collect();
        let (slope, intercept, se) = ols_slope(&x, &y);
        assert!((slope + 1.5).abs() < 1e-12);
        assert!((intercept - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn autocorr_time_flags_constant_series() {
        assert!(integrated_autocorr_time(&[2.0; 100]).is_infinite());
        // alternating series has tau < 1 clipped to 1
        let alt: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(integrated_autocorr_time(&alt), 1.0);
    }

    #[test]
    fn chi_square_critical_value() {
        // well-known value: chi2(0.99; 10) ~ 23.209
        let c = chi_square_critical(10, 0.99);
        assert!((c - 23.209).abs() < 0.01);
    }
}

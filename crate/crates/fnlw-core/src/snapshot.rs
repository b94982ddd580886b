//! Binary snapshot format shared with the command-line tools.
//!
//! Layout (all integers little-endian):
//! magic `FNLW`, format version (u32), `N` (u32), `M` (u32), `m` (u32),
//! `alpha` (f64), then the payload. A field carries one coefficient block, a
//! phase state two (`u` then `v`), a trajectory a u32 state count followed
//! by the time table, the Hamiltonian table (f64 each), and the state
//! blocks. Each block is `M*M` complex entries as (real, imaginary) f64
//! pairs, row-major over the mode lattice in FFT index order
//! (`k1 * M + k2`, frequency `k` for `k <= (M-1)/2`, else `k - M`).

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::dynamics::TrajectorySample;
use crate::error::{Error, Result};
use crate::field::{FourierField, PhaseState};
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"FNLW";
pub const FORMAT_VERSION: u32 = 1;

fn write_header(out: &mut impl Write, grid: &GridSpec) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&grid.cutoff.to_le_bytes())?;
    out.write_all(&grid.grid_size.to_le_bytes())?;
    out.write_all(&grid.nonlin.to_le_bytes())?;
    out.write_all(&grid.alpha.to_le_bytes())?;
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_header(input: &mut impl Read) -> Result<GridSpec> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let cutoff = read_u32(input)?;
    let grid_size = read_u32(input)?;
    let nonlin = read_u32(input)?;
    let alpha = read_f64(input)?;
    let grid = GridSpec { cutoff, grid_size, alpha, nonlin };
    grid.validate().map_err(|e| Error::Snapshot(format!("invalid header: {e}")))?;
    Ok(grid)
}

fn write_block(out: &mut impl Write, field: &FourierField) -> Result<()> {
    for c in field.coeffs() {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_block(input: &mut impl Read, grid: GridSpec) -> Result<FourierField> {
    let len = grid.lattice_len();
    let mut coeffs = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(input)?;
        let im = read_f64(input)?;
        coeffs.push(Complex64::new(re, im));
    }
    let mut field = FourierField::from_raw(grid, 0, coeffs);
    field.set_band(field.measured_band());
    Ok(field)
}

pub fn write_field(out: &mut impl Write, field: &FourierField) -> Result<()> {
    write_header(out, field.grid())?;
    write_block(out, field)
}

pub fn read_field(input: &mut impl Read) -> Result<FourierField> {
    let grid = read_header(input)?;
    read_block(input, grid)
}

pub fn write_phase_state(out: &mut impl Write, state: &PhaseState) -> Result<()> {
    write_header(out, state.grid())?;
    write_block(out, &state.u)?;
    write_block(out, &state.v)
}

pub fn read_phase_state(input: &mut impl Read) -> Result<PhaseState> {
    let grid = read_header(input)?;
    let u = read_block(input, grid)?;
    let v = read_block(input, grid)?;
    PhaseState::new(u, v)
}

pub fn write_trajectory(out: &mut impl Write, traj: &TrajectorySample) -> Result<()> {
    traj.validate()?;
    write_header(out, traj.states[0].grid())?;
    out.write_all(&(traj.states.len() as u32).to_le_bytes())?;
    for t in &traj.times {
        out.write_all(&t.to_le_bytes())?;
    }
    for h in &traj.hamiltonian_log {
        out.write_all(&h.to_le_bytes())?;
    }
    for state in &traj.states {
        write_block(out, &state.u)?;
        write_block(out, &state.v)?;
    }
    Ok(())
}

pub fn read_trajectory(input: &mut impl Read) -> Result<TrajectorySample> {
    let grid = read_header(input)?;
    let count = read_u32(input)? as usize;
    let mut times = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(read_f64(input)?);
    }
    let mut hamiltonian_log = Vec::with_capacity(count);
    for _ in 0..count {
        hamiltonian_log.push(read_f64(input)?);
    }
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let u = read_block(input, grid)?;
        let v = read_block(input, grid)?;
        states.push(PhaseState::new(u, v)?);
    }
    let traj = TrajectorySample { times, states, hamiltonian_log };
    traj.validate()?;
    Ok(traj)
}

pub fn save_phase_state(path: &std::path::Path, state: &PhaseState) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_phase_state(&mut file, state)
}

pub fn load_phase_state(path: &std::path::Path) -> Result<PhaseState> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_phase_state(&mut file)
}

pub fn save_trajectory(path: &std::path::Path, traj: &TrajectorySample) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory(&mut file, traj)
}

pub fn load_trajectory(path: &std::path::Path) -> Result<TrajectorySample> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_trajectory(&mut file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolveOptions};
    use crate::measure::{sample_mu_alpha, SeedSpec};
    use crate::wick::WickContext;

    #[test]
    fn phase_state_round_trip_is_bit_exact() {
        let grid = GridSpec::with_min_grid(3, 0.9, 1).unwrap();
        let state = sample_mu_alpha(&SeedSpec::new(77, 0), &grid);
        let mut buf = Vec::new();
        write_phase_state(&mut buf, &state).unwrap();
        let back = read_phase_state(&mut buf.as_slice()).unwrap();
        assert_eq!(back.u.coeffs(), state.u.coeffs());
        assert_eq!(back.v.coeffs(), state.v.coeffs());
        assert_eq!(back.u.band(), state.u.band());
    }

    #[test]
    fn trajectory_round_trip() {
        let ctx = WickContext::new(0.9, 1, 2);
        let grid = ctx.grid();
        let state = sample_mu_alpha(&SeedSpec::new(78, 1), &grid);
        let traj = evolve(&state, &EvolveOptions::new(0.04, 0.01, 2), &ctx).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let back = read_trajectory(&mut buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.hamiltonian_log, traj.hamiltonian_log);
        for (a, b) in back.states.iter().zip(&traj.states) {
            assert_eq!(a.u.coeffs(), b.u.coeffs());
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let grid = GridSpec::with_min_grid(1, 0.9, 1).unwrap();
        let state = PhaseState::zeros(grid);
        let mut buf = Vec::new();
        write_phase_state(&mut buf, &state).unwrap();
        buf[0] = b'X';
        assert!(read_phase_state(&mut buf.as_slice()).is_err());
    }
}

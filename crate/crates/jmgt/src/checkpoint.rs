//! Binary checkpoint format (little-endian), magic `JMGT1\0`, version 1.
//!
//! Layout after the header: grid descriptor, the full physical-parameter
//! block, current time, the psi/v/w coefficient arrays as interleaved
//! (re, im) f64, the snapshot ring (length-prefixed), then the auxiliary
//! history block required for bit-exact resume (dt, step count, initial and
//! latest snapshots, the exact memory field, the recurrence accumulators).
//! Readers validate sizes before allocating, so truncated or corrupted
//! files fail cleanly.

use crate::field::SpectralField;
use crate::grid::{GridRef, SpectralGrid};
use crate::history::HistoryField;
use crate::kernel::KernelSpec;
use crate::params::PhysicalParams;
use crate::state::StateVector;
use crate::{JmgtError, Result};
use num_complex::Complex64;
use std::collections::VecDeque;
use std::io::Write;

pub const MAGIC: &[u8; 6] = b"JMGT1\0";
pub const VERSION: u32 = 1;

/// Everything a resumed run needs.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: StateVector,
    pub params: PhysicalParams,
    pub s_max_factor: f64,
    pub ring_budget: usize,
}

pub fn write_checkpoint(
    path: &std::path::Path,
    state: &StateVector,
    params: &PhysicalParams,
    s_max_factor: f64,
    ring_budget: usize,
) -> Result<()> {
    let bytes = encode(state, params, s_max_factor, ring_budget);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

pub fn encode(
    state: &StateVector,
    params: &PhysicalParams,
    s_max_factor: f64,
    ring_budget: usize,
) -> Vec<u8> {
    let grid = state.grid();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, grid.dim() as u32);
    put_u32(&mut out, grid.points_per_dim() as u32);
    put_f64(&mut out, grid.box_length());
    // physical parameter block
    for v in [
        params.tau,
        params.alpha,
        params.c,
        params.delta,
        params.b,
        params.k,
        params.kernel.m,
        params.kernel.c,
        params.kernel.tau_k,
        params.kernel.zeta,
    ] {
        put_f64(&mut out, v);
    }
    out.push(params.rho.is_some() as u8);
    put_f64(&mut out, params.rho.unwrap_or(0.0));
    put_f64(&mut out, state.t);
    put_field(&mut out, &state.psi);
    put_field(&mut out, &state.v);
    put_field(&mut out, &state.w);
    // snapshot ring
    let h = &state.history;
    put_u32(&mut out, h.ring_len() as u32);
    for j in 0..h.ring_len() {
        put_field(&mut out, h.ring_node(j).unwrap());
    }
    // auxiliary history block for exact resume
    put_f64(&mut out, h.dt());
    put_f64(&mut out, s_max_factor);
    put_u64(&mut out, ring_budget as u64);
    put_u64(&mut out, h.steps());
    put_field(&mut out, h.psi_init());
    put_field(&mut out, h.psi_last());
    put_field(&mut out, &state.mem);
    put_field(&mut out, h.conv_full());
    for v in h.norm_full() {
        put_f64(&mut out, v);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    let magic = r.take(6)?;
    if magic != MAGIC {
        return Err(JmgtError::Checkpoint("bad magic (not a JMGT1 checkpoint)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(JmgtError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let dim = r.u32()? as usize;
    let points = r.u32()? as usize;
    if !(1..=3).contains(&dim) || !(8..=1024).contains(&points) || points % 2 != 0 {
        return Err(JmgtError::Checkpoint(format!(
            "implausible grid: dim {dim}, points {points}"
        )));
    }
    let box_length = r.f64()?;
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(JmgtError::Checkpoint("non-positive box length".into()));
    }
    let grid: GridRef = SpectralGrid::shared(dim, points, box_length)
        .map_err(|e| JmgtError::Checkpoint(format!("grid rejected: {e}")))?;
    let total = grid.total_points();

    let tau = r.f64()?;
    let alpha = r.f64()?;
    let c = r.f64()?;
    let delta = r.f64()?;
    let b = r.f64()?;
    let k = r.f64()?;
    let km = r.f64()?;
    let kc = r.f64()?;
    let ktk = r.f64()?;
    let kz = r.f64()?;
    let rho_flag = r.u8()?;
    if rho_flag > 1 {
        return Err(JmgtError::Checkpoint("non-canonical rho flag".into()));
    }
    let has_rho = rho_flag == 1;
    let rho = r.f64()?;
    if !has_rho && rho.to_bits() != 0 {
        // enforce canonical encoding so decode/encode is bit-exact
        return Err(JmgtError::Checkpoint("non-canonical rho payload".into()));
    }
    let kernel = KernelSpec::new(km, kc, ktk)
        .map_err(|e| JmgtError::Checkpoint(format!("kernel rejected: {e}")))?
        .with_zeta(kz);
    if !(tau > 0.0 && tau.is_finite()) || !b.is_finite() || !k.is_finite() {
        return Err(JmgtError::Checkpoint("implausible physical parameters".into()));
    }
    let mut params = PhysicalParams {
        tau,
        alpha,
        c,
        delta,
        b,
        k,
        kernel,
        rho: if has_rho { Some(rho) } else { None },
    };
    // b must match delta + tau c^2 to round-off; re-derive to be safe
    if (params.b - (params.delta + params.tau * params.c * params.c)).abs()
        > 1e-9 * params.b.abs().max(1.0)
    {
        return Err(JmgtError::Checkpoint("b != delta + tau c^2 in checkpoint".into()));
    }
    params.b = b;

    let t = r.f64()?;
    if !t.is_finite() {
        return Err(JmgtError::Checkpoint("non-finite time stamp".into()));
    }
    let psi = read_field(&mut r, &grid, total)?;
    let v = read_field(&mut r, &grid, total)?;
    let w = read_field(&mut r, &grid, total)?;

    let ring_len = r.u32()? as usize;
    // sanity-cap before allocating: each snapshot is 16 * total bytes
    let remaining = r.remaining();
    let snapshot_bytes = total
        .checked_mul(16)
        .ok_or_else(|| JmgtError::Checkpoint("overflow in snapshot size".into()))?;
    if ar_mul(ring_len, snapshot_bytes)? > remaining {
        return Err(JmgtError::Checkpoint(format!(
            "ring length {ring_len} exceeds file contents"
        )));
    }
    let mut ring: VecDeque<SpectralField> = VecDeque::with_capacity(ring_len);
    for _ in 0..ring_len {
        ring.push_back(read_field(&mut r, &grid, total)?);
    }

    let dt = r.f64()?;
    let s_max_factor = r.f64()?;
    let ring_budget = r.u64()? as usize;
    let steps = r.u64()?;
    if !(dt > 0.0 && dt.is_finite()) || !(s_max_factor > 0.0 && s_max_factor.is_finite()) {
        return Err(JmgtError::Checkpoint("implausible history parameters".into()));
    }
    let psi_init = read_field(&mut r, &grid, total)?;
    let psi_last = read_field(&mut r, &grid, total)?;
    let mem = read_field(&mut r, &grid, total)?;
    let conv_full = read_field(&mut r, &grid, total)?;
    let norm_full = [r.f64()?, r.f64()?, r.f64()?];
    if !r.at_end() {
        return Err(JmgtError::Checkpoint(format!(
            "{} trailing bytes after checkpoint payload",
            r.remaining()
        )));
    }

    let history = HistoryField::restore(
        &grid,
        params.kernel,
        dt,
        s_max_factor,
        ring_budget,
        psi_init,
        psi_last,
        if ring_len > 0 { Some(ring) } else { None },
        steps,
        conv_full,
        norm_full,
    )?;
    Ok(Checkpoint {
        state: StateVector {
            psi,
            v,
            w,
            mem,
            history,
            t,
        },
        params,
        s_max_factor,
        ring_budget,
    })
}

fn ar_mul(a: usize, b: usize) -> Result<usize> {
    a.checked_mul(b)
        .ok_or_else(|| JmgtError::Checkpoint("size overflow".into()))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_field(out: &mut Vec<u8>, f: &SpectralField) {
    for c in f.coeffs() {
        put_f64(out, c.re);
        put_f64(out, c.im);
    }
}

fn read_field(r: &mut Reader, grid: &GridRef, total: usize) -> Result<SpectralField> {
    let mut coeffs = Vec::with_capacity(total);
    for _ in 0..total {
        let re = r.f64()?;
        let im = r.f64()?;
        coeffs.push(Complex64::new(re, im));
    }
    SpectralField::from_coeffs(grid, coeffs)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(JmgtError::Checkpoint(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::InitialProfile;

    fn sample_state() -> (StateVector, PhysicalParams) {
        let grid = SpectralGrid::shared(2, 16, 7.0).unwrap();
        let kernel = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
        let params = PhysicalParams::new(0.5, 1.0, 0.1, 1.0, kernel, false).unwrap();
        let profile = InitialProfile::Gaussian {
            amplitude: 0.3,
            width: 1.0,
            center: None,
            weights: [1.0, 0.5, 0.0],
        };
        let (mut state, _) = StateVector::initial_default(&grid, &profile, &params, 1e-2).unwrap();
        // advance a few steps so the ring and accumulators are nontrivial
        let config = crate::solver::SolverConfig {
            dt: 1e-2,
            t_end: 5e-2,
            scheme: crate::solver::Scheme::Rk4,
            dealias: true,
            monitor_stride: 100,
        };
        let out = crate::solver::solve(state.clone(), &params, &config, &Default::default())
            .unwrap();
        state = out.state;
        (state, params)
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let (state, params) = sample_state();
        let bytes = encode(&state, &params, 40.0, crate::history::DEFAULT_RING_BUDGET);
        let ck = decode(&bytes).unwrap();
        let bytes2 = encode(&ck.state, &ck.params, ck.s_max_factor, ck.ring_budget);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn corrupted_magic_fails_cleanly() {
        let (state, params) = sample_state();
        let mut bytes = encode(&state, &params, 40.0, crate::history::DEFAULT_RING_BUDGET);
        bytes[0] = b'X';
        let err = decode(&bytes).unwrap_err();
        assert!(format!("{err}").contains("magic"));
    }

    #[test]
    fn truncation_fails_cleanly() {
        let (state, params) = sample_state();
        let bytes = encode(&state, &params, 40.0, crate::history::DEFAULT_RING_BUDGET);
        for cut in [5usize, 10, 64, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut at {cut} must fail");
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let (state, params) = sample_state();
        let mut bytes = encode(&state, &params, 40.0, crate::history::DEFAULT_RING_BUDGET);
        bytes.push(0);
        assert!(decode(&bytes).is_err());
    }
}

//! Multi-dimensional complex FFTs over the flat row-major field layout.
//!
//! Thin wrapper around `rustfft` that applies batched 1-D transforms along
//! every axis. Lines are independent, so they may be split across a small
//! fixed number of threads; outputs land in disjoint slices and no
//! reductions occur, keeping results bit-identical regardless of thread
//! count.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct FftEngine {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    threads: usize,
}

impl std::fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftEngine")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl FftEngine {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let threads = std::thread::available_parallelism()
            .map(|p| p.get().min(4))
            .unwrap_or(1);
        Self {
            n,
            dim,
            forward,
            inverse,
            threads,
        }
    }

    /// In-place forward DFT along every axis, then divide by the total
    /// number of points so coefficients are amplitudes of `exp(i xi . x)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.dim {
            self.transform_axis(data, axis, true);
        }
        let scale = 1.0 / data.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse DFT (synthesis, no scaling).
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.dim {
            self.transform_axis(data, axis, false);
        }
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fwd: bool) {
        let n = self.n;
        let total = data.len();
        let lines = total / n;
        // stride between consecutive elements of a line along `axis`
        let stride = n.pow((self.dim - 1 - axis) as u32);
        let fft = if fwd { &self.forward } else { &self.inverse };

        // thread dispatch only pays off for large grids
        let parallel = self.threads > 1 && total >= 1 << 16 && lines >= 2 * self.threads;
        if stride == 1 {
            // contiguous lines: transform in place, batched over threads
            let chunk_lines = lines.div_ceil(self.threads.max(1));
            if parallel {
                std::thread::scope(|s| {
                    for chunk in data.chunks_mut(chunk_lines * n) {
                        let fft = Arc::clone(fft);
                        s.spawn(move || {
                            let mut scratch =
                                vec![Complex64::default(); fft.get_inplace_scratch_len()];
                            // one call transforms every contained line
                            fft.process_with_scratch(chunk, &mut scratch);
                        });
                    }
                });
            } else {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(data, &mut scratch);
            }
            return;
        }

        // strided lines: gather groups of adjacent lines so reads and
        // writes touch whole cache lines, transform, scatter back
        let group = 8.min(stride);
        let run_range = |data: &mut [Complex64], lo: usize, hi: usize| {
            let mut buf = vec![Complex64::default(); group * n];
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            let mut l = lo;
            while l < hi {
                let offset = l % stride;
                let b = group.min(stride - offset).min(hi - l);
                let base = (l / stride) * n * stride + offset;
                for j in 0..n {
                    let src = base + j * stride;
                    for r in 0..b {
                        buf[r * n + j] = data[src + r];
                    }
                }
                fft.process_with_scratch(&mut buf[..b * n], &mut scratch);
                for j in 0..n {
                    let dst = base + j * stride;
                    for r in 0..b {
                        data[dst + r] = buf[r * n + j];
                    }
                }
                l += b;
            }
        };

        if parallel {
            // align thread ranges to group boundaries so no group straddles
            let per = lines.div_ceil(self.threads).next_multiple_of(group);
            let ptr = SendPtr(data.as_mut_ptr());
            let len = data.len();
            std::thread::scope(|s| {
                for t in 0..self.threads {
                    let lo = t * per;
                    let hi = ((t + 1) * per).min(lines);
                    if lo >= hi {
                        break;
                    }
                    s.spawn(move || {
                        let ptr = ptr;
                        // Safety: each line index is handled by exactly one
                        // thread and lines address disjoint element sets, so
                        // concurrent writes never alias.
                        let data = unsafe { std::slice::from_raw_parts_mut(ptr.0, len) };
                        run_range(data, lo, hi);
                    });
                }
            });
        } else {
            run_range(data, 0, lines);
        }
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(dim: usize, n: usize) {
        let engine = FftEngine::new(dim, n);
        let total = n.pow(dim as u32);
        let mut rng = crate::rng::SplitMix64::new(123);
        let orig: Vec<Complex64> = (0..total)
            .map(|_| Complex64::new(rng.next_normal(), rng.next_normal()))
            .collect();
        let mut data = orig.clone();
        engine.forward(&mut data);
        engine.inverse(&mut data);
        let mut max = 0.0f64;
        for (a, b) in data.iter().zip(orig.iter()) {
            max = max.max((a - b).norm());
        }
        assert!(max < 1e-12, "dim {dim} n {n} roundtrip err {max}");
    }

    #[test]
    fn roundtrips() {
        roundtrip(1, 16);
        roundtrip(2, 16);
        roundtrip(3, 8);
        roundtrip(3, 12);
    }

    #[test]
    fn forward_of_plane_wave_is_unit_coefficient() {
        let n = 16;
        let engine = FftEngine::new(2, n);
        // f(x, y) = exp(i * (2*pi/n) * (3 x_idx + 5 y_idx))
        let mut data = vec![Complex64::default(); n * n];
        for ix in 0..n {
            for iy in 0..n {
                let phase =
                    2.0 * std::f64::consts::PI * (3.0 * ix as f64 + 5.0 * iy as f64) / n as f64;
                data[ix * n + iy] = Complex64::new(phase.cos(), phase.sin());
            }
        }
        engine.forward(&mut data);
        for ix in 0..n {
            for iy in 0..n {
                let c = data[ix * n + iy];
                let expect = if ix == 3 && iy == 5 { 1.0 } else { 0.0 };
                assert!(
                    (c - Complex64::new(expect, 0.0)).norm() < 1e-12,
                    "({ix},{iy}) -> {c}"
                );
            }
        }
    }
}

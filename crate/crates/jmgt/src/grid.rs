//! Periodic box descriptor and discrete wavenumbers.

use crate::{JmgtError, Result};
use std::sync::Arc;

/// Descriptor of a periodic box `[0, L)^dim` sampled on `points_per_dim`
/// equispaced nodes per dimension.
///
/// Wavenumbers follow the standard DFT layout `2*pi*k/L` with
/// `k in {0, 1, .., N/2, -N/2+1, .., -1}`; the Nyquist mode `k = N/2`
/// appears exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    dim: usize,
    points_per_dim: usize,
    box_length: f64,
    /// Signed wavenumbers for one axis, in DFT index order.
    wavenumbers: Vec<f64>,
    /// Cached `|xi|^2` per flat mode (hot loops).
    mu: Vec<f64>,
    /// Cached per-mode flags: bit 0 = Nyquist on some axis, bit 1 = above
    /// the 2/3-rule cutoff.
    flags: Vec<u8>,
}

pub type GridRef = Arc<SpectralGrid>;

impl SpectralGrid {
    /// Build a grid. `points_per_dim` must be even and at least 8.
    pub fn new(dim: usize, points_per_dim: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(JmgtError::Grid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if points_per_dim < 8 {
            return Err(JmgtError::Grid(format!(
                "points_per_dim must be >= 8, got {points_per_dim}"
            )));
        }
        if points_per_dim % 2 != 0 {
            return Err(JmgtError::Grid(format!(
                "points_per_dim must be even, got {points_per_dim}"
            )));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(JmgtError::Grid(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        let n = points_per_dim;
        let base = 2.0 * std::f64::consts::PI / box_length;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| {
                let k = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
                base * k as f64
            })
            .collect();
        let mut grid = Self {
            dim,
            points_per_dim,
            box_length,
            wavenumbers,
            mu: Vec::new(),
            flags: Vec::new(),
        };
        let total = grid.total_points();
        let mut mu = Vec::with_capacity(total);
        let mut flags = Vec::with_capacity(total);
        let cutoff = (n / 3) as i64;
        for i in 0..total {
            let idx = grid.axis_indices(i);
            let mut s = 0.0;
            let mut f = 0u8;
            for &ax in idx.iter().take(dim) {
                let xi = grid.wavenumbers[ax];
                s += xi * xi;
                if ax == n / 2 {
                    f |= 1;
                }
                if grid.mode_index(ax).abs() > cutoff {
                    f |= 2;
                }
            }
            mu.push(s);
            flags.push(f);
        }
        grid.mu = mu;
        grid.flags = flags;
        Ok(grid)
    }

    pub fn shared(dim: usize, points_per_dim: usize, box_length: f64) -> Result<GridRef> {
        Ok(Arc::new(Self::new(dim, points_per_dim, box_length)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total number of sample points / modes.
    pub fn total_points(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    /// Box volume.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim as i32)
    }

    /// Volume of one sample cell.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total_points() as f64
    }

    /// Signed wavenumber of axis index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.wavenumbers[i]
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Integer mode index (`-N/2 < k <= N/2`) of axis index `i`.
    pub fn mode_index(&self, i: usize) -> i64 {
        let n = self.points_per_dim as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Decompose a flat mode index into per-axis indices (axis 0 slowest).
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_dim;
        match self.dim {
            1 => [flat, 0, 0],
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    /// `|xi|^2` for the flat mode index.
    #[inline]
    pub fn xi_sq(&self, flat: usize) -> f64 {
        self.mu[flat]
    }

    /// Cached `|xi|^2` table over all modes.
    #[inline]
    pub fn mu_table(&self) -> &[f64] {
        &self.mu
    }

    /// True when any axis index of the flat mode sits at Nyquist (`k = N/2`).
    #[inline]
    pub fn is_nyquist(&self, flat: usize) -> bool {
        self.flags[flat] & 1 != 0
    }

    /// True when any axis mode magnitude exceeds the 2/3-rule cutoff `N/3`.
    #[inline]
    pub fn above_dealias_cutoff(&self, flat: usize) -> bool {
        self.flags[flat] & 2 != 0
    }

    /// `|xi|^2` with Nyquist modes zeroed (the differential-operator symbol).
    #[inline]
    pub fn mu_operator(&self, flat: usize) -> f64 {
        if self.flags[flat] & 1 != 0 {
            0.0
        } else {
            self.mu[flat]
        }
    }

    /// Sample coordinates of a flat sample index.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let h = self.box_length / self.points_per_dim as f64;
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * h;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_1d_8_points_2pi_box() {
        let g = SpectralGrid::new(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let got: Vec<i64> = (0..8).map(|i| g.wavenumber(i).round() as i64).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        // symmetric about zero, Nyquist present once
        let mut sorted = got.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![-3, -2, -1, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn max_wavenumber_3d() {
        let g = SpectralGrid::new(3, 64, 40.0).unwrap();
        assert_eq!(g.total_points(), 64 * 64 * 64);
        let max = g
            .wavenumbers()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let expect = 2.0 * std::f64::consts::PI * 32.0 / 40.0;
        assert!((max - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_odd_and_tiny_and_nonpositive() {
        assert!(SpectralGrid::new(2, 7, 1.0).is_err());
        assert!(SpectralGrid::new(1, 4, 1.0).is_err());
        assert!(SpectralGrid::new(1, 8, 0.0).is_err());
        assert!(SpectralGrid::new(1, 8, -2.0).is_err());
        assert!(SpectralGrid::new(4, 8, 1.0).is_err());
    }

    #[test]
    fn cell_volume_times_points_is_box_volume() {
        let g = SpectralGrid::new(3, 16, 5.0).unwrap();
        let v = g.cell_volume() * g.total_points() as f64;
        assert!((v - g.volume()).abs() < 1e-9 * g.volume());
    }
}

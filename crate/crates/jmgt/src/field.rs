//! Complex Fourier-coefficient fields over a [`SpectralGrid`] and the
//! spectral operators used by the energy calculus.
//!
//! Conventions: `f(x) = sum_k c_k exp(i xi_k . x)`, so the forward transform
//! is DFT / N. All norms carry the cell-volume factor and are therefore
//! resolution-independent continuum values; the rectangle rule on the
//! periodic grid is exact for band-limited integrands.

use crate::fft::FftEngine;
use crate::grid::GridRef;
use crate::{JmgtError, Result};
use num_complex::Complex64;
use std::sync::Arc;

/// A field stored as complex Fourier coefficients (flat row-major mode order).
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridRef,
    engine: Arc<FftEngine>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &GridRef) -> Self {
        let engine = Arc::new(FftEngine::new(grid.dim(), grid.points_per_dim()));
        Self {
            grid: Arc::clone(grid),
            engine,
            coeffs: vec![Complex64::default(); grid.total_points()],
        }
    }

    fn like(other: &SpectralField) -> Self {
        Self {
            grid: Arc::clone(&other.grid),
            engine: Arc::clone(&other.engine),
            coeffs: vec![Complex64::default(); other.coeffs.len()],
        }
    }

    pub fn from_coeffs(grid: &GridRef, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.total_points() {
            return Err(JmgtError::Shape(format!(
                "coefficient array has {} entries, grid has {} modes",
                coeffs.len(),
                grid.total_points()
            )));
        }
        let engine = Arc::new(FftEngine::new(grid.dim(), grid.points_per_dim()));
        Ok(Self {
            grid: Arc::clone(grid),
            engine,
            coeffs,
        })
    }

    /// Forward transform of real samples (rectangle-rule analysis).
    pub fn forward_transform(grid: &GridRef, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.total_points() {
            return Err(JmgtError::Shape(format!(
                "sample array has {} entries, grid has {} points",
                samples.len(),
                grid.total_points()
            )));
        }
        let mut field = Self::zeros(grid);
        for (c, &s) in field.coeffs.iter_mut().zip(samples.iter()) {
            *c = Complex64::new(s, 0.0);
        }
        field.engine.forward(&mut field.coeffs);
        Ok(field)
    }

    /// Inverse transform to real samples. The imaginary residue of a
    /// Hermitian-symmetric field is at rounding level and is discarded.
    pub fn inverse_transform(&self) -> Vec<f64> {
        let mut work = self.coeffs.clone();
        self.engine.inverse(&mut work);
        work.iter().map(|c| c.re).collect()
    }

    /// Inverse transform retaining complex samples.
    pub fn inverse_transform_complex(&self) -> Vec<Complex64> {
        let mut work = self.coeffs.clone();
        self.engine.inverse(&mut work);
        work
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn same_grid(&self, other: &SpectralField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Laplacian: multiply every coefficient by `-|xi|^2`. Nyquist modes are
    /// zeroed so differentiated real fields stay real.
    pub fn laplacian(&self) -> SpectralField {
        let mut out = Self::like(self);
        for (i, c) in self.coeffs.iter().enumerate() {
            if self.grid.is_nyquist(i) {
                out.coeffs[i] = Complex64::default();
            } else {
                out.coeffs[i] = c * (-self.grid.xi_sq(i));
            }
        }
        out
    }

    /// Partial derivative along one axis (`i xi_axis` multiplier, Nyquist
    /// zeroed for real-valuedness).
    pub fn derivative(&self, axis: usize) -> SpectralField {
        assert!(axis < self.grid.dim());
        let mut out = Self::like(self);
        let n = self.grid.points_per_dim();
        for (i, c) in self.coeffs.iter().enumerate() {
            let idx = self.grid.axis_indices(i)[axis];
            if idx == n / 2 || self.grid.is_nyquist(i) {
                out.coeffs[i] = Complex64::default();
            } else {
                let xi = self.grid.wavenumber(idx);
                out.coeffs[i] = Complex64::new(0.0, xi) * c;
            }
        }
        out
    }

    /// `H^j` seminorm `|| grad^j f ||_{L^2}` from Parseval:
    /// `(V * sum |xi|^{2j} |c_k|^2)^{1/2}`.
    pub fn sobolev_seminorm(&self, j: u32) -> f64 {
        assert!(j <= 2, "only j in {{0,1,2}} supported");
        let v = self.grid.volume();
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let w = match j {
                0 => 1.0,
                1 => self.grid.xi_sq(i),
                _ => {
                    let x = self.grid.xi_sq(i);
                    x * x
                }
            };
            acc += w * c.norm_sqr();
        }
        (v * acc).sqrt()
    }

    /// Squared `H^j` seminorm (avoids the sqrt for energy assembly).
    pub fn sobolev_sq(&self, j: u32) -> f64 {
        let n = self.sobolev_seminorm(j);
        n * n
    }

    /// `<grad^j a, grad^j b>_{L^2}` for real fields.
    pub fn grad_inner(&self, other: &SpectralField, j: u32) -> f64 {
        assert!(self.same_grid(other));
        let v = self.grid.volume();
        let mut acc = 0.0;
        for (i, (a, b)) in self.coeffs.iter().zip(other.coeffs.iter()).enumerate() {
            let w = match j {
                0 => 1.0,
                1 => self.grid.xi_sq(i),
                _ => {
                    let x = self.grid.xi_sq(i);
                    x * x
                }
            };
            acc += w * (a.re * b.re + a.im * b.im);
        }
        v * acc
    }

    /// Zero every mode whose index magnitude exceeds `N/3` on any axis.
    pub fn dealias(&mut self) {
        for i in 0..self.coeffs.len() {
            if self.grid.above_dealias_cutoff(i) {
                self.coeffs[i] = Complex64::default();
            }
        }
    }

    pub fn dealiased(mut self) -> SpectralField {
        self.dealias();
        self
    }

    /// Pointwise product of two real fields: inverse-transform both,
    /// multiply samples, forward-transform, dealias. The pair shares one
    /// packed inverse transform (`a + i b` of Hermitian fields separates
    /// into real and imaginary sample parts).
    pub fn pointwise_product(&self, other: &SpectralField) -> Result<SpectralField> {
        Ok(self.pointwise_product_raw(other)?.dealiased())
    }

    /// Pointwise product without the dealias projection (for runs that
    /// disable it explicitly).
    pub fn pointwise_product_raw(&self, other: &SpectralField) -> Result<SpectralField> {
        if !self.same_grid(other) {
            return Err(JmgtError::GridMismatch);
        }
        let mut packed = Self::like(self);
        for (p, (a, b)) in packed
            .coeffs
            .iter_mut()
            .zip(self.coeffs.iter().zip(other.coeffs.iter()))
        {
            *p = a + Complex64::new(0.0, 1.0) * b;
        }
        self.engine.inverse(&mut packed.coeffs);
        for c in packed.coeffs.iter_mut() {
            *c = Complex64::new(c.re * c.im, 0.0);
        }
        self.engine.forward(&mut packed.coeffs);
        Ok(packed)
    }

    /// Linear update `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &SpectralField) {
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
    }

    /// Worst Hermitian-symmetry defect `max |c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.points_per_dim();
        let mut worst = 0.0f64;
        for i in 0..self.coeffs.len() {
            let idx = self.grid.axis_indices(i);
            let mut conj_idx = [0usize; 3];
            for a in 0..self.grid.dim() {
                conj_idx[a] = (n - idx[a]) % n;
            }
            let j = match self.grid.dim() {
                1 => conj_idx[0],
                2 => conj_idx[0] * n + conj_idx[1],
                _ => (conj_idx[0] * n + conj_idx[1]) * n + conj_idx[2],
            };
            worst = worst.max((self.coeffs[j] - self.coeffs[i].conj()).norm());
        }
        worst
    }

    /// Enforce Hermitian symmetry in place (used by synthetic generators).
    pub fn hermitian_symmetrize(&mut self) {
        let n = self.grid.points_per_dim();
        for i in 0..self.coeffs.len() {
            let idx = self.grid.axis_indices(i);
            let mut conj_idx = [0usize; 3];
            for a in 0..self.grid.dim() {
                conj_idx[a] = (n - idx[a]) % n;
            }
            let j = match self.grid.dim() {
                1 => conj_idx[0],
                2 => conj_idx[0] * n + conj_idx[1],
                _ => (conj_idx[0] * n + conj_idx[1]) * n + conj_idx[2],
            };
            if j > i {
                let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                self.coeffs[i] = avg;
                self.coeffs[j] = avg.conj();
            } else if j == i {
                self.coeffs[i] = Complex64::new(self.coeffs[i].re, 0.0);
            }
        }
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn has_nan(&self) -> bool {
        self.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
    }
}

/// `L^p` norm of a sample array under the rectangle rule;
/// `p = 0` is interpreted as `L^inf`.
pub fn lp_norm(grid: &GridRef, samples: &[f64], p: LpExponent) -> Result<f64> {
    if samples.len() != grid.total_points() {
        return Err(JmgtError::Shape(format!(
            "sample array has {} entries, grid has {} points",
            samples.len(),
            grid.total_points()
        )));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(JmgtError::Invalid("NaN sample in lp_norm".into()));
    }
    let cell = grid.cell_volume();
    Ok(match p {
        LpExponent::Infinity => samples.iter().fold(0.0f64, |m, s| m.max(s.abs())),
        LpExponent::P(p) => {
            let mut acc = 0.0;
            for &s in samples {
                acc += s.abs().powi(p as i32);
            }
            (acc * cell).powf(1.0 / p as f64)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpExponent {
    P(u32),
    Infinity,
}

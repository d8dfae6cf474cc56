//! The first-order system unknowns `Psi = (psi, v, w, eta)` on the box,
//! together with the exact memory-integral field, and initial profiles.

use crate::field::SpectralField;
use crate::grid::GridRef;
use crate::history::{HistoryField, DEFAULT_RING_BUDGET};
use crate::params::PhysicalParams;
use crate::{JmgtError, Result};
use num_complex::Complex64;

/// Evolution state. `mem` is the memory integral `I = int g(s) eta(s) ds`
/// (before the Laplacian), which satisfies the closed law
/// `I_t = (c^2 - c_g^2) v - I / tau_k` exactly for exponential kernels and is
/// advanced stage-consistently by the integrators. `history` carries the
/// snapshot representation of `eta` for the quadrature-based norms.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub psi: SpectralField,
    pub v: SpectralField,
    pub w: SpectralField,
    pub mem: SpectralField,
    pub history: HistoryField,
    pub t: f64,
}

/// Initial data profiles.
#[derive(Debug, Clone)]
pub enum InitialProfile {
    /// `psi_j = amp * weight_j * exp(-|x - center|^2 / width^2)` for
    /// j = 0, 1, 2 (center defaults to the box middle).
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Option<[f64; 3]>,
        weights: [f64; 3],
    },
    /// Single Fourier mode `k0` with real amplitudes for psi0, psi1, psi2.
    SingleMode { mode: [i64; 3], amplitudes: [f64; 3] },
    /// Explicit coefficient arrays.
    Custom {
        psi0: SpectralField,
        psi1: SpectralField,
        psi2: SpectralField,
    },
}

/// Non-fatal observations made while building the initial state.
#[derive(Debug, Clone, Default)]
pub struct InitWarnings {
    pub messages: Vec<String>,
}

impl StateVector {
    /// Build the initial state `(psi0, psi1, psi2, eta0 = psi0)`.
    pub fn initial(
        grid: &GridRef,
        profile: &InitialProfile,
        params: &PhysicalParams,
        dt: f64,
        s_max_factor: f64,
        ring_budget: usize,
    ) -> Result<(Self, InitWarnings)> {
        let mut warnings = InitWarnings::default();
        let (psi0, psi1, psi2) = match profile {
            InitialProfile::Gaussian {
                amplitude,
                width,
                center,
                weights,
            } => {
                if !(width > &0.0) {
                    return Err(JmgtError::Invalid(format!(
                        "gaussian width must be > 0, got {width}"
                    )));
                }
                if *width > grid.box_length() / 4.0 {
                    warnings.messages.push(format!(
                        "gaussian width {} exceeds box/4 = {}; periodic wrap-around will \
                         contaminate the profile",
                        width,
                        grid.box_length() / 4.0
                    ));
                }
                let mid = grid.box_length() / 2.0;
                let c = center.unwrap_or([mid, mid, mid]);
                let l = grid.box_length();
                let samples: Vec<f64> = (0..grid.total_points())
                    .map(|i| {
                        let x = grid.coords(i);
                        let mut r2 = 0.0;
                        for a in 0..grid.dim() {
                            // nearest periodic image
                            let mut d = (x[a] - c[a]).abs() % l;
                            if d > l / 2.0 {
                                d = l - d;
                            }
                            r2 += d * d;
                        }
                        amplitude * (-r2 / (width * width)).exp()
                    })
                    .collect();
                let base = SpectralField::forward_transform(grid, &samples)?;
                let make = |wgt: f64| {
                    let mut f = base.clone();
                    f.scale(wgt);
                    f
                };
                (make(weights[0]), make(weights[1]), make(weights[2]))
            }
            InitialProfile::SingleMode { mode, amplitudes } => {
                let n = grid.points_per_dim() as i64;
                let make = |amp: f64| -> Result<SpectralField> {
                    let mut f = SpectralField::zeros(grid);
                    if amp != 0.0 {
                        let mut pos = [0usize; 3];
                        let mut neg = [0usize; 3];
                        for a in 0..grid.dim() {
                            let k = mode[a];
                            if k.abs() >= n / 2 {
                                return Err(JmgtError::Invalid(format!(
                                    "mode index {k} out of range for {n} points"
                                )));
                            }
                            pos[a] = k.rem_euclid(n) as usize;
                            neg[a] = (-k).rem_euclid(n) as usize;
                        }
                        let flat = |idx: [usize; 3]| -> usize {
                            let np = grid.points_per_dim();
                            match grid.dim() {
                                1 => idx[0],
                                2 => idx[0] * np + idx[1],
                                _ => (idx[0] * np + idx[1]) * np + idx[2],
                            }
                        };
                        // real field amp * cos(xi . x)
                        f.coeffs_mut()[flat(pos)] += Complex64::new(0.5 * amp, 0.0);
                        f.coeffs_mut()[flat(neg)] += Complex64::new(0.5 * amp, 0.0);
                    }
                    Ok(f)
                };
                (make(amplitudes[0])?, make(amplitudes[1])?, make(amplitudes[2])?)
            }
            InitialProfile::Custom { psi0, psi1, psi2 } => {
                (psi0.clone(), psi1.clone(), psi2.clone())
            }
        };

        let cg2 = params.c_g_squared();
        let mut mem = psi0.clone();
        // I(0) = int_0^inf g(s) eta(0, s) ds = (c^2 - c_g^2) psi0
        mem.scale(params.c.powi(2) - cg2);
        let history = HistoryField::new(grid, params.kernel, dt, s_max_factor, ring_budget, psi0.clone())?;
        Ok((
            Self {
                psi: psi0,
                v: psi1,
                w: psi2,
                mem,
                history,
                t: 0.0,
            },
            warnings,
        ))
    }

    /// Convenience constructor with the default history policy.
    pub fn initial_default(
        grid: &GridRef,
        profile: &InitialProfile,
        params: &PhysicalParams,
        dt: f64,
    ) -> Result<(Self, InitWarnings)> {
        Self::initial(grid, profile, params, dt, 40.0, DEFAULT_RING_BUDGET)
    }

    pub fn grid(&self) -> &GridRef {
        self.psi.grid()
    }

    /// Acoustic pressure `u = rho psi_t` when the density is known.
    pub fn pressure(&self, params: &PhysicalParams) -> Option<SpectralField> {
        params.rho.map(|rho| {
            let mut p = self.v.clone();
            p.scale(rho);
            p
        })
    }

    pub fn has_nan(&self) -> bool {
        self.psi.has_nan() || self.v.has_nan() || self.w.has_nan() || self.mem.has_nan()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::kernel::KernelSpec;

    fn params() -> PhysicalParams {
        PhysicalParams::new(0.5, 1.0, 0.1, 0.0, KernelSpec::new(0.1, 1.0, 0.5).unwrap(), false)
            .unwrap()
    }

    #[test]
    fn zero_amplitude_gaussian_is_zero_state() {
        let g = SpectralGrid::shared(2, 16, 10.0).unwrap();
        let profile = InitialProfile::Gaussian {
            amplitude: 0.0,
            width: 1.0,
            center: None,
            weights: [1.0, 0.0, 0.0],
        };
        let (s, _) = StateVector::initial_default(&g, &profile, &params(), 1e-2).unwrap();
        assert_eq!(s.psi.max_coeff_norm(), 0.0);
        assert_eq!(s.v.max_coeff_norm(), 0.0);
        assert_eq!(s.w.max_coeff_norm(), 0.0);
        assert_eq!(s.mem.max_coeff_norm(), 0.0);
    }

    #[test]
    fn single_mode_populates_only_psi() {
        let g = SpectralGrid::shared(3, 8, 5.0).unwrap();
        let profile = InitialProfile::SingleMode {
            mode: [1, 0, 0],
            amplitudes: [2.0, 0.0, 0.0],
        };
        let (s, _) = StateVector::initial_default(&g, &profile, &params(), 1e-2).unwrap();
        assert!(s.psi.max_coeff_norm() > 0.9);
        assert_eq!(s.v.max_coeff_norm(), 0.0);
        assert_eq!(s.w.max_coeff_norm(), 0.0);
        // eta(t=0) = psi0 on the s > t branch: I(0) = (c^2 - c_g^2) psi0
        let expect = 0.05; // mass of the kernel
        let mut d = s.mem.clone();
        d.axpy(-expect, &s.psi);
        assert!(d.max_coeff_norm() < 1e-15);
        assert!(s.psi.hermitian_defect() < 1e-15);
    }

    #[test]
    fn gaussian_l2_norm_matches_analytic_value() {
        // || a exp(-|x|^2 / w^2) ||_{L2}^2 = a^2 (pi w^2 / 2)^{n/2}
        let g = SpectralGrid::shared(3, 64, 40.0).unwrap();
        let a = 1e-3;
        let w = 1.0;
        let profile = InitialProfile::Gaussian {
            amplitude: a,
            width: w,
            center: None,
            weights: [1.0, 0.0, 0.0],
        };
        let (s, warn) = StateVector::initial_default(&g, &profile, &params(), 1e-2).unwrap();
        assert!(warn.messages.is_empty());
        let expect = a * (std::f64::consts::PI * w * w / 2.0).powf(3.0 / 4.0);
        let got = s.psi.sobolev_seminorm(0);
        assert!(
            (got - expect).abs() / expect < 1e-4,
            "got {got} expect {expect}"
        );
    }

    #[test]
    fn pressure_is_rho_times_v() {
        let g = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        let profile = InitialProfile::SingleMode {
            mode: [1, 0, 0],
            amplitudes: [0.0, 2.0, 0.0],
        };
        let p = params().with_rho(1000.0);
        let (s, _) = StateVector::initial_default(&g, &profile, &p, 1e-2).unwrap();
        let u = s.pressure(&p).unwrap();
        let mut d = u.clone();
        d.axpy(-1000.0, &s.v);
        assert!(d.max_coeff_norm() < 1e-12);
        let without = params();
        assert!(s.pressure(&without).is_none());
    }

    #[test]
    fn wide_profile_warns() {
        let g = SpectralGrid::shared(1, 16, 8.0).unwrap();
        let profile = InitialProfile::Gaussian {
            amplitude: 1.0,
            width: 3.0,
            center: None,
            weights: [1.0, 0.0, 0.0],
        };
        let (_, warn) = StateVector::initial_default(&g, &profile, &params(), 1e-2).unwrap();
        assert!(!warn.messages.is_empty());
    }
}

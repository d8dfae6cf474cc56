//! The relaxation kernel `g(s) = m c^2 exp(-s / tau_k)` and validation of
//! the admissibility assumptions (G1)-(G4).

use crate::{JmgtError, Result};

/// Exponential relaxation kernel parameters.
///
/// `zeta` is the constant of the decay inequality `g'(s) <= -zeta g(s)`.
/// For this family `g' = -(1/tau_k) g`, so the inequality holds exactly for
/// every `zeta <= 1/tau_k`; the default is `1/tau_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Dimensionless relaxation parameter, >= 0.
    pub m: f64,
    /// Sound speed (length/time).
    pub c: f64,
    /// Kernel decay time, > 0 (time).
    pub tau_k: f64,
    /// Decay-inequality constant (1/time).
    pub zeta: f64,
}

impl KernelSpec {
    pub fn new(m: f64, c: f64, tau_k: f64) -> Result<Self> {
        let spec = Self {
            m,
            c,
            tau_k,
            zeta: 1.0 / tau_k,
        };
        spec.check_basic()?;
        Ok(spec)
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    /// Memoryless kernel (`g == 0`), the Westervelt-regime limit.
    pub fn zero(c: f64) -> Self {
        Self {
            m: 0.0,
            c,
            tau_k: 1.0,
            zeta: 1.0,
        }
    }

    fn check_basic(&self) -> Result<()> {
        if !(self.m >= 0.0) {
            return Err(JmgtError::Kernel(format!("m must be >= 0, got {}", self.m)));
        }
        if !(self.c > 0.0) {
            return Err(JmgtError::Kernel(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.tau_k > 0.0) {
            return Err(JmgtError::Kernel(format!(
                "tau_k must be > 0, got {}",
                self.tau_k
            )));
        }
        Ok(())
    }

    /// `g(s) = m c^2 exp(-s / tau_k)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(JmgtError::Invalid(format!("kernel argument s = {s} < 0")));
        }
        Ok(self.m * self.c * self.c * (-s / self.tau_k).exp())
    }

    /// `g(s)` without the argument check (internal hot paths with s >= 0).
    pub fn eval_unchecked(&self, s: f64) -> f64 {
        self.m * self.c * self.c * (-s / self.tau_k).exp()
    }

    /// `g'(s)`.
    pub fn eval_derivative(&self, s: f64) -> f64 {
        -self.m * self.c * self.c * (-s / self.tau_k).exp() / self.tau_k
    }

    /// Total mass `int_0^inf g = m c^2 tau_k`.
    pub fn mass(&self) -> f64 {
        self.m * self.c * self.c * self.tau_k
    }

    /// Partial tail mass `int_a^inf g = mass * exp(-a / tau_k)`.
    pub fn tail_mass(&self, a: f64) -> f64 {
        self.mass() * (-a / self.tau_k).exp()
    }

    /// Modified speed of sound squared, `c_g^2 = c^2 - int_0^inf g`.
    pub fn c_g_squared(&self) -> CgSquared {
        let value = self.c * self.c - self.mass();
        CgSquared {
            value,
            admissible: value > 0.0,
        }
    }

    /// True when the kernel is identically zero.
    pub fn is_zero(&self) -> bool {
        self.m == 0.0
    }

    /// Validate assumptions (G1)-(G4) both symbolically (exponential family)
    /// and numerically on a dense s-grid; failures are report entries.
    pub fn validate_assumptions(&self) -> AssumptionReport {
        let mut report = AssumptionReport::default();
        if self.check_basic().is_err() {
            report.g1 = false;
            report
                .notes
                .push("basic parameter ranges violated (m >= 0, c > 0, tau_k > 0)".into());
            return report;
        }

        // (G1): g in W^{1,1}(R+) with g' almost continuous. For the
        // exponential family both g and g' are smooth with finite mass.
        report.g1 = self.mass().is_finite() && self.eval_derivative(0.0).is_finite();

        // (G2): g >= 0 and c_g^2 > 0.
        let cg2 = self.c_g_squared();
        report.g2 = cg2.admissible;
        if !cg2.admissible {
            report.notes.push(format!(
                "c_g^2 = {} <= 0: kernel mass m*c^2*tau_k exceeds c^2 (requires m*tau_k < 1)",
                cg2.value
            ));
        }

        // (G3) and (G4) on a dense s-grid over many decay times.
        let n = 10_000;
        let s_max = 40.0 * self.tau_k;
        let mut g3 = true;
        let mut g4 = true;
        let mut g_nonneg = true;
        for i in 0..=n {
            let s = s_max * i as f64 / n as f64;
            let g = self.eval(s).unwrap();
            let gp = self.eval_derivative(s);
            let gpp = g / (self.tau_k * self.tau_k);
            if g < 0.0 {
                g_nonneg = false;
            }
            // strictify by rounding slack only
            if gp > -self.zeta * g + 1e-300 + 1e-14 * g.abs() {
                g3 = false;
            }
            if gpp < -1e-300 {
                g4 = false;
            }
        }
        report.g2 &= g_nonneg;
        report.g3 = g3;
        report.g4 = g4;
        if !g3 {
            report.notes.push(format!(
                "g' <= -zeta g fails: zeta = {} exceeds 1/tau_k = {}",
                self.zeta,
                1.0 / self.tau_k
            ));
        }
        if (self.zeta - 1.0 / self.tau_k).abs() > 1e-12 && g3 {
            report.notes.push(format!(
                "zeta = {} differs from the sharp exponential value 1/tau_k = {}",
                self.zeta,
                1.0 / self.tau_k
            ));
        }
        report
    }
}

/// `c_g^2` together with its (G2) admissibility flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSquared {
    pub value: f64,
    pub admissible: bool,
}

/// Pass/fail record of the kernel assumptions plus the subcritical chain
/// when physical parameters are attached (see `PhysicalParams::validate`).
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub g1: bool,
    pub g2: bool,
    pub g3: bool,
    pub g4: bool,
    /// `b > tau c^2` (filled by the parameter-level validation).
    pub subcritical: Option<bool>,
    /// `tau c^2 > tau c_g^2`, i.e. the kernel carries mass.
    pub memory_positive: Option<bool>,
    pub notes: Vec<String>,
}

impl Default for AssumptionReport {
    fn default() -> Self {
        Self {
            g1: true,
            g2: true,
            g3: true,
            g4: true,
            subcritical: None,
            memory_positive: None,
            notes: Vec::new(),
        }
    }
}

impl AssumptionReport {
    pub fn all_kernel_pass(&self) -> bool {
        self.g1 && self.g2 && self.g3 && self.g4
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_closed_forms() {
        let k = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
        assert!((k.eval(0.0).unwrap() - 0.1).abs() < 1e-15);
        // monotone decay to zero
        let mut prev = k.eval(0.0).unwrap();
        for i in 1..50 {
            let v = k.eval(i as f64).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        assert!(k.eval(100.0).unwrap() < 1e-80);

        let k2 = KernelSpec::new(0.1, 2.0, 1.0).unwrap();
        assert!((k2.eval(1.0).unwrap() - 0.4 * (-1.0f64).exp()).abs() < 1e-15);

        assert!(k.eval(-0.1).is_err());
    }

    #[test]
    fn mass_closed_form_and_quadrature_oracle() {
        let k = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
        assert!((k.mass() - 0.05).abs() < 1e-15);
        assert_eq!(KernelSpec::zero(1.0).mass(), 0.0);

        // composite Simpson over [0, 40 tau_k]
        let n = 40_000;
        let h = 40.0 * k.tau_k / n as f64;
        let mut acc = k.eval(0.0).unwrap() + k.eval(40.0 * k.tau_k).unwrap();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * k.eval(i as f64 * h).unwrap();
        }
        let quad = acc * h / 3.0;
        assert!((quad - k.mass()).abs() < 1e-10);
    }

    #[test]
    fn c_g_squared_cases() {
        let k = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
        let cg = k.c_g_squared();
        assert!(cg.admissible);
        assert!((cg.value - 0.95).abs() < 1e-15);

        let z = KernelSpec::zero(2.0);
        assert!((z.c_g_squared().value - 4.0).abs() < 1e-15);

        // m * tau_k = 1 makes c_g^2 = 0: flagged non-admissible
        let boundary = KernelSpec::new(2.0, 1.0, 0.5).unwrap();
        assert!(!boundary.c_g_squared().admissible);
        assert!(boundary.c_g_squared().value.abs() < 1e-15);
    }

    #[test]
    fn assumptions_pass_for_default_zeta() {
        let k = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
        let r = k.validate_assumptions();
        assert!(r.all_kernel_pass(), "{:?}", r);
    }

    #[test]
    fn g3_fails_for_too_large_zeta() {
        let k = KernelSpec::new(0.1, 1.0, 0.5).unwrap().with_zeta(4.0);
        let r = k.validate_assumptions();
        assert!(r.g1 && r.g2 && r.g4);
        assert!(!r.g3);
    }

    #[test]
    fn g2_fails_for_heavy_kernel() {
        // m * tau_k >= 1 violates c_g^2 > 0
        let k = KernelSpec::new(3.0, 1.0, 0.5).unwrap();
        let r = k.validate_assumptions();
        assert!(!r.g2);
    }
}

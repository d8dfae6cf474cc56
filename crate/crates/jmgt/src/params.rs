//! Physical parameters of the JMGT system and the subcritical classification.

use crate::kernel::{AssumptionReport, KernelSpec};
use crate::{JmgtError, Result};

/// Coefficients of the evolution system. `b = delta + tau c^2` holds by
/// construction; the subcritical chain `b > tau c^2 > tau c_g^2` is enforced
/// at construction unless the explicit non-subcritical flag is set (needed to
/// run the conserved case `b = tau c^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Thermal relaxation time, > 0.
    pub tau: f64,
    /// Friction coefficient (1 after the standard rescaling; kept explicit).
    pub alpha: f64,
    /// Sound speed.
    pub c: f64,
    /// Sound diffusivity, >= 0.
    pub delta: f64,
    /// `delta + tau c^2`.
    pub b: f64,
    /// Nonlinearity coefficient `k = (B/(2A) + 1) / c^2`, or user-set.
    pub k: f64,
    /// Relaxation kernel.
    pub kernel: KernelSpec,
    /// Mass density (for the derived pressure `u = rho psi_t`).
    pub rho: Option<f64>,
}

/// Regime classification produced by [`PhysicalParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamClass {
    Subcritical,
    /// `b = tau c^2`; with `g = 0` and `k = 0` the first-order energy is
    /// conserved.
    Critical,
    NonAdmissible,
}

/// Validation outcome: classification plus the kernel assumption report with
/// the subcritical chain filled in.
#[derive(Debug, Clone)]
pub struct ParamReport {
    pub class: ParamClass,
    pub c_g_squared: f64,
    pub assumptions: AssumptionReport,
}

impl PhysicalParams {
    /// Construct with validation. Rejects non-admissible parameters; rejects
    /// the critical case too unless `allow_critical` is set.
    pub fn new(
        tau: f64,
        c: f64,
        delta: f64,
        k: f64,
        kernel: KernelSpec,
        allow_critical: bool,
    ) -> Result<Self> {
        let params = Self {
            tau,
            alpha: 1.0,
            c,
            delta,
            b: delta + tau * c * c,
            k,
            kernel,
            rho: None,
        };
        let report = params.validate();
        match report.class {
            ParamClass::Subcritical => Ok(params),
            ParamClass::Critical if allow_critical => Ok(params),
            ParamClass::Critical => Err(JmgtError::Params(
                "critical parameters (b = tau c^2, delta = 0); pass the explicit \
                 non-subcritical flag to run the conserved case"
                    .into(),
            )),
            ParamClass::NonAdmissible => Err(JmgtError::Params(format!(
                "non-admissible parameters: {:?}",
                report.assumptions.notes
            ))),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    /// Nonlinearity coefficient from the parameter of nonlinearity B/A.
    pub fn k_from_b_over_a(c: f64, b_over_a: f64) -> f64 {
        (b_over_a / 2.0 + 1.0) / (c * c)
    }

    /// Modified sound speed squared `c_g^2 = c^2 - int g`.
    pub fn c_g_squared(&self) -> f64 {
        self.kernel.c_g_squared().value
    }

    /// Classify: subcritical `b > tau c^2 (> tau c_g^2)`, critical
    /// `b = tau c^2`, or non-admissible.
    pub fn validate(&self) -> ParamReport {
        let mut assumptions = self.kernel.validate_assumptions();
        let cg2 = self.c_g_squared();
        let tau_c2 = self.tau * self.c * self.c;
        let subcritical = self.b > tau_c2 + 1e-15 * tau_c2.abs();
        let critical = (self.b - tau_c2).abs() <= 1e-15 * tau_c2.abs().max(1.0);
        assumptions.subcritical = Some(subcritical);
        assumptions.memory_positive = Some(cg2 < self.c * self.c);

        let mut class = if subcritical {
            ParamClass::Subcritical
        } else if critical {
            ParamClass::Critical
        } else {
            ParamClass::NonAdmissible
        };

        if !(self.tau > 0.0) || !(self.c > 0.0) {
            class = ParamClass::NonAdmissible;
            assumptions.notes.push("tau and c must be positive".into());
        }
        if self.delta < 0.0 {
            // b < tau c^2: the medium is not thermoviscous
            class = ParamClass::NonAdmissible;
            assumptions
                .notes
                .push(format!("delta = {} < 0: sound diffusivity must be >= 0", self.delta));
        }
        if !assumptions.all_kernel_pass() {
            class = ParamClass::NonAdmissible;
        }
        ParamReport {
            class,
            c_g_squared: cg2,
            assumptions,
        }
    }

    /// True when the whole system is linear and conservative
    /// (`g = 0`, `b = tau c^2`, `k = 0`).
    pub fn is_conserved_case(&self) -> bool {
        self.kernel.is_zero()
            && self.k == 0.0
            && (self.b - self.tau * self.c * self.c).abs() < 1e-15
    }
}

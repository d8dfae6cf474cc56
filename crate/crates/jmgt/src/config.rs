//! Run configuration: sectioned `key = value` text format, fully validated
//! (unknown sections or keys are rejected so typos never pass silently).

use crate::kernel::KernelSpec;
use crate::params::{ParamClass, PhysicalParams};
use crate::solver::Scheme;
use crate::{JmgtError, Result};
use std::collections::BTreeMap;

/// Experiment kinds dispatched by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Symbol,
    VerifyEnergy,
    ScanSmallness,
    Convergence,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Self::Simulate,
            "symbol" => Self::Symbol,
            "verify-energy" => Self::VerifyEnergy,
            "scan-smallness" => Self::ScanSmallness,
            "convergence" => Self::Convergence,
            other => {
                return Err(JmgtError::Config(format!(
                    "unknown experiment kind '{other}' (expected simulate, symbol, \
                     verify-energy, scan-smallness or convergence)"
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Symbol => "symbol",
            Self::VerifyEnergy => "verify-energy",
            Self::ScanSmallness => "scan-smallness",
            Self::Convergence => "convergence",
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunSpec {
    // [physics]
    pub tau: f64,
    pub c: f64,
    pub delta: f64,
    pub m: f64,
    pub tau_k: f64,
    pub zeta: Option<f64>,
    pub k: f64,
    pub alpha: f64,
    pub rho: Option<f64>,
    pub allow_critical: bool,
    // [grid]
    pub dim: usize,
    pub points: usize,
    pub box_length: f64,
    // [time]
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    // [history]
    pub s_max_factor: f64,
    pub interpolation: String,
    // [experiment]
    pub kind: ExperimentKind,
    pub profile: String,
    pub amplitude: f64,
    pub width: f64,
    pub mode: [i64; 3],
    pub weights: [f64; 3],
    pub seed: u64,
    pub amp_min: f64,
    pub amp_max: f64,
    pub ladder_factor: f64,
    pub bound_factor: f64,
    pub sym_dim: u32,
    pub sym_modes: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub outputs: usize,
    // [output]
    pub out_dir: String,
    pub stride: usize,
    pub svg: bool,
    pub checkpoint: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            tau: 0.5,
            c: 1.0,
            delta: 0.1,
            m: 0.1,
            tau_k: 0.5,
            zeta: None,
            k: 0.0,
            alpha: 1.0,
            rho: None,
            allow_critical: false,
            dim: 3,
            points: 32,
            box_length: 40.0,
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::Rk4,
            dealias: true,
            s_max_factor: 40.0,
            interpolation: "linear".into(),
            kind: ExperimentKind::Simulate,
            profile: "gaussian".into(),
            amplitude: 1e-3,
            width: 1.0,
            mode: [1, 0, 0],
            weights: [1.0, 1.0, 0.0],
            seed: 1,
            amp_min: 1e-3,
            amp_max: 8.0,
            ladder_factor: 2.0,
            bound_factor: 2.0,
            sym_dim: 3,
            sym_modes: 2048,
            xi_min: 1e-3,
            xi_max: 1e2,
            window_lo: 50.0,
            window_hi: 1000.0,
            outputs: 160,
            out_dir: "out".into(),
            stride: 10,
            svg: true,
            checkpoint: false,
        }
    }
}

impl RunSpec {
    /// Parse the sectioned key = value format; every key must be known.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut kind_set = false;
        let mut section = String::new();
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err_at(lineno, "unclosed section header"))?
                    .trim();
                match name {
                    "physics" | "grid" | "time" | "history" | "experiment" | "output" => {
                        section = name.to_string();
                    }
                    other => {
                        return Err(err_at(lineno, &format!("unknown section [{other}]")));
                    }
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err_at(lineno, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(err_at(lineno, "key before any [section] header"));
            }
            let qualified = format!("{section}.{key}");
            if seen.insert(qualified.clone(), ()).is_some() {
                return Err(err_at(lineno, &format!("duplicate key {qualified}")));
            }
            spec.apply(&section, key, value, lineno, &mut kind_set)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn apply(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        lineno: usize,
        kind_set: &mut bool,
    ) -> Result<()> {
        let fl = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| err_at(lineno, &format!("expected a number, got '{v}'")))
        };
        let int = |v: &str| -> Result<i64> {
            v.parse::<i64>()
                .map_err(|_| err_at(lineno, &format!("expected an integer, got '{v}'")))
        };
        let boolean = |v: &str| -> Result<bool> {
            match v {
                "true" | "on" | "yes" | "1" => Ok(true),
                "false" | "off" | "no" | "0" => Ok(false),
                _ => Err(err_at(lineno, &format!("expected a boolean, got '{v}'"))),
            }
        };
        match (section, key) {
            ("physics", "tau") => self.tau = fl(value)?,
            ("physics", "c") => self.c = fl(value)?,
            ("physics", "delta") => self.delta = fl(value)?,
            ("physics", "m") => self.m = fl(value)?,
            ("physics", "tau_k") => self.tau_k = fl(value)?,
            ("physics", "zeta") => self.zeta = Some(fl(value)?),
            ("physics", "k") => self.k = fl(value)?,
            ("physics", "b_over_a") => {
                self.k = PhysicalParams::k_from_b_over_a(self.c, fl(value)?)
            }
            ("physics", "alpha") => self.alpha = fl(value)?,
            ("physics", "rho") => self.rho = Some(fl(value)?),
            ("physics", "allow_critical") => self.allow_critical = boolean(value)?,
            ("grid", "dim") => self.dim = int(value)? as usize,
            ("grid", "points") => self.points = int(value)? as usize,
            ("grid", "box_length") => self.box_length = fl(value)?,
            ("time", "dt") => self.dt = fl(value)?,
            ("time", "t_end") => self.t_end = fl(value)?,
            ("time", "scheme") => {
                self.scheme = match value {
                    "rk4" => Scheme::Rk4,
                    "etd_imex" => Scheme::EtdImex,
                    other => {
                        return Err(err_at(
                            lineno,
                            &format!("unknown scheme '{other}' (rk4 or etd_imex)"),
                        ))
                    }
                }
            }
            ("time", "dealias") => self.dealias = boolean(value)?,
            ("history", "s_max_factor") => self.s_max_factor = fl(value)?,
            ("history", "interpolation") => {
                if value != "linear" {
                    return Err(err_at(
                        lineno,
                        &format!("unknown interpolation '{value}' (only linear)"),
                    ));
                }
                self.interpolation = value.to_string();
            }
            ("experiment", "kind") => {
                self.kind = ExperimentKind::parse(value)?;
                *kind_set = true;
            }
            ("experiment", "profile") => {
                match value {
                    "gaussian" | "single_mode" => {}
                    other => {
                        return Err(err_at(
                            lineno,
                            &format!("unknown profile '{other}' (gaussian or single_mode)"),
                        ))
                    }
                }
                self.profile = value.to_string();
            }
            ("experiment", "amplitude") => self.amplitude = fl(value)?,
            ("experiment", "width") => self.width = fl(value)?,
            ("experiment", "mode") => {
                let parts: Vec<i64> = value
                    .split_whitespace()
                    .map(&int)
                    .collect::<Result<_>>()?;
                if parts.is_empty() || parts.len() > 3 {
                    return Err(err_at(lineno, "mode needs 1..3 integer components"));
                }
                let mut m = [0i64; 3];
                m[..parts.len()].copy_from_slice(&parts);
                self.mode = m;
            }
            ("experiment", "weights") => {
                let parts: Vec<f64> = value
                    .split_whitespace()
                    .map(fl)
                    .collect::<Result<_>>()?;
                if parts.len() != 3 {
                    return Err(err_at(lineno, "weights needs exactly 3 numbers"));
                }
                self.weights = [parts[0], parts[1], parts[2]];
            }
            ("experiment", "seed") => self.seed = int(value)? as u64,
            ("experiment", "amp_min") => self.amp_min = fl(value)?,
            ("experiment", "amp_max") => self.amp_max = fl(value)?,
            ("experiment", "ladder_factor") => self.ladder_factor = fl(value)?,
            ("experiment", "bound_factor") => self.bound_factor = fl(value)?,
            ("experiment", "sym_dim") => self.sym_dim = int(value)? as u32,
            ("experiment", "sym_modes") => self.sym_modes = int(value)? as usize,
            ("experiment", "xi_min") => self.xi_min = fl(value)?,
            ("experiment", "xi_max") => self.xi_max = fl(value)?,
            ("experiment", "window_lo") => self.window_lo = fl(value)?,
            ("experiment", "window_hi") => self.window_hi = fl(value)?,
            ("experiment", "outputs") => self.outputs = int(value)? as usize,
            ("output", "dir") => self.out_dir = value.to_string(),
            ("output", "stride") => self.stride = int(value)?.max(1) as usize,
            ("output", "svg") => self.svg = boolean(value)?,
            ("output", "checkpoint") => self.checkpoint = boolean(value)?,
            (s, k) => {
                return Err(err_at(lineno, &format!("unknown key '{k}' in section [{s}]")));
            }
        }
        Ok(())
    }

    /// Cross-field validation, including physics admissibility.
    pub fn validate(&self) -> Result<()> {
        let params = self.physical_params()?;
        let report = params.validate();
        match report.class {
            ParamClass::Subcritical => {}
            ParamClass::Critical if self.allow_critical => {}
            ParamClass::Critical => {
                return Err(JmgtError::Config(
                    "critical physics (b = tau c^2); set physics.allow_critical = true \
                     to run the conserved case"
                        .into(),
                ))
            }
            ParamClass::NonAdmissible => {
                return Err(JmgtError::Config(format!(
                    "non-admissible physics: subcritical chain requires b > tau c^2 > tau c_g^2 \
                     (b = {}, tau c^2 = {}, tau c_g^2 = {}); notes: {:?}",
                    params.b,
                    params.tau * params.c * params.c,
                    params.tau * report.c_g_squared,
                    report.assumptions.notes
                )))
            }
        }
        if self.dim < 1 || self.dim > 3 {
            return Err(JmgtError::Config(format!("grid.dim must be 1..3, got {}", self.dim)));
        }
        if self.points < 8 || self.points % 2 != 0 {
            return Err(JmgtError::Config(format!(
                "grid.points must be even and >= 8, got {}",
                self.points
            )));
        }
        if !(self.box_length > 0.0) {
            return Err(JmgtError::Config("grid.box_length must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end >= self.dt) {
            return Err(JmgtError::Config(format!(
                "time.dt must be > 0 and t_end >= dt (dt = {}, t_end = {})",
                self.dt, self.t_end
            )));
        }
        if !(self.s_max_factor > 0.0) {
            return Err(JmgtError::Config("history.s_max_factor must be positive".into()));
        }
        if !(self.amp_min >= 0.0) || !(self.amp_max >= self.amp_min) || !(self.ladder_factor > 1.0)
        {
            return Err(JmgtError::Config(
                "scan needs amp_min >= 0, amp_max >= amp_min, ladder_factor > 1".into(),
            ));
        }
        if self.sym_dim < 1 || self.sym_dim > 3 {
            return Err(JmgtError::Config("experiment.sym_dim must be 1..3".into()));
        }
        if self.sym_modes < 8 || !(self.xi_min > 0.0) || !(self.xi_max > self.xi_min) {
            return Err(JmgtError::Config(
                "symbol grid needs sym_modes >= 8 and 0 < xi_min < xi_max".into(),
            ));
        }
        if !(self.window_hi > self.window_lo) || !(self.window_lo >= 0.0) {
            return Err(JmgtError::Config("fit window must satisfy 0 <= lo < hi".into()));
        }
        if self.outputs < 8 {
            return Err(JmgtError::Config("experiment.outputs must be >= 8".into()));
        }
        Ok(())
    }

    /// Kernel + physical parameters assembled from the physics section.
    pub fn physical_params(&self) -> Result<PhysicalParams> {
        let mut kernel = KernelSpec::new(self.m, self.c, self.tau_k)?;
        if let Some(z) = self.zeta {
            kernel = kernel.with_zeta(z);
        }
        let mut p = PhysicalParams::new(
            self.tau,
            self.c,
            self.delta,
            self.k,
            kernel,
            self.allow_critical,
        )?
        .with_alpha(self.alpha);
        if let Some(rho) = self.rho {
            p = p.with_rho(rho);
        }
        Ok(p)
    }

    /// Canonical text form: `parse(dump(x))` equals `x`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "[physics]");
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "c = {}", self.c);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "tau_k = {}", self.tau_k);
        if let Some(z) = self.zeta {
            let _ = writeln!(s, "zeta = {z}");
        }
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        if let Some(r) = self.rho {
            let _ = writeln!(s, "rho = {r}");
        }
        let _ = writeln!(s, "allow_critical = {}", self.allow_critical);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "points = {}", self.points);
        let _ = writeln!(s, "box_length = {}", self.box_length);
        let _ = writeln!(s, "\n[time]");
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(
            s,
            "scheme = {}",
            match self.scheme {
                Scheme::Rk4 => "rk4",
                Scheme::EtdImex => "etd_imex",
            }
        );
        let _ = writeln!(s, "dealias = {}", self.dealias);
        let _ = writeln!(s, "\n[history]");
        let _ = writeln!(s, "s_max_factor = {}", self.s_max_factor);
        let _ = writeln!(s, "interpolation = {}", self.interpolation);
        let _ = writeln!(s, "\n[experiment]");
        let _ = writeln!(s, "kind = {}", self.kind.as_str());
        let _ = writeln!(s, "profile = {}", self.profile);
        let _ = writeln!(s, "amplitude = {}", self.amplitude);
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "mode = {} {} {}", self.mode[0], self.mode[1], self.mode[2]);
        let _ = writeln!(
            s,
            "weights = {} {} {}",
            self.weights[0], self.weights[1], self.weights[2]
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "amp_min = {}", self.amp_min);
        let _ = writeln!(s, "amp_max = {}", self.amp_max);
        let _ = writeln!(s, "ladder_factor = {}", self.ladder_factor);
        let _ = writeln!(s, "bound_factor = {}", self.bound_factor);
        let _ = writeln!(s, "sym_dim = {}", self.sym_dim);
        let _ = writeln!(s, "sym_modes = {}", self.sym_modes);
        let _ = writeln!(s, "xi_min = {}", self.xi_min);
        let _ = writeln!(s, "xi_max = {}", self.xi_max);
        let _ = writeln!(s, "window_lo = {}", self.window_lo);
        let _ = writeln!(s, "window_hi = {}", self.window_hi);
        let _ = writeln!(s, "outputs = {}", self.outputs);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.out_dir);
        let _ = writeln!(s, "stride = {}", self.stride);
        let _ = writeln!(s, "svg = {}", self.svg);
        let _ = writeln!(s, "checkpoint = {}", self.checkpoint);
        s
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

fn err_at(lineno: usize, msg: &str) -> JmgtError {
    JmgtError::Config(format!("line {}: {msg}", lineno + 1))
}

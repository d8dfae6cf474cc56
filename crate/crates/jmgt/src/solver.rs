//! Time integrators for the first-order system
//! `Psi_t = A Psi + F(Psi)` on the periodic box.
//!
//! The memory integral field `I` obeys the exact closed law
//! `I_t = (c^2 - c_g^2) v - I / tau_k` (derived from `eta_t = v - eta_s`
//! with `eta(s=0) = 0`), so both integrators advance it as ordinary state
//! and the memory term enters the `w` equation as `Lap(I)` with no
//! quadrature in the hot loop.

use crate::energy::{self, EnergyReport, LyapunovParams, TrajectoryAccumulator};
use crate::expm::{expm, phi1, Mat};
use crate::field::SpectralField;
use crate::params::PhysicalParams;
use crate::state::StateVector;
use crate::{JmgtError, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    EtdImex,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub monitor_stride: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(JmgtError::Invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(JmgtError::Invalid(format!(
                "t_end = {} must be >= dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }
}

/// Time-derivative bundle returned by [`rhs`].
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub dpsi: SpectralField,
    pub dv: SpectralField,
    pub dw: SpectralField,
    pub dmem: SpectralField,
}

#[derive(Clone)]
struct Fields {
    psi: SpectralField,
    v: SpectralField,
    w: SpectralField,
    mem: SpectralField,
}

impl Fields {
    fn from_state(s: &StateVector) -> Self {
        Self {
            psi: s.psi.clone(),
            v: s.v.clone(),
            w: s.w.clone(),
            mem: s.mem.clone(),
        }
    }

    fn axpy(&mut self, scale: f64, d: &Derivatives) {
        self.psi.axpy(scale, &d.dpsi);
        self.v.axpy(scale, &d.dv);
        self.w.axpy(scale, &d.dw);
        self.mem.axpy(scale, &d.dmem);
    }
}

/// Stage-level nonlinear source: the self-consistent product `2k v w` or
/// none (Picard linear solves run their own frozen-source loop).
pub enum StageSource {
    SelfProduct,
    None,
}

/// Right-hand side of the evolution system at one state.
///
/// `dw = (1/tau) (-alpha w + c_g^2 Lap psi + b Lap v + Lap I + 2 k P(v w))`
/// with `P` the dealias projector; `dmem = (c^2 - c_g^2) v - I / tau_k`.
pub fn rhs(state: &StateVector, params: &PhysicalParams, dealias: bool) -> Result<Derivatives> {
    let f = Fields::from_state(state);
    rhs_fields(&f, params, dealias, None)
}

fn rhs_fields(
    f: &Fields,
    params: &PhysicalParams,
    dealias: bool,
    frozen_product: Option<&SpectralField>,
) -> Result<Derivatives> {
    let cg2 = params.c_g_squared();
    let inv_tau = 1.0 / params.tau;

    let mut dw = f.psi.laplacian();
    dw.scale(cg2);
    let lap_v = f.v.laplacian();
    dw.axpy(params.b, &lap_v);
    dw.axpy(-params.alpha, &f.w);
    if !params.kernel.is_zero() {
        dw.axpy(1.0, &f.mem.laplacian());
    }
    if params.k != 0.0 {
        let product = match frozen_product {
            Some(p) => p.clone(),
            None => {
                let mut p = f.v.pointwise_product_raw(&f.w)?;
                if dealias {
                    p.dealias();
                }
                p
            }
        };
        dw.axpy(2.0 * params.k, &product);
    } else if let Some(p) = frozen_product {
        // linear solves carry the frozen source even when k enters there
        dw.axpy(1.0, p);
    }
    dw.scale(inv_tau);

    let mut dmem = f.v.clone();
    dmem.scale(params.c * params.c - cg2);
    dmem.axpy(-1.0 / params.kernel.tau_k, &f.mem);

    Ok(Derivatives {
        dpsi: f.v.clone(),
        dv: f.w.clone(),
        dw,
        dmem,
    })
}

/// One classical RK4 step; records the dealiased stage products when asked.
fn rk4_step(
    state: &mut StateVector,
    params: &PhysicalParams,
    dt: f64,
    dealias: bool,
    source: &StageSource,
    recorded: Option<&mut Vec<[SpectralField; 4]>>,
) -> Result<()> {
    let y0 = Fields::from_state(state);
    let mut record: [Option<SpectralField>; 4] = [None, None, None, None];

    let mut stage_product = |stage: usize, f: &Fields| -> Result<Option<SpectralField>> {
        match source {
            StageSource::SelfProduct => {
                if params.k == 0.0 {
                    return Ok(None);
                }
                let mut p = f.v.pointwise_product_raw(&f.w)?;
                if dealias {
                    p.dealias();
                }
                record[stage] = Some(p.clone());
                Ok(Some(p))
            }
            StageSource::None => Ok(None),
        }
    };

    let eval = |f: &Fields, product: Option<&SpectralField>| -> Result<Derivatives> {
        rhs_fields(f, params, dealias, product)
    };

    let p1 = stage_product(0, &y0)?;
    let k1 = eval(&y0, p1.as_ref())?;
    let mut y = y0.clone();
    y.axpy(0.5 * dt, &k1);
    let p2 = stage_product(1, &y)?;
    let k2 = eval(&y, p2.as_ref())?;
    let mut y = y0.clone();
    y.axpy(0.5 * dt, &k2);
    let p3 = stage_product(2, &y)?;
    let k3 = eval(&y, p3.as_ref())?;
    let mut y = y0.clone();
    y.axpy(dt, &k3);
    let p4 = stage_product(3, &y)?;
    let k4 = eval(&y, p4.as_ref())?;

    let mut next = y0;
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);

    state.psi = next.psi;
    state.v = next.v;
    state.w = next.w;
    state.mem = next.mem;
    state.t += dt;
    state.history.push_snapshot(&state.psi)?;

    if let Some(out) = recorded {
        if matches!(source, StageSource::SelfProduct) && params.k != 0.0 {
            out.push([
                record[0].take().unwrap(),
                record[1].take().unwrap(),
                record[2].take().unwrap(),
                record[3].take().unwrap(),
            ]);
        } else {
            let zero = SpectralField::zeros(state.grid());
            out.push([zero.clone(), zero.clone(), zero.clone(), zero]);
        }
    }
    Ok(())
}

/// Params with k = 0 (linear operator part) for frozen-source solves.
fn linearized(params: &PhysicalParams) -> PhysicalParams {
    let mut p = *params;
    p.k = 0.0;
    p
}

/// The per-mode system matrix of the linear block (rows psi, v, w, I).
fn mode_matrix(mu: f64, params: &PhysicalParams) -> Mat {
    let cg2 = params.c_g_squared();
    let c2 = params.c * params.c;
    let tau = params.tau;
    Mat::from_rows(&[
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[
            -cg2 * mu / tau,
            -params.b * mu / tau,
            -params.alpha / tau,
            -mu / tau,
        ],
        &[0.0, c2 - cg2, 0.0, -1.0 / params.kernel.tau_k],
    ])
}

/// Build per-mode tables deduplicated over distinct `|xi|^2` values.
fn build_mode_tables<T>(
    grid: &crate::grid::GridRef,
    mut builder: impl FnMut(f64) -> T,
) -> (Vec<T>, Vec<u32>) {
    let mut keys: HashMap<u64, u32> = HashMap::new();
    let mut tables = Vec::new();
    let mut slot = vec![0u32; grid.total_points()];
    for i in 0..grid.total_points() {
        let mu = grid.mu_operator(i);
        let s = *keys.entry(mu.to_bits()).or_insert_with(|| {
            tables.push(builder(mu));
            (tables.len() - 1) as u32
        });
        slot[i] = s;
    }
    (tables, slot)
}

/// Precomputed per-mode exponential tables for the ETD scheme: the full
/// linear block (psi, v, w, I per mode) is integrated exactly; only the
/// nonlinearity is split (first order).
pub struct EtdTables {
    /// For each distinct `mu = |xi|^2`: `exp(A dt)` and `dt * phi1(A dt) e_3`.
    tables: Vec<([f64; 16], [f64; 4])>,
    mode_slot: Vec<u32>,
}

impl EtdTables {
    pub fn build(grid: &crate::grid::GridRef, params: &PhysicalParams, dt: f64) -> Self {
        let (tables, mode_slot) = build_mode_tables(grid, |mu| {
            let mut adt = mode_matrix(mu, params);
            adt.scale(dt);
            let e = expm(&adt);
            let p = phi1(&adt);
            let mut em = [0.0; 16];
            em.copy_from_slice(&e.a);
            let mut pc = [0.0; 4];
            for (r, slot) in pc.iter_mut().enumerate() {
                *slot = dt * p.get(r, 2);
            }
            (em, pc)
        });
        Self { tables, mode_slot }
    }
}

/// RK4 applied to the linear system `y' = A y` is exactly the degree-4
/// Taylor polynomial `P4(dt A) = I + dtA + .. + (dtA)^4/24`; with `k = 0`
/// the step reduces to one per-mode 4x4 multiply.
pub struct LinearRk4Tables {
    tables: Vec<[f64; 16]>,
    mode_slot: Vec<u32>,
}

impl LinearRk4Tables {
    pub fn build(grid: &crate::grid::GridRef, params: &PhysicalParams, dt: f64) -> Self {
        let (tables, mode_slot) = build_mode_tables(grid, |mu| {
            let mut a = mode_matrix(mu, params);
            a.scale(dt);
            let id = Mat::identity(4);
            // Horner: I + a (I + a/2 (I + a/3 (I + a/4)))
            let mut p = id.clone();
            let mut quarter = a.clone();
            quarter.scale(0.25);
            p.add_scaled(1.0, &quarter);
            for div in [3.0, 2.0, 1.0] {
                let mut ap = a.matmul(&p);
                ap.scale(1.0 / div);
                p = id.clone();
                p.add_scaled(1.0, &ap);
            }
            let mut out = [0.0; 16];
            out.copy_from_slice(&p.a);
            out
        });
        Self { tables, mode_slot }
    }

    fn apply(&self, state: &mut StateVector) {
        let n = state.psi.coeffs().len();
        let psi = state.psi.coeffs_mut();
        let v = state.v.coeffs_mut();
        let w = state.w.coeffs_mut();
        let mem = state.mem.coeffs_mut();
        for i in 0..n {
            let m = &self.tables[self.mode_slot[i] as usize];
            let y = [psi[i], v[i], w[i], mem[i]];
            let mut out = [num_complex::Complex64::default(); 4];
            for (r, o) in out.iter_mut().enumerate() {
                *o = m[r * 4] * y[0]
                    + m[r * 4 + 1] * y[1]
                    + m[r * 4 + 2] * y[2]
                    + m[r * 4 + 3] * y[3];
            }
            psi[i] = out[0];
            v[i] = out[1];
            w[i] = out[2];
            mem[i] = out[3];
        }
    }
}

/// One ETD step: exact per-mode linear propagation, explicit first-order
/// treatment of the nonlinearity (one product evaluation per step).
fn etd_step(
    state: &mut StateVector,
    params: &PhysicalParams,
    dt: f64,
    dealias: bool,
    tables: &EtdTables,
) -> Result<()> {
    let nl = if params.k != 0.0 {
        let mut p = state.v.pointwise_product_raw(&state.w)?;
        if dealias {
            p.dealias();
        }
        p.scale(2.0 * params.k / params.tau);
        Some(p)
    } else {
        None
    };

    let total = state.psi.coeffs().len();
    let psi = state.psi.coeffs_mut();
    let v = state.v.coeffs_mut();
    let w = state.w.coeffs_mut();
    let mem = state.mem.coeffs_mut();
    for i in 0..total {
        let (e, q) = &tables.tables[tables.mode_slot[i] as usize];
        let y = [psi[i], v[i], w[i], mem[i]];
        let mut out = [num_complex::Complex64::default(); 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = e[r * 4] * y[0] + e[r * 4 + 1] * y[1] + e[r * 4 + 2] * y[2] + e[r * 4 + 3] * y[3];
        }
        if let Some(p) = nl.as_ref() {
            let n3 = p.coeffs()[i];
            for (r, o) in out.iter_mut().enumerate() {
                *o += q[r] * n3;
            }
        }
        psi[i] = out[0];
        v[i] = out[1];
        w[i] = out[2];
        mem[i] = out[3];
    }
    state.t += dt;
    state.history.push_snapshot(&state.psi)?;
    Ok(())
}

/// Preallocated buffers for the fused nonlinear RK4 step.
struct Rk4Bufs {
    /// Stage derivatives, one set of four component arrays per stage.
    k: Vec<[SpectralField; 4]>,
    stage_v: SpectralField,
    stage_w: SpectralField,
    /// `|xi|^2` with Nyquist zeroed, one entry per mode.
    mu_op: Vec<f64>,
}

impl Rk4Bufs {
    fn new(grid: &crate::grid::GridRef) -> Self {
        let zero = SpectralField::zeros(grid);
        let k = (0..4)
            .map(|_| [zero.clone(), zero.clone(), zero.clone(), zero.clone()])
            .collect();
        let mu_op = (0..grid.total_points()).map(|i| grid.mu_operator(i)).collect();
        Self {
            k,
            stage_v: zero.clone(),
            stage_w: zero,
            mu_op,
        }
    }
}

/// RK4 step with fused per-mode passes (nonlinear box runs). Identical
/// arithmetic to the staged form, without intermediate field allocations.
fn rk4_step_fused(
    state: &mut StateVector,
    params: &PhysicalParams,
    dt: f64,
    dealias: bool,
    bufs: &mut Rk4Bufs,
) -> Result<()> {
    let cg2 = params.c_g_squared();
    let mass = params.c * params.c - cg2;
    let inv_tau = 1.0 / params.tau;
    let inv_tau_k = 1.0 / params.kernel.tau_k;
    let alpha = params.alpha;
    let b = params.b;
    let two_k = 2.0 * params.k;
    let n = state.psi.coeffs().len();

    let stage_coef = [0.0, 0.5 * dt, 0.5 * dt, dt];
    for s in 0..4 {
        // assemble the stage v, w needed for the product
        if s == 0 {
            bufs.stage_v.coeffs_mut().copy_from_slice(state.v.coeffs());
            bufs.stage_w.coeffs_mut().copy_from_slice(state.w.coeffs());
        } else {
            let c = stage_coef[s];
            let kv = bufs.k[s - 1][1].coeffs();
            let kw = bufs.k[s - 1][2].coeffs();
            let sv = bufs.stage_v.coeffs_mut();
            let sw = bufs.stage_w.coeffs_mut();
            let yv = state.v.coeffs();
            let yw = state.w.coeffs();
            for i in 0..n {
                sv[i] = yv[i] + c * kv[i];
                sw[i] = yw[i] + c * kw[i];
            }
        }
        let product = if params.k != 0.0 {
            let mut p = bufs.stage_v.pointwise_product_raw(&bufs.stage_w)?;
            if dealias {
                p.dealias();
            }
            Some(p)
        } else {
            None
        };
        // fused derivative pass: stage psi and I are formed per mode
        let c = stage_coef[s];
        let (before, after) = bufs.k.split_at_mut(s);
        let kprev = before.last();
        let ks = &mut after[0];
        let y_psi = state.psi.coeffs();
        let y_mem = state.mem.coeffs();
        let sv = bufs.stage_v.coeffs();
        let sw = bufs.stage_w.coeffs();
        let kp = kprev.map(|kp| (kp[0].coeffs(), kp[3].coeffs()));
        let [k_psi, k_v, k_w, k_mem] = ks;
        let k_psi = k_psi.coeffs_mut();
        let k_v = k_v.coeffs_mut();
        let k_w = k_w.coeffs_mut();
        let k_mem = k_mem.coeffs_mut();
        for i in 0..n {
            let (zpsi, zmem) = match kp {
                Some((kpsi_prev, kmem_prev)) => {
                    (y_psi[i] + c * kpsi_prev[i], y_mem[i] + c * kmem_prev[i])
                }
                None => (y_psi[i], y_mem[i]),
            };
            let zv = sv[i];
            let zw = sw[i];
            let mu = bufs.mu_op[i];
            k_psi[i] = zv;
            k_v[i] = zw;
            let mut dw = -alpha * zw - mu * (cg2 * zpsi + b * zv + zmem);
            if let Some(p) = product.as_ref() {
                dw += two_k * p.coeffs()[i];
            }
            k_w[i] = inv_tau * dw;
            k_mem[i] = mass * zv - inv_tau_k * zmem;
        }
    }

    // y += dt/6 (k1 + 2 k2 + 2 k3 + k4), all components in one pass each
    let h6 = dt / 6.0;
    for (comp, target) in [
        (0usize, state.psi.coeffs_mut()),
        (1, state.v.coeffs_mut()),
        (2, state.w.coeffs_mut()),
        (3, state.mem.coeffs_mut()),
    ] {
        let k0 = bufs.k[0][comp].coeffs();
        let k1 = bufs.k[1][comp].coeffs();
        let k2 = bufs.k[2][comp].coeffs();
        let k3 = bufs.k[3][comp].coeffs();
        for i in 0..n {
            target[i] += h6 * (k0[i] + 2.0 * (k1[i] + k2[i]) + k3[i]);
        }
    }
    state.t += dt;
    state.history.push_snapshot(&state.psi)?;
    Ok(())
}

/// Advance one step with the configured scheme.
pub fn step(
    state: &mut StateVector,
    params: &PhysicalParams,
    config: &SolverConfig,
    tables: Option<&EtdTables>,
) -> Result<()> {
    match config.scheme {
        Scheme::Rk4 => rk4_step(
            state,
            params,
            config.dt,
            config.dealias,
            &StageSource::SelfProduct,
            None,
        ),
        Scheme::EtdImex => {
            let t = tables.ok_or_else(|| {
                JmgtError::Invalid("ETD tables required for the etd_imex scheme".into())
            })?;
            etd_step(state, params, config.dt, config.dealias, t)
        }
    }
}

/// Lightweight per-step snapshot for diagnostics and Picard iterations.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub psi: SpectralField,
    pub v: SpectralField,
    pub w: SpectralField,
    pub mem: SpectralField,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryBuffer {
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
}

impl TrajectoryBuffer {
    fn record(&mut self, state: &StateVector) {
        self.samples.push(TrajectorySample {
            t: state.t,
            psi: state.psi.clone(),
            v: state.v.clone(),
            w: state.w.clone(),
            mem: state.mem.clone(),
        });
    }
}

#[derive(Debug, Clone)]
pub struct BlowUpInfo {
    pub t: f64,
    pub reason: String,
    /// The last pre-blow-up state (field snapshots) for post-mortem.
    pub last_finite: Option<Box<TrajectorySample>>,
}

pub struct SolveOutcome {
    pub reports: Vec<EnergyReport>,
    pub state: StateVector,
    pub blow_up: Option<BlowUpInfo>,
    pub trajectory: Option<TrajectoryBuffer>,
    pub stage_products: Option<Vec<[SpectralField; 4]>>,
}

#[derive(Default)]
pub struct SolveOptions {
    pub record_trajectory: bool,
    pub record_stage_products: bool,
    pub lyapunov: Option<LyapunovParams>,
    /// Evaluate the R-terms in reports (one extra product per report).
    pub report_r_terms: bool,
    /// Evaluate `||v||_inf` in reports (one inverse transform per report).
    pub report_linf: bool,
}

/// Advance to `t_end` (or blow-up), emitting an [`EnergyReport`] every
/// `monitor_stride` steps plus the initial and final instants.
pub fn solve(
    init: StateVector,
    params: &PhysicalParams,
    config: &SolverConfig,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    config.validate()?;
    let mut state = init;
    let steps = (config.t_end / config.dt).round() as usize;
    let stride = config.monitor_stride.max(1);

    let tables = match config.scheme {
        Scheme::EtdImex => Some(EtdTables::build(state.grid(), params, config.dt)),
        Scheme::Rk4 => None,
    };
    // with k = 0 the RK4 step is the degree-4 Taylor polynomial per mode
    let linear_tables = if config.scheme == Scheme::Rk4 && params.k == 0.0 {
        Some(LinearRk4Tables::build(state.grid(), params, config.dt))
    } else {
        None
    };
    let mut rk4_bufs = if config.scheme == Scheme::Rk4 && params.k != 0.0 {
        Some(Rk4Bufs::new(state.grid()))
    } else {
        None
    };

    let w0_norm = state.w.sobolev_seminorm(0);
    let mut acc = TrajectoryAccumulator::new(state.grid().dim() as u32);
    let mut reports = Vec::new();
    let mut trajectory = if opts.record_trajectory {
        let mut t = TrajectoryBuffer {
            dt: config.dt,
            samples: Vec::with_capacity(steps + 1),
        };
        t.record(&state);
        Some(t)
    } else {
        None
    };
    let mut stage_products = if opts.record_stage_products {
        Some(Vec::with_capacity(steps))
    } else {
        None
    };

    let detail = energy::ReportDetail {
        r_terms: opts.report_r_terms,
        linf: opts.report_linf,
    };
    reports.push(energy::evaluate_report(
        &state,
        params,
        opts.lyapunov.as_ref(),
        detail,
        &mut acc,
    )?);
    let e0_sq = acc.sup_e_sq();
    let blow_threshold = 1e6 * w0_norm.max(e0_sq.sqrt()).max(1e-12);

    let mut blow_up = None;
    let mut last_finite = TrajectorySample {
        t: state.t,
        psi: state.psi.clone(),
        v: state.v.clone(),
        w: state.w.clone(),
        mem: state.mem.clone(),
    };
    for n in 1..=steps {
        match config.scheme {
            Scheme::Rk4 => {
                if let Some(lin) = linear_tables.as_ref() {
                    lin.apply(&mut state);
                    state.t += config.dt;
                    state.history.push_snapshot(&state.psi)?;
                    if let Some(out) = stage_products.as_mut() {
                        let zero = SpectralField::zeros(state.grid());
                        out.push([zero.clone(), zero.clone(), zero.clone(), zero]);
                    }
                } else if opts.record_stage_products {
                    rk4_step(
                        &mut state,
                        params,
                        config.dt,
                        config.dealias,
                        &StageSource::SelfProduct,
                        stage_products.as_mut(),
                    )?;
                } else {
                    rk4_step_fused(
                        &mut state,
                        params,
                        config.dt,
                        config.dealias,
                        rk4_bufs.as_mut().unwrap(),
                    )?;
                }
            }
            Scheme::EtdImex => etd_step(
                &mut state,
                params,
                config.dt,
                config.dealias,
                tables.as_ref().unwrap(),
            )?,
        }
        if let Some(t) = trajectory.as_mut() {
            t.record(&state);
        }
        if state.has_nan() {
            blow_up = Some(BlowUpInfo {
                t: state.t,
                reason: "NaN detected in state".into(),
                last_finite: Some(Box::new(last_finite)),
            });
            break;
        }
        let w_norm = state.w.sobolev_seminorm(0);
        if w_norm > blow_threshold {
            blow_up = Some(BlowUpInfo {
                t: state.t,
                reason: format!(
                    "||w|| = {w_norm:.3e} exceeded 1e6 x initial scale {:.3e}",
                    blow_threshold / 1e6
                ),
                last_finite: Some(Box::new(last_finite)),
            });
            break;
        }
        last_finite.t = state.t;
        last_finite.psi.coeffs_mut().copy_from_slice(state.psi.coeffs());
        last_finite.v.coeffs_mut().copy_from_slice(state.v.coeffs());
        last_finite.w.coeffs_mut().copy_from_slice(state.w.coeffs());
        last_finite.mem.coeffs_mut().copy_from_slice(state.mem.coeffs());
        if n % stride == 0 || n == steps {
            reports.push(energy::evaluate_report(
                &state,
                params,
                opts.lyapunov.as_ref(),
                detail,
                &mut acc,
            )?);
        }
    }

    Ok(SolveOutcome {
        reports,
        state,
        blow_up,
        trajectory,
        stage_products,
    })
}

/// Solve the linear system `dPsi/dt - A Psi = F` with a frozen stage source
/// (the Picard map's inner solve). `frozen[step][stage]` are the dealiased
/// products `(v^phi w^phi)`; the source applied is `2k/tau` times them.
pub fn solve_linear_frozen(
    init: StateVector,
    params: &PhysicalParams,
    dt: f64,
    steps: usize,
    dealias: bool,
    frozen: &[[SpectralField; 4]],
    record_trajectory: bool,
) -> Result<(StateVector, Option<TrajectoryBuffer>, Vec<[SpectralField; 4]>)> {
    if frozen.len() < steps {
        return Err(JmgtError::Invalid(format!(
            "frozen source has {} steps, need {steps}",
            frozen.len()
        )));
    }
    let mut state = init;
    let mut trajectory = if record_trajectory {
        let mut t = TrajectoryBuffer {
            dt,
            samples: Vec::with_capacity(steps + 1),
        };
        t.record(&state);
        Some(t)
    } else {
        None
    };
    // record this solve's own stage products for the next Picard iterate
    let mut own_products: Vec<[SpectralField; 4]> = Vec::with_capacity(steps);
    for n in 0..steps {
        // frozen-source step, while recording the solution's stage products
        let y0 = Fields::from_state(&state);
        let mut own: [Option<SpectralField>; 4] = [None, None, None, None];
        let lin = linearized(params);
        let mut do_stage = |stage: usize, f: &Fields| -> Result<Derivatives> {
            let mut p = f.v.pointwise_product_raw(&f.w)?;
            if dealias {
                p.dealias();
            }
            own[stage] = Some(p);
            let mut src = frozen[n][stage].clone();
            src.scale(2.0 * params.k);
            rhs_fields(f, &lin, dealias, Some(&src))
        };
        let k1 = do_stage(0, &y0)?;
        let mut y = y0.clone();
        y.axpy(0.5 * dt, &k1);
        let k2 = do_stage(1, &y)?;
        let mut y = y0.clone();
        y.axpy(0.5 * dt, &k2);
        let k3 = do_stage(2, &y)?;
        let mut y = y0.clone();
        y.axpy(dt, &k3);
        let k4 = do_stage(3, &y)?;
        let mut next = y0;
        next.axpy(dt / 6.0, &k1);
        next.axpy(dt / 3.0, &k2);
        next.axpy(dt / 3.0, &k3);
        next.axpy(dt / 6.0, &k4);
        state.psi = next.psi;
        state.v = next.v;
        state.w = next.w;
        state.mem = next.mem;
        state.t += dt;
        state.history.push_snapshot(&state.psi)?;
        own_products.push([
            own[0].take().unwrap(),
            own[1].take().unwrap(),
            own[2].take().unwrap(),
            own[3].take().unwrap(),
        ]);
        if let Some(t) = trajectory.as_mut() {
            t.record(&state);
        }
        if state.has_nan() {
            return Err(JmgtError::BlowUp {
                t: state.t,
                reason: "NaN in linear frozen-source solve".into(),
            });
        }
    }
    Ok((state, trajectory, own_products))
}

/// L2 norm of the defect of the original third-order equation
/// `tau psi_ttt + alpha psi_tt - c^2 Lap psi - b Lap psi_t
///  + int_0^t g(s) Lap psi(t-s) ds = (k psi_t^2)_t`
/// evaluated on a stored trajectory at sample `index`, with `psi_ttt`
/// taken from the `w` equation and `(k psi_t^2)_t = 2 k v w`.
///
/// Substituting collapses the defect to
/// `Lap[ I(t) - (c^2 - c_g^2) psi(t) + int_0^t g(s) psi(t-s) ds ]`,
/// where the convolution is evaluated by fourth-order (Gregory) quadrature
/// over the stored nodes, so the result measures how well the advanced
/// memory state tracks the trajectory it belongs to.
pub fn residual_third_order(
    trajectory: &TrajectoryBuffer,
    params: &PhysicalParams,
    index: usize,
) -> Result<f64> {
    if trajectory.samples.len() < 5 {
        return Err(JmgtError::Invalid(
            "residual_third_order needs at least 5 stored consecutive steps".into(),
        ));
    }
    let Some(sample) = trajectory.samples.get(index) else {
        return Err(JmgtError::Invalid(format!(
            "sample index {index} out of range ({} stored)",
            trajectory.samples.len()
        )));
    };
    let dt = trajectory.dt;
    let kernel = &params.kernel;
    let cg2 = params.c_g_squared();

    // I(t) = (c^2 - c_g^2) psi(t) - int_0^t g(s) psi(t-s) ds exactly (the
    // s > t branch tail is part of the full kernel mass), so the defect is
    // the quadrature-vs-state mismatch alone.
    let mut defect = sample.mem.clone();
    defect.axpy(-(params.c * params.c - cg2), &sample.psi);
    if !kernel.is_zero() && index > 0 {
        let weights = gregory4_weights(index, dt);
        for (j, w) in weights.iter().enumerate() {
            let g = kernel.eval(j as f64 * dt)?;
            defect.axpy(w * g, &trajectory.samples[index - j].psi);
        }
    }
    Ok(defect.laplacian().sobolev_seminorm(0))
}

/// Gregory fourth-order end-corrected trapezoid weights on `n + 1`
/// uniformly spaced nodes (falls back to plain trapezoid for short ranges).
pub fn gregory4_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    if n >= 6 {
        const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (i, &e) in END.iter().enumerate() {
            w[i] = e * h;
            w[n - i] = e * h;
        }
    } else if n >= 1 {
        w[0] = 0.5 * h;
        w[n] = 0.5 * h;
    } else {
        w[0] = 0.0;
    }
    w
}

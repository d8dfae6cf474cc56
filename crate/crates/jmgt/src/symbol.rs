//! Whole-space linear analysis in Fourier variables: per-mode ODE systems,
//! mode-wise decay rates, radial reconstruction of Sobolev norms, and
//! power-law decay fitting.
//!
//! For the exponential kernel the memory integral of one mode closes into
//! `dI/dt = (c^2 - c_g^2) v - I / tau_k`, so each mode obeys a 4x4
//! constant-coefficient linear system evolved exactly by the matrix
//! exponential (the fast path). The history-energy `K = int g |eta|^2 ds`
//! needed by the mode energy closes as well:
//! `dK/dt = 2 Re(v conj(I)) - K / tau_k`. A ring-buffer quadrature path
//! (Gregory-corrected trapezoid over stored snapshots, AB4 predictor-
//! corrector in time) provides the independent cross-check.

use crate::expm::{expm, Mat};
use crate::params::PhysicalParams;
use crate::solver::gregory4_weights;
use crate::{JmgtError, Result};
use num_complex::Complex64;

/// One Fourier mode of the linear system.
#[derive(Debug, Clone, Copy)]
pub struct ModeBundle {
    /// Wavenumber magnitude.
    pub xi: f64,
    pub psi_hat: Complex64,
    pub v_hat: Complex64,
    pub w_hat: Complex64,
    /// Closed memory integral `int g(s) eta_hat(s) ds`.
    pub i_hat: Complex64,
    /// `int g(s) |eta_hat(s)|^2 ds` when the history energy is tracked
    /// (None on the eta-free fast path).
    pub eta_energy: Option<f64>,
}

impl ModeBundle {
    /// Initial bundle from `(psi0, v0, w0)`; at `t = 0` the history carries
    /// `eta(0, s) = psi0`, so `I(0) = (c^2 - c_g^2) psi0` and
    /// `K(0) = (c^2 - c_g^2) |psi0|^2`.
    pub fn initial(
        xi: f64,
        psi0: Complex64,
        v0: Complex64,
        w0: Complex64,
        params: &PhysicalParams,
        track_eta_energy: bool,
    ) -> Self {
        let mass = params.c * params.c - params.c_g_squared();
        Self {
            xi,
            psi_hat: psi0,
            v_hat: v0,
            w_hat: w0,
            i_hat: mass * psi0,
            eta_energy: track_eta_energy.then(|| mass * psi0.norm_sqr()),
        }
    }
}

/// The 4x4 system matrix of one mode (rows: psi, v, w, I).
pub fn system_matrix(xi: f64, params: &PhysicalParams) -> Mat {
    let mu = xi * xi;
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

/// Exact linear right-hand side of one mode (the Fourier image of the box
/// system; the nonlinearity plays no role here).
pub fn mode_rhs(mode: &ModeBundle, params: &PhysicalParams) -> [Complex64; 4] {
    let a = system_matrix(mode.xi, params);
    let y = [mode.psi_hat, mode.v_hat, mode.w_hat, mode.i_hat];
    let mut out = [Complex64::default(); 4];
    for r in 0..4 {
        let mut acc = Complex64::default();
        for c in 0..4 {
            acc += a.get(r, c) * y[c];
        }
        out[r] = acc;
    }
    out
}

/// The per-mode first-order energy: the quadratic form of the weighted
/// energy with `|xi|^2` in place of `-Lap`. Without the history energy the
/// two pure-eta terms are omitted (labeled by `eta_energy = None`).
pub fn e_hat1(mode: &ModeBundle, params: &PhysicalParams) -> f64 {
    let mu = mode.xi * mode.xi;
    let tau = params.tau;
    let cg2 = params.c_g_squared();
    let a = mode.psi_hat + tau * mode.v_hat;
    let u2 = mode.v_hat + tau * mode.w_hat;
    let mut e = cg2 * mu * a.norm_sqr()
        + tau * (params.b - tau * cg2) * mu * mode.v_hat.norm_sqr()
        + u2.norm_sqr()
        + 2.0 * tau * mu * (mode.i_hat * mode.v_hat.conj()).re;
    if let Some(k) = mode.eta_energy {
        let tk = params.kernel.tau_k;
        e += (tau / tk) * mu * k + mu * k;
    }
    0.5 * e
}

/// One dense-output point of a mode trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ModePoint {
    pub t: f64,
    pub bundle: ModeBundle,
    pub e_hat1: f64,
}

fn apply_real_mat(e: &Mat, y: &[Complex64; 4]) -> [Complex64; 4] {
    let mut out = [Complex64::default(); 4];
    for r in 0..4 {
        let mut acc = Complex64::default();
        for c in 0..4 {
            acc += e.get(r, c) * y[c];
        }
        out[r] = acc;
    }
    out
}

/// Exact (matrix-exponential) evolution of one mode through `t_grid`
/// (increasing, starting at any t0 >= 0 interpreted from the initial
/// bundle's time 0). The history energy, when tracked, is integrated with
/// RK4 substeps against exactly propagated forcing.
pub fn mode_evolve_fast(
    initial: &ModeBundle,
    params: &PhysicalParams,
    t_grid: &[f64],
) -> Result<Vec<ModePoint>> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(JmgtError::Invalid("t_grid must be strictly increasing".into()));
    }
    if !mode_state_finite(initial) {
        return Err(JmgtError::Invalid("non-finite initial mode".into()));
    }
    let a = system_matrix(initial.xi, params);
    let tau_k = params.kernel.tau_k;
    let mut y = [
        initial.psi_hat,
        initial.v_hat,
        initial.w_hat,
        initial.i_hat,
    ];
    let mut k_energy = initial.eta_energy;
    let mut t_now = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());

    let push = |t: f64, y: &[Complex64; 4], k: Option<f64>, out: &mut Vec<ModePoint>| {
        let bundle = ModeBundle {
            xi: initial.xi,
            psi_hat: y[0],
            v_hat: y[1],
            w_hat: y[2],
            i_hat: y[3],
            eta_energy: k,
        };
        out.push(ModePoint {
            t,
            bundle,
            e_hat1: e_hat1(&bundle, params),
        });
    };

    for &t in t_grid {
        let dt = t - t_now;
        if dt == 0.0 {
            push(t, &y, k_energy, &mut out);
            continue;
        }
        if let Some(k0) = k_energy {
            // substep so the K integrator resolves both the oscillation and
            // the kernel relaxation
            let omega = params.c * initial.xi + 1.0 / params.tau;
            let h_target = 0.2 * (tau_k.min(params.tau)).min(1.0 / omega);
            let n_sub = (dt / h_target).ceil().max(1.0) as usize;
            let h = dt / n_sub as f64;
            let mut ah2 = a.clone();
            ah2.scale(0.5 * h);
            let e_h2 = expm(&ah2);
            let mut k = k0;
            for _ in 0..n_sub {
                let y_mid = apply_real_mat(&e_h2, &y);
                let y_end = apply_real_mat(&e_h2, &y_mid);
                let f0 = 2.0 * (y[1] * y[3].conj()).re;
                let f_mid = 2.0 * (y_mid[1] * y_mid[3].conj()).re;
                let f_end = 2.0 * (y_end[1] * y_end[3].conj()).re;
                // RK4 for K' = -K/tau_k + F(t) with dense forcing
                let rate = -1.0 / tau_k;
                let k1 = rate * k + f0;
                let k2 = rate * (k + 0.5 * h * k1) + f_mid;
                let k3 = rate * (k + 0.5 * h * k2) + f_mid;
                let k4 = rate * (k + h * k3) + f_end;
                k += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                y = y_end;
            }
            k_energy = Some(k.max(0.0));
        } else {
            let mut adt = a.clone();
            adt.scale(dt);
            let e = expm(&adt);
            y = apply_real_mat(&e, &y);
        }
        t_now = t;
        push(t, &y, k_energy, &mut out);
    }
    Ok(out)
}

fn mode_state_finite(m: &ModeBundle) -> bool {
    let fin = |c: Complex64| c.re.is_finite() && c.im.is_finite();
    fin(m.psi_hat) && fin(m.v_hat) && fin(m.w_hat) && fin(m.i_hat) && m.xi.is_finite()
}

/// Full-path (history-quadrature) evolution of one mode: the memory integral
/// is evaluated by fourth-order Gregory quadrature over the stored snapshot
/// ring, stepped with an AB4/AM4 predictor-corrector (Pouzet RK4 substeps
/// bootstrap the multistep history). Independent of the closed-ODE path.
pub struct FullPathOutput {
    pub t: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub w: Vec<Complex64>,
    /// Quadrature memory integral at output times.
    pub i_quad: Vec<f64>,
    pub i_quad_c: Vec<Complex64>,
    /// Quadrature history energy at output times.
    pub k_quad: Vec<f64>,
    pub e_hat1: Vec<f64>,
}

pub fn mode_evolve_full(
    initial: &ModeBundle,
    params: &PhysicalParams,
    dt: f64,
    steps: usize,
    out_every: usize,
) -> Result<FullPathOutput> {
    if !(dt > 0.0) || steps == 0 {
        return Err(JmgtError::Invalid("full path needs dt > 0 and steps > 0".into()));
    }
    let mu = initial.xi * initial.xi;
    let tau = params.tau;
    let cg2 = params.c_g_squared();
    let kernel = &params.kernel;
    let psi0 = initial.psi_hat;

    // quadrature of the memory integral over stored history:
    // I(t_n) = sum_j w_j g(s_j) (psi(t_n) - hist[n - j]) + tail psi(t_n)
    let quad_i = |hist: &[Complex64], t_idx: usize, psi_cur: Complex64, h: f64| -> Complex64 {
        let n = t_idx;
        if n == 0 {
            return kernel.mass() * psi_cur;
        }
        let w = gregory4_weights(n, h);
        let mut acc = Complex64::default();
        let mut wsum = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let g = wj * kernel.eval_unchecked(j as f64 * h);
            wsum += g;
            acc -= g * hist[n - j];
        }
        acc + (wsum + kernel.tail_mass(n as f64 * h)) * psi_cur
    };
    let quad_k = |hist: &[Complex64], t_idx: usize, psi_cur: Complex64, h: f64| -> f64 {
        let n = t_idx;
        if n == 0 {
            return kernel.mass() * psi_cur.norm_sqr();
        }
        let w = gregory4_weights(n, h);
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let g = wj * kernel.eval_unchecked(j as f64 * h);
            acc += g * (psi_cur - hist[n - j]).norm_sqr();
        }
        acc + kernel.tail_mass(n as f64 * h) * psi_cur.norm_sqr()
    };

    let f_eval = |y: &[Complex64; 3], i_mem: Complex64| -> [Complex64; 3] {
        [
            y[1],
            y[2],
            (-params.alpha * y[2] - cg2 * mu * y[0] - params.b * mu * y[1] - mu * i_mem) / tau,
        ]
    };

    // Pouzet RK4 bootstrap on a fine grid for the first `start` coarse steps
    let start = 8.min(steps);
    let sub = 32usize;
    let h_f = dt / sub as f64;
    let mut y = [initial.psi_hat, initial.v_hat, initial.w_hat];

    // trapezoid quadrature over the fine history at an arbitrary stage time
    let quad_stage = |hist: &[Complex64], t_star: f64, psi_star: Complex64, h: f64| -> Complex64 {
        // nodes: s = 0 (eta = 0), then s_i = t_star - t_i descending in i
        let m = hist.len();
        let mut acc = Complex64::default();
        let mut prev_s = 0.0;
        let mut prev_f = Complex64::default();
        for i in (0..m).rev() {
            let s = t_star - i as f64 * h;
            if s <= 0.0 {
                continue;
            }
            let f = kernel.eval_unchecked(s) * (psi_star - hist[i]);
            acc += 0.5 * (s - prev_s) * (prev_f + f);
            prev_s = s;
            prev_f = f;
        }
        acc + kernel.tail_mass(t_star) * psi_star
    };

    let mut hist_fine: Vec<Complex64> = Vec::with_capacity(start * sub + 1);
    hist_fine.push(psi0);
    let mut states: Vec<[Complex64; 3]> = Vec::with_capacity(steps + 1);
    states.push(y);
    for i in 0..start * sub {
        let t = i as f64 * h_f;
        let i1 = quad_stage(&hist_fine, t, y[0], h_f);
        let k1 = f_eval(&y, i1);
        let y2 = add3(&y, 0.5 * h_f, &k1);
        let i2 = quad_stage(&hist_fine, t + 0.5 * h_f, y2[0], h_f);
        let k2 = f_eval(&y2, i2);
        let y3 = add3(&y, 0.5 * h_f, &k2);
        let i3 = quad_stage(&hist_fine, t + 0.5 * h_f, y3[0], h_f);
        let k3 = f_eval(&y3, i3);
        let y4 = add3(&y, h_f, &k3);
        let i4 = quad_stage(&hist_fine, t + h_f, y4[0], h_f);
        let k4 = f_eval(&y4, i4);
        for c in 0..3 {
            y[c] += h_f / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        hist_fine.push(y[0]);
        if (i + 1) % sub == 0 {
            states.push(y);
        }
    }

    // thin the fine history to the coarse node grid
    let mut hist: Vec<Complex64> = (0..=start).map(|i| hist_fine[i * sub]).collect();
    drop(hist_fine);

    // multistep phase with Gregory quadrature
    let mut f_hist: Vec<[Complex64; 3]> = Vec::new();
    for (idx, st) in states.iter().enumerate() {
        let im = quad_i(&hist, idx, st[0], dt);
        f_hist.push(f_eval(st, im));
    }

    for n in start..steps {
        let m = f_hist.len();
        let (fa, fb, fc, fd) = (f_hist[m - 1], f_hist[m - 2], f_hist[m - 3], f_hist[m - 4]);
        // AB4 predictor
        let mut y_pred = y;
        for c in 0..3 {
            y_pred[c] =
                y[c] + dt / 24.0 * (55.0 * fa[c] - 59.0 * fb[c] + 37.0 * fc[c] - 9.0 * fd[c]);
        }
        hist.push(y_pred[0]);
        let i_pred = quad_i(&hist, n + 1, y_pred[0], dt);
        let f_pred = f_eval(&y_pred, i_pred);
        // AM4 corrector
        let mut y_new = y;
        for c in 0..3 {
            y_new[c] = y[c] + dt / 24.0 * (9.0 * f_pred[c] + 19.0 * fa[c] - 5.0 * fb[c] + fc[c]);
        }
        *hist.last_mut().unwrap() = y_new[0];
        let i_new = quad_i(&hist, n + 1, y_new[0], dt);
        f_hist.push(f_eval(&y_new, i_new));
        y = y_new;
        states.push(y);
    }

    // assemble outputs
    let stride = out_every.max(1);
    let mut out = FullPathOutput {
        t: Vec::new(),
        psi: Vec::new(),
        v: Vec::new(),
        w: Vec::new(),
        i_quad: Vec::new(),
        i_quad_c: Vec::new(),
        k_quad: Vec::new(),
        e_hat1: Vec::new(),
    };
    for (idx, st) in states.iter().enumerate() {
        if idx % stride != 0 && idx != steps {
            continue;
        }
        let t = idx as f64 * dt;
        let i_q = quad_i(&hist, idx, st[0], dt);
        let k_q = quad_k(&hist, idx, st[0], dt);
        let bundle = ModeBundle {
            xi: initial.xi,
            psi_hat: st[0],
            v_hat: st[1],
            w_hat: st[2],
            i_hat: i_q,
            eta_energy: Some(k_q),
        };
        out.t.push(t);
        out.psi.push(st[0]);
        out.v.push(st[1]);
        out.w.push(st[2]);
        out.i_quad.push(i_q.norm());
        out.i_quad_c.push(i_q);
        out.k_quad.push(k_q);
        out.e_hat1.push(e_hat1(&bundle, params));
    }
    Ok(out)
}

fn add3(y: &[Complex64; 3], s: f64, k: &[Complex64; 3]) -> [Complex64; 3] {
    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]]
}

/// Least-squares slope of `ln E_hat1` against `t` over the tail of the
/// series; returns the effective decay rate `lambda_eff = -slope`.
pub fn fit_mode_rate(ts: &[f64], e_series: &[f64]) -> Result<f64> {
    if ts.len() != e_series.len() || ts.len() < 4 {
        return Err(JmgtError::Invalid("rate fit needs >= 4 samples".into()));
    }
    if e_series.iter().any(|&e| !(e > 0.0)) {
        return Err(JmgtError::Invalid(
            "rate fit needs a strictly positive series".into(),
        ));
    }
    let t_max = *ts.last().unwrap();
    let lo = t_max * 0.5;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in ts.iter().zip(e_series.iter()) {
        if t >= lo {
            xs.push(t);
            ys.push(e.ln());
        }
    }
    let (slope, _r2, _icept) = least_squares(&xs, &ys)?;
    Ok(-slope)
}

/// Power-law fit record: slope of `log(value)` against `log(1 + t)`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub series_id: String,
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub r2: f64,
}

pub fn decay_fit(
    ts: &[f64],
    values: &[f64],
    window: (f64, f64),
    series_id: &str,
) -> Result<DecayFit> {
    if ts.len() != values.len() {
        return Err(JmgtError::Invalid("mismatched series lengths".into()));
    }
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(JmgtError::Invalid(format!("degenerate window [{lo}, {hi}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in ts.iter().zip(values.iter()) {
        if t >= lo && t <= hi {
            if !(v > 0.0) {
                return Err(JmgtError::Invalid(
                    "decay fit needs positive values in the window".into(),
                ));
            }
            xs.push((1.0 + t).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 4 {
        return Err(JmgtError::Invalid(format!(
            "window [{lo}, {hi}] contains only {} samples",
            xs.len()
        )));
    }
    let (slope, r2, _) = least_squares(&xs, &ys)?;
    Ok(DecayFit {
        series_id: series_id.to_string(),
        t_lo: lo,
        t_hi: hi,
        slope,
        r2,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(JmgtError::Invalid("least squares needs >= 2 points".into()));
    }
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(JmgtError::Invalid("degenerate abscissa in least squares".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((slope, r2, intercept))
}

/// Radially symmetric initial spectrum on a log-spaced grid.
#[derive(Debug, Clone)]
pub struct RadialSpectrum {
    pub n_dim: u32,
    pub xi: Vec<f64>,
    pub psi0: Vec<f64>,
    pub v0: Vec<f64>,
    pub w0: Vec<f64>,
}

impl RadialSpectrum {
    pub fn log_grid(modes: usize, xi_min: f64, xi_max: f64) -> Result<Vec<f64>> {
        if !(xi_min > 0.0) || !(xi_max > xi_min) || modes < 8 {
            return Err(JmgtError::Invalid(
                "radial grid needs 0 < xi_min < xi_max and >= 8 modes".into(),
            ));
        }
        let lo = xi_min.ln();
        let hi = xi_max.ln();
        Ok((0..modes)
            .map(|i| (lo + (hi - lo) * i as f64 / (modes - 1) as f64).exp())
            .collect())
    }

    /// The Gaussian profile `U_hat_0 = exp(-|xi|^2)` realized as
    /// `psi0 = v0 = 0`, `w0 = exp(-xi^2) / tau`, so
    /// `|U_hat_0| = |v0 + tau w0| = exp(-xi^2)` exactly.
    pub fn gaussian_u0(
        n_dim: u32,
        modes: usize,
        xi_min: f64,
        xi_max: f64,
        tau: f64,
    ) -> Result<Self> {
        let xi = Self::log_grid(modes, xi_min, xi_max)?;
        let w0 = xi.iter().map(|&r| (-r * r).exp() / tau).collect();
        Ok(Self {
            n_dim,
            psi0: vec![0.0; xi.len()],
            v0: vec![0.0; xi.len()],
            w0,
            xi,
        })
    }

    /// Shell quadrature weights `omega_{n-1} r^n du` (trapezoid in log r).
    pub fn shell_weights(&self) -> Vec<f64> {
        let omega = match self.n_dim {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            _ => 4.0 * std::f64::consts::PI,
        };
        let m = self.xi.len();
        let mut w = vec![0.0; m];
        for i in 0..m {
            let du = if i == 0 {
                self.xi[1].ln() - self.xi[0].ln()
            } else if i == m - 1 {
                self.xi[m - 1].ln() - self.xi[m - 2].ln()
            } else {
                0.5 * (self.xi[i + 1].ln() - self.xi[i - 1].ln())
            };
            let half = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            w[i] = omega * self.xi[i].powi(self.n_dim as i32) * du * half;
        }
        w
    }
}

/// Reconstructed norms at one output time.
#[derive(Debug, Clone, Copy)]
pub struct RadialNormsRow {
    pub t: f64,
    /// `|| U ||` (j = 0) and `|| grad U ||` (j = 1).
    pub norm_u_j0: f64,
    pub norm_u_j1: f64,
    pub norm_w: f64,
    pub norm_v: f64,
    pub v_origin: f64,
}

/// Evolve every radial node exactly and integrate shells at each requested
/// time. Norm convention: `||grad^j f||^2 = int |xi|^{2j} |f_hat|^2 dxi`
/// (spectral measure); `v_origin = (2 pi)^{-n} int v_hat dxi`.
pub fn radial_norms(
    spectrum: &RadialSpectrum,
    params: &PhysicalParams,
    t_grid: &[f64],
) -> Result<Vec<RadialNormsRow>> {
    let weights = spectrum.shell_weights();
    let m = spectrum.xi.len();

    // coverage check at t = 0: the shell integrand of |U|^2 must be
    // negligible at both grid ends
    {
        let integrand: Vec<f64> = (0..m)
            .map(|i| {
                let u0 = initial_u_sq(spectrum, params, i);
                u0 * spectrum.xi[i].powi((spectrum.n_dim - 1) as i32)
            })
            .collect();
        // crude truncation-mass estimates: integrand * endpoint radius
        let low_mass = integrand[0] * spectrum.xi[0];
        let high_mass = integrand[m - 1] * spectrum.xi[m - 1];
        let scale = integrand
            .iter()
            .enumerate()
            .map(|(i, f)| f * spectrum.xi[i])
            .fold(0.0f64, f64::max);
        if scale > 0.0 && (low_mass > 3e-5 * scale || high_mass > 3e-5 * scale) {
            return Err(JmgtError::Invalid(
                "radial spectrum does not cover the energy-carrying band \
                 (shell integrand non-negligible at a grid endpoint)"
                    .into(),
            ));
        }
    }

    let mut rows: Vec<RadialNormsRow> = t_grid
        .iter()
        .map(|&t| RadialNormsRow {
            t,
            norm_u_j0: 0.0,
            norm_u_j1: 0.0,
            norm_w: 0.0,
            norm_v: 0.0,
            v_origin: 0.0,
        })
        .collect();

    for i in 0..m {
        let mode0 = ModeBundle::initial(
            spectrum.xi[i],
            Complex64::new(spectrum.psi0[i], 0.0),
            Complex64::new(spectrum.v0[i], 0.0),
            Complex64::new(spectrum.w0[i], 0.0),
            params,
            false,
        );
        let points = mode_evolve_fast(&mode0, params, t_grid)?;
        let wgt = weights[i];
        let mu = spectrum.xi[i] * spectrum.xi[i];
        for (row, point) in rows.iter_mut().zip(points.iter()) {
            let b = &point.bundle;
            let u_sq = (b.v_hat + params.tau * b.w_hat).norm_sqr()
                + mu * (b.psi_hat + params.tau * b.v_hat).norm_sqr()
                + mu * b.v_hat.norm_sqr();
            row.norm_u_j0 += wgt * u_sq;
            row.norm_u_j1 += wgt * mu * u_sq;
            row.norm_w += wgt * b.w_hat.norm_sqr();
            row.norm_v += wgt * b.v_hat.norm_sqr();
            // int v_hat dxi carries the same shell weights (radial data)
            row.v_origin += wgt * b.v_hat.re;
        }
    }
    let two_pi_n = (2.0 * std::f64::consts::PI).powi(spectrum.n_dim as i32);
    for row in rows.iter_mut() {
        row.norm_u_j0 = row.norm_u_j0.max(0.0).sqrt();
        row.norm_u_j1 = row.norm_u_j1.max(0.0).sqrt();
        row.norm_w = row.norm_w.max(0.0).sqrt();
        row.norm_v = row.norm_v.max(0.0).sqrt();
        row.v_origin /= two_pi_n;
    }
    Ok(rows)
}

fn initial_u_sq(spectrum: &RadialSpectrum, params: &PhysicalParams, i: usize) -> f64 {
    let mu = spectrum.xi[i] * spectrum.xi[i];
    let u = spectrum.v0[i] + params.tau * spectrum.w0[i];
    let a = spectrum.psi0[i] + params.tau * spectrum.v0[i];
    u * u + mu * a * a + mu * spectrum.v0[i] * spectrum.v0[i]
}

/// Report of the radial decay inequality
/// `int_0^1 r^{n-1} exp(-r^2 t) dr <= C(n) (1 + t)^{-n/2}`.
#[derive(Debug, Clone)]
pub struct RadialInequalityReport {
    pub t: Vec<f64>,
    pub integral: Vec<f64>,
    pub ratio: Vec<f64>,
    pub c_fit: f64,
    pub bounded: bool,
}

pub fn check_radial_inequality(n: u32, t_list: &[f64]) -> Result<RadialInequalityReport> {
    if n == 0 {
        return Err(JmgtError::Invalid("n must be >= 1".into()));
    }
    let mut integral = Vec::with_capacity(t_list.len());
    let mut ratio = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if t < 0.0 {
            return Err(JmgtError::Invalid("t must be >= 0".into()));
        }
        let v = radial_integral(n, t);
        integral.push(v);
        ratio.push(v * (1.0 + t).powf(n as f64 / 2.0));
    }
    let c_fit = ratio.iter().cloned().fold(0.0f64, f64::max);
    Ok(RadialInequalityReport {
        t: t_list.to_vec(),
        integral,
        ratio,
        bounded: c_fit.is_finite() && c_fit > 0.0,
        c_fit,
    })
}

/// `int_0^1 r^{n-1} exp(-r^2 t) dr` by Simpson under `u = r sqrt(1 + t)`.
pub fn radial_integral(n: u32, t: f64) -> f64 {
    let scale = (1.0 + t).sqrt();
    let upper = scale.min(12.0_f64.max(1.0));
    // integrand in u: (u / scale)^{n-1} exp(-(u/scale)^2 t) / scale
    let f = |u: f64| -> f64 {
        let r = u / scale;
        r.powi((n - 1) as i32) * (-r * r * t).exp() / scale
    };
    let m = 8192;
    let h = upper / m as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

#![allow(clippy::field_reassign_with_default)]

//! Cross-module operation contracts: box right-hand side against the
//! Fourier-symbol oracle, third-order residual diagnostics, monotonicity of
//! the weighted energies, and the verification command.

use jmgt::energy;
use jmgt::experiments;
use jmgt::grid::SpectralGrid;
use jmgt::kernel::KernelSpec;
use jmgt::params::PhysicalParams;
use jmgt::solver::{self, Scheme, SolveOptions, SolverConfig, TrajectoryBuffer, TrajectorySample};
use jmgt::state::{InitialProfile, StateVector};
use jmgt::symbol::{self, ModeBundle};
use jmgt::config::RunSpec;
use jmgt::field::SpectralField;
use num_complex::Complex64;

fn reference_params(k: f64) -> PhysicalParams {
    let kernel = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
    PhysicalParams::new(0.5, 1.0, 0.1, k, kernel, false).unwrap()
}

/// A single-mode box state must reproduce the symbol module's exact linear
/// right-hand side at that wavenumber to rounding.
#[test]
fn box_rhs_matches_symbol_mode_rhs_on_single_mode() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let profile = InitialProfile::SingleMode {
        mode: [2, 0, 0],
        amplitudes: [0.8, -0.3, 0.5],
    };
    let (state, _) = StateVector::initial_default(&grid, &profile, &params, 1e-2).unwrap();
    let d = solver::rhs(&state, &params, true).unwrap();

    let xi = 2.0;
    let mode = ModeBundle::initial(
        xi,
        Complex64::new(0.4, 0.0), // box coefficient of e^{i 2x} is amp/2
        Complex64::new(-0.15, 0.0),
        Complex64::new(0.25, 0.0),
        &params,
        false,
    );
    let md = symbol::mode_rhs(&mode, &params);
    // box coefficient index 2 carries the +xi mode
    let got = [
        d.dpsi.coeffs()[2],
        d.dv.coeffs()[2],
        d.dw.coeffs()[2],
        d.dmem.coeffs()[2],
    ];
    for (g, e) in got.iter().zip(md.iter()) {
        assert!(
            (g - e).norm() <= 1e-12 * e.norm().max(1.0),
            "box rhs {g} vs mode rhs {e}"
        );
    }
}

#[test]
fn residual_third_order_zero_trajectory_and_stencil_guard() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let zero = SpectralField::zeros(&grid);
    let mut traj = TrajectoryBuffer {
        dt: 1e-2,
        samples: Vec::new(),
    };
    for i in 0..8 {
        traj.samples.push(TrajectorySample {
            t: i as f64 * 1e-2,
            psi: zero.clone(),
            v: zero.clone(),
            w: zero.clone(),
            mem: zero.clone(),
        });
    }
    assert_eq!(
        solver::residual_third_order(&traj, &params, 6).unwrap(),
        0.0
    );
    // too-short trajectory rejected
    traj.samples.truncate(4);
    assert!(solver::residual_third_order(&traj, &params, 2).is_err());
}

/// Injecting the exact linear single-mode solution (dense output of the
/// closed-ODE path) leaves only the fourth-order quadrature defect, far
/// below 1e-10.
#[test]
fn residual_third_order_exact_injected_trajectory() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let dt = 1e-3;
    let steps = 400;
    let xi = 1.0;
    let mode0 = ModeBundle::initial(
        xi,
        Complex64::new(0.5, 0.0),
        Complex64::new(0.25, 0.0),
        Complex64::new(0.0, 0.0),
        &params,
        false,
    );
    let t_grid: Vec<f64> = (1..=steps).map(|i| i as f64 * dt).collect();
    let pts = symbol::mode_evolve_fast(&mode0, &params, &t_grid).unwrap();

    let put = |re_plus: Complex64| -> SpectralField {
        let mut f = SpectralField::zeros(&grid);
        f.coeffs_mut()[1] = re_plus;
        f.coeffs_mut()[15] = re_plus.conj();
        f
    };
    let mut traj = TrajectoryBuffer {
        dt,
        samples: vec![TrajectorySample {
            t: 0.0,
            psi: put(mode0.psi_hat),
            v: put(mode0.v_hat),
            w: put(mode0.w_hat),
            mem: put(mode0.i_hat),
        }],
    };
    for p in &pts {
        traj.samples.push(TrajectorySample {
            t: p.t,
            psi: put(p.bundle.psi_hat),
            v: put(p.bundle.v_hat),
            w: put(p.bundle.w_hat),
            mem: put(p.bundle.i_hat),
        });
    }
    let scale = traj.samples[0].psi.sobolev_seminorm(0);
    for idx in [50usize, 200, 400] {
        let r = solver::residual_third_order(&traj, &params, idx).unwrap();
        assert!(
            r / scale < 1e-10,
            "exact trajectory residual {r:.3e} at index {idx}"
        );
    }
}

/// The residual of an rk4-computed trajectory shrinks at the integrator's
/// order under dt refinement.
#[test]
fn residual_third_order_decreases_at_integrator_order() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let profile = InitialProfile::SingleMode {
        mode: [1, 0, 0],
        amplitudes: [0.5, 0.25, 0.0],
    };
    let run = |dt: f64| -> f64 {
        let (state, _) = StateVector::initial_default(&grid, &profile, &params, dt).unwrap();
        let config = SolverConfig {
            dt,
            t_end: 0.5,
            scheme: Scheme::Rk4,
            dealias: true,
            monitor_stride: usize::MAX,
        };
        let opts = SolveOptions {
            record_trajectory: true,
            ..Default::default()
        };
        let out = solver::solve(state, &params, &config, &opts).unwrap();
        let traj = out.trajectory.unwrap();
        solver::residual_third_order(&traj, &params, traj.samples.len() - 1).unwrap()
    };
    let e1 = run(4e-3);
    let e2 = run(2e-3);
    let order = (e1 / e2).log2();
    assert!(
        order > 3.0,
        "third-order residual should shrink at ~order 4, got slope {order:.2} ({e1:.3e} -> {e2:.3e})"
    );
}

/// Along a linear subcritical run both weighted energies are non-increasing
/// (the sign structure of the energy identities).
#[test]
fn linear_subcritical_energies_non_increasing_and_zero_data_run_is_zero() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(2, 16, 12.0).unwrap();
    let profile = InitialProfile::Gaussian {
        amplitude: 0.1,
        width: 2.0,
        center: None,
        weights: [0.0, 1.0, 0.5],
    };
    let (state, _) = StateVector::initial_default(&grid, &profile, &params, 2e-3).unwrap();
    let config = SolverConfig {
        dt: 2e-3,
        t_end: 2.0,
        scheme: Scheme::Rk4,
        dealias: true,
        monitor_stride: 10,
    };
    let out = solver::solve(state, &params, &config, &SolveOptions::default()).unwrap();
    let mut prev_e1 = f64::INFINITY;
    let mut prev_e2 = f64::INFINITY;
    let mut prev_d = 0.0;
    for r in &out.reports {
        assert!(r.e1 <= prev_e1 * (1.0 + 1e-10), "E1 rose at t = {}", r.t);
        assert!(r.e2 <= prev_e2 * (1.0 + 1e-10), "E2 rose at t = {}", r.t);
        assert!(r.dissipation_d_cum >= prev_d - 1e-14, "D must be nondecreasing");
        prev_e1 = r.e1;
        prev_e2 = r.e2;
        prev_d = r.dissipation_d_cum;
    }

    // zero data: every report is exactly zero
    let profile = InitialProfile::SingleMode {
        mode: [1, 0, 0],
        amplitudes: [0.0, 0.0, 0.0],
    };
    let (state, _) = StateVector::initial_default(&grid, &profile, &params, 2e-3).unwrap();
    let out = solver::solve(state, &params, &config, &SolveOptions::default()).unwrap();
    for r in &out.reports {
        assert_eq!(r.e1, 0.0);
        assert_eq!(r.script_e1, 0.0);
        assert_eq!(r.seminorm_e, 0.0);
        assert_eq!(r.dissipation_d_cum, 0.0);
    }
}

#[test]
fn verify_energy_command_passes_and_fault_injection_fails_loudly() {
    let mut spec = RunSpec::default();
    spec.k = 0.0;
    spec.dim = 2;
    spec.points = 16;
    spec.box_length = 12.0;
    spec.dt = 2e-3;
    spec.t_end = 0.5;
    spec.profile = "gaussian".into();
    spec.amplitude = 0.05;
    spec.width = 2.0;
    spec.weights = [0.0, 1.0, 0.0];
    spec.seed = 5;
    spec.svg = false;
    let dir = std::env::temp_dir().join(format!("jmgt-verify-{}", std::process::id()));

    let ok = experiments::cmd_verify_energy(&spec, &dir).unwrap();
    assert!(
        ok.all_pass(),
        "verification rows failed: {:?}",
        ok.rows.iter().filter(|r| !r.pass).collect::<Vec<_>>()
    );

    let bad = experiments::verify_energy_with_corruption(&spec, &dir).unwrap();
    let identity_rows: Vec<_> = bad
        .rows
        .iter()
        .filter(|r| r.name.contains("energy identity"))
        .collect();
    assert!(
        identity_rows.iter().all(|r| !r.pass),
        "corrupted dissipation sign must fail the identity checks"
    );
}

/// Seminorm bookkeeping: constant-in-time trajectories report the
/// instantaneous value; the dissipation integral accumulates.
#[test]
fn seminorm_and_dissipation_free_functions() {
    let params = reference_params(0.0);
    let grid = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let profile = InitialProfile::SingleMode {
        mode: [1, 0, 0],
        amplitudes: [0.5, 0.2, 0.1],
    };
    let (state, _) = StateVector::initial_default(&grid, &profile, &params, 1e-2).unwrap();
    let config = SolverConfig {
        dt: 1e-2,
        t_end: 0.3,
        scheme: Scheme::Rk4,
        dealias: true,
        monitor_stride: 3,
    };
    let out = solver::solve(state, &params, &config, &SolveOptions::default()).unwrap();
    let last = out.reports.len() - 1;
    let e = energy::seminorm_e(&out.reports, last);
    let d = energy::dissipation_d(&out.reports, last);
    assert!((e - out.reports[last].seminorm_e).abs() < 1e-12 * e.max(1.0));
    assert!((d - out.reports[last].dissipation_d_cum).abs() < 1e-12 * d.max(1.0));
    // running sup never decreases
    for i in 1..=last {
        assert!(energy::seminorm_e(&out.reports, i) >= energy::seminorm_e(&out.reports, i - 1));
    }
}

/// The nonlinear-term bounds: along a family of stable runs the fitted
/// constant in `int |R1| + int |R2| <= C |Psi|_E |Psi|_D^2` is finite and
/// stable across amplitudes and seeds, and the master inequality
/// `|Psi|_E^2 + |Psi|_D^2 <= C (|Psi|_E(0)^2 + |Psi|_E |Psi|_D^2)` holds
/// with a family-stable constant.
#[test]
fn nonlinear_term_bounds_family_stable() {
    let params = reference_params(1.0);
    let grid = SpectralGrid::shared(2, 16, 12.0).unwrap();
    let mut c_r = Vec::new();
    let mut c_master = Vec::new();
    for (amp, width) in [(0.02, 2.0), (0.05, 2.0), (0.1, 2.5)] {
        let profile = InitialProfile::Gaussian {
            amplitude: amp,
            width,
            center: None,
            weights: [0.0, 1.0, 0.5],
        };
        let dt = 2e-3;
        let (state, _) = StateVector::initial_default(&grid, &profile, &params, dt).unwrap();
        let config = SolverConfig {
            dt,
            t_end: 2.0,
            scheme: Scheme::Rk4,
            dealias: true,
            monitor_stride: 5,
        };
        let opts = SolveOptions {
            report_r_terms: true,
            ..Default::default()
        };
        let out = solver::solve(state, &params, &config, &opts).unwrap();
        assert!(out.blow_up.is_none());
        let reports = &out.reports;
        // trapezoid of |R1(v+tau w)| + |R1(w)| + |R2| tags over time
        let mut int_r = 0.0;
        for k in 1..reports.len() {
            let f = |r: &energy::EnergyReport| {
                r.r1_v_tau_w.abs()
                    + r.r1_w.abs()
                    + r.r2_v_tau_w.abs()
                    + r.r2_psi_tau_v.abs()
                    + r.r2_tau_v.abs()
            };
            int_r += 0.5 * (reports[k].t - reports[k - 1].t) * (f(&reports[k]) + f(&reports[k - 1]));
        }
        let last = reports.last().unwrap();
        let e_sup = last.seminorm_e;
        let d_cum = last.dissipation_d_cum;
        let denom = e_sup * d_cum * d_cum;
        assert!(denom > 0.0);
        c_r.push(int_r / denom);

        let e0_sq = reports[0].seminorm_e * reports[0].seminorm_e;
        let master = reports
            .iter()
            .map(|r| {
                let e = r.seminorm_e;
                let d = r.dissipation_d_cum;
                (e * e + d * d) / (e0_sq + e * d * d).max(1e-300)
            })
            .fold(0.0f64, f64::max);
        c_master.push(master);
    }
    for c in c_r.iter().chain(c_master.iter()) {
        assert!(c.is_finite() && *c >= 0.0, "fitted constant must be finite");
    }
    let spread = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
        let hi = v.iter().cloned().fold(0.0f64, f64::max);
        hi / lo
    };
    assert!(
        spread(&c_r) < 50.0,
        "R-bound constant unstable across the family: {c_r:?}"
    );
    assert!(
        spread(&c_master) < 50.0,
        "master-inequality constant unstable across the family: {c_master:?}"
    );
}

/// Adding the exponential memory does not improve the fitted whole-space
/// decay exponents over the memoryless model (the saturation observation).
#[test]
fn memory_does_not_improve_decay_exponents() {
    let t_grid = experiments::log_time_grid(600.0, 120);
    let fit_u = |params: &PhysicalParams| -> f64 {
        let spec = symbol::RadialSpectrum::gaussian_u0(3, 1024, 1e-3, 1e2, params.tau).unwrap();
        let rows = symbol::radial_norms(&spec, params, &t_grid).unwrap();
        let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let u: Vec<f64> = rows.iter().map(|r| r.norm_u_j0).collect();
        symbol::decay_fit(&ts, &u, (50.0, 600.0), "U").unwrap().slope
    };
    let with_memory = fit_u(&reference_params(0.0));
    let kz = KernelSpec::zero(1.0);
    let memoryless = fit_u(&PhysicalParams::new(0.5, 1.0, 0.1, 0.0, kz, false).unwrap());
    assert!(
        with_memory >= memoryless - 0.03,
        "memory must not improve the exponent: with {with_memory:.4}, without {memoryless:.4}"
    );
    assert!(
        (with_memory - memoryless).abs() < 0.05,
        "exponents should saturate at the same rate: {with_memory:.4} vs {memoryless:.4}"
    );
}

/// Empirical Gagliardo-Nirenberg checks on band-limited box fields:
/// `||grad u||_L4 <= C ||grad u||_L2^{1-n/4} ||grad^2 u||_L2^{n/4}` and the
/// L-infinity form `||v||_inf <= C ||grad^2 v||^{n/4} ||v||^{1-n/4}`; the
/// measured ratios must have a finite supremum.
#[test]
fn gagliardo_nirenberg_ratios_bounded() {
    use jmgt::field::{lp_norm, LpExponent};
    use jmgt::rng::SplitMix64;
    for dim in [2usize, 3] {
        let n = if dim == 3 { 12 } else { 24 };
        let grid = SpectralGrid::shared(dim, n, 9.0).unwrap();
        let mut rng = SplitMix64::new(4000 + dim as u64);
        let nf = dim as f64 / 4.0;
        let mut worst_grad = 0.0f64;
        let mut worst_inf = 0.0f64;
        for _ in 0..60 {
            let f = energy::random_field(&grid, &mut rng, 1.0);
            // |grad f|(x) from the per-axis derivative samples
            let mut grad_sq = vec![0.0f64; grid.total_points()];
            for axis in 0..dim {
                let d = f.derivative(axis).inverse_transform();
                for (g, s) in grad_sq.iter_mut().zip(d.iter()) {
                    *g += s * s;
                }
            }
            let grad_mag: Vec<f64> = grad_sq.iter().map(|g| g.sqrt()).collect();
            let grad_l4 = lp_norm(&grid, &grad_mag, LpExponent::P(4)).unwrap();
            let grad_l2 = f.sobolev_seminorm(1);
            let hess_l2 = f.sobolev_seminorm(2);
            if grad_l2 > 1e-12 && hess_l2 > 1e-12 {
                worst_grad = worst_grad
                    .max(grad_l4 / (grad_l2.powf(1.0 - nf) * hess_l2.powf(nf)));
            }
            let samples = f.inverse_transform();
            let f_inf = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            let f_l2 = f.sobolev_seminorm(0);
            if f_l2 > 1e-12 && hess_l2 > 1e-12 {
                worst_inf = worst_inf.max(f_inf / (hess_l2.powf(nf) * f_l2.powf(1.0 - nf)));
            }
        }
        assert!(
            worst_grad.is_finite() && worst_grad > 0.0 && worst_grad < 10.0,
            "dim {dim}: gradient interpolation constant {worst_grad}"
        );
        assert!(
            worst_inf.is_finite() && worst_inf > 0.0 && worst_inf < 10.0,
            "dim {dim}: L-infinity interpolation constant {worst_inf}"
        );
    }
}

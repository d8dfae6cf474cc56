//! The fixed-point map `T(Phi) = Psi` solving the linear system
//! `dPsi/dt - A Psi = F(Phi)` with the source frozen from the previous
//! iterate, plus contraction diagnostics in the energy semi-norm.
//!
//! The frozen source is sampled at the integrator's stage points, so the
//! discrete fixed point coincides with the direct nonlinear solution of the
//! same stepping scheme.

use crate::field::SpectralField;
use crate::params::PhysicalParams;
use crate::solver::{self, SolveOptions, SolverConfig, TrajectoryBuffer};
use crate::state::StateVector;
use crate::{JmgtError, Result};

/// Outcome of one Picard run: the fixed-point trajectory, the successive
/// iterate distances and their ratios.
#[derive(Debug)]
pub struct PicardOutcome {
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_state: StateVector,
    pub trajectory: TrajectoryBuffer,
}

/// Energy-seminorm distance between two trajectories on the same step grid:
/// `sup_t (scriptE1 + scriptE2 + ||w||^2)^{1/2}` of the difference state,
/// including the history terms (the snapshot rings subtract node by node).
pub fn trajectory_distance(
    a: &TrajectoryBuffer,
    b: &TrajectoryBuffer,
    a_hist: &crate::history::HistoryField,
    b_hist: &crate::history::HistoryField,
    params: &PhysicalParams,
) -> Result<f64> {
    if a.samples.len() != b.samples.len() {
        return Err(JmgtError::Invalid(format!(
            "trajectories have different step grids: {} vs {} samples",
            a.samples.len(),
            b.samples.len()
        )));
    }
    let tau = params.tau;
    let mut sup = 0.0f64;
    for (sa, sb) in a.samples.iter().zip(b.samples.iter()) {
        let mut dpsi = sa.psi.clone();
        dpsi.axpy(-1.0, &sb.psi);
        let mut dv = sa.v.clone();
        dv.axpy(-1.0, &sb.v);
        let mut dw = sa.w.clone();
        dw.axpy(-1.0, &sb.w);
        let mut da = dpsi.clone();
        da.axpy(tau, &dv);
        let mut du2 = dv.clone();
        du2.axpy(tau, &dw);
        let e_sq = da.sobolev_sq(1)
            + da.sobolev_sq(2)
            + du2.sobolev_sq(0)
            + du2.sobolev_sq(1)
            + dv.sobolev_sq(1)
            + dv.sobolev_sq(2)
            + dw.sobolev_sq(0);
        sup = sup.max(e_sq);
    }
    // history difference terms at the final instant (rings required)
    if !params.kernel.is_zero() {
        if let (Some(_), Some(_)) = (a_hist.ring(), b_hist.ring()) {
            for order in [1u32, 2] {
                sup = sup.max(eta_difference_norm_sq(a_hist, b_hist, params, order)?);
            }
        }
    }
    Ok(sup.sqrt())
}

/// `|| grad^order (eta_a - eta_b) ||^2_{-g'}` from two snapshot rings on the
/// same step grid.
fn eta_difference_norm_sq(
    a: &crate::history::HistoryField,
    b: &crate::history::HistoryField,
    params: &PhysicalParams,
    order: u32,
) -> Result<f64> {
    let (Some(ra), Some(rb)) = (a.ring(), b.ring()) else {
        return Ok(0.0);
    };
    let n = a.node_count().min(b.node_count());
    let dt = a.dt();
    let kernel = &params.kernel;
    let mut da_last = a.psi_last().clone();
    da_last.axpy(-1.0, b.psi_last());
    let mut acc = 0.0;
    for j in 1..=n {
        let w = if j == n { 0.5 * dt } else { dt };
        let g = kernel.eval(j as f64 * dt)? / kernel.tau_k;
        let mut d = da_last.clone();
        d.axpy(-1.0, &ra[j]);
        d.axpy(1.0, &rb[j]);
        acc += w * g * d.sobolev_sq(order);
    }
    acc += kernel.tail_mass(n as f64 * dt) / kernel.tau_k * da_last.sobolev_sq(order);
    Ok(acc)
}

/// Run the Picard iteration from the zero-source first iterate up to
/// `max_iter` or until successive distances fall below `tol`.
pub fn picard_map(
    init: &StateVector,
    params: &PhysicalParams,
    dt: f64,
    t_end: f64,
    dealias: bool,
    max_iter: usize,
    tol: f64,
) -> Result<PicardOutcome> {
    let steps = (t_end / dt).round() as usize;
    if steps == 0 {
        return Err(JmgtError::Invalid("picard horizon shorter than one step".into()));
    }
    let zero = SpectralField::zeros(init.grid());
    let mut frozen: Vec<[SpectralField; 4]> = (0..steps)
        .map(|_| [zero.clone(), zero.clone(), zero.clone(), zero.clone()])
        .collect();

    let mut prev: Option<(TrajectoryBuffer, StateVector)> = None;
    let mut distances = Vec::new();
    let mut converged = false;
    let mut last: Option<(TrajectoryBuffer, StateVector)> = None;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let (state, trajectory, own_products) = {
            let (s, t, p) =
                solver::solve_linear_frozen(init.clone(), params, dt, steps, dealias, &frozen, true)?;
            (s, t.unwrap(), p)
        };
        frozen = own_products;
        if let Some((pt, ps)) = prev.as_ref() {
            let d = trajectory_distance(&trajectory, pt, &state.history, &ps.history, params)?;
            distances.push(d);
            if d < tol {
                converged = true;
                last = Some((trajectory, state));
                break;
            }
        }
        prev = Some((trajectory.clone(), state.clone()));
        last = Some((trajectory, state));
    }

    let ratios = distances
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let (trajectory, final_state) = last.expect("at least one iteration");
    Ok(PicardOutcome {
        distances,
        ratios,
        iterations,
        converged,
        final_state,
        trajectory,
    })
}

/// Direct nonlinear solve on the same grid/stepping, for fixed-point
/// comparison.
pub fn direct_nonlinear(
    init: &StateVector,
    params: &PhysicalParams,
    dt: f64,
    t_end: f64,
    dealias: bool,
) -> Result<(TrajectoryBuffer, StateVector)> {
    let config = SolverConfig {
        dt,
        t_end,
        scheme: solver::Scheme::Rk4,
        dealias,
        monitor_stride: usize::MAX,
    };
    let opts = SolveOptions {
        record_trajectory: true,
        ..Default::default()
    };
    let out = solver::solve(init.clone(), params, &config, &opts)?;
    if let Some(b) = out.blow_up {
        return Err(JmgtError::BlowUp {
            t: b.t,
            reason: b.reason,
        });
    }
    Ok((out.trajectory.unwrap(), out.state))
}

/// Contraction diagnostics summary used by the verification harness.
pub fn max_ratio(outcome: &PicardOutcome) -> f64 {
    outcome.ratios.iter().cloned().fold(0.0f64, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::kernel::KernelSpec;
    use crate::state::InitialProfile;

    fn params(k: f64) -> PhysicalParams {
        PhysicalParams::new(0.5, 1.0, 0.1, k, KernelSpec::new(0.1, 1.0, 0.5).unwrap(), false)
            .unwrap()
    }

    #[test]
    fn zero_data_zero_source_fixed_point_immediately() {
        let g = SpectralGrid::shared(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        let p = params(1.0);
        let profile = InitialProfile::SingleMode {
            mode: [1, 0, 0],
            amplitudes: [0.0, 0.0, 0.0],
        };
        let (init, _) = StateVector::initial_default(&g, &profile, &p, 0.01).unwrap();
        let out = picard_map(&init, &p, 0.01, 0.1, true, 6, 1e-14).unwrap();
        assert!(out.converged);
        assert!(out.distances.iter().all(|&d| d < 1e-14));
        assert_eq!(out.final_state.psi.max_coeff_norm(), 0.0);
    }
}

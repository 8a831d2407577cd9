//! Sweep orchestration: epsilon sweeps on a fixed grid and joint
//! `(epsilon, h, dt)` refinement studies, with the cross-run metrics that
//! make "uniform in epsilon" and "converges as epsilon vanishes" checkable
//! statements.
//!
//! The subsequence extraction of the underlying theory is non-constructive;
//! the harness instead checks the stronger full-sequence Cauchy property on
//! the configured epsilon ladder, which is what a finite computation can
//! falsify.

use crate::diagnostics::{
    estimate_monitors, momentum_dictionary, temperature_dictionary, weak_residual_momentum,
    weak_residual_temperature, DiagnosticsError, MonitorParams,
};
use crate::grid::Grid;
use crate::model::{CoefficientSpec, InitialPreset, ModelError, RegularizedProblem};
use crate::norms::trapezoid;
use crate::operators::{build_operators, OperatorSet};
use crate::solver::{run, RunConfig, SolverError, Trajectory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("mismatched grids: {0}")]
    MismatchedGrids(String),
    #[error("non-nested grids: {0}")]
    NonNestedGrids(String),
    #[error("bad plan: {0}")]
    BadPlan(String),
    #[error("run for epsilon = {eps} failed: {source}")]
    RunFailed { eps: f64, source: SolverError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Declarative description of a sweep. For epsilon sweeps all entries of
/// `grids` and `dt_list` must agree (single-element lists are broadcast);
/// for refinement sweeps the lists advance together level by level.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub eps_list: Vec<f64>,
    pub grids: Vec<Grid>,
    pub dt_list: Vec<f64>,
    pub coeff: CoefficientSpec,
    pub preset: InitialPreset,
    pub t_end: f64,
    pub monitor: MonitorParams,
    pub snapshot_stride: usize,
    pub mollify_m0: usize,
    pub blowup_threshold: f64,
    pub solver_tol: f64,
}

impl SweepPlan {
    fn validate_common(&self) -> Result<(), SweepError> {
        if self.eps_list.is_empty() {
            return Err(SweepError::BadPlan("empty epsilon list".into()));
        }
        if !self.eps_list.windows(2).all(|w| w[1] < w[0]) {
            return Err(SweepError::BadPlan(
                "epsilon list must be strictly decreasing".into(),
            ));
        }
        if self.grids.is_empty() || self.dt_list.is_empty() {
            return Err(SweepError::BadPlan("empty grid or dt list".into()));
        }
        Ok(())
    }
}

/// Per-run summary: identification, the cumulative monitors at final time,
/// and (for refinement sweeps) the dictionary-maximal weak residuals.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub eps: f64,
    pub nodes: [usize; 2],
    pub spacing: [f64; 2],
    pub dt: f64,
    pub monitors: Vec<(String, f64)>,
    pub final_energy: f64,
    pub final_theta_mass: f64,
    pub res_momentum: f64,
    pub res_temperature: f64,
}

/// Distances between consecutive-epsilon runs.
#[derive(Clone, Copy, Debug)]
pub struct CauchyRow {
    pub eps_hi: f64,
    pub eps_lo: f64,
    pub d_v: f64,
    pub d_u: f64,
    pub d_theta: f64,
    pub d_flux: f64,
}

/// Least-squares order fit on log-log data.
#[derive(Clone, Debug)]
pub struct OrderFit {
    pub order: f64,
    pub note: String,
}

/// Fit `residual ~ C h^order` by least squares on `(ln h, ln residual)`.
/// Degenerate inputs (fewer than two distinct `h`, nonpositive residuals)
/// yield a NaN order with an explanation instead of a number.
pub fn fit_order(levels: &[(f64, f64)]) -> OrderFit {
    if levels.len() < 2 {
        return OrderFit {
            order: f64::NAN,
            note: "need at least two levels".into(),
        };
    }
    if levels.iter().any(|&(h, r)| h <= 0.0 || r <= 0.0) {
        return OrderFit {
            order: f64::NAN,
            note: "nonpositive level data; log-log fit undefined".into(),
        };
    }
    let xs: Vec<f64> = levels.iter().map(|&(h, _)| h.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|&(_, r)| r.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    if sxx == 0.0 {
        return OrderFit {
            order: f64::NAN,
            note: "identical levels; order undefined".into(),
        };
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    OrderFit {
        order: sxy / sxx,
        note: String::new(),
    }
}

/// Full sweep output.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub runs: Vec<RunRecord>,
    pub cauchy: Vec<CauchyRow>,
    pub order_momentum: Option<OrderFit>,
    pub order_temperature: Option<OrderFit>,
    /// max/min across runs of each monitor's final value.
    pub monitor_ratios: Vec<(String, f64)>,
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    std::env::var("THERMOVISC_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .and_then(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .ok()
        })
}

fn execute_runs(
    jobs: Vec<(f64, Grid, f64)>,
    plan: &SweepPlan,
) -> Result<Vec<Trajectory>, SweepError> {
    use rayon::prelude::*;
    let one = |&(eps, grid, dt): &(f64, Grid, f64)| -> Result<Trajectory, SweepError> {
        let ops = build_operators(&grid).map_err(|e| SweepError::BadPlan(e.to_string()))?;
        let data = plan.preset.realize(&grid)?;
        let problem = RegularizedProblem::new(&data, &plan.coeff, eps, &ops, plan.mollify_m0)?;
        let cfg = RunConfig {
            epsilon: eps,
            dt,
            t_end: plan.t_end,
            blowup_threshold: plan.blowup_threshold,
            clip_theta: false,
            solver_tol: plan.solver_tol,
            snapshot_stride: plan.snapshot_stride,
        };
        run(&problem, &cfg, &grid).map_err(|e| SweepError::RunFailed { eps, source: e })
    };
    // results are collected in job order, so scheduling cannot affect output
    match thread_pool() {
        Some(pool) => pool.install(|| jobs.par_iter().map(one).collect()),
        None => jobs.par_iter().map(one).collect(),
    }
}

fn record_run(
    traj: &Trajectory,
    ops: &OperatorSet,
    plan: &SweepPlan,
) -> Result<RunRecord, SweepError> {
    let monitors = estimate_monitors(traj, ops, &plan.monitor)?;
    Ok(RunRecord {
        eps: traj.epsilon,
        nodes: traj.grid.nodes,
        spacing: traj.grid.spacing,
        dt: traj.dt,
        monitors: monitors
            .iter()
            .map(|s| (s.name.clone(), s.final_value()))
            .collect(),
        final_energy: traj.ledger.last().unwrap().energy,
        final_theta_mass: traj.ledger.last().unwrap().theta_mass,
        res_momentum: f64::NAN,
        res_temperature: f64::NAN,
    })
}

fn monitor_ratios(runs: &[RunRecord]) -> Vec<(String, f64)> {
    if runs.is_empty() {
        return Vec::new();
    }
    runs[0]
        .monitors
        .iter()
        .map(|(name, _)| {
            let vals: Vec<f64> = runs
                .iter()
                .map(|r| {
                    r.monitors
                        .iter()
                        .find(|(n, _)| n == name)
                        .map(|(_, v)| *v)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            (name.clone(), max / min)
        })
        .collect()
}

/// Space-time `L^2` distance between two runs' velocity snapshots.
fn dist_v(a: &Trajectory, b: &Trajectory, ops: &OperatorSet) -> f64 {
    let sq: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            let diff: Vec<f64> = sa
                .v
                .values
                .iter()
                .zip(&sb.v.values)
                .map(|(x, y)| x - y)
                .collect();
            let l2 = ops.l2_nodes(&diff);
            l2 * l2
        })
        .collect();
    trapezoid(&a.times, &sq).sqrt()
}

/// Uniform-in-time `L^2` distance between displacement snapshots.
fn dist_u(a: &Trajectory, b: &Trajectory, ops: &OperatorSet) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            let diff: Vec<f64> = sa
                .u
                .values
                .iter()
                .zip(&sb.u.values)
                .map(|(x, y)| x - y)
                .collect();
            ops.l2_nodes(&diff)
        })
        .fold(0.0, f64::max)
}

/// Space-time `L^q` distance between temperature snapshots.
fn dist_theta(a: &Trajectory, b: &Trajectory, ops: &OperatorSet, q: f64) -> f64 {
    let sp: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            sa.theta
                .values
                .iter()
                .zip(&sb.theta.values)
                .zip(ops.node_weights())
                .map(|((x, y), w)| w * (x - y).abs().powf(q))
                .sum()
        })
        .collect();
    trapezoid(&a.times, &sp).powf(1.0 / q)
}

/// Space-time `L^2` distance between the weighted flux fields
/// `sqrt(gamma(theta)) grad v`, the quantity whose strong convergence
/// carries the quadratic heating term to its limit.
fn dist_flux(a: &Trajectory, b: &Trajectory, ops: &OperatorSet) -> f64 {
    let flux_of = |traj: &Trajectory, k: usize| {
        let theta = &traj.states[k].theta.values;
        let gamma: Vec<f64> = theta
            .iter()
            .map(|&t| crate::model::eval_gamma(&traj.coeff, t.max(0.0)).expect("nonnegative"))
            .collect();
        let gamma_f = ops.face_average(&gamma);
        let mut dv = ops.grad(&traj.states[k].v);
        for ax in 0..2 {
            for (d, g) in dv.comps[ax].iter_mut().zip(&gamma_f.comps[ax]) {
                *d *= g.sqrt();
            }
        }
        dv
    };
    let sq: Vec<f64> = (0..a.states.len())
        .map(|k| {
            let fa = flux_of(a, k);
            let fb = flux_of(b, k);
            let mut s = 0.0;
            for ax in 0..2 {
                s += fa.comps[ax]
                    .iter()
                    .zip(&fb.comps[ax])
                    .zip(ops.face_weights(ax))
                    .map(|((x, y), w)| w * (x - y) * (x - y))
                    .sum::<f64>();
            }
            s
        })
        .collect();
    trapezoid(&a.times, &sq).sqrt()
}

/// Run the plan's epsilon ladder on one fixed grid and time step, recording
/// per-run monitors and consecutive-pair distances.
pub fn run_eps_sweep(plan: &SweepPlan) -> Result<SweepReport, SweepError> {
    plan.validate_common()?;
    let grid = plan.grids[0];
    for g in &plan.grids[1..] {
        if g.nodes != grid.nodes || !g.same_domain(&grid) {
            return Err(SweepError::MismatchedGrids(format!(
                "epsilon sweep requires one grid, got {:?} and {:?}",
                grid.nodes, g.nodes
            )));
        }
    }
    let dt = plan.dt_list[0];
    if plan.dt_list.iter().any(|&d| (d - dt).abs() > 1e-15) {
        return Err(SweepError::BadPlan(
            "epsilon sweep requires a single time step".into(),
        ));
    }
    let jobs: Vec<(f64, Grid, f64)> = plan.eps_list.iter().map(|&e| (e, grid, dt)).collect();
    let trajs = execute_runs(jobs, plan)?;
    let ops = build_operators(&grid).map_err(|e| SweepError::BadPlan(e.to_string()))?;

    let runs: Vec<RunRecord> = trajs
        .iter()
        .map(|t| record_run(t, &ops, plan))
        .collect::<Result<_, _>>()?;
    let cauchy: Vec<CauchyRow> = trajs
        .windows(2)
        .map(|w| CauchyRow {
            eps_hi: w[0].epsilon,
            eps_lo: w[1].epsilon,
            d_v: dist_v(&w[0], &w[1], &ops),
            d_u: dist_u(&w[0], &w[1], &ops),
            d_theta: dist_theta(&w[0], &w[1], &ops, plan.monitor.q),
            d_flux: dist_flux(&w[0], &w[1], &ops),
        })
        .collect();
    let monitor_ratios = monitor_ratios(&runs);
    Ok(SweepReport {
        runs,
        cauchy,
        order_momentum: None,
        order_temperature: None,
        monitor_ratios,
    })
}

/// Run the joint refinement ladder (grids nested, `dt` halved, `epsilon`
/// shrinking alongside) and fit the decay order of the dictionary-maximal
/// weak residuals.
pub fn run_refinement_sweep(plan: &SweepPlan) -> Result<SweepReport, SweepError> {
    plan.validate_common()?;
    let levels = plan.eps_list.len();
    if plan.grids.len() != levels || plan.dt_list.len() != levels {
        return Err(SweepError::BadPlan(format!(
            "need matching list lengths, got {} eps, {} grids, {} dts",
            levels,
            plan.grids.len(),
            plan.dt_list.len()
        )));
    }
    for w in plan.grids.windows(2) {
        if !w[0].same_domain(&w[1]) {
            return Err(SweepError::NonNestedGrids("domains differ".into()));
        }
        for ax in 0..w[0].dim {
            if w[1].nodes[ax] - 1 != 2 * (w[0].nodes[ax] - 1) {
                return Err(SweepError::NonNestedGrids(format!(
                    "axis {ax}: {} nodes do not refine {} nodes",
                    w[1].nodes[ax], w[0].nodes[ax]
                )));
            }
        }
    }
    for w in plan.dt_list.windows(2) {
        if (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0] {
            return Err(SweepError::BadPlan(
                "refinement sweep requires dt halving level to level".into(),
            ));
        }
    }
    let jobs: Vec<(f64, Grid, f64)> = plan
        .eps_list
        .iter()
        .zip(&plan.grids)
        .zip(&plan.dt_list)
        .map(|((&e, &g), &d)| (e, g, d))
        .collect();
    let trajs = execute_runs(jobs, plan)?;

    let mut runs = Vec::new();
    let mut mom_levels = Vec::new();
    let mut temp_levels = Vec::new();
    for traj in &trajs {
        let ops = build_operators(&traj.grid).map_err(|e| SweepError::BadPlan(e.to_string()))?;
        let mut rec = record_run(traj, &ops, plan)?;
        let mdict = momentum_dictionary(&ops, plan.t_end, traj.dt);
        let tdict = temperature_dictionary(&ops, plan.t_end, traj.dt);
        let mut worst_m = 0.0f64;
        for phi in &mdict.entries {
            worst_m = worst_m.max(weak_residual_momentum(traj, &ops, phi)?);
        }
        let mut worst_t = 0.0f64;
        for phi in &tdict.entries {
            worst_t = worst_t.max(weak_residual_temperature(traj, &ops, phi)?);
        }
        rec.res_momentum = worst_m;
        rec.res_temperature = worst_t;
        let h = traj.grid.spacing[0];
        mom_levels.push((h, worst_m));
        temp_levels.push((h, worst_t));
        runs.push(rec);
    }
    let monitor_ratios = monitor_ratios(&runs);
    Ok(SweepReport {
        runs,
        cauchy: Vec::new(),
        order_momentum: Some(fit_order(&mom_levels)),
        order_temperature: Some(fit_order(&temp_levels)),
        monitor_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoeffKind;

    fn base_plan(grid: Grid, eps_list: Vec<f64>, dt: f64) -> SweepPlan {
        SweepPlan {
            eps_list,
            grids: vec![grid],
            dt_list: vec![dt],
            coeff: CoefficientSpec::default(),
            preset: InitialPreset::default(),
            t_end: 0.1,
            monitor: MonitorParams::defaults(grid.dim),
            snapshot_stride: 1,
            mollify_m0: 16,
            blowup_threshold: 1e6,
            solver_tol: 1e-12,
        }
    }

    #[test]
    fn single_epsilon_yields_empty_cauchy_table() {
        let grid = Grid::new_1d(1.0, 17).unwrap();
        let report = run_eps_sweep(&base_plan(grid, vec![1e-2], 1e-3)).unwrap();
        assert!(report.cauchy.is_empty());
        assert_eq!(report.runs.len(), 1);
        assert!(report.runs[0].final_energy.is_finite());
    }

    #[test]
    fn zero_mechanical_data_is_epsilon_independent() {
        let grid = Grid::new_1d(1.0, 17).unwrap();
        let mut plan = base_plan(grid, vec![1e-1, 1e-2, 1e-3], 1e-3);
        plan.preset = InitialPreset::Indicator { level: 1.0 };
        plan.coeff = CoefficientSpec {
            gamma_kind: CoeffKind::Constant,
            gamma_params: vec![1.0],
            f_kind: CoeffKind::Constant,
            f_params: vec![0.0],
            ..CoefficientSpec::default()
        };
        let report = run_eps_sweep(&plan).unwrap();
        for row in &report.cauchy {
            assert_eq!(row.d_v, 0.0, "v must be identically zero for all eps");
            assert_eq!(row.d_u, 0.0, "u must be identically zero for all eps");
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = Grid::new_1d(1.0, 17).unwrap();
        let g2 = Grid::new_1d(1.0, 33).unwrap();
        let mut plan = base_plan(g1, vec![1e-1, 1e-2], 1e-3);
        plan.grids = vec![g1, g2];
        assert!(matches!(
            run_eps_sweep(&plan),
            Err(SweepError::MismatchedGrids(_))
        ));
    }

    #[test]
    fn fit_order_on_manufactured_data() {
        let fit = fit_order(&[(1.0, 8.0), (0.5, 4.0), (0.25, 2.0)]);
        assert!((fit.order - 1.0).abs() < 1e-6, "order {}", fit.order);
        let degenerate = fit_order(&[(0.5, 1.0), (0.5, 1.0)]);
        assert!(degenerate.order.is_nan());
        assert!(!degenerate.note.is_empty());
    }

    #[test]
    fn refinement_rejects_non_nested_grids() {
        let g1 = Grid::new_1d(1.0, 17).unwrap();
        let g2 = Grid::new_1d(1.0, 31).unwrap(); // not 2^n + 1 refinement
        let mut plan = base_plan(g1, vec![2e-1, 1e-1], 2e-3);
        plan.grids = vec![g1, g2];
        plan.dt_list = vec![2e-3, 1e-3];
        assert!(matches!(
            run_refinement_sweep(&plan),
            Err(SweepError::NonNestedGrids(_))
        ));
    }

    #[test]
    fn tiny_refinement_sweep_produces_orders() {
        let g1 = Grid::new_1d(1.0, 17).unwrap();
        let g2 = Grid::new_1d(1.0, 33).unwrap();
        let mut plan = base_plan(g1, vec![2e-1, 1e-1], 4e-3);
        plan.grids = vec![g1, g2];
        plan.dt_list = vec![4e-3, 2e-3];
        plan.t_end = 0.2;
        let report = run_refinement_sweep(&plan).unwrap();
        let om = report.order_momentum.unwrap();
        let ot = report.order_temperature.unwrap();
        assert!(om.order.is_finite(), "momentum order: {}", om.note);
        assert!(ot.order.is_finite(), "temperature order: {}", ot.note);
        assert!(report.runs[1].res_momentum < report.runs[0].res_momentum);
    }
}

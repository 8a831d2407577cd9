//! Steklov time averages with hat-extensions into negative time.
//!
//! The average `(S_h phi)(t) = (1/h) int_{t-h}^t phi(s) ds` turns time
//! derivatives into difference quotients: with the displacement extended by
//! `u0 + t * v0` for `t < 0` and the velocity by `v0`, the identity
//!
//! ```text
//! S_h(grad v_hat)(t) = (grad u_hat(t) - grad u_hat(t - h)) / h
//! ```
//!
//! holds for every `t` and `h`. Discretely both sides are built from the
//! same trapezoid sums, so the identity survives as a telescoping fact and
//! the check below measures pure bookkeeping error.

use super::monitors::DiagnosticsError;
use crate::grid::{BcTag, FieldScalar};
use crate::norms::trapezoid;
use crate::operators::OperatorSet;
use crate::solver::Trajectory;

/// Closed-form linear-in-time extension for `t < 0`:
/// `value(t) = base + t * slope`.
#[derive(Clone, Debug)]
pub struct HatExtension {
    pub base: Vec<f64>,
    pub slope: Vec<f64>,
}

/// Uniformly sampled field history on `[0, T]` plus its hat extension.
#[derive(Clone, Debug)]
pub struct FieldHistory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub hat: HatExtension,
}

impl FieldHistory {
    pub fn dt(&self) -> Result<f64, DiagnosticsError> {
        if self.times.len() < 2 {
            return Err(DiagnosticsError::InsufficientHistory(
                "need at least two samples".into(),
            ));
        }
        let dt = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
                return Err(DiagnosticsError::InsufficientHistory(
                    "history is not uniformly sampled".into(),
                ));
            }
        }
        Ok(dt)
    }

    /// Velocity history of a trajectory with its constant hat extension.
    pub fn velocity_of(traj: &Trajectory) -> FieldHistory {
        let v0 = traj.states[0].v.values.clone();
        FieldHistory {
            times: traj.times.clone(),
            fields: traj.states.iter().map(|s| s.v.values.clone()).collect(),
            hat: HatExtension {
                slope: vec![0.0; v0.len()],
                base: v0,
            },
        }
    }

    /// Displacement history reconstructed by trapezoid accumulation of the
    /// velocity snapshots (the quadrature-consistent `u_hat`), with the
    /// linear hat extension.
    pub fn displacement_of(traj: &Trajectory) -> FieldHistory {
        let u0 = traj.states[0].u.values.clone();
        let v0 = traj.states[0].v.values.clone();
        let mut fields = vec![u0.clone()];
        let mut acc = u0.clone();
        for n in 1..traj.states.len() {
            let dt = traj.times[n] - traj.times[n - 1];
            for (a, (vn, vp)) in acc
                .iter_mut()
                .zip(traj.states[n].v.values.iter().zip(&traj.states[n - 1].v.values))
            {
                *a += 0.5 * dt * (vn + vp);
            }
            fields.push(acc.clone());
        }
        FieldHistory {
            times: traj.times.clone(),
            fields,
            hat: HatExtension { base: u0, slope: v0 },
        }
    }

    fn field_at_index(&self, n: usize) -> &[f64] {
        &self.fields[n]
    }
}

/// `(1/h) int_{t-h}^t phi(s) ds`: trapezoid over the stored samples, with
/// any `s < 0` part integrated in closed form from the hat extension.
/// `t` must land on a stored sample and `h` must be a positive multiple of
/// the sampling step.
pub fn steklov_average(
    hist: &FieldHistory,
    h: f64,
    t: f64,
) -> Result<FieldScalar, DiagnosticsError> {
    let dt = hist.dt()?;
    if h <= 0.0 {
        return Err(DiagnosticsError::HNotMultipleOfDt { h, dt });
    }
    let steps = h / dt;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(DiagnosticsError::HNotMultipleOfDt { h, dt });
    }
    let t_idx = (t - hist.times[0]) / dt;
    if t_idx < -1e-9 || (t_idx - t_idx.round()).abs() > 1e-9 {
        return Err(DiagnosticsError::InsufficientHistory(format!(
            "t = {t} is not a stored sample"
        )));
    }
    let n_end = t_idx.round() as usize;
    if n_end >= hist.times.len() {
        return Err(DiagnosticsError::InsufficientHistory(format!(
            "t = {t} beyond stored history"
        )));
    }
    let m = steps.round() as usize;
    let nvals = hist.fields[0].len();
    let mut integral = vec![0.0; nvals];

    // negative-time part [t - h, min(0, t)] in closed form
    let a = t - h;
    let b = 0.0f64.min(t);
    if a < 0.0 {
        let len = b - a;
        let quad = 0.5 * (b * b - a * a);
        for k in 0..nvals {
            integral[k] += len * hist.hat.base[k] + quad * hist.hat.slope[k];
        }
    }
    // stored part [max(0, t - h), t] by trapezoid
    let n_start = if a < 0.0 { 0 } else { n_end - m };
    for n in n_start..n_end {
        let f0 = hist.field_at_index(n);
        let f1 = hist.field_at_index(n + 1);
        for k in 0..nvals {
            integral[k] += 0.5 * dt * (f0[k] + f1[k]);
        }
    }
    for v in integral.iter_mut() {
        *v /= h;
    }
    Ok(FieldScalar {
        values: integral,
        bc: BcTag::Navier,
    })
}

/// Maximum over all stored times of the sup-norm gap between
/// `S_h(grad v_hat)` and the difference quotient of `grad u_hat`.
///
/// Both sides are built on faces: the gradient of `u_hat` is reconstructed
/// by trapezoid accumulation of the velocity gradients (the same rule the
/// average uses), so the comparison telescopes exactly and measures only
/// rounding. Working at the gradient level keeps that rounding free of
/// `1/h` amplification.
pub fn steklov_identity_check(
    traj: &Trajectory,
    ops: &OperatorSet,
    h: f64,
) -> Result<f64, DiagnosticsError> {
    let times = &traj.times;
    if times.len() < 2 {
        return Err(DiagnosticsError::InsufficientHistory(
            "need at least two samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(DiagnosticsError::InsufficientHistory(
                "history is not uniformly sampled".into(),
            ));
        }
    }
    let steps = h / dt;
    if h <= 0.0 || (steps - steps.round()).abs() > 1e-9 {
        return Err(DiagnosticsError::HNotMultipleOfDt { h, dt });
    }
    let m = steps.round() as usize;

    // flattened face-gradient histories of v and of the reconstructed u
    let flatten = |f: &crate::grid::FieldVector| -> Vec<f64> {
        let mut out = f.comps[0].clone();
        out.extend_from_slice(&f.comps[1]);
        out
    };
    let gv: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| flatten(&ops.grad(&s.v)))
        .collect();
    let gv0 = gv[0].clone();
    let gu0 = flatten(&ops.grad(&traj.states[0].u));
    let mut gu = vec![gu0.clone()];
    let mut acc = gu0.clone();
    for n in 1..gv.len() {
        for (a, (x, y)) in acc.iter_mut().zip(gv[n].iter().zip(&gv[n - 1])) {
            *a += 0.5 * dt * (x + y);
        }
        gu.push(acc.clone());
    }

    let nfaces = gv0.len();
    let mut worst = 0.0f64;
    for (n, &t) in times.iter().enumerate() {
        // S_h of the gradient-velocity history at t
        let mut window = vec![0.0; nfaces];
        let a = t - h;
        if a < 0.0 {
            let len = 0.0f64.min(t) - a;
            for (wv, g0) in window.iter_mut().zip(&gv0) {
                *wv += len * g0;
            }
        }
        let n_start = if a < 0.0 { 0 } else { n - m };
        for k in n_start..n {
            for (wv, (x, y)) in window.iter_mut().zip(gv[k + 1].iter().zip(&gv[k])) {
                *wv += 0.5 * dt * (x + y);
            }
        }
        // difference quotient of the reconstructed displacement gradient
        let back: Vec<f64> = if n >= m {
            gu[n - m].clone()
        } else {
            let s = t - h;
            gu0.iter().zip(&gv0).map(|(b, sl)| b + s * sl).collect()
        };
        for k in 0..nfaces {
            let lhs = window[k] / h;
            let rhs = (gu[n][k] - back[k]) / h;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Space-time `L^2` distance between `S_h v` and `v`, used to observe
/// `S_h v -> v` as `h` shrinks.
pub fn steklov_convergence_distance(
    traj: &Trajectory,
    ops: &OperatorSet,
    h: f64,
) -> Result<f64, DiagnosticsError> {
    let vh = FieldHistory::velocity_of(traj);
    let mut sq = Vec::with_capacity(vh.times.len());
    for (n, &t) in vh.times.iter().enumerate() {
        let avg = steklov_average(&vh, h, t)?;
        let diff: Vec<f64> = avg
            .values
            .iter()
            .zip(&traj.states[n].v.values)
            .map(|(a, b)| a - b)
            .collect();
        let l2 = ops.l2_nodes(&diff);
        sq.push(l2 * l2);
    }
    Ok(trapezoid(&vh.times, &sq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::{CoefficientSpec, InitialData};
    use crate::operators::build_operators;
    use crate::solver::{LedgerRow, State, Trajectory};

    fn synthetic_trajectory(
        grid: &Grid,
        steps: usize,
        dt: f64,
        v_at: impl Fn(f64, f64, f64) -> f64,
        u_at: impl Fn(f64, f64, f64) -> f64,
    ) -> Trajectory {
        let mut times = Vec::new();
        let mut states = Vec::new();
        for k in 0..=steps {
            let t = k as f64 * dt;
            times.push(t);
            states.push(State {
                t,
                v: FieldScalar::from_fn(grid, BcTag::Navier, |x, y| v_at(x, y, t)),
                u: FieldScalar::from_fn(grid, BcTag::Dirichlet, |x, y| u_at(x, y, t)),
                theta: FieldScalar::zeros(grid, BcTag::Neumann),
            });
        }
        let initial = InitialData::new(
            grid,
            states[0].u.clone(),
            states[0].v.clone(),
            states[0].theta.clone(),
        )
        .unwrap();
        Trajectory {
            grid: *grid,
            epsilon: 1e-2,
            dt,
            coeff: CoefficientSpec::default(),
            times,
            states,
            ledger: vec![LedgerRow {
                step: 0,
                t: 0.0,
                energy: 0.0,
                diss_bilap: 0.0,
                diss_lap_u: 0.0,
                num_diss_v: 0.0,
                num_diss_u: 0.0,
                residual: 0.0,
                theta_mass: 0.0,
                theta_source: 0.0,
            }],
            clipped_mass: Vec::new(),
            initial,
        }
    }

    #[test]
    fn average_of_constant_history_is_constant() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let traj = synthetic_trajectory(&g, 8, 0.125, |x, _, _| x * (1.0 - x), |_, _, _| 0.0);
        let vh = FieldHistory::velocity_of(&traj);
        let avg = steklov_average(&vh, 0.5, 0.5).unwrap();
        for (a, b) in avg.values.iter().zip(&traj.states[0].v.values) {
            assert!((a - b).abs() < 1e-14);
        }
        // window reaching below zero uses the constant extension
        let avg = steklov_average(&vh, 0.5, 0.125).unwrap();
        for (a, b) in avg.values.iter().zip(&traj.states[0].v.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_segment_mean_with_linear_growth() {
        // v(x, s) = g(x) (1 + s) for s >= 0, v_hat = g(x) for s < 0;
        // with t = h/2 the exact mean is g(x) (1 + h/8), and trapezoid is
        // exact on the linear segments.
        let g = Grid::new_1d(1.0, 9).unwrap();
        let dt = 0.125;
        let traj = synthetic_trajectory(
            &g,
            8,
            dt,
            |x, _, s| x * (1.0 - x) * (1.0 + s),
            |_, _, _| 0.0,
        );
        let vh = FieldHistory::velocity_of(&traj);
        let h = 4.0 * dt; // t = h/2 = 2 dt is a stored sample
        let avg = steklov_average(&vh, h, h / 2.0).unwrap();
        for (a, b) in avg.values.iter().zip(&traj.states[0].v.values) {
            assert!((a - b * (1.0 + h / 8.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn one_interval_average_is_midpoint_of_neighbours() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let dt = 0.125;
        let traj = synthetic_trajectory(&g, 8, dt, |x, _, s| x * (1.0 - x) * s * s, |_, _, _| 0.0);
        let vh = FieldHistory::velocity_of(&traj);
        let n = 4;
        let avg = steklov_average(&vh, dt, n as f64 * dt).unwrap();
        for (k, a) in avg.values.iter().enumerate() {
            let want = 0.5 * (traj.states[n - 1].v.values[k] + traj.states[n].v.values[k]);
            assert!((a - want).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_check_on_equilibrium_and_static_histories() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let ops = build_operators(&g).unwrap();
        let eq = synthetic_trajectory(&g, 8, 0.125, |_, _, _| 0.0, |_, _, _| 0.0);
        assert_eq!(steklov_identity_check(&eq, &ops, 0.25).unwrap(), 0.0);

        // static field: v == g, u = u0 + t g
        let st = synthetic_trajectory(
            &g,
            8,
            0.125,
            |x, _, _| x * (1.0 - x),
            |x, _, t| x * (1.0 - x) * (1.0 + t),
        );
        let r = steklov_identity_check(&st, &ops, 0.25).unwrap();
        assert!(r <= 1e-14, "static-history residual {r}");
    }

    #[test]
    fn displacement_reconstruction_is_exact_for_constant_velocity() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let traj = synthetic_trajectory(&g, 8, 0.125, |x, _, _| x * (1.0 - x), |_, _, _| 0.0);
        let uh = FieldHistory::displacement_of(&traj);
        for (n, t) in traj.times.iter().enumerate() {
            for (k, u) in uh.fields[n].iter().enumerate() {
                let want = traj.states[0].u.values[k] + t * traj.states[0].v.values[k];
                assert!((u - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn h_must_be_multiple_of_dt() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let ops = build_operators(&g).unwrap();
        let traj = synthetic_trajectory(&g, 8, 0.125, |_, _, _| 0.0, |_, _, _| 0.0);
        assert!(matches!(
            steklov_identity_check(&traj, &ops, 0.3),
            Err(DiagnosticsError::HNotMultipleOfDt { .. })
        ));
    }
}

//! Cumulative estimate monitors and the interpolation-inequality audit.
//!
//! Each monitor realizes one of the a-priori bounds the regularized system
//! is supposed to satisfy uniformly in epsilon: space-time integrability of
//! the temperature and its gradient, square-integrability of the velocity
//! gradient, and dual-norm control of the time derivatives. The monitors
//! check boundedness trends; none of the continuous constants is
//! quantitative, so no magnitudes are asserted here.

use crate::grid::FieldScalar;
use crate::norms::{
    dual_pairing_w1lambda, trapezoid, H2DualSolver, NormError, SpatialDictionary,
};
use crate::operators::OperatorSet;
use crate::solver::Trajectory;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("exponent out of range: {name} = {value}, admissible {range}")]
    ExponentOutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },
    #[error("field out of range: {0}")]
    FieldOutOfRange(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("h = {h} is not a positive integer multiple of dt = {dt}")]
    HNotMultipleOfDt { h: f64, dt: f64 },
    #[error("bad test function: {0}")]
    BadTestFunction(String),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// One named time series with the exponents it was computed for.
#[derive(Clone, Debug)]
pub struct MonitorSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

impl MonitorSeries {
    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - 1e-14)
    }
}

/// Exponents for the monitor bundle.
#[derive(Clone, Copy, Debug)]
pub struct MonitorParams {
    /// Temperature-gradient integrability exponent, in `[1, (N+2)/(N+1))`.
    pub r: f64,
    /// Temperature integrability exponent, in `[1, (N+2)/N)`.
    pub q: f64,
    /// Dual-space exponent for the temperature time derivative, `> N + 2`.
    pub lambda: f64,
    /// Weight exponent of the interpolation audit, in `(1 - 2/N, 2]`.
    pub p: f64,
}

impl MonitorParams {
    pub fn defaults(dim: usize) -> MonitorParams {
        MonitorParams {
            r: 1.2,
            q: 1.5,
            lambda: dim as f64 + 3.0,
            p: 1.5,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), DiagnosticsError> {
        let n = dim as f64;
        let r_hi = (n + 2.0) / (n + 1.0);
        if !(self.r >= 1.0 && self.r < r_hi) {
            return Err(DiagnosticsError::ExponentOutOfRange {
                name: "r",
                value: self.r,
                range: format!("[1, {r_hi})"),
            });
        }
        let q_hi = (n + 2.0) / n;
        if !(self.q >= 1.0 && self.q < q_hi) {
            return Err(DiagnosticsError::ExponentOutOfRange {
                name: "q",
                value: self.q,
                range: format!("[1, {q_hi})"),
            });
        }
        if self.lambda <= n + 2.0 {
            return Err(DiagnosticsError::ExponentOutOfRange {
                name: "lambda",
                value: self.lambda,
                range: format!("({}, inf)", n + 2.0),
            });
        }
        Ok(())
    }
}

/// Audit one instance of the weighted interpolation inequality: returns
/// `(lhs, dissipation, ratio)` with
///
/// ```text
/// lhs         = int (1 + theta)^q
/// dissipation = int (1 + theta)^(p-2) |grad theta|^2
/// ratio       = lhs / (dissipation^(N(q-1)/(2+N(p-1))) + 1)
/// ```
///
/// Along an admissible trajectory the ratio stays bounded; it is the
/// observable stand-in for the inequality's unquantified constant.
pub fn interpolation_check(
    theta: &FieldScalar,
    ops: &OperatorSet,
    p: f64,
    q: f64,
) -> Result<(f64, f64, f64), DiagnosticsError> {
    let n = ops.grid.dim as f64;
    let p_lo = (1.0 - 2.0 / n).max(0.0);
    if !(p > p_lo && p <= 2.0) {
        return Err(DiagnosticsError::ExponentOutOfRange {
            name: "p",
            value: p,
            range: format!("({p_lo}, 2]"),
        });
    }
    let shifted_min = 1.0 + theta.min();
    if shifted_min <= 0.0 {
        return Err(DiagnosticsError::FieldOutOfRange(format!(
            "1 + theta reaches {shifted_min}; negative-exponent weights undefined"
        )));
    }
    let grad = ops.grad_magnitude_at_nodes(&theta.values);
    let mut lhs = 0.0;
    let mut diss = 0.0;
    for ((t, g), w) in theta.values.iter().zip(&grad).zip(ops.node_weights()) {
        let s = 1.0 + t;
        lhs += w * s.powf(q);
        diss += w * s.powf(p - 2.0) * g * g;
    }
    let expo = n * (q - 1.0) / (2.0 + n * (p - 1.0));
    let ratio = lhs / (diss.powf(expo) + 1.0);
    Ok((lhs, diss, ratio))
}

/// Compute the cumulative monitor bundle along a trajectory:
///
/// * `grad_theta_r`: `int_0^t int |grad theta|^r`
/// * `theta_q`: `int_0^t int (1 + theta)^q`
/// * `grad_v_sq`: `int_0^t int |grad v|^2`
/// * `vt_dual_sq`: `int_0^t` squared dual norm of the velocity
///   difference quotient over zero-trace `H^2`
/// * `theta_t_dual`: `int_0^t` dictionary pairing of the temperature
///   difference quotient against `W^{1,lambda}` test fields
///
/// All series are nondecreasing and finite; difference quotients live on
/// snapshot intervals and are accumulated rectangle-wise, state integrands
/// trapezoid-wise.
pub fn estimate_monitors(
    traj: &Trajectory,
    ops: &OperatorSet,
    params: &MonitorParams,
) -> Result<Vec<MonitorSeries>, DiagnosticsError> {
    params.validate(ops.grid.dim)?;
    if traj.states.is_empty() {
        return Err(DiagnosticsError::InsufficientHistory("no states".into()));
    }
    let times = &traj.times;
    let m = times.len();

    let mut spatial_gtr = Vec::with_capacity(m);
    let mut spatial_tq = Vec::with_capacity(m);
    let mut spatial_gv2 = Vec::with_capacity(m);
    for s in &traj.states {
        let gt = ops.grad_magnitude_at_nodes(&s.theta.values);
        spatial_gtr.push(
            gt.iter()
                .zip(ops.node_weights())
                .map(|(v, w)| w * v.powf(params.r))
                .sum::<f64>(),
        );
        spatial_tq.push(
            s.theta
                .values
                .iter()
                .zip(ops.node_weights())
                .map(|(t, w)| w * (1.0 + t).powf(params.q))
                .sum::<f64>(),
        );
        let gv = ops.grad(&s.v);
        spatial_gv2.push(ops.ip_faces(&gv, &gv));
    }

    let cumulative = |spatial: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(m);
        let mut acc = 0.0;
        out.push(0.0);
        for n in 1..m {
            acc += trapezoid(&times[n - 1..=n], &spatial[n - 1..=n]);
            out.push(acc);
        }
        out
    };

    let h2 = H2DualSolver::new(ops)?;
    let dict = SpatialDictionary::default_for(ops, params.lambda)?;
    let mut vt_vals = vec![0.0];
    let mut tt_vals = vec![0.0];
    let mut vt_acc = 0.0;
    let mut tt_acc = 0.0;
    for n in 1..m {
        let dt = times[n] - times[n - 1];
        let vdot = FieldScalar {
            values: traj.states[n]
                .v
                .values
                .iter()
                .zip(&traj.states[n - 1].v.values)
                .map(|(a, b)| (a - b) / dt)
                .collect(),
            bc: traj.states[n].v.bc,
        };
        let dual = h2.eval(ops, &vdot)?;
        vt_acc += dt * dual * dual;
        vt_vals.push(vt_acc);

        let tdot = FieldScalar {
            values: traj.states[n]
                .theta
                .values
                .iter()
                .zip(&traj.states[n - 1].theta.values)
                .map(|(a, b)| (a - b) / dt)
                .collect(),
            bc: traj.states[n].theta.bc,
        };
        let pairing = dual_pairing_w1lambda(&tdot, &dict, params.lambda, ops)?;
        tt_acc += dt * pairing;
        tt_vals.push(tt_acc);
    }

    let series = |name: &str, values: Vec<f64>, keys: &[(&str, f64)]| MonitorSeries {
        name: name.to_string(),
        times: times.clone(),
        values,
        params: keys.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    Ok(vec![
        series("grad_theta_r", cumulative(&spatial_gtr), &[("r", params.r)]),
        series("theta_q", cumulative(&spatial_tq), &[("q", params.q)]),
        series("grad_v_sq", cumulative(&spatial_gv2), &[]),
        series("vt_dual_sq", vt_vals, &[]),
        series("theta_t_dual", tt_vals, &[("lambda", params.lambda)]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BcTag, Grid};
    use crate::model::{CoefficientSpec, InitialData};
    use crate::operators::build_operators;
    use crate::solver::{LedgerRow, State, Trajectory};

    fn constant_trajectory(grid: &Grid, c: f64, steps: usize, dt: f64) -> Trajectory {
        let state = State {
            t: 0.0,
            v: FieldScalar::zeros(grid, BcTag::Navier),
            u: FieldScalar::zeros(grid, BcTag::Dirichlet),
            theta: FieldScalar::constant(grid, BcTag::Neumann, c),
        };
        let mut states = Vec::new();
        let mut times = Vec::new();
        for k in 0..=steps {
            let mut s = state.clone();
            s.t = k as f64 * dt;
            times.push(s.t);
            states.push(s);
        }
        let initial = InitialData::new(
            grid,
            FieldScalar::zeros(grid, BcTag::Dirichlet),
            FieldScalar::zeros(grid, BcTag::Navier),
            FieldScalar::constant(grid, BcTag::Neumann, c),
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
    fn interpolation_check_constant_fields() {
        let g = Grid::new_2d([1.0, 1.0], [9, 9]).unwrap();
        let ops = build_operators(&g).unwrap();
        let zero = FieldScalar::zeros(&g, BcTag::Neumann);
        let (lhs, diss, ratio) = interpolation_check(&zero, &ops, 1.5, 1.5).unwrap();
        assert!((lhs - 1.0).abs() < 1e-13);
        assert_eq!(diss, 0.0);
        assert!((ratio - 1.0).abs() < 1e-13);

        let three = FieldScalar::constant(&g, BcTag::Neumann, 3.0);
        let q = 1.5;
        let (lhs, diss, _) = interpolation_check(&three, &ops, 1.5, q).unwrap();
        assert!((lhs - 4f64.powf(q)).abs() < 1e-12);
        assert_eq!(diss, 0.0);
    }

    #[test]
    fn interpolation_check_ramp_against_direct_quadrature() {
        // 5 nodes on [0,1], theta = ramp x -> x
        let g = Grid::new_1d(1.0, 5).unwrap();
        let ops = build_operators(&g).unwrap();
        let theta = FieldScalar::from_fn(&g, BcTag::Neumann, |x, _| x);
        let (p, q) = (1.5, 1.25);
        let (lhs, diss, ratio) = interpolation_check(&theta, &ops, p, q).unwrap();
        // direct quadrature with h = 1/4: gradient is exactly 1 everywhere
        let h: f64 = 0.25;
        let xs: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ws = [h / 2.0, h, h, h, h / 2.0];
        let mut lhs_d = 0.0;
        let mut diss_d = 0.0;
        for (x, w) in xs.iter().zip(ws) {
            lhs_d += w * (1.0 + x).powf(q);
            diss_d += w * (1.0 + x).powf(p - 2.0);
        }
        let expo = 1.0 * (q - 1.0) / (2.0 + 1.0 * (p - 1.0));
        let ratio_d = lhs_d / (diss_d.powf(expo) + 1.0);
        assert!((lhs - lhs_d).abs() < 1e-14);
        assert!((diss - diss_d).abs() < 1e-14);
        assert!((ratio - ratio_d).abs() < 1e-14);
    }

    #[test]
    fn exponent_ranges_enforced() {
        let g2 = Grid::new_2d([1.0, 1.0], [9, 9]).unwrap();
        let mut p = MonitorParams::defaults(2);
        p.r = 1.4; // >= 4/3 at N = 2
        assert!(matches!(
            p.validate(2),
            Err(DiagnosticsError::ExponentOutOfRange { name: "r", .. })
        ));
        let ops = build_operators(&g2).unwrap();
        let zero = FieldScalar::zeros(&g2, BcTag::Neumann);
        assert!(interpolation_check(&zero, &ops, 2.5, 1.5).is_err());
    }

    #[test]
    fn equilibrium_series_shapes() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let ops = build_operators(&g).unwrap();
        let c = 2.0;
        let traj = constant_trajectory(&g, c, 4, 0.25);
        let params = MonitorParams::defaults(1);
        let series = estimate_monitors(&traj, &ops, &params).unwrap();
        for s in &series {
            assert!(s.is_nondecreasing(), "{} must be nondecreasing", s.name);
            match s.name.as_str() {
                "theta_q" => {
                    // linear in t with slope |Omega| (1 + c)^q
                    let slope = (1.0 + c).powf(params.q) * 1.0;
                    for (t, v) in s.times.iter().zip(&s.values) {
                        assert!((v - slope * t).abs() < 1e-12, "{} at t={t}: {v}", s.name);
                    }
                }
                _ => {
                    assert!(s.values.iter().all(|v| v.abs() < 1e-12), "{} nonzero", s.name);
                }
            }
        }
    }

    #[test]
    fn two_step_series_against_direct_quadrature() {
        // tiny trajectory with nonconstant fields; check the cumulative
        // trapezoid values against a from-scratch computation
        let g = Grid::new_1d(1.0, 5).unwrap();
        let ops = build_operators(&g).unwrap();
        let mut traj = constant_trajectory(&g, 0.0, 2, 0.5);
        for (k, s) in traj.states.iter_mut().enumerate() {
            let a = k as f64;
            s.theta = FieldScalar::from_fn(&g, BcTag::Neumann, move |x, _| a * x);
            s.v = FieldScalar::from_fn(&g, BcTag::Navier, move |x, _| a * x * (1.0 - x));
        }
        let params = MonitorParams::defaults(1);
        let series = estimate_monitors(&traj, &ops, &params).unwrap();
        let gtr = series.iter().find(|s| s.name == "grad_theta_r").unwrap();
        // spatial integrand at level k: int |grad(a x)|^r = a^r (gradient
        // exactly a at every node)
        let s_of = |a: f64| a.powf(params.r);
        let want_1 = 0.5 * 0.5 * (s_of(0.0) + s_of(1.0));
        let want_2 = want_1 + 0.5 * 0.5 * (s_of(1.0) + s_of(2.0));
        assert!((gtr.values[1] - want_1).abs() < 1e-13);
        assert!((gtr.values[2] - want_2).abs() < 1e-13);

        let gv2 = series.iter().find(|s| s.name == "grad_v_sq").unwrap();
        let gv_at = |a: f64| {
            let v = FieldScalar::from_fn(&g, BcTag::Navier, move |x, _| a * x * (1.0 - x));
            let gv = ops.grad(&v);
            ops.ip_faces(&gv, &gv)
        };
        let want_1 = 0.5 * 0.5 * (gv_at(0.0) + gv_at(1.0));
        let want_2 = want_1 + 0.5 * 0.5 * (gv_at(1.0) + gv_at(2.0));
        assert!((gv2.values[1] - want_1).abs() < 1e-13);
        assert!((gv2.values[2] - want_2).abs() < 1e-13);
    }
}

//! Space-time norms and dual (negative-space) norms.
//!
//! The dual norm over the zero-trace second-order Sobolev space is computed
//! exactly (one Riesz solve); the `W^{1,lambda}` dual norm is non-Hilbertian
//! and is replaced by a maximum over a fixed dictionary of test fields,
//! which yields a lower bound adequate for boundedness-trend monitoring.

use crate::band::{probe_band, solve_refined, BandError, BandLu};
use crate::grid::FieldScalar;
use crate::operators::OperatorSet;
use crate::solver::Trajectory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("dual-norm solve missed tolerance: relative residual {0}")]
    SolveFailure(f64),
    #[error("lambda = {lambda} too small, need lambda > {min}")]
    LambdaTooSmall { lambda: f64, min: f64 },
    #[error("empty test-function dictionary")]
    EmptyDictionary,
    #[error("p = {0} must be >= 1")]
    BadExponent(f64),
    #[error(transparent)]
    Band(#[from] BandError),
}

/// Field selector for [`lp_spacetime_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormField {
    Theta,
    GradTheta,
    GradV,
}

/// Shift selector: integrate `|q|` or `|1 + q|` (the latter only meaningful
/// for the temperature).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    None,
    OnePlus,
}

/// `( int_0^T int_Omega |q|^p )^(1/p)` over the stored snapshots, trapezoid
/// in time, trapezoid weights in space. Gradient magnitudes are collocated
/// at nodes by averaging the adjacent face differences.
pub fn lp_spacetime_norm(
    traj: &Trajectory,
    ops: &OperatorSet,
    field: NormField,
    p: f64,
    shift: Shift,
) -> Result<f64, NormError> {
    if traj.states.is_empty() {
        return Err(NormError::EmptyTrajectory);
    }
    if p < 1.0 {
        return Err(NormError::BadExponent(p));
    }
    let spatial: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            let q: Vec<f64> = match field {
                NormField::Theta => match shift {
                    Shift::None => s.theta.values.clone(),
                    Shift::OnePlus => s.theta.values.iter().map(|t| 1.0 + t).collect(),
                },
                NormField::GradTheta => ops.grad_magnitude_at_nodes(&s.theta.values),
                NormField::GradV => ops.grad_magnitude_at_nodes(&s.v.values),
            };
            q.iter()
                .zip(ops.node_weights())
                .map(|(v, w)| w * v.abs().powf(p))
                .sum()
        })
        .collect();
    Ok(trapezoid(&traj.times, &spatial).powf(1.0 / p))
}

/// Trapezoid rule on possibly non-uniform sample times; a single sample
/// contributes zero measure.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Riesz solver for the dual norm over zero-trace `H^2`-type fields with
/// the Hilbertian norm `|psi|^2 + |grad psi|^2 + |lap psi|^2`.
///
/// Solving `(I - lap + bilap) r = g` on interior nodes (identity on the
/// boundary) and returning `sqrt(<g, r>)` realizes
/// `sup_psi <g, psi> / |psi|_{H^2}` exactly. The operator matrix is
/// factored once per instance and reused.
pub struct H2DualSolver {
    lu: BandLu,
    norm: f64,
    tol: f64,
}

impl H2DualSolver {
    pub fn new(ops: &OperatorSet) -> Result<H2DualSolver, NormError> {
        let n = ops.grid.node_count();
        let bw = 2 * ops.row_stride();
        let mat = probe_band(n, bw, bw, |x, y| Self::apply(ops, x, y));
        let norm = mat.inf_norm();
        Ok(H2DualSolver {
            lu: mat.factor()?,
            norm,
            tol: 1e-12,
        })
    }

    fn apply(ops: &OperatorSet, x: &[f64], y: &mut [f64]) {
        let g = &ops.grid;
        let lap = ops.lap_dirichlet(x);
        let bil = ops.lap_dirichlet(&lap);
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] {
                let k = g.idx(i, j);
                y[k] = if g.is_boundary(i, j) {
                    x[k]
                } else {
                    x[k] - lap[k] + bil[k]
                };
            }
        }
    }

    /// Dual norm of the functional `psi -> <g, psi>`.
    pub fn eval(&self, ops: &OperatorSet, g: &FieldScalar) -> Result<f64, NormError> {
        let mut rhs = g.values.clone();
        ops.zero_boundary(&mut rhs);
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let (r, rel) = solve_refined(
            &self.lu,
            |x, y| Self::apply(ops, x, y),
            &rhs,
            self.norm,
            self.tol,
            40,
        )?;
        if rel > self.tol {
            return Err(NormError::SolveFailure(rel));
        }
        let val = ops.ip_nodes(&g.values, &r);
        Ok(val.max(0.0).sqrt())
    }
}

/// One-shot convenience wrapper around [`H2DualSolver`] (builds and factors
/// the Riesz matrix; callers evaluating many functionals should hold the
/// solver instead).
pub fn dual_norm_w22(g: &FieldScalar, ops: &OperatorSet) -> Result<f64, NormError> {
    H2DualSolver::new(ops)?.eval(ops, g)
}

/// Fixed dictionary of spatial test fields with precomputed
/// `W^{1,lambda}` norms.
#[derive(Clone, Debug)]
pub struct SpatialDictionary {
    pub lambda: f64,
    pub entries: Vec<DictEntry>,
}

#[derive(Clone, Debug)]
pub struct DictEntry {
    pub name: String,
    pub values: Vec<f64>,
    pub norm_w1lambda: f64,
}

/// `(int |psi|^lambda + int |grad psi|^lambda)^(1/lambda)` with the
/// node-collocated gradient magnitude.
pub fn w1lambda_norm(ops: &OperatorSet, psi: &[f64], lambda: f64) -> f64 {
    let grad = ops.grad_magnitude_at_nodes(psi);
    let a: f64 = psi
        .iter()
        .zip(ops.node_weights())
        .map(|(v, w)| w * v.abs().powf(lambda))
        .sum();
    let b: f64 = grad
        .iter()
        .zip(ops.node_weights())
        .map(|(v, w)| w * v.abs().powf(lambda))
        .sum();
    (a + b).powf(1.0 / lambda)
}

impl SpatialDictionary {
    /// Default eight-entry dictionary: tensor products of low-degree
    /// polynomials and cosine modes (all Neumann-compatible).
    pub fn default_for(ops: &OperatorSet, lambda: f64) -> Result<SpatialDictionary, NormError> {
        let min = ops.grid.dim as f64 + 2.0;
        if lambda <= min {
            return Err(NormError::LambdaTooSmall { lambda, min });
        }
        let g = &ops.grid;
        let [lx, ly] = [g.extents[0], g.extents[1].max(1.0)];
        let pi = std::f64::consts::PI;
        let shapes: Vec<(&str, Box<dyn Fn(f64, f64) -> f64>)> = vec![
            ("const", Box::new(|_, _| 1.0)),
            ("x", Box::new(move |x, _| x / lx)),
            ("x2", Box::new(move |x, _| (x / lx) * (x / lx))),
            ("cos-x", Box::new(move |x, _| (pi * x / lx).cos())),
            ("cos-2x", Box::new(move |x, _| (2.0 * pi * x / lx).cos())),
            (
                "cos-3x",
                Box::new(move |x, _| (3.0 * pi * x / lx).cos()),
            ),
            (
                "x-cos-x",
                Box::new(move |x, y| {
                    if ly > 0.0 && lx > 0.0 {
                        (x / lx) * (pi * y / ly).cos()
                    } else {
                        0.0
                    }
                }),
            ),
            (
                "cos-xy",
                Box::new(move |x, y| (pi * x / lx).cos() * (pi * y / ly).cos()),
            ),
        ];
        let mut entries = Vec::new();
        for (name, shape) in shapes {
            let mut values = vec![0.0; g.node_count()];
            for j in 0..g.nodes[1] {
                for i in 0..g.nodes[0] {
                    let [x, y] = g.coords(i, j);
                    values[g.idx(i, j)] = shape(x, y);
                }
            }
            let norm = w1lambda_norm(ops, &values, lambda);
            entries.push(DictEntry {
                name: name.to_string(),
                values,
                norm_w1lambda: norm,
            });
        }
        Ok(SpatialDictionary { lambda, entries })
    }
}

/// Sampled lower bound on the `(W^{1,lambda})*` norm of `psi -> <g, psi>`:
/// the best pairing over the dictionary.
pub fn dual_pairing_w1lambda(
    g: &FieldScalar,
    dict: &SpatialDictionary,
    lambda: f64,
    ops: &OperatorSet,
) -> Result<f64, NormError> {
    let min = ops.grid.dim as f64 + 2.0;
    if lambda <= min {
        return Err(NormError::LambdaTooSmall { lambda, min });
    }
    if dict.entries.is_empty() {
        return Err(NormError::EmptyDictionary);
    }
    let mut best = 0.0f64;
    for e in &dict.entries {
        let pairing = ops.ip_nodes(&g.values, &e.values).abs();
        best = best.max(pairing / e.norm_w1lambda);
    }
    Ok(best)
}

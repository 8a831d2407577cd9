//! Problem data: coefficient functions, admissibility checks, initial data,
//! and the regularized problem built from them.
//!
//! The viscosity `gamma` must stay inside fixed positive bounds and the
//! coupling `f` must vanish at zero temperature and grow no faster than
//! `f_growth * (1 + xi)^alpha` with `alpha < (N + 2) / (2 N)`. Those are the
//! structural conditions everything downstream (energy budget, temperature
//! positivity, epsilon-uniform estimates) depends on, so they are validated
//! up front by sampling rather than trusted.

use crate::grid::{FieldScalar, Grid};
use crate::operators::OperatorSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("alpha = {alpha} outside (0, {limit}) for dimension {dim}")]
    AlphaOutOfRange { alpha: f64, limit: f64, dim: usize },
    #[error("bound violated: {check} at sample xi = {xi} (value {value})")]
    BoundViolated {
        check: &'static str,
        xi: f64,
        value: f64,
    },
    #[error("negative argument xi = {0}")]
    NegativeArgument(f64),
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("epsilon = {0} outside (0, 1)")]
    EpsilonOutOfRange(f64),
    #[error("initial data invalid: {0}")]
    BadInitialData(String),
    #[error("coefficient table invalid: {0}")]
    BadTable(String),
}

/// Functional form selector for `gamma` and `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffKind {
    Constant,
    BoundedAnalytic,
    SampledTable,
}

/// The coefficient tuple of the model together with its admissibility
/// constants.
///
/// * `gamma_kind`/`gamma_params`: viscosity. `Constant`: `[c]`;
///   `BoundedAnalytic`: `[c0, c1]` meaning `c0 + c1 / (1 + xi)`;
///   `SampledTable`: flattened `[x0, y0, x1, y1, ...]`, interpolated
///   piecewise-linearly and clamped into `[gamma_min, gamma_max]`.
/// * `f_kind`/`f_params`: coupling. `Constant`: `[c]` (admissible only for
///   `c = 0`); `BoundedAnalytic`: `[s]` meaning `s * ((1 + xi)^alpha - 1)`;
///   `SampledTable`: as above, clamped into the growth envelope
///   `+- f_growth * (1 + xi)^alpha`.
#[derive(Clone, Debug)]
pub struct CoefficientSpec {
    pub gamma_kind: CoeffKind,
    pub gamma_params: Vec<f64>,
    pub f_kind: CoeffKind,
    pub f_params: Vec<f64>,
    /// Elastic modulus (the constant `a` multiplying the displacement
    /// Laplacian); dimensionless in code units.
    pub elastic_modulus: f64,
    /// Lower viscosity bound, must be positive.
    pub gamma_min: f64,
    /// Upper viscosity bound.
    pub gamma_max: f64,
    /// Growth constant of the coupling envelope.
    pub f_growth: f64,
    /// Growth exponent of the coupling envelope.
    pub alpha: f64,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec {
            gamma_kind: CoeffKind::BoundedAnalytic,
            gamma_params: vec![1.0, 1.0],
            f_kind: CoeffKind::BoundedAnalytic,
            f_params: vec![1.0],
            elastic_modulus: 1.0,
            gamma_min: 1.0,
            gamma_max: 2.0,
            f_growth: 1.0,
            alpha: 0.5,
        }
    }
}

impl CoefficientSpec {
    /// Admissibility limit for `alpha` in dimension `dim`.
    pub fn alpha_limit(dim: usize) -> f64 {
        (dim as f64 + 2.0) / (2.0 * dim as f64)
    }
}

fn interp_table(params: &[f64], xi: f64) -> f64 {
    debug_assert!(params.len() >= 2 && params.len() % 2 == 0);
    let m = params.len() / 2;
    let x = |k: usize| params[2 * k];
    let y = |k: usize| params[2 * k + 1];
    if xi <= x(0) {
        return y(0);
    }
    if xi >= x(m - 1) {
        return y(m - 1);
    }
    let mut k = 0;
    while k + 1 < m && x(k + 1) < xi {
        k += 1;
    }
    let t = (xi - x(k)) / (x(k + 1) - x(k));
    y(k) + t * (y(k + 1) - y(k))
}

/// Evaluate the viscosity coefficient at `xi >= 0`.
pub fn eval_gamma(spec: &CoefficientSpec, xi: f64) -> Result<f64, ModelError> {
    if xi < 0.0 {
        return Err(ModelError::NegativeArgument(xi));
    }
    let v = match spec.gamma_kind {
        CoeffKind::Constant => spec.gamma_params[0],
        CoeffKind::BoundedAnalytic => spec.gamma_params[0] + spec.gamma_params[1] / (1.0 + xi),
        CoeffKind::SampledTable => {
            interp_table(&spec.gamma_params, xi).clamp(spec.gamma_min, spec.gamma_max)
        }
    };
    Ok(v)
}

/// Evaluate the coupling coefficient at `xi >= 0`; `f(0) = 0` for all
/// admissible forms.
pub fn eval_f(spec: &CoefficientSpec, xi: f64) -> Result<f64, ModelError> {
    if xi < 0.0 {
        return Err(ModelError::NegativeArgument(xi));
    }
    let v = match spec.f_kind {
        CoeffKind::Constant => spec.f_params[0],
        CoeffKind::BoundedAnalytic => spec.f_params[0] * ((1.0 + xi).powf(spec.alpha) - 1.0),
        CoeffKind::SampledTable => {
            let env = spec.f_growth * (1.0 + xi).powf(spec.alpha);
            interp_table(&spec.f_params, xi).clamp(-env, env)
        }
    };
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct CheckEntry {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`validate_spec`]: one entry per structural assumption.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.entries.push(CheckEntry {
            name,
            passed,
            detail,
        });
    }
}

/// Sample grid used to audit the "for all xi >= 0" assumptions: zero plus
/// 255 log-spaced points up to 1e6. A sampled check, not a proof.
pub fn validation_samples() -> Vec<f64> {
    let mut xs = vec![0.0];
    let (lo, hi) = (1e-6f64, 1e6f64);
    for k in 0..255 {
        let t = k as f64 / 254.0;
        xs.push(lo * (hi / lo).powf(t));
    }
    xs
}

/// Audit every structural assumption of the coefficient tuple for the given
/// dimension, sampling `gamma` and `f` on a logarithmic grid.
pub fn validate_spec(spec: &CoefficientSpec, dim: usize) -> Result<ValidationReport, ModelError> {
    if dim != 1 && dim != 2 {
        return Err(ModelError::BadDimension(dim));
    }
    let mut report = ValidationReport::default();
    let limit = CoefficientSpec::alpha_limit(dim);

    report.push(
        "positive-constants",
        spec.gamma_min > 0.0 && spec.gamma_max > 0.0 && spec.f_growth > 0.0 && spec.elastic_modulus > 0.0,
        format!(
            "gamma_min={}, gamma_max={}, f_growth={}, a={}",
            spec.gamma_min, spec.gamma_max, spec.f_growth, spec.elastic_modulus
        ),
    );
    report.push(
        "gamma-bounds-ordered",
        spec.gamma_min <= spec.gamma_max,
        format!("gamma_min={} <= gamma_max={}", spec.gamma_min, spec.gamma_max),
    );
    report.push(
        "alpha-range",
        spec.alpha > 0.0 && spec.alpha < limit,
        format!("alpha={} must lie in (0, {limit}) at N={dim}", spec.alpha),
    );

    let f0 = eval_f(spec, 0.0)?;
    report.push("f-vanishes-at-zero", f0 == 0.0, format!("f(0) = {f0}"));

    let mut gamma_ok = true;
    let mut gamma_detail = String::from("within bounds on all samples");
    let mut f_ok = true;
    let mut f_detail = String::from("within growth envelope on all samples");
    for &xi in &validation_samples() {
        let gv = eval_gamma(spec, xi)?;
        if gamma_ok && !(gv >= spec.gamma_min && gv <= spec.gamma_max) {
            gamma_ok = false;
            gamma_detail = format!("gamma({xi}) = {gv} outside [{}, {}]", spec.gamma_min, spec.gamma_max);
        }
        let fv = eval_f(spec, xi)?;
        let env = spec.f_growth * (1.0 + xi).powf(spec.alpha);
        if f_ok && fv.abs() > env * (1.0 + 1e-12) {
            f_ok = false;
            f_detail = format!("|f({xi})| = {} exceeds envelope {env}", fv.abs());
        }
    }
    report.push("gamma-within-bounds", gamma_ok, gamma_detail);
    report.push("f-growth-envelope", f_ok, f_detail);
    Ok(report)
}

/// Like [`validate_spec`] but collapses a failing report into the error
/// naming the first violated assumption.
pub fn ensure_admissible(spec: &CoefficientSpec, dim: usize) -> Result<(), ModelError> {
    let report = validate_spec(spec, dim)?;
    if report.passed() {
        return Ok(());
    }
    let first = report.entries.iter().find(|e| !e.passed).unwrap();
    match first.name {
        "alpha-range" => Err(ModelError::AlphaOutOfRange {
            alpha: spec.alpha,
            limit: CoefficientSpec::alpha_limit(dim),
            dim,
        }),
        name => {
            // recover the failing sample from the recorded detail when present
            let xi = first
                .detail
                .split(['(', ')'])
                .nth(1)
                .and_then(|s| s.parse().ok())
                .unwrap_or(0.0);
            Err(ModelError::BoundViolated {
                check: name,
                xi,
                value: f64::NAN,
            })
        }
    }
}

/// Initial displacement, velocity and temperature fields.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub u0: FieldScalar,
    pub v0: FieldScalar,
    pub theta0: FieldScalar,
}

impl InitialData {
    pub fn new(
        grid: &Grid,
        u0: FieldScalar,
        v0: FieldScalar,
        theta0: FieldScalar,
    ) -> Result<InitialData, ModelError> {
        let n = grid.node_count();
        if u0.values.len() != n || v0.values.len() != n || theta0.values.len() != n {
            return Err(ModelError::BadInitialData("field size mismatch".into()));
        }
        for j in 0..grid.nodes[1] {
            for i in 0..grid.nodes[0] {
                if grid.is_boundary(i, j) {
                    let k = grid.idx(i, j);
                    if u0.values[k] != 0.0 || v0.values[k] != 0.0 {
                        return Err(ModelError::BadInitialData(format!(
                            "u0/v0 must vanish on the boundary (node {i},{j})"
                        )));
                    }
                }
            }
        }
        if theta0.min() < 0.0 {
            return Err(ModelError::BadInitialData(format!(
                "theta0 must be nonnegative (min = {})",
                theta0.min()
            )));
        }
        Ok(InitialData { u0, v0, theta0 })
    }
}

/// Smooth the initial data with a few steps of explicit discrete heat flow:
/// Dirichlet flow for `u0`, `v0`, zero-flux Neumann flow for `theta0`.
///
/// The pseudo-time step `min(h)^2 / 8` keeps every update a convex
/// combination of neighbours, so nonnegativity of the temperature survives,
/// and the Neumann flow conserves the discrete integral exactly. The number
/// of steps is `ceil(epsilon * m0)`; with `m = 0` the data is returned
/// unchanged.
pub fn mollify(
    data: &InitialData,
    epsilon: f64,
    ops: &OperatorSet,
    m0: usize,
) -> Result<InitialData, ModelError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ModelError::EpsilonOutOfRange(epsilon));
    }
    let m = (epsilon * m0 as f64).ceil() as usize;
    let mut out = data.clone();
    if m == 0 {
        return Ok(out);
    }
    let g = &ops.grid;
    let hmin = if g.dim == 2 {
        g.spacing[0].min(g.spacing[1])
    } else {
        g.spacing[0]
    };
    let tau = hmin * hmin / 8.0;
    for _ in 0..m {
        let du = ops.lap_dirichlet(&out.u0.values);
        let dv = ops.lap_dirichlet(&out.v0.values);
        let dth = ops.lap_neumann(&out.theta0.values);
        for (x, d) in out.u0.values.iter_mut().zip(&du) {
            *x += tau * d;
        }
        for (x, d) in out.v0.values.iter_mut().zip(&dv) {
            *x += tau * d;
        }
        for (x, d) in out.theta0.values.iter_mut().zip(&dth) {
            *x += tau * d;
        }
    }
    Ok(out)
}

/// Named initial-data families, realizable on any grid. Used by the
/// configuration layer and by refinement sweeps, which need the same data
/// sampled on a chain of grids.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialPreset {
    /// `u0`, `v0` product-of-sines bumps, `theta0` a nonnegative
    /// `(1 - cos)` bump; all boundary compatible.
    SineBump {
        amp_u: f64,
        amp_v: f64,
        amp_theta: f64,
    },
    /// Zero displacement and velocity, temperature an indicator of the left
    /// half of the domain.
    Indicator { level: f64 },
    /// Low-mode random fields with a fixed seed; the temperature offset
    /// dominates its modes, keeping it nonnegative.
    RandomSeeded { seed: u64, amp: f64 },
}

impl Default for InitialPreset {
    fn default() -> Self {
        InitialPreset::SineBump {
            amp_u: 1.0,
            amp_v: 1.0,
            amp_theta: 1.0,
        }
    }
}

impl InitialPreset {
    pub fn realize(&self, grid: &Grid) -> Result<InitialData, ModelError> {
        use crate::grid::BcTag;
        use std::f64::consts::PI;
        let [lx, ly] = grid.extents;
        let two_d = grid.dim == 2;
        match *self {
            InitialPreset::SineBump {
                amp_u,
                amp_v,
                amp_theta,
            } => {
                let sines = move |x: f64, y: f64| {
                    let sx = (PI * x / lx).sin();
                    if two_d {
                        sx * (PI * y / ly).sin()
                    } else {
                        sx
                    }
                };
                let humps = move |x: f64, y: f64| {
                    let hx = 0.5 * (1.0 - (2.0 * PI * x / lx).cos());
                    if two_d {
                        hx * 0.5 * (1.0 - (2.0 * PI * y / ly).cos())
                    } else {
                        hx
                    }
                };
                InitialData::new(
                    grid,
                    FieldScalar::from_fn(grid, BcTag::Dirichlet, |x, y| amp_u * sines(x, y)),
                    FieldScalar::from_fn(grid, BcTag::Navier, |x, y| amp_v * sines(x, y)),
                    FieldScalar::from_fn(grid, BcTag::Neumann, |x, y| amp_theta * humps(x, y)),
                )
            }
            InitialPreset::Indicator { level } => InitialData::new(
                grid,
                FieldScalar::zeros(grid, BcTag::Dirichlet),
                FieldScalar::zeros(grid, BcTag::Navier),
                FieldScalar::from_fn(grid, BcTag::Neumann, |x, _| {
                    if x < 0.5 * lx {
                        level
                    } else {
                        0.0
                    }
                }),
            ),
            InitialPreset::RandomSeeded { seed, amp } => {
                use rand::prelude::*;
                use rand_chacha::ChaCha8Rng;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = |n: usize| -> Vec<f64> {
                    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
                };
                let (au, av, at) = (draw(3), draw(3), draw(3));
                let modal_sin = move |coeffs: &[f64], x: f64, y: f64| -> f64 {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| {
                            let m = (k + 1) as f64;
                            let sx = (m * PI * x / lx).sin();
                            if two_d {
                                c * sx * (m * PI * y / ly).sin()
                            } else {
                                c * sx
                            }
                        })
                        .sum()
                };
                let offset: f64 = at.iter().map(|c| c.abs()).sum();
                let modal_cos = move |coeffs: &[f64], x: f64, y: f64| -> f64 {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| {
                            let m = (k + 1) as f64;
                            let cx = (m * PI * x / lx).cos();
                            if two_d {
                                c * cx * (m * PI * y / ly).cos()
                            } else {
                                c * cx
                            }
                        })
                        .sum()
                };
                InitialData::new(
                    grid,
                    FieldScalar::from_fn(grid, BcTag::Dirichlet, |x, y| modal_sin(&au, x, y)),
                    FieldScalar::from_fn(grid, BcTag::Navier, |x, y| modal_sin(&av, x, y)),
                    FieldScalar::from_fn(grid, BcTag::Neumann, |x, y| {
                        offset + modal_cos(&at, x, y)
                    }),
                )
            }
        }
    }
}

/// One smoothing pass over a sampled coefficient table (endpoints kept, so
/// a table with `f(0) = 0` keeps it).
fn smooth_table(params: &[f64]) -> Vec<f64> {
    let m = params.len() / 2;
    let mut out = params.to_vec();
    for k in 1..m.saturating_sub(1) {
        out[2 * k + 1] =
            0.25 * params[2 * (k - 1) + 1] + 0.5 * params[2 * k + 1] + 0.25 * params[2 * (k + 1) + 1];
    }
    out
}

/// The epsilon-regularized problem: mollified data plus (for sampled-table
/// coefficients) a smoothed coefficient table. Analytic coefficient kinds
/// are already smooth and are used as-is.
#[derive(Clone, Debug)]
pub struct RegularizedProblem {
    pub epsilon: f64,
    pub data_eps: InitialData,
    pub coeff: CoefficientSpec,
    pub mollify_steps: usize,
}

impl RegularizedProblem {
    pub fn new(
        data: &InitialData,
        coeff: &CoefficientSpec,
        epsilon: f64,
        ops: &OperatorSet,
        m0: usize,
    ) -> Result<RegularizedProblem, ModelError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ModelError::EpsilonOutOfRange(epsilon));
        }
        ensure_admissible(coeff, ops.grid.dim)?;
        let data_eps = mollify(data, epsilon, ops, m0)?;
        debug_assert!(data_eps.theta0.min() >= 0.0);
        let mut coeff_eps = coeff.clone();
        if coeff.gamma_kind == CoeffKind::SampledTable {
            coeff_eps.gamma_params = smooth_table(&coeff.gamma_params);
        }
        if coeff.f_kind == CoeffKind::SampledTable {
            coeff_eps.f_params = smooth_table(&coeff.f_params);
        }
        Ok(RegularizedProblem {
            epsilon,
            data_eps,
            coeff: coeff_eps,
            mollify_steps: (epsilon * m0 as f64).ceil() as usize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BcTag;
    use crate::operators::build_operators;

    fn spec_with_alpha(alpha: f64) -> CoefficientSpec {
        CoefficientSpec {
            alpha,
            ..CoefficientSpec::default()
        }
    }

    #[test]
    fn alpha_admissible_region() {
        // N = 2: limit is 1, boundary excluded
        assert!(validate_spec(&spec_with_alpha(0.9), 2).unwrap().passed());
        let r = validate_spec(&spec_with_alpha(1.0), 2).unwrap();
        assert!(!r.passed());
        assert!(matches!(
            ensure_admissible(&spec_with_alpha(1.0), 2),
            Err(ModelError::AlphaOutOfRange { .. })
        ));
        // N = 1: limit is 3/2, so 1.4 passes with gamma == 1 and the
        // envelope-respecting analytic coupling
        let spec = CoefficientSpec {
            gamma_kind: CoeffKind::Constant,
            gamma_params: vec![1.0],
            alpha: 1.4,
            ..CoefficientSpec::default()
        };
        assert!(validate_spec(&spec, 1).unwrap().passed());
    }

    #[test]
    fn gamma_evaluation_forms() {
        let mut spec = CoefficientSpec {
            gamma_kind: CoeffKind::Constant,
            gamma_params: vec![2.0],
            ..CoefficientSpec::default()
        };
        assert_eq!(eval_gamma(&spec, 7.3).unwrap(), 2.0);

        spec.gamma_kind = CoeffKind::BoundedAnalytic;
        spec.gamma_params = vec![1.0, 1.0];
        assert_eq!(eval_gamma(&spec, 0.0).unwrap(), 2.0);

        spec.gamma_kind = CoeffKind::SampledTable;
        spec.gamma_params = vec![0.0, 1.5, 1.0, 1.0];
        assert!((eval_gamma(&spec, 0.5).unwrap() - 1.25).abs() < 1e-15);

        assert!(matches!(
            eval_gamma(&spec, -1.0),
            Err(ModelError::NegativeArgument(_))
        ));
    }

    #[test]
    fn f_evaluation_forms() {
        let spec = CoefficientSpec::default(); // f = (1+xi)^0.5 - 1
        assert_eq!(eval_f(&spec, 0.0).unwrap(), 0.0);
        assert!((eval_f(&spec, 3.0).unwrap() - 1.0).abs() < 1e-15);

        // a table with f(0) != 0 is rejected by the validator
        let bad = CoefficientSpec {
            f_kind: CoeffKind::SampledTable,
            f_params: vec![0.0, 0.1, 1.0, 0.2],
            ..CoefficientSpec::default()
        };
        let r = validate_spec(&bad, 1).unwrap();
        assert!(!r.passed());
        assert!(r
            .entries
            .iter()
            .any(|e| e.name == "f-vanishes-at-zero" && !e.passed));
    }

    #[test]
    fn sampled_bounds_hold_on_many_points() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = CoefficientSpec::default();
        for _ in 0..10_000 {
            let xi = 10f64.powf(rng.gen_range(-6.0..6.0));
            let gv = eval_gamma(&spec, xi).unwrap();
            assert!(gv >= spec.gamma_min && gv <= spec.gamma_max);
            let fv = eval_f(&spec, xi).unwrap();
            assert!(fv.abs() <= spec.f_growth * (1.0 + xi).powf(spec.alpha) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mollify_identity_and_fixed_points() {
        let grid = crate::grid::Grid::new_1d(1.0, 17).unwrap();
        let ops = build_operators(&grid).unwrap();
        let data = InitialData::new(
            &grid,
            FieldScalar::from_fn(&grid, BcTag::Dirichlet, |x, _| x * (1.0 - x)),
            FieldScalar::zeros(&grid, BcTag::Navier),
            FieldScalar::constant(&grid, BcTag::Neumann, 2.0),
        )
        .unwrap();
        // m = ceil(eps * m0) = 0 when m0 = 0: identity
        let same = mollify(&data, 0.5, &ops, 0).unwrap();
        assert_eq!(same.u0.values, data.u0.values);
        // constants are Neumann-flow fixed points
        let out = mollify(&data, 0.5, &ops, 16).unwrap();
        assert!(out.theta0.values.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn mollify_conserves_mass_and_positivity_of_indicator() {
        let grid = crate::grid::Grid::new_1d(1.0, 33).unwrap();
        let ops = build_operators(&grid).unwrap();
        let theta0 = FieldScalar::from_fn(&grid, BcTag::Neumann, |x, _| {
            if x < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        let data = InitialData::new(
            &grid,
            FieldScalar::zeros(&grid, BcTag::Dirichlet),
            FieldScalar::zeros(&grid, BcTag::Navier),
            theta0,
        )
        .unwrap();
        let mass0 = ops.integral(&data.theta0.values);
        let out = mollify(&data, 0.25, &ops, 16).unwrap(); // m = 4
        let mass1 = ops.integral(&out.theta0.values);
        assert!((mass0 - mass1).abs() <= 1e-13 * mass0.abs().max(1.0));
        assert!(out.theta0.min() >= 0.0);
    }

    #[test]
    fn mollify_converges_to_data_as_epsilon_shrinks() {
        let grid = crate::grid::Grid::new_1d(1.0, 33).unwrap();
        let ops = build_operators(&grid).unwrap();
        let theta0 = FieldScalar::from_fn(&grid, BcTag::Neumann, |x, _| {
            if x < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        let data = InitialData::new(
            &grid,
            FieldScalar::zeros(&grid, BcTag::Dirichlet),
            FieldScalar::zeros(&grid, BcTag::Navier),
            theta0,
        )
        .unwrap();
        let mut dists = Vec::new();
        for &eps in &[0.5, 0.25, 0.125] {
            let out = mollify(&data, eps, &ops, 16).unwrap();
            let diff: Vec<f64> = out
                .theta0
                .values
                .iter()
                .zip(&data.theta0.values)
                .map(|(a, b)| a - b)
                .collect();
            dists.push(ops.l2_nodes(&diff));
        }
        assert!(dists[0] > dists[1] && dists[1] > dists[2], "{dists:?}");
    }
}

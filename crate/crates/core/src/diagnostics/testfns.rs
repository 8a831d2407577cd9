//! Space-time test functions for the weak-form residuals.
//!
//! Entries are separable `X(x) * chi(t)`: compactly supported quartic space
//! bumps (momentum tests, which need zero boundary trace) or full-domain
//! cosine modes (temperature tests, zero-flux compatible), times a smooth
//! cutoff that reaches zero strictly before the end of the trajectory.

use crate::grid::Grid;
use crate::operators::OperatorSet;

/// One separable test function. `space` holds the nodal samples of `X`;
/// `t_star` is where the time cutoff reaches zero.
#[derive(Clone, Debug)]
pub struct SpaceTimeTestFn {
    pub name: String,
    pub space: Vec<f64>,
    pub compact_support: bool,
    pub t_star: f64,
}

impl SpaceTimeTestFn {
    /// Smooth cutoff: `cos^2(pi t / (2 t_star))` for `t < t_star`, zero
    /// after; value 1 and slope 0 at `t = 0`, C^1 at the junction.
    pub fn chi(&self, t: f64) -> f64 {
        if t >= self.t_star {
            0.0
        } else {
            let c = (std::f64::consts::PI * t / (2.0 * self.t_star)).cos();
            c * c
        }
    }

    /// Nodal samples at each requested time.
    pub fn frames(&self, times: &[f64]) -> Vec<Vec<f64>> {
        times
            .iter()
            .map(|&t| {
                let chi = self.chi(t);
                self.space.iter().map(|x| x * chi).collect()
            })
            .collect()
    }
}

/// Dictionary of test functions; a finite stand-in for "all smooth
/// compactly supported test functions".
#[derive(Clone, Debug)]
pub struct TestFunctionDictionary {
    pub entries: Vec<SpaceTimeTestFn>,
}

fn quartic_bump(x: f64, center: f64, radius: f64) -> f64 {
    let s = (x - center) / radius;
    if s.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s * s;
        w * w
    }
}

fn sample(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    for j in 0..grid.nodes[1] {
        for i in 0..grid.nodes[0] {
            let [x, y] = grid.coords(i, j);
            out[grid.idx(i, j)] = f(x, y);
        }
    }
    out
}

/// Eight compactly supported entries for the momentum identity: four bump
/// placements times two cutoff scales.
pub fn momentum_dictionary(ops: &OperatorSet, t_end: f64, dt: f64) -> TestFunctionDictionary {
    let g = &ops.grid;
    let lx = g.extents[0];
    let ly = if g.dim == 2 { g.extents[1] } else { 1.0 };
    let placements: [(f64, f64); 4] = [(0.5, 0.45), (0.3, 0.25), (0.7, 0.25), (0.5, 0.2)];
    let cutoffs = cutoff_scales(t_end, dt);
    let mut entries = Vec::new();
    for (ci, (c, r)) in placements.iter().enumerate() {
        for (ti, &t_star) in cutoffs.iter().enumerate() {
            let (c, r) = (*c, *r);
            let space = if g.dim == 1 {
                sample(g, move |x, _| quartic_bump(x, c * lx, r * lx))
            } else {
                sample(g, move |x, y| {
                    quartic_bump(x, c * lx, r * lx) * quartic_bump(y, c * ly, r * ly)
                })
            };
            entries.push(SpaceTimeTestFn {
                name: format!("bump{ci}-cut{ti}"),
                space,
                compact_support: true,
                t_star,
            });
        }
    }
    TestFunctionDictionary { entries }
}

/// Eight zero-flux-compatible entries for the temperature identity: four
/// cosine shapes (including the constant) times two cutoff scales.
pub fn temperature_dictionary(ops: &OperatorSet, t_end: f64, dt: f64) -> TestFunctionDictionary {
    let g = &ops.grid;
    let lx = g.extents[0];
    let ly = if g.dim == 2 { g.extents[1] } else { 1.0 };
    let pi = std::f64::consts::PI;
    let two_d = g.dim == 2;
    let shapes: Vec<(&str, Box<dyn Fn(f64, f64) -> f64>)> = vec![
        ("const", Box::new(|_, _| 1.0)),
        ("cos-x", Box::new(move |x, _| (pi * x / lx).cos())),
        ("cos-2x", Box::new(move |x, _| (2.0 * pi * x / lx).cos())),
        (
            "cos-hi",
            Box::new(move |x, y| {
                if two_d {
                    (pi * x / lx).cos() * (pi * y / ly).cos()
                } else {
                    (3.0 * pi * x / lx).cos()
                }
            }),
        ),
    ];
    let cutoffs = cutoff_scales(t_end, dt);
    let mut entries = Vec::new();
    for (name, shape) in &shapes {
        for (ti, &t_star) in cutoffs.iter().enumerate() {
            entries.push(SpaceTimeTestFn {
                name: format!("{name}-cut{ti}"),
                space: sample(g, shape),
                compact_support: false,
                t_star,
            });
        }
    }
    TestFunctionDictionary { entries }
}

/// Two cutoff scales, both safely inside `[0, t_end - dt]`.
fn cutoff_scales(t_end: f64, dt: f64) -> [f64; 2] {
    let latest = t_end - 2.0 * dt;
    [(0.5 * t_end).min(latest), (0.75 * t_end).min(latest)]
}

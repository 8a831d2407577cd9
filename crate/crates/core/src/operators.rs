//! Discrete differential operators with exact summation-by-parts structure.
//!
//! All operators are built from one pair of maps: a staggered gradient
//! taking nodal values to face values, and its negative adjoint (a flux-form
//! divergence) taking face values back to nodes. With trapezoid weights on
//! nodes and cell/trapezoid tensor weights on faces, the identities
//!
//! ```text
//! <lap_dirichlet(phi), psi>  = -<grad(phi), grad(psi)>   (phi, psi zero on boundary)
//! <lap_neumann(phi), 1>      = 0                         (all phi)
//! <bilap_navier(phi), phi>   = |lap_dirichlet(phi)|^2
//! ```
//!
//! hold to rounding error, not just to truncation order. The energy ledger
//! in the solver is exact precisely because of this.

use crate::grid::{BcTag, FieldScalar, FieldVector, Grid, GridError};

/// Operator bundle for one grid. Immutable after construction; all applies
/// are pure and allocate their own workspace.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub grid: Grid,
    node_w: Vec<f64>,
    face_w: [Vec<f64>; 2],
}

/// Build the operator set, validating the stencil-width requirement.
pub fn build_operators(grid: &Grid) -> Result<OperatorSet, GridError> {
    for ax in 0..grid.dim {
        if grid.nodes[ax] < 5 {
            return Err(GridError::GridTooCoarse {
                axis: ax,
                nodes: grid.nodes[ax],
            });
        }
    }
    let mut node_w = vec![0.0; grid.node_count()];
    for j in 0..grid.nodes[1] {
        for i in 0..grid.nodes[0] {
            node_w[grid.idx(i, j)] = grid.node_weight(i, j);
        }
    }
    let mut xw = vec![0.0; grid.face_count(0)];
    for j in 0..grid.nodes[1] {
        for i in 0..grid.nodes[0] - 1 {
            xw[FieldVector::xface(grid, i, j)] = grid.spacing[0] * grid.axis_weight(1, j);
        }
    }
    let mut yw = vec![0.0; grid.face_count(1)];
    if grid.dim == 2 {
        for j in 0..grid.nodes[1] - 1 {
            for i in 0..grid.nodes[0] {
                yw[FieldVector::yface(grid, i, j)] = grid.axis_weight(0, i) * grid.spacing[1];
            }
        }
    }
    Ok(OperatorSet {
        grid: *grid,
        node_w,
        face_w: [xw, yw],
    })
}

impl OperatorSet {
    pub fn node_weights(&self) -> &[f64] {
        &self.node_w
    }

    pub fn face_weights(&self, ax: usize) -> &[f64] {
        &self.face_w[ax]
    }

    /// Node index distance between vertically adjacent nodes.
    pub fn row_stride(&self) -> usize {
        if self.grid.dim == 2 {
            self.grid.nodes[0]
        } else {
            1
        }
    }

    pub fn grad_slice(&self, phi: &[f64]) -> FieldVector {
        let g = &self.grid;
        let mut out = FieldVector::zeros(g);
        let hx = g.spacing[0];
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] - 1 {
                out.comps[0][FieldVector::xface(g, i, j)] =
                    (phi[g.idx(i + 1, j)] - phi[g.idx(i, j)]) / hx;
            }
        }
        if g.dim == 2 {
            let hy = g.spacing[1];
            for j in 0..g.nodes[1] - 1 {
                for i in 0..g.nodes[0] {
                    out.comps[1][FieldVector::yface(g, i, j)] =
                        (phi[g.idx(i, j + 1)] - phi[g.idx(i, j)]) / hy;
                }
            }
        }
        out
    }

    pub fn grad(&self, phi: &FieldScalar) -> FieldVector {
        self.grad_slice(&phi.values)
    }

    /// Flux-form divergence onto every node (zero flux through the
    /// boundary). Negative adjoint of [`grad_slice`](Self::grad_slice).
    pub fn div(&self, f: &FieldVector) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.node_count()];
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] {
                let mut flux = 0.0;
                let wx = g.axis_weight(0, i);
                let right = if i < g.nodes[0] - 1 {
                    f.comps[0][FieldVector::xface(g, i, j)]
                } else {
                    0.0
                };
                let left = if i > 0 {
                    f.comps[0][FieldVector::xface(g, i - 1, j)]
                } else {
                    0.0
                };
                flux += (right - left) / wx;
                if g.dim == 2 {
                    let wy = g.axis_weight(1, j);
                    let up = if j < g.nodes[1] - 1 {
                        f.comps[1][FieldVector::yface(g, i, j)]
                    } else {
                        0.0
                    };
                    let down = if j > 0 {
                        f.comps[1][FieldVector::yface(g, i, j - 1)]
                    } else {
                        0.0
                    };
                    flux += (up - down) / wy;
                }
                out[g.idx(i, j)] = flux;
            }
        }
        out
    }

    /// Laplacian with homogeneous Neumann boundary (zero-flux form).
    pub fn lap_neumann(&self, phi: &[f64]) -> Vec<f64> {
        self.div(&self.grad_slice(phi))
    }

    /// Laplacian with homogeneous Dirichlet boundary: interior rows of the
    /// flux form, boundary rows zero.
    pub fn lap_dirichlet(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = self.lap_neumann(phi);
        self.zero_boundary(&mut out);
        out
    }

    /// Bilaplacian under Navier conditions (`v = lap v = 0`), realized as
    /// the square of the Dirichlet Laplacian.
    pub fn bilap_navier(&self, phi: &[f64]) -> Vec<f64> {
        let mid = self.lap_dirichlet(phi);
        self.lap_dirichlet(&mid)
    }

    pub fn zero_boundary(&self, v: &mut [f64]) {
        let g = &self.grid;
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] {
                if g.is_boundary(i, j) {
                    v[g.idx(i, j)] = 0.0;
                }
            }
        }
    }

    pub fn ip_nodes(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.node_w)
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    pub fn ip_faces(&self, f: &FieldVector, g: &FieldVector) -> f64 {
        let mut s = 0.0;
        for ax in 0..2 {
            s += f.comps[ax]
                .iter()
                .zip(&g.comps[ax])
                .zip(&self.face_w[ax])
                .map(|((x, y), w)| w * x * y)
                .sum::<f64>();
        }
        s
    }

    pub fn integral(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.node_w).map(|(x, w)| w * x).sum()
    }

    pub fn l2_nodes(&self, a: &[f64]) -> f64 {
        self.ip_nodes(a, a).sqrt()
    }

    pub fn l2_faces(&self, f: &FieldVector) -> f64 {
        self.ip_faces(f, f).sqrt()
    }

    /// Arithmetic face average of a nodal field (how coefficient fields are
    /// placed on faces).
    pub fn face_average(&self, nodal: &[f64]) -> FieldVector {
        let g = &self.grid;
        let mut out = FieldVector::zeros(g);
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] - 1 {
                out.comps[0][FieldVector::xface(g, i, j)] =
                    0.5 * (nodal[g.idx(i, j)] + nodal[g.idx(i + 1, j)]);
            }
        }
        if g.dim == 2 {
            for j in 0..g.nodes[1] - 1 {
                for i in 0..g.nodes[0] {
                    out.comps[1][FieldVector::yface(g, i, j)] =
                        0.5 * (nodal[g.idx(i, j)] + nodal[g.idx(i, j + 1)]);
                }
            }
        }
        out
    }

    /// Conservative restriction of a face quantity to nodes: each face sends
    /// half of its quadrature mass to each endpoint, so
    /// `<restrict(q), 1>_nodes == <q, 1>_faces` exactly.
    pub fn face_to_node(&self, q: &FieldVector) -> Vec<f64> {
        let g = &self.grid;
        let mut acc = vec![0.0; g.node_count()];
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] - 1 {
                let k = FieldVector::xface(g, i, j);
                let half = 0.5 * self.face_w[0][k] * q.comps[0][k];
                acc[g.idx(i, j)] += half;
                acc[g.idx(i + 1, j)] += half;
            }
        }
        if g.dim == 2 {
            for j in 0..g.nodes[1] - 1 {
                for i in 0..g.nodes[0] {
                    let k = FieldVector::yface(g, i, j);
                    let half = 0.5 * self.face_w[1][k] * q.comps[1][k];
                    acc[g.idx(i, j)] += half;
                    acc[g.idx(i, j + 1)] += half;
                }
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.node_w) {
            *a /= w;
        }
        acc
    }

    /// Per-axis gradient components averaged back to nodes (single-sided at
    /// the boundary). Used by the norm monitors, which need a collocated
    /// gradient magnitude.
    pub fn grad_components_at_nodes(&self, phi: &[f64]) -> [Vec<f64>; 2] {
        let g = &self.grid;
        let f = self.grad_slice(phi);
        let mut cx = vec![0.0; g.node_count()];
        let mut cy = vec![0.0; g.node_count()];
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] {
                let right = (i < g.nodes[0] - 1).then(|| f.comps[0][FieldVector::xface(g, i, j)]);
                let left = (i > 0).then(|| f.comps[0][FieldVector::xface(g, i - 1, j)]);
                cx[g.idx(i, j)] = match (left, right) {
                    (Some(l), Some(r)) => 0.5 * (l + r),
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => 0.0,
                };
            }
        }
        if g.dim == 2 {
            for j in 0..g.nodes[1] {
                for i in 0..g.nodes[0] {
                    let up = (j < g.nodes[1] - 1).then(|| f.comps[1][FieldVector::yface(g, i, j)]);
                    let down = (j > 0).then(|| f.comps[1][FieldVector::yface(g, i, j - 1)]);
                    cy[g.idx(i, j)] = match (down, up) {
                        (Some(d), Some(u)) => 0.5 * (d + u),
                        (Some(d), None) => d,
                        (None, Some(u)) => u,
                        (None, None) => 0.0,
                    };
                }
            }
        }
        [cx, cy]
    }

    pub fn grad_magnitude_at_nodes(&self, phi: &[f64]) -> Vec<f64> {
        let [cx, cy] = self.grad_components_at_nodes(phi);
        cx.iter()
            .zip(&cy)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .collect()
    }

    /// Random field with the boundary behaviour of `bc`, for property tests.
    pub fn random_field(
        &self,
        bc: BcTag,
        rng: &mut impl rand::Rng,
    ) -> FieldScalar {
        let mut f = FieldScalar::zeros(&self.grid, bc);
        for v in f.values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        if bc != BcTag::Neumann {
            f.zero_boundary(&self.grid);
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn sbp_identity_hat_function() {
        // 5 nodes on [0,1], phi = [0,1,2,1,0]: both sides equal -16
        let g = Grid::new_1d(1.0, 5).unwrap();
        let ops = build_operators(&g).unwrap();
        let phi = FieldScalar {
            values: vec![0.0, 1.0, 2.0, 1.0, 0.0],
            bc: BcTag::Dirichlet,
        };
        let lap = ops.lap_dirichlet(&phi.values);
        let lhs = ops.ip_nodes(&lap, &phi.values);
        let gp = ops.grad(&phi);
        let rhs = -ops.ip_faces(&gp, &gp);
        assert!((lhs - (-16.0)).abs() < 1e-12, "lhs = {lhs}");
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_laplacian_sine_eigenpair() {
        // sin(pi x) sampled on the grid is an exact eigenvector of the
        // three-point stencil with eigenvalue -(2/h^2)(1 - cos(pi h)).
        let g = Grid::new_1d(1.0, 33).unwrap();
        let ops = build_operators(&g).unwrap();
        let h = g.spacing[0];
        let phi = FieldScalar::from_fn(&g, BcTag::Dirichlet, |x, _| (PI * x).sin());
        let lap = ops.lap_dirichlet(&phi.values);
        let lambda = -(2.0 / (h * h)) * (1.0 - (PI * h).cos());
        for i in 1..g.nodes[0] - 1 {
            assert!(
                (lap[i] - lambda * phi.values[i]).abs() < 1e-10,
                "node {i}: {} vs {}",
                lap[i],
                lambda * phi.values[i]
            );
        }
    }

    #[test]
    fn neumann_laplacian_kills_constants() {
        let g = Grid::new_2d([1.0, 1.0], [7, 9]).unwrap();
        let ops = build_operators(&g).unwrap();
        let c = FieldScalar::constant(&g, BcTag::Neumann, 3.5);
        let lap = ops.lap_neumann(&c.values);
        assert!(lap.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn sbp_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &grid in &[
            Grid::new_1d(1.5, 17).unwrap(),
            Grid::new_2d([1.0, 2.0], [9, 13]).unwrap(),
        ] {
            let ops = build_operators(&grid).unwrap();
            for _ in 0..200 {
                let phi = ops.random_field(BcTag::Dirichlet, &mut rng);
                let psi = ops.random_field(BcTag::Dirichlet, &mut rng);
                let lhs = ops.ip_nodes(&ops.lap_dirichlet(&phi.values), &psi.values);
                let rhs = -ops.ip_faces(&ops.grad(&phi), &ops.grad(&psi));
                assert!(rel(lhs, rhs) < 1e-13, "lhs {lhs} rhs {rhs}");
            }
        }
    }

    #[test]
    fn neumann_conservation_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let g = Grid::new_2d([1.0, 1.0], [11, 8]).unwrap();
        let ops = build_operators(&g).unwrap();
        for _ in 0..200 {
            let phi = ops.random_field(BcTag::Neumann, &mut rng);
            let lap = ops.lap_neumann(&phi.values);
            let total = ops.integral(&lap);
            let scale: f64 = lap.iter().zip(ops.node_weights()).map(|(v, w)| (v * w).abs()).sum();
            assert!(total.abs() <= 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn bilaplacian_symmetric_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let g = Grid::new_2d([1.0, 1.0], [9, 9]).unwrap();
        let ops = build_operators(&g).unwrap();
        for _ in 0..100 {
            let phi = ops.random_field(BcTag::Navier, &mut rng);
            let psi = ops.random_field(BcTag::Navier, &mut rng);
            let b_phi = ops.bilap_navier(&phi.values);
            let b_psi = ops.bilap_navier(&psi.values);
            let sym_l = ops.ip_nodes(&b_phi, &psi.values);
            let sym_r = ops.ip_nodes(&phi.values, &b_psi);
            assert!(rel(sym_l, sym_r) < 1e-12);
            let quad = ops.ip_nodes(&b_phi, &phi.values);
            let lap = ops.lap_dirichlet(&phi.values);
            let lap_sq = ops.ip_nodes(&lap, &lap);
            assert!(quad >= -1e-13 * lap_sq.max(1.0));
            assert!(rel(quad, lap_sq) < 1e-12);
        }
    }

    #[test]
    fn laplacian_second_order_on_manufactured_solution() {
        // lap(sin(pi x) sin(pi y)) = -2 pi^2 sin sin, observed order 2
        let mut errors = Vec::new();
        for &n in &[17usize, 33, 65] {
            let g = Grid::new_2d([1.0, 1.0], [n, n]).unwrap();
            let ops = build_operators(&g).unwrap();
            let phi = FieldScalar::from_fn(&g, BcTag::Dirichlet, |x, y| {
                (PI * x).sin() * (PI * y).sin()
            });
            let lap = ops.lap_dirichlet(&phi.values);
            let mut err = 0.0f64;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let [x, y] = g.coords(i, j);
                    let exact = -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin();
                    err = err.max((lap[g.idx(i, j)] - exact).abs());
                }
            }
            errors.push(err);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (order - 2.0).abs() <= 0.1,
                "observed order {order}, errors {errors:?}"
            );
        }
    }

    #[test]
    fn face_to_node_preserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let g = Grid::new_2d([1.0, 3.0], [8, 6]).unwrap();
        let ops = build_operators(&g).unwrap();
        let mut q = FieldVector::zeros(&g);
        for ax in 0..2 {
            for v in q.comps[ax].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let ones = FieldVector {
            comps: [vec![1.0; g.face_count(0)], vec![1.0; g.face_count(1)]],
        };
        let s = ops.face_to_node(&q);
        assert!(rel(ops.integral(&s), ops.ip_faces(&q, &ones)) < 1e-13);
    }

    #[test]
    fn div_is_negative_adjoint_of_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let g = Grid::new_2d([2.0, 1.0], [9, 7]).unwrap();
        let ops = build_operators(&g).unwrap();
        for _ in 0..50 {
            let psi = ops.random_field(BcTag::Neumann, &mut rng);
            let mut f = FieldVector::zeros(&g);
            for ax in 0..2 {
                for v in f.comps[ax].iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            let lhs = ops.ip_nodes(&ops.div(&f), &psi.values);
            let rhs = -ops.ip_faces(&f, &ops.grad(&psi));
            assert!(rel(lhs, rhs) < 1e-13);
        }
    }
}

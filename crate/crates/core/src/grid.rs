//! Structured rectangular grids and nodal/face fields.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid too coarse: axis {axis} has {nodes} nodes, need at least 5")]
    GridTooCoarse { axis: usize, nodes: usize },
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("extent must be positive on axis {0}")]
    BadExtent(usize),
}

/// Boundary-condition tag carried by scalar fields.
///
/// `Dirichlet` and `Navier` fields vanish on boundary nodes; `Navier`
/// additionally means the field's Laplacian vanishes there, which is what
/// lets the discrete bilaplacian factor through the Dirichlet Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcTag {
    Dirichlet,
    Neumann,
    Navier,
}

/// Tensor-product grid on a rectangle, nodes at the cell corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub extents: [f64; 2],
    pub nodes: [usize; 2],
    pub spacing: [f64; 2],
    pub cell_volume: f64,
}

impl Grid {
    pub fn new_1d(extent: f64, nodes: usize) -> Result<Grid, GridError> {
        if extent <= 0.0 {
            return Err(GridError::BadExtent(0));
        }
        if nodes < 5 {
            return Err(GridError::GridTooCoarse { axis: 0, nodes });
        }
        let h = extent / (nodes - 1) as f64;
        Ok(Grid {
            dim: 1,
            extents: [extent, 0.0],
            nodes: [nodes, 1],
            spacing: [h, 0.0],
            cell_volume: h,
        })
    }

    pub fn new_2d(extents: [f64; 2], nodes: [usize; 2]) -> Result<Grid, GridError> {
        for ax in 0..2 {
            if extents[ax] <= 0.0 {
                return Err(GridError::BadExtent(ax));
            }
            if nodes[ax] < 5 {
                return Err(GridError::GridTooCoarse {
                    axis: ax,
                    nodes: nodes[ax],
                });
            }
        }
        let hx = extents[0] / (nodes[0] - 1) as f64;
        let hy = extents[1] / (nodes[1] - 1) as f64;
        Ok(Grid {
            dim: 2,
            extents,
            nodes,
            spacing: [hx, hy],
            cell_volume: hx * hy,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nodes[0] + i
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0
            || i == self.nodes[0] - 1
            || (self.dim == 2 && (j == 0 || j == self.nodes[1] - 1))
    }

    /// Coordinates of node `(i, j)`.
    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
    }

    /// Trapezoid weight along one axis.
    #[inline]
    pub fn axis_weight(&self, ax: usize, k: usize) -> f64 {
        if self.dim == 1 && ax == 1 {
            return 1.0;
        }
        let n = self.nodes[ax];
        let h = self.spacing[ax];
        if k == 0 || k == n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid quadrature weight of node `(i, j)`.
    #[inline]
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        self.axis_weight(0, i) * self.axis_weight(1, j)
    }

    /// Measure of the domain rectangle.
    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            self.extents[0]
        } else {
            self.extents[0] * self.extents[1]
        }
    }

    /// Number of faces (staggered gradient points) along `ax`.
    pub fn face_count(&self, ax: usize) -> usize {
        match (self.dim, ax) {
            (1, 0) => self.nodes[0] - 1,
            (1, 1) => 0,
            (2, 0) => (self.nodes[0] - 1) * self.nodes[1],
            (2, 1) => self.nodes[0] * (self.nodes[1] - 1),
            _ => 0,
        }
    }

    /// Two grids are refinement-compatible when they cover the same rectangle.
    pub fn same_domain(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && (self.extents[0] - other.extents[0]).abs() < 1e-14
            && (self.dim == 1 || (self.extents[1] - other.extents[1]).abs() < 1e-14)
    }
}

/// Scalar field with one value per grid node.
#[derive(Clone, Debug)]
pub struct FieldScalar {
    pub values: Vec<f64>,
    pub bc: BcTag,
}

impl FieldScalar {
    pub fn zeros(grid: &Grid, bc: BcTag) -> FieldScalar {
        FieldScalar {
            values: vec![0.0; grid.node_count()],
            bc,
        }
    }

    pub fn constant(grid: &Grid, bc: BcTag, c: f64) -> FieldScalar {
        let mut f = FieldScalar {
            values: vec![c; grid.node_count()],
            bc,
        };
        if bc != BcTag::Neumann {
            f.zero_boundary(grid);
        }
        f
    }

    /// Sample `g(x, y)` at the nodes. Dirichlet/Navier fields get their
    /// boundary entries forced to zero.
    pub fn from_fn(grid: &Grid, bc: BcTag, g: impl Fn(f64, f64) -> f64) -> FieldScalar {
        let mut values = vec![0.0; grid.node_count()];
        for j in 0..grid.nodes[1] {
            for i in 0..grid.nodes[0] {
                let [x, y] = grid.coords(i, j);
                values[grid.idx(i, j)] = g(x, y);
            }
        }
        let mut f = FieldScalar { values, bc };
        if bc != BcTag::Neumann {
            f.zero_boundary(grid);
        }
        f
    }

    pub fn zero_boundary(&mut self, grid: &Grid) {
        for j in 0..grid.nodes[1] {
            for i in 0..grid.nodes[0] {
                if grid.is_boundary(i, j) {
                    self.values[grid.idx(i, j)] = 0.0;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Vector field with one value per staggered face, one component per axis.
///
/// Component `ax = 0` lives at `(i + 1/2, j)`, component `ax = 1` at
/// `(i, j + 1/2)`. This is where discrete gradients are exact enough to make
/// summation by parts an identity rather than an approximation.
#[derive(Clone, Debug)]
pub struct FieldVector {
    pub comps: [Vec<f64>; 2],
}

impl FieldVector {
    pub fn zeros(grid: &Grid) -> FieldVector {
        FieldVector {
            comps: [vec![0.0; grid.face_count(0)], vec![0.0; grid.face_count(1)]],
        }
    }

    /// x-face index for the face between `(i, j)` and `(i + 1, j)`.
    #[inline]
    pub fn xface(grid: &Grid, i: usize, j: usize) -> usize {
        j * (grid.nodes[0] - 1) + i
    }

    /// y-face index for the face between `(i, j)` and `(i, j + 1)`.
    #[inline]
    pub fn yface(grid: &Grid, i: usize, j: usize) -> usize {
        j * grid.nodes[0] + i
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_coarse_axes() {
        assert!(matches!(
            Grid::new_1d(1.0, 4),
            Err(GridError::GridTooCoarse { axis: 0, nodes: 4 })
        ));
        assert!(Grid::new_2d([1.0, 2.0], [5, 4]).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_volume() {
        let g = Grid::new_2d([2.0, 3.0], [9, 7]).unwrap();
        let mut s = 0.0;
        for j in 0..g.nodes[1] {
            for i in 0..g.nodes[0] {
                s += g.node_weight(i, j);
            }
        }
        assert!((s - 6.0).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_fields_vanish_on_boundary() {
        let g = Grid::new_2d([1.0, 1.0], [6, 6]).unwrap();
        let f = FieldScalar::from_fn(&g, BcTag::Dirichlet, |_, _| 1.0);
        for j in 0..6 {
            for i in 0..6 {
                if g.is_boundary(i, j) {
                    assert_eq!(f.values[g.idx(i, j)], 0.0);
                }
            }
        }
    }
}

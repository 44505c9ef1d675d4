//! Uniform grids on the periodic cell Y = (0,1)^d and on box domains, with
//! the discrete gradients, quadrature and field algebra used everywhere else.
//!
//! Two discrete gradients coexist:
//! * `gradient` / `gradient_box`: second-order centered differences at the
//!   nodes, used for diagnostics and field algebra;
//! * the simplex mesh (`Mesh`): first-order per-element gradients at element
//!   centroids, used by the nonlinear solvers, whose energies and residuals
//!   are assembled element by element.

use crate::error::{HomogError, Result};

/// d-vector with the unused component zeroed for d = 1.
pub type Vector = [f64; 2];

pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: &Vector) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform periodic grid on Y = (0,1)^d with k nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    d: usize,
    k: usize,
}

impl PeriodicGrid {
    pub fn new(d: usize, k: usize) -> Self {
        assert!(d == 1 || d == 2, "only d in {{1,2}} supported");
        assert!(k >= 4);
        PeriodicGrid { d, k }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.k.pow(self.d as u32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.d == 1 {
            i % self.k
        } else {
            (i % self.k) * self.k + (j % self.k)
        }
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        if self.d == 1 {
            (idx, 0)
        } else {
            (idx / self.k, idx % self.k)
        }
    }

    pub fn node_pos(&self, idx: usize) -> Vector {
        let (i, j) = self.coords(idx);
        let h = self.h();
        [i as f64 * h, if self.d == 2 { j as f64 * h } else { 0.0 }]
    }
}

/// Scalar field sampled at the nodes of a periodic grid.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(HomogError::GridMismatch(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        Ok(PeriodicField { grid, values })
    }

    pub fn zero(grid: PeriodicGrid) -> Self {
        PeriodicField { grid, values: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&Vector) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(&grid.node_pos(i))).collect();
        PeriodicField { grid, values }
    }
}

/// Nodal gradient samples (centered differences), d components per node.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub d: usize,
    pub h: f64,
    pub values: Vec<Vector>,
}

/// Centered-difference gradient of a periodic field; second-order accurate
/// and exactly mean-free per component.
pub fn gradient(field: &PeriodicField) -> GradientField {
    let g = field.grid;
    let k = g.nodes_per_axis();
    let inv2h = 0.5 / g.h();
    let mut values = vec![[0.0; 2]; g.num_nodes()];
    for idx in 0..g.num_nodes() {
        let (i, j) = g.coords(idx);
        let gx = (field.values[g.index(i + 1, j)] - field.values[g.index(i + k - 1, j)]) * inv2h;
        let gy = if g.d() == 2 {
            (field.values[g.index(i, j + 1)] - field.values[g.index(i, j + k - 1)]) * inv2h
        } else {
            0.0
        };
        values[idx] = [gx, gy];
    }
    GradientField { d: g.d(), h: g.h(), values }
}

/// Quadrature over Y: the rectangle rule, which coincides with the
/// trapezoidal rule by periodicity and is exact for grid constants.
pub fn integrate(field: &PeriodicField) -> f64 {
    let w = field.grid.h().powi(field.grid.d() as i32);
    field.values.iter().sum::<f64>() * w
}

pub fn integrate_samples(grid: &PeriodicGrid, values: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.num_nodes());
    values.iter().sum::<f64>() * grid.h().powi(grid.d() as i32)
}

/// Subtract the mean; output integrates to zero to machine precision.
pub fn project_mean_zero(field: &PeriodicField) -> PeriodicField {
    let mean = field.values.iter().sum::<f64>() / field.values.len() as f64;
    PeriodicField {
        grid: field.grid,
        values: field.values.iter().map(|v| v - mean).collect(),
    }
}

/// Box domain Omega = (0, L)^d with k intervals (k+1 nodes) per axis and a
/// homogeneous Dirichlet boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    d: usize,
    k: usize,
    length: f64,
}

impl BoxGrid {
    pub fn new(d: usize, k: usize, length: f64) -> Self {
        assert!(d == 1 || d == 2);
        assert!(k >= 4 && length > 0.0);
        BoxGrid { d, k, length }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn intervals_per_axis(&self) -> usize {
        self.k
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.k + 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.k as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.k + 1).pow(self.d as u32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.d == 1 {
            i
        } else {
            i * (self.k + 1) + j
        }
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        if self.d == 1 {
            (idx, 0)
        } else {
            (idx / (self.k + 1), idx % (self.k + 1))
        }
    }

    pub fn node_pos(&self, idx: usize) -> Vector {
        let (i, j) = self.coords(idx);
        let h = self.h();
        [i as f64 * h, if self.d == 2 { j as f64 * h } else { 0.0 }]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.coords(idx);
        i == 0 || i == self.k || (self.d == 2 && (j == 0 || j == self.k))
    }
}

/// Scalar field on a box grid; boundary nodes are pinned to zero in solves.
#[derive(Debug, Clone)]
pub struct BoxField {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
}

impl BoxField {
    pub fn zero(grid: BoxGrid) -> Self {
        BoxField { grid, values: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn(&Vector) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(&grid.node_pos(i))).collect();
        BoxField { grid, values }
    }
}

/// Centered differences in the interior, one-sided at the boundary.
pub fn gradient_box(field: &BoxField) -> GradientField {
    let g = field.grid;
    let k = g.intervals_per_axis();
    let h = g.h();
    let mut values = vec![[0.0; 2]; g.num_nodes()];
    let v = |i: usize, j: usize| field.values[g.index(i, j)];
    for idx in 0..g.num_nodes() {
        let (i, j) = g.coords(idx);
        let gx = if i == 0 {
            (v(1, j) - v(0, j)) / h
        } else if i == k {
            (v(k, j) - v(k - 1, j)) / h
        } else {
            (v(i + 1, j) - v(i - 1, j)) / (2.0 * h)
        };
        let gy = if g.d() == 2 {
            if j == 0 {
                (v(i, 1) - v(i, 0)) / h
            } else if j == k {
                (v(i, k) - v(i, k - 1)) / h
            } else {
                (v(i, j + 1) - v(i, j - 1)) / (2.0 * h)
            }
        } else {
            0.0
        };
        values[idx] = [gx, gy];
    }
    GradientField { d: g.d(), h, values }
}

/// Trapezoidal quadrature over the box (halved weights on faces).
pub fn integrate_box(field: &BoxField) -> f64 {
    let g = field.grid;
    let k = g.intervals_per_axis();
    let mut sum = 0.0;
    for idx in 0..g.num_nodes() {
        let (i, j) = g.coords(idx);
        let mut w = 1.0;
        if i == 0 || i == k {
            w *= 0.5;
        }
        if g.d() == 2 && (j == 0 || j == k) {
            w *= 0.5;
        }
        sum += w * field.values[idx];
    }
    sum * g.h().powi(g.d() as i32)
}

/// One element of the solver mesh: an interval (d = 1, 2 nodes) or a
/// triangle (d = 2, 3 nodes), with the constant gradient coefficients of the
/// nodal hat functions, the element measure, and the quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct Simplex {
    pub nodes: [usize; 3],
    pub grads: [Vector; 3],
    pub measure: f64,
    pub centroid: Vector,
    pub nnodes: usize,
}

impl Simplex {
    /// Gradient of the nodal interpolant on this element.
    pub fn gradient(&self, values: &[f64]) -> Vector {
        let mut g = [0.0; 2];
        for a in 0..self.nnodes {
            let v = values[self.nodes[a]];
            g[0] += v * self.grads[a][0];
            g[1] += v * self.grads[a][1];
        }
        g
    }
}

/// Element mesh over a periodic or box grid. Node indices refer to the
/// owning grid's node numbering.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub d: usize,
    pub simplices: Vec<Simplex>,
    pub num_nodes: usize,
}

impl Mesh {
    pub fn from_periodic(grid: &PeriodicGrid) -> Mesh {
        let k = grid.nodes_per_axis();
        let h = grid.h();
        let mut simplices = Vec::new();
        match grid.d() {
            1 => {
                for i in 0..k {
                    simplices.push(Simplex {
                        nodes: [grid.index(i, 0), grid.index(i + 1, 0), 0],
                        grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
                        measure: h,
                        centroid: [(i as f64 + 0.5) * h, 0.0],
                        nnodes: 2,
                    });
                }
            }
            2 => {
                for i in 0..k {
                    for j in 0..k {
                        push_cell_triangles(&mut simplices, h, i, j, |a, b| grid.index(a, b));
                    }
                }
            }
            _ => unreachable!(),
        }
        Mesh { d: grid.d(), simplices, num_nodes: grid.num_nodes() }
    }

    pub fn from_box(grid: &BoxGrid) -> Mesh {
        let k = grid.intervals_per_axis();
        let h = grid.h();
        let mut simplices = Vec::new();
        match grid.d() {
            1 => {
                for i in 0..k {
                    simplices.push(Simplex {
                        nodes: [grid.index(i, 0), grid.index(i + 1, 0), 0],
                        grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
                        measure: h,
                        centroid: [(i as f64 + 0.5) * h, 0.0],
                        nnodes: 2,
                    });
                }
            }
            2 => {
                for i in 0..k {
                    for j in 0..k {
                        push_cell_triangles(&mut simplices, h, i, j, |a, b| grid.index(a, b));
                    }
                }
            }
            _ => unreachable!(),
        }
        Mesh { d: grid.d(), simplices, num_nodes: grid.num_nodes() }
    }

    pub fn total_measure(&self) -> f64 {
        self.simplices.iter().map(|s| s.measure).sum()
    }

    /// Per-element gradient of a nodal field.
    pub fn element_gradients(&self, values: &[f64]) -> Vec<Vector> {
        self.simplices.iter().map(|s| s.gradient(values)).collect()
    }
}

/// Split the square cell (i, j)..(i+1, j+1) into two triangles along the
/// main diagonal. The hat-function gradients are constant per triangle.
fn push_cell_triangles(
    out: &mut Vec<Simplex>,
    h: f64,
    i: usize,
    j: usize,
    index: impl Fn(usize, usize) -> usize,
) {
    let x0 = i as f64 * h;
    let y0 = j as f64 * h;
    // lower triangle: (i,j), (i+1,j), (i+1,j+1)
    out.push(Simplex {
        nodes: [index(i, j), index(i + 1, j), index(i + 1, j + 1)],
        grads: [[-1.0 / h, 0.0], [1.0 / h, -1.0 / h], [0.0, 1.0 / h]],
        measure: 0.5 * h * h,
        centroid: [x0 + 2.0 * h / 3.0, y0 + h / 3.0],
        nnodes: 3,
    });
    // upper triangle: (i,j), (i+1,j+1), (i,j+1)
    out.push(Simplex {
        nodes: [index(i, j), index(i + 1, j + 1), index(i, j + 1)],
        grads: [[0.0, -1.0 / h], [1.0 / h, 0.0], [-1.0 / h, 1.0 / h]],
        measure: 0.5 * h * h,
        centroid: [x0 + h / 3.0, y0 + 2.0 * h / 3.0],
        nnodes: 3,
    });
}

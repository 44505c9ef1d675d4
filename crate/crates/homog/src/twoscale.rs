//! Two-scale composition S_eps(x, y) = eps(N(x/eps) + y): unfolding of
//! grid fields, the discrete decomposition identity, two-scale averages,
//! and the corrector-structure diagnostic for convergence studies.

use rayon::prelude::*;

use crate::cell::solve_cell;
use crate::dirichlet::DirichletSolution;
use crate::error::{HomogError, Result};
use crate::operator::MonotoneOperator;
use crate::pgrid::{dot, norm, BoxField, BoxGrid, Mesh, PeriodicGrid, Vector};
use crate::solver::Density;

/// Sample values that can be averaged: scalars and vectors.
pub trait Sample: Copy + Send + Sync {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn scale(self, c: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Sample for Vector {
    fn zero() -> Self {
        [0.0; 2]
    }
    fn add(self, o: Self) -> Self {
        [self[0] + o[0], self[1] + o[1]]
    }
    fn scale(self, c: f64) -> Self {
        [self[0] * c, self[1] * c]
    }
    fn magnitude(self) -> f64 {
        norm(&self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Y-lattice nodes, (m+1)^d per cell (shared edges duplicated).
    Nodal,
    /// Element quadrature points (interval midpoints / triangle centroids).
    Element,
}

/// Field over (macro cell) x (Y sample point) produced by unfolding.
#[derive(Debug, Clone)]
pub struct UnfoldedField<T: Sample> {
    pub eps: f64,
    pub d: usize,
    /// Macro cells per axis (1/eps).
    pub cells_per_axis: usize,
    /// Grid intervals per cell and axis (K * eps).
    pub m: usize,
    pub kind: SampleKind,
    /// Cell-major storage: values[cell * y_count + y].
    pub values: Vec<T>,
}

impl<T: Sample> UnfoldedField<T> {
    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.d as u32)
    }

    pub fn y_count(&self) -> usize {
        match (self.kind, self.d) {
            (SampleKind::Nodal, 1) => self.m + 1,
            (SampleKind::Nodal, _) => (self.m + 1) * (self.m + 1),
            (SampleKind::Element, 1) => self.m,
            (SampleKind::Element, _) => 2 * self.m * self.m,
        }
    }

    pub fn value(&self, cell: usize, y: usize) -> T {
        self.values[cell * self.y_count() + y]
    }
}

/// Decompose an aligned (eps, grid) pair into cells-per-axis and intervals
/// per cell.
fn unfold_layout(eps: f64, k: usize) -> Result<(usize, usize)> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HomogError::Misaligned { eps, reason: "eps must lie in (0, 1]".into() });
    }
    let inv = 1.0 / eps;
    if (inv - inv.round()).abs() > 1e-9 {
        return Err(HomogError::Misaligned { eps, reason: "1/eps is not an integer".into() });
    }
    let m = k as f64 * eps;
    if (m - m.round()).abs() > 1e-9 {
        return Err(HomogError::Misaligned { eps, reason: "K*eps is not an integer".into() });
    }
    Ok((inv.round() as usize, m.round() as usize))
}

/// Unfold a nodal field: (cell, y-node) -> v(eps(N(x/eps) + y)) by exact
/// lookup (no interpolation under alignment).
pub fn unfold(v: &BoxField, eps: f64) -> Result<UnfoldedField<f64>> {
    let grid = v.grid;
    let (cells, m) = unfold_layout(eps, grid.intervals_per_axis())?;
    let mut out = Vec::new();
    match grid.d() {
        1 => {
            for c in 0..cells {
                for j in 0..=m {
                    out.push(v.values[c * m + j]);
                }
            }
        }
        _ => {
            for ci in 0..cells {
                for cj in 0..cells {
                    for yi in 0..=m {
                        for yj in 0..=m {
                            out.push(v.values[grid.index(ci * m + yi, cj * m + yj)]);
                        }
                    }
                }
            }
        }
    }
    Ok(UnfoldedField {
        eps,
        d: grid.d(),
        cells_per_axis: cells,
        m,
        kind: SampleKind::Nodal,
        values: out,
    })
}

/// Unfold per-element samples (gradients, fluxes) in mesh element order.
pub fn unfold_elements<T: Sample>(
    values: &[T],
    grid: &BoxGrid,
    eps: f64,
) -> Result<UnfoldedField<T>> {
    let (cells, m) = unfold_layout(eps, grid.intervals_per_axis())?;
    let k = grid.intervals_per_axis();
    let mut out = Vec::new();
    match grid.d() {
        1 => {
            assert_eq!(values.len(), k);
            for c in 0..cells {
                for j in 0..m {
                    out.push(values[c * m + j]);
                }
            }
        }
        _ => {
            assert_eq!(values.len(), 2 * k * k);
            for ci in 0..cells {
                for cj in 0..cells {
                    for yi in 0..m {
                        for yj in 0..m {
                            for t in 0..2 {
                                let e = ((ci * m + yi) * k + cj * m + yj) * 2 + t;
                                out.push(values[e]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(UnfoldedField {
        eps,
        d: grid.d(),
        cells_per_axis: cells,
        m,
        kind: SampleKind::Element,
        values: out,
    })
}

/// Quadrature weights over one cell's y-samples (summing to 1).
fn y_weights<T: Sample>(u: &UnfoldedField<T>) -> Vec<f64> {
    let m = u.m;
    match (u.kind, u.d) {
        (SampleKind::Nodal, 1) => (0..=m)
            .map(|j| if j == 0 || j == m { 0.5 / m as f64 } else { 1.0 / m as f64 })
            .collect(),
        (SampleKind::Nodal, _) => {
            let w1: Vec<f64> = (0..=m)
                .map(|j| if j == 0 || j == m { 0.5 / m as f64 } else { 1.0 / m as f64 })
                .collect();
            let mut w = Vec::with_capacity((m + 1) * (m + 1));
            for a in 0..=m {
                for b in 0..=m {
                    w.push(w1[a] * w1[b]);
                }
            }
            w
        }
        (SampleKind::Element, 1) => vec![1.0 / m as f64; m],
        (SampleKind::Element, _) => vec![0.5 / (m * m) as f64; 2 * m * m],
    }
}

/// Per-cell Y-average: the discrete weak* two-scale limit of the cell.
pub fn two_scale_average<T: Sample>(u: &UnfoldedField<T>) -> Vec<T> {
    let w = y_weights(u);
    (0..u.cell_count())
        .map(|c| {
            let mut acc = T::zero();
            for (y, &wy) in w.iter().enumerate() {
                acc = acc.add(u.value(c, y).scale(wy));
            }
            acc
        })
        .collect()
}

/// Integral over Omega x Y; matches integrate over Omega exactly for
/// unfolded fields (the discrete isometry).
pub fn integrate_unfolded<T: Sample>(u: &UnfoldedField<T>) -> T {
    let w = y_weights(u);
    let cell_measure = u.eps.powi(u.d as i32);
    let mut acc = T::zero();
    for c in 0..u.cell_count() {
        for (y, &wy) in w.iter().enumerate() {
            acc = acc.add(u.value(c, y).scale(wy * cell_measure));
        }
    }
    acc
}

/// Y-sample coordinates matching `y_weights` order.
fn y_points<T: Sample>(u: &UnfoldedField<T>) -> Vec<Vector> {
    let m = u.m;
    let h = 1.0 / m as f64;
    match (u.kind, u.d) {
        (SampleKind::Nodal, 1) => (0..=m).map(|j| [j as f64 * h, 0.0]).collect(),
        (SampleKind::Nodal, _) => {
            let mut p = Vec::new();
            for a in 0..=m {
                for b in 0..=m {
                    p.push([a as f64 * h, b as f64 * h]);
                }
            }
            p
        }
        (SampleKind::Element, 1) => (0..m).map(|j| [(j as f64 + 0.5) * h, 0.0]).collect(),
        (SampleKind::Element, _) => {
            let mut p = Vec::new();
            for a in 0..m {
                for b in 0..m {
                    let (x0, y0) = (a as f64 * h, b as f64 * h);
                    p.push([x0 + 2.0 * h / 3.0, y0 + h / 3.0]);
                    p.push([x0 + h / 3.0, y0 + 2.0 * h / 3.0]);
                }
            }
            p
        }
    }
}

fn fract(x: f64) -> f64 {
    x - x.floor()
}

/// Discrete decomposition identity: | integral of g(x, x/eps) dx -
/// double integral of g(S_eps(x, y), y) dy dx | under shared element
/// quadrature. Exact (up to roundoff) for aligned grids.
pub fn decomposition_identity_check<G: Fn(&Vector, &Vector) -> f64>(
    g: &G,
    eps: f64,
    grid: &BoxGrid,
) -> Result<f64> {
    let (cells, m) = unfold_layout(eps, grid.intervals_per_axis())?;
    let mesh = Mesh::from_box(grid);
    let inv_eps = 1.0 / eps;
    let mut lhs = 0.0;
    for s in &mesh.simplices {
        let y = [fract(s.centroid[0] * inv_eps), fract(s.centroid[1] * inv_eps)];
        lhs += s.measure * g(&s.centroid, &y);
    }
    // RHS over cells x Y-elements with the matching quadrature points.
    let template: UnfoldedField<f64> = UnfoldedField {
        eps,
        d: grid.d(),
        cells_per_axis: cells,
        m,
        kind: SampleKind::Element,
        values: Vec::new(),
    };
    let pts = y_points(&template);
    let wts = y_weights(&template);
    let cell_measure = eps.powi(grid.d() as i32);
    let mut rhs = 0.0;
    for ci in 0..cells {
        for cj in 0..if grid.d() == 1 { 1 } else { cells } {
            let base = [ci as f64 * eps, cj as f64 * eps];
            for (p, &w) in pts.iter().zip(&wts) {
                let x = [base[0] + eps * p[0], base[1] + eps * p[1]];
                rhs += cell_measure * w * g(&x, p);
            }
        }
    }
    Ok((lhs - rhs).abs())
}

#[derive(Debug, Clone)]
pub struct CorrectorReport {
    /// Integral over Omega x Y of |U_est - grad_y w| (total L1 distance to
    /// the reconstructed corrector field).
    pub l1_distance: f64,
    /// Worst per-cell Y-averaged L1 distance.
    pub max_cell_l1: f64,
    /// Worst normalized pairing of U_est against the divergence-free
    /// periodic test basis (constants; rotated trig gradients in 2D).
    pub orthogonality_gap: f64,
    /// Modular lower-semicontinuity spot check: integral of M(x/eps,
    /// grad u^eps) minus the unfolded modular (nonnegative up to roundoff).
    pub lsc_gap: f64,
}

/// Divergence-free periodic test fields evaluated at Y-points.
fn div_free_basis(d: usize, pts: &[Vector]) -> Vec<Vec<Vector>> {
    let mut basis: Vec<Vec<Vector>> = Vec::new();
    basis.push(pts.iter().map(|_| [1.0, 0.0]).collect());
    if d == 2 {
        basis.push(pts.iter().map(|_| [0.0, 1.0]).collect());
        let tau = 2.0 * std::f64::consts::PI;
        // rot grad of sin/cos(2 pi y_i): curl construction
        basis.push(pts.iter().map(|p| [-tau * (tau * p[0]).cos(), 0.0]).collect());
        basis.push(pts.iter().map(|p| [tau * (tau * p[0]).sin(), 0.0]).collect());
        basis.push(pts.iter().map(|p| [0.0, tau * (tau * p[1]).cos()]).collect());
        basis.push(pts.iter().map(|p| [0.0, -tau * (tau * p[1]).sin()]).collect());
    }
    basis
}

/// Corrector-structure diagnostic: unfold grad u^eps, subtract the cellwise
/// homogenized gradient, and compare the oscillation to the cell-problem
/// corrector gradient at that cell's macroscopic gradient.
pub fn corrector_diagnostic(
    op: &MonotoneOperator,
    sol: &DirichletSolution,
    homog: &DirichletSolution,
    tol: f64,
) -> Result<CorrectorReport> {
    let eps = sol.eps;
    let grid = sol.grid;
    let unfolded = unfold_elements(&sol.element_grads, &grid, eps)?;
    let wts = y_weights(&unfolded);
    let pts = y_points(&unfolded);
    let y_count = unfolded.y_count();
    let cell_count = unfolded.cell_count();

    // Cellwise macroscopic gradient: mean of the homogenized element
    // gradients over the cell (all elements share the same measure).
    let homog_unfolded = unfold_elements(&homog.element_grads, &grid, eps)?;
    let cell_grads = two_scale_average(&homog_unfolded);

    // Corrector gradients per cell on the matching Y-mesh.
    let corrector_grads: Vec<Vec<Vector>> = cell_grads
        .par_iter()
        .map(|xi| {
            let y_grid = PeriodicGrid::new(grid.d(), unfolded.m);
            solve_cell(op, *xi, &y_grid, tol).map(|s| s.element_grads)
        })
        .collect::<Result<_>>()?;

    let basis = div_free_basis(grid.d(), &pts);
    let basis_scale: Vec<f64> = basis
        .iter()
        .map(|psi| {
            wts.iter().zip(psi).map(|(&w, p)| w * norm(p)).sum::<f64>()
        })
        .collect();

    let cell_measure = eps.powi(grid.d() as i32);
    let mut l1_distance = 0.0;
    let mut max_cell_l1 = 0.0_f64;
    let mut ortho = 0.0_f64;
    let mut lsc_lhs = 0.0;
    let mut lsc_rhs = 0.0;
    let inv_eps = 1.0 / eps;
    for c in 0..cell_count {
        let mut cell_l1 = 0.0;
        let mut pairings = vec![0.0; basis.len()];
        for y in 0..y_count {
            let g = unfolded.value(c, y);
            // subtract the homogenized gradient pointwise so the constant-
            // coefficient case yields an exactly vanishing oscillation; the
            // corrector reference is still solved at the cell-mean gradient
            let g0 = homog_unfolded.value(c, y);
            let u_est = [g[0] - g0[0], g[1] - g0[1]];
            let wy = wts[y];
            let d = [
                u_est[0] - corrector_grads[c][y][0],
                u_est[1] - corrector_grads[c][y][1],
            ];
            cell_l1 += wy * norm(&d);
            for (b, psi) in basis.iter().enumerate() {
                pairings[b] += wy * dot(&u_est, &psi[y]);
            }
            // unfolded modular at the matching fast variable
            lsc_rhs += cell_measure * wy * op.value(&pts[y], &g);
        }
        l1_distance += cell_measure * cell_l1;
        max_cell_l1 = max_cell_l1.max(cell_l1);
        for (b, p) in pairings.iter().enumerate() {
            ortho = ortho.max(p.abs() / basis_scale[b]);
        }
    }
    let mesh = Mesh::from_box(&grid);
    for (s, g) in mesh.simplices.iter().zip(&sol.element_grads) {
        let y = [fract(s.centroid[0] * inv_eps), fract(s.centroid[1] * inv_eps)];
        lsc_lhs += s.measure * op.value(&y, g);
    }
    Ok(CorrectorReport {
        l1_distance,
        max_cell_l1,
        orthogonality_gap: ortho,
        lsc_gap: lsc_lhs - lsc_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::effective_operator_table;
    use crate::dirichlet::{convergence_study, solve_eps_problem};
    use crate::operator::make_operator;
    use crate::pgrid::integrate_box;
    use crate::spatial::SpatialFn;
    use crate::tabulated::GridSpec;

    fn step13() -> SpatialFn {
        SpatialFn::Step { lo: 1.0, hi: 3.0, split: 0.5 }
    }

    #[test]
    fn unfold_constant_and_linearity() {
        let grid = BoxGrid::new(1, 32, 1.0);
        let c = BoxField::from_fn(grid, |_| 4.25);
        let uc = unfold(&c, 0.25).unwrap();
        assert!(uc.values.iter().all(|&v| v == 4.25));
        let v = BoxField::from_fn(grid, |x| x[0] * x[0]);
        let w = BoxField::from_fn(grid, |x| (7.0 * x[0]).sin());
        let combo = BoxField {
            grid,
            values: v.values.iter().zip(&w.values).map(|(a, b)| 2.0 * a - 3.0 * b).collect(),
        };
        let (uv, uw, ucombo) =
            (unfold(&v, 0.25).unwrap(), unfold(&w, 0.25).unwrap(), unfold(&combo, 0.25).unwrap());
        for i in 0..ucombo.values.len() {
            assert_eq!(ucombo.values[i], 2.0 * uv.values[i] - 3.0 * uw.values[i]);
        }
    }

    #[test]
    fn unfold_identity_point() {
        // v(x) = x, eps = 1/2, cell 0, y = 0.5 -> 0.25
        let grid = BoxGrid::new(1, 8, 1.0);
        let v = BoxField::from_fn(grid, |x| x[0]);
        let u = unfold(&v, 0.5).unwrap();
        assert_eq!(u.m, 4);
        assert_eq!(u.value(0, 2), 0.25);
        assert_eq!(u.value(1, 2), 0.75);
    }

    #[test]
    fn resonant_oscillation_depends_on_y_only() {
        let eps = 0.125;
        let grid = BoxGrid::new(1, 256, 1.0);
        let v = BoxField::from_fn(grid, |x| (2.0 * std::f64::consts::PI * x[0] / eps).sin());
        let u = unfold(&v, eps).unwrap();
        for c in 0..u.cell_count() {
            for j in 0..u.y_count() {
                let y = j as f64 / u.m as f64;
                let want = (2.0 * std::f64::consts::PI * y).sin();
                assert!(
                    (u.value(c, j) - want).abs() < 1e-11,
                    "cell {c} y {y}: {} vs {want}",
                    u.value(c, j)
                );
            }
        }
        // two-scale average of the resonant mode vanishes
        let avgs = two_scale_average(&u);
        assert!(avgs.iter().all(|a| a.abs() < 1e-12));
    }

    #[test]
    fn unfold_misalignment_rejected() {
        let grid = BoxGrid::new(1, 10, 1.0);
        let v = BoxField::from_fn(grid, |x| x[0]);
        assert!(matches!(unfold(&v, 0.25), Err(HomogError::Misaligned { .. })));
        assert!(matches!(unfold(&v, 0.3), Err(HomogError::Misaligned { .. })));
    }

    #[test]
    fn integral_isometry_and_cell_means() {
        let grid = BoxGrid::new(1, 64, 1.0);
        let v = BoxField::from_fn(grid, |x| (3.0 * x[0]).cos() + x[0]);
        let u = unfold(&v, 0.25).unwrap();
        let direct = integrate_box(&v);
        let unfolded = integrate_unfolded(&u);
        assert!((direct - unfolded).abs() < 1e-14, "{direct} vs {unfolded}");
        // element-kind average is the exact cell mean
        let samples: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let ue = unfold_elements(&samples, &grid, 0.25).unwrap();
        let avg = two_scale_average(&ue);
        for c in 0..4 {
            let mean: f64 = samples[c * 16..(c + 1) * 16].iter().sum::<f64>() / 16.0;
            assert!((avg[c] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposition_identity_1d() {
        let grid = BoxGrid::new(1, 256, 1.0);
        let gap = decomposition_identity_check(&|_x, _y| 1.0, 0.125, &grid).unwrap();
        assert!(gap == 0.0, "{gap}");
        let tau = 2.0 * std::f64::consts::PI;
        let gap =
            decomposition_identity_check(&|x, y| x[0] * (tau * y[0]).sin(), 0.125, &grid).unwrap();
        assert!(gap <= 1e-12, "{gap}");
    }

    #[test]
    fn decomposition_identity_2d() {
        let grid = BoxGrid::new(2, 32, 1.0);
        let tau = 2.0 * std::f64::consts::PI;
        let gap = decomposition_identity_check(
            &|x, y| x[0] * (tau * y[1]).sin() + x[1] * x[1] * (tau * y[0]).cos(),
            0.25,
            &grid,
        )
        .unwrap();
        assert!(gap <= 1e-12, "{gap}");
    }

    #[test]
    fn decomposition_identity_solver_output() {
        let op = make_operator("linear", None, Some(step13()), None).unwrap();
        let grid = BoxGrid::new(1, 128, 1.0);
        let eps = 0.125;
        let sol = solve_eps_problem(&op, eps, &|x: &Vector| [x[0], 0.0], &grid, 1e-12, 16)
            .unwrap();
        let h = grid.h();
        let grads = sol.element_grads.clone();
        let a = step13();
        let g = move |x: &Vector, y: &Vector| {
            let e = ((x[0] / h) as usize).min(grads.len() - 1);
            a.eval(y) * grads[e][0] * grads[e][0]
        };
        let gap = decomposition_identity_check(&g, eps, &grid).unwrap();
        assert!(gap <= 1e-10, "{gap}");
    }

    #[test]
    fn corrector_diagnostic_constant_coefficient() {
        // no oscillation: U_est vanishes with the corrector
        let op = make_operator("linear", None, None, None).unwrap();
        let cell_grid = PeriodicGrid::new(1, 64);
        let table = effective_operator_table(
            &op,
            vec![GridSpec::new(1.0, 8).uniform_symmetric()],
            &cell_grid,
            1e-12,
        );
        let grid = BoxGrid::new(1, 128, 1.0);
        let report = convergence_study(
            &op,
            &table,
            &|x: &Vector| [x[0], 0.0],
            &[0.25],
            &grid,
            1e-12,
            16,
        )
        .unwrap();
        let diag =
            corrector_diagnostic(&op, &report.eps_solutions[0], &report.homog, 1e-12).unwrap();
        assert!(diag.l1_distance <= 1e-6, "{}", diag.l1_distance);
        assert!(diag.orthogonality_gap <= 1e-6, "{}", diag.orthogonality_gap);
    }

    #[test]
    fn corrector_diagnostic_oscillatory_study() {
        let op = make_operator("linear", None, Some(step13()), None).unwrap();
        let cell_grid = PeriodicGrid::new(1, 64);
        let table = effective_operator_table(
            &op,
            vec![GridSpec::new(1.0, 8).uniform_symmetric()],
            &cell_grid,
            1e-12,
        );
        let grid = BoxGrid::new(1, 256, 1.0);
        let report = convergence_study(
            &op,
            &table,
            &|x: &Vector| [x[0], 0.0],
            &[0.25, 0.0625],
            &grid,
            1e-12,
            16,
        )
        .unwrap();
        let d0 =
            corrector_diagnostic(&op, &report.eps_solutions[0], &report.homog, 1e-12).unwrap();
        let d1 =
            corrector_diagnostic(&op, &report.eps_solutions[1], &report.homog, 1e-12).unwrap();
        // the oscillation tracks the cell corrector better as eps shrinks
        assert!(d1.l1_distance < d0.l1_distance, "{} vs {}", d1.l1_distance, d0.l1_distance);
        assert!(d1.orthogonality_gap <= 1e-3, "{}", d1.orthogonality_gap);
        assert!(d1.lsc_gap >= -1e-10, "{}", d1.lsc_gap);
    }
}

//! Dirichlet problems on the unit box: the oscillatory problem
//! div A(x/eps, grad u) = div F, the homogenized problem div hatA(grad u)
//! = div F driven by a tabulated effective operator, the truncation
//! operator, and the eps-convergence study.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::cell::EffectiveTable;
use crate::error::{HomogError, Result};
use crate::operator::MonotoneOperator;
use crate::pgrid::{dot, gradient_box, norm, BoxField, BoxGrid, GradientField, Mesh, Vector};
use crate::solver::{
    solve_with_continuation, Density, NewtonConfig, NonlinearSystem, SimplexProblem,
};

/// Alignment policy for the oscillatory problem: 1/eps and K*eps must be
/// integers (the composite coefficient is sampled without phase error) and
/// each periodicity cell must carry at least `min_nodes_per_cell` intervals.
pub fn check_alignment(eps: f64, k: usize, min_nodes_per_cell: usize) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HomogError::Misaligned { eps, reason: "eps must lie in (0, 1]".into() });
    }
    let inv = 1.0 / eps;
    if (inv - inv.round()).abs() > 1e-9 {
        return Err(HomogError::Misaligned { eps, reason: "1/eps is not an integer".into() });
    }
    let per_cell = k as f64 * eps;
    if (per_cell - per_cell.round()).abs() > 1e-9 {
        return Err(HomogError::Misaligned { eps, reason: "K*eps is not an integer".into() });
    }
    if per_cell.round() < min_nodes_per_cell as f64 {
        return Err(HomogError::Misaligned {
            eps,
            reason: format!(
                "only {} grid intervals per periodicity cell (need {})",
                per_cell.round(),
                min_nodes_per_cell
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    /// 0.0 marks the homogenized problem.
    pub eps: f64,
    pub grid: BoxGrid,
    /// Nodal solution; boundary nodes are exactly zero.
    pub u: BoxField,
    /// Nodal gradient (one-sided at the boundary) for reporting.
    pub grad: GradientField,
    /// Per-simplex solution gradient (the solver's native sampling).
    pub element_grads: Vec<Vector>,
    /// Per-simplex flux A(x/eps, grad u) resp. hatA(grad u).
    pub element_flux: Vec<Vector>,
    /// integral of flux . grad u.
    pub energy: f64,
    /// integral of F . grad u.
    pub load_work: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn assemble_solution(
    mesh: &Mesh,
    grid: &BoxGrid,
    eps: f64,
    full: Vec<f64>,
    element_grads: Vec<Vector>,
    element_flux: Vec<Vector>,
    load: &[Vector],
    residual: f64,
    iterations: usize,
) -> Result<DirichletSolution> {
    let mut energy = 0.0;
    let mut load_work = 0.0;
    for ((s, g), q) in mesh.simplices.iter().zip(&element_grads).zip(&element_flux) {
        energy += s.measure * dot(q, g);
    }
    for (si, s) in mesh.simplices.iter().enumerate() {
        load_work += s.measure * dot(&load[si], &element_grads[si]);
    }
    // Discrete weak form tested with the solution itself.
    if (energy - load_work).abs() > 1e-8 * (1.0 + load_work.abs()) {
        return Err(HomogError::NonConvergence {
            residual: (energy - load_work).abs(),
            iterations,
            tol: 1e-8 * (1.0 + load_work.abs()),
        });
    }
    let u = BoxField { grid: *grid, values: full };
    let grad = gradient_box(&u);
    Ok(DirichletSolution {
        eps,
        grid: *grid,
        u,
        grad,
        element_grads,
        element_flux,
        energy,
        load_work,
        residual,
        iterations,
    })
}

/// Solve the oscillatory Dirichlet problem at scale eps with load F
/// (entering as integral of F . grad phi) on the unit box.
pub fn solve_eps_problem<F: Fn(&Vector) -> Vector + Sync>(
    op: &MonotoneOperator,
    eps: f64,
    load_fn: &F,
    grid: &BoxGrid,
    tol: f64,
    min_nodes_per_cell: usize,
) -> Result<DirichletSolution> {
    check_alignment(eps, grid.intervals_per_axis(), min_nodes_per_cell)?;
    let mesh = Mesh::from_box(grid);
    let load: Vec<Vector> = mesh.simplices.iter().map(|s| load_fn(&s.centroid)).collect();
    let boundary: Vec<bool> = (0..grid.num_nodes()).map(|i| grid.is_boundary(i)).collect();
    let problem = SimplexProblem::dirichlet(&mesh, op, 1.0 / eps, load.clone(), &boundary);
    let cfg = NewtonConfig::new(tol);
    // Working radius: the load sets the flux scale; 1 + sup |F| is a safe
    // gradient bound for the built-in families.
    let f_scale = load.iter().map(norm).fold(0.0, f64::max);
    let reg = crate::cell::regularization_scale(op, 1.0 + f_scale);
    let (red, report) = solve_with_continuation(&problem, vec![0.0; problem.dof()], &cfg, reg)?;
    let full = problem.expand(&red);
    let element_grads = mesh.element_gradients(&full);
    let inv_eps = 1.0 / eps;
    let element_flux: Vec<Vector> = mesh
        .simplices
        .iter()
        .zip(&element_grads)
        .map(|(s, g)| op.eval(&[s.centroid[0] * inv_eps, s.centroid[1] * inv_eps], g))
        .collect();
    assemble_solution(
        &mesh,
        grid,
        eps,
        full,
        element_grads,
        element_flux,
        &load,
        report.residual,
        report.iterations,
    )
}

fn locate(ax: &[f64], x: f64) -> (usize, f64, f64) {
    let lo = ax[0];
    let hi = ax[ax.len() - 1];
    let excess = (lo - x).max(x - hi).max(0.0);
    let xc = x.clamp(lo, hi);
    let mut i = match ax.partition_point(|&a| a <= xc) {
        0 => 0,
        p => p - 1,
    };
    i = i.min(ax.len() - 2);
    let theta = (xc - ax[i]) / (ax[i + 1] - ax[i]);
    (i, theta, excess)
}

/// Multilinear interpolant of the hat A table used as a Density for the
/// homogenized solve. Evaluations outside the tabulated range clamp to the
/// boundary and record the worst excursion, surfaced after the solve as a
/// range error prompting table extension.
pub struct HatDensity<'a> {
    table: &'a EffectiveTable,
    out_of_range: Mutex<Option<(Vector, f64)>>,
}

impl<'a> HatDensity<'a> {
    pub fn new(table: &'a EffectiveTable) -> Self {
        HatDensity { table, out_of_range: Mutex::new(None) }
    }

    fn interp(&self, g: &Vector) -> Vector {
        let axes = &self.table.axes;
        let (value, excess) = match axes.len() {
            1 => {
                let (i, th, ex) = locate(&axes[0], g[0]);
                let a = self.table.hat_a[i];
                let b = self.table.hat_a[i + 1];
                (
                    [
                        (1.0 - th) * a[0] + th * b[0],
                        (1.0 - th) * a[1] + th * b[1],
                    ],
                    ex,
                )
            }
            _ => {
                let (i, tx, ex) = locate(&axes[0], g[0]);
                let (j, ty, ey) = locate(&axes[1], g[1]);
                let ny = axes[1].len();
                let at = |a: usize, b: usize| self.table.hat_a[a * ny + b];
                let mut v = [0.0; 2];
                for c in 0..2 {
                    let lo = (1.0 - tx) * at(i, j)[c] + tx * at(i + 1, j)[c];
                    let hi = (1.0 - tx) * at(i, j + 1)[c] + tx * at(i + 1, j + 1)[c];
                    v[c] = (1.0 - ty) * lo + ty * hi;
                }
                (v, ex.max(ey))
            }
        };
        if excess > 0.0 {
            let mut guard = self.out_of_range.lock().unwrap();
            if guard.as_ref().map(|(_, e)| excess > *e).unwrap_or(true) {
                *guard = Some((*g, excess));
            }
        }
        value
    }

    pub fn range_violation(&self) -> Option<(Vector, f64)> {
        self.out_of_range.lock().unwrap().clone()
    }
}

impl<'a> Density for HatDensity<'a> {
    fn value(&self, _y: &Vector, _g: &Vector) -> f64 {
        0.0
    }
    fn flux(&self, _y: &Vector, g: &Vector) -> Vector {
        self.interp(g)
    }
    fn flux_jacobian(&self, y: &Vector, g: &Vector) -> [[f64; 2]; 2] {
        // Finite differences across the interpolant, symmetrized for PCG.
        let h = 1e-6 * (1.0 + norm(g));
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let mut gp = *g;
            let mut gm = *g;
            gp[c] += h;
            gm[c] -= h;
            let fp = self.flux(y, &gp);
            let fm = self.flux(y, &gm);
            j[0][c] = (fp[0] - fm[0]) / (2.0 * h);
            j[1][c] = (fp[1] - fm[1]) / (2.0 * h);
        }
        let off = 0.5 * (j[0][1] + j[1][0]);
        j[0][1] = off;
        j[1][0] = off;
        j
    }
    fn is_variational(&self) -> bool {
        false
    }
}

/// Solve the homogenized Dirichlet problem div hatA(grad u) = div F from
/// the tabulated effective operator.
pub fn solve_homogenized<F: Fn(&Vector) -> Vector + Sync>(
    table: &EffectiveTable,
    load_fn: &F,
    grid: &BoxGrid,
    tol: f64,
) -> Result<DirichletSolution> {
    let mesh = Mesh::from_box(grid);
    let load: Vec<Vector> = mesh.simplices.iter().map(|s| load_fn(&s.centroid)).collect();
    let boundary: Vec<bool> = (0..grid.num_nodes()).map(|i| grid.is_boundary(i)).collect();
    let density = HatDensity::new(table);
    let problem = SimplexProblem::dirichlet(&mesh, &density, 1.0, load.clone(), &boundary);
    let cfg = NewtonConfig::new(tol);
    let solve_result = solve_with_continuation(&problem, vec![0.0; problem.dof()], &cfg, 1.0);
    let (red, report) = match solve_result {
        Ok(ok) => ok,
        Err(e) => {
            // A failed solve that wandered off the table is a range problem,
            // not a solver problem: report it as one, prompting extension.
            if let Some((point, excess)) = density.range_violation() {
                return Err(HomogError::DualRange {
                    point: point.to_vec(),
                    radius: norm(&point) - excess,
                });
            }
            return Err(e);
        }
    };
    let full = problem.expand(&red);
    let element_grads = mesh.element_gradients(&full);
    // Re-probe only the converged gradients: transient Newton excursions
    // that returned in range are not violations.
    *density.out_of_range.lock().unwrap() = None;
    let element_flux: Vec<Vector> = element_grads.iter().map(|g| density.interp(g)).collect();
    if let Some((point, excess)) = density.range_violation() {
        return Err(HomogError::DualRange {
            point: point.to_vec(),
            radius: norm(&point) - excess,
        });
    }
    assemble_solution(
        &mesh,
        grid,
        0.0,
        full,
        element_grads,
        element_flux,
        &load,
        report.residual,
        report.iterations,
    )
}

/// Radial truncation at level k: identity below |v| <= k, rescaled to
/// length k above. Idempotent.
pub fn truncate_scalars(values: &[f64], k: f64) -> Vec<f64> {
    assert!(k > 0.0);
    values.iter().map(|&v| v.clamp(-k, k)).collect()
}

pub fn truncate_vectors(values: &[Vector], k: f64) -> Vec<Vector> {
    assert!(k > 0.0);
    values
        .iter()
        .map(|v| {
            let n = norm(v);
            if n <= k {
                *v
            } else {
                [k * v[0] / n, k * v[1] / n]
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ConvergenceEntry {
    pub eps: f64,
    /// L1 distance of u^eps to the homogenized solution on the shared grid.
    pub l1_error: f64,
    /// L1 distance of the gradients (reported, not expected to vanish:
    /// correctors persist).
    pub grad_l1_distance: f64,
    /// integral of A(x/eps, grad u^eps) . grad u^eps.
    pub energy: f64,
    /// m1-modular of grad u^eps.
    pub grad_modular: f64,
    /// m2*-modular of the flux.
    pub flux_modular: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub entries: Vec<ConvergenceEntry>,
    /// integral of hatA(grad u) . grad u for the homogenized solution.
    pub homog_energy: f64,
    pub homog: DirichletSolution,
    pub eps_solutions: Vec<DirichletSolution>,
}

fn l1_nodal_distance(a: &BoxField, b: &BoxField) -> f64 {
    let diff = BoxField {
        grid: a.grid,
        values: a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect(),
    };
    crate::pgrid::integrate_box(&diff)
}

/// Run solve_eps_problem for every eps (in parallel) against one
/// homogenized solve on the shared grid; reporting only, no assertions.
pub fn convergence_study<F: Fn(&Vector) -> Vector + Sync>(
    op: &MonotoneOperator,
    table: &EffectiveTable,
    load_fn: &F,
    eps_list: &[f64],
    grid: &BoxGrid,
    tol: f64,
    min_nodes_per_cell: usize,
) -> Result<ConvergenceReport> {
    for w in eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(HomogError::InvalidConfig(
                "eps list must be strictly decreasing".into(),
            ));
        }
    }
    for &eps in eps_list {
        check_alignment(eps, grid.intervals_per_axis(), min_nodes_per_cell)?;
    }
    let homog = solve_homogenized(table, load_fn, grid, tol)?;
    let eps_solutions: Vec<DirichletSolution> = eps_list
        .par_iter()
        .map(|&eps| solve_eps_problem(op, eps, load_fn, grid, tol, min_nodes_per_cell))
        .collect::<Result<_>>()?;
    let mesh = Mesh::from_box(grid);
    let gauge = op.gauge();
    let m1 = gauge.m1();
    let m2 = gauge.m2();
    let entries = eps_solutions
        .iter()
        .map(|sol| {
            let mut grad_l1 = 0.0;
            let mut grad_modular = 0.0;
            let mut flux_modular = 0.0;
            for (si, s) in mesh.simplices.iter().enumerate() {
                let d = [
                    sol.element_grads[si][0] - homog.element_grads[si][0],
                    sol.element_grads[si][1] - homog.element_grads[si][1],
                ];
                grad_l1 += s.measure * norm(&d);
                grad_modular += s.measure * m1.eval(norm(&sol.element_grads[si]));
                flux_modular += s.measure * m2.conjugate_value(norm(&sol.element_flux[si]));
            }
            ConvergenceEntry {
                eps: sol.eps,
                l1_error: l1_nodal_distance(&sol.u, &homog.u),
                grad_l1_distance: grad_l1,
                energy: sol.energy,
                grad_modular,
                flux_modular,
                residual: sol.residual,
            }
        })
        .collect();
    Ok(ConvergenceReport { entries, homog_energy: homog.energy, homog, eps_solutions })
}

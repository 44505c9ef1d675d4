//! The periodic cell problem div A(y, xi + grad w) = 0, the homogenized
//! operator table xi -> hat A(xi), and the effective potential f with its
//! conjugate f* computed along two independent routes.

use rayon::prelude::*;

use crate::error::{HomogError, Result};
use crate::nfunction::NFunction;
use crate::operator::MonotoneOperator;
use crate::pgrid::{dot, gradient, norm, Mesh, PeriodicField, PeriodicGrid, Vector};
use crate::pgrid::GradientField;
use crate::solver::{
    solve_with_continuation, Density, NewtonConfig, NonlinearSystem, SimplexProblem,
};
use crate::tabulated::{conjugate, ConjugateSource, TabulatedConvexFunction};

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub xi: Vector,
    /// Mean-zero periodic corrector w_xi at the nodes.
    pub corrector: PeriodicField,
    /// Centered nodal gradient of the corrector (diagnostic output).
    pub grad_w: GradientField,
    /// Per-element corrector gradient (the solver's native sampling).
    pub element_grads: Vec<Vector>,
    /// hat A(xi) = cell average of A(y, xi + grad w).
    pub hat_a: Vector,
    /// Energy value: cell average of M(y, xi + grad w).
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Quadratic-regularization scale: the coefficient lam making lam |xi|^2 / 2
/// dominate the gauge at the working radius.
pub(crate) fn regularization_scale(op: &MonotoneOperator, radius: f64) -> f64 {
    let r = radius.max(1.0);
    let m2 = op.gauge().m2();
    (2.0 * m2.eval(r) / (r * r)).max(1.0)
}

/// Solve the cell problem at macroscopic gradient xi: minimize the cell
/// energy over mean-zero periodic nodal fields (damped Newton; continuation
/// over the regularization schedule on hard cases).
pub fn solve_cell(
    op: &MonotoneOperator,
    xi: Vector,
    grid: &PeriodicGrid,
    tol: f64,
) -> Result<CellSolution> {
    let mesh = Mesh::from_periodic(grid);
    let problem = SimplexProblem::periodic(&mesh, op, xi, false);
    let cfg = NewtonConfig::new(tol);
    let reg = regularization_scale(op, norm(&xi));
    let (w_red, report) =
        solve_with_continuation(&problem, vec![0.0; problem.dof()], &cfg, reg)?;
    let w_full = problem.expand(&w_red);
    let mut hat_a = [0.0; 2];
    let mut energy = 0.0;
    let mut element_grads = Vec::with_capacity(mesh.simplices.len());
    for s in &mesh.simplices {
        let gw = s.gradient(&w_full);
        element_grads.push(gw);
        let arg = [xi[0] + gw[0], xi[1] + gw[1]];
        let a = op.eval(&s.centroid, &arg);
        hat_a[0] += s.measure * a[0];
        hat_a[1] += s.measure * a[1];
        energy += s.measure * op.value(&s.centroid, &arg);
    }
    let corrector = PeriodicField::new(*grid, w_full)?;
    let grad_w = gradient(&corrector);
    Ok(CellSolution {
        xi,
        corrector,
        grad_w,
        element_grads,
        hat_a,
        energy,
        residual: report.residual,
        iterations: report.iterations,
    })
}

/// Tabulated homogenized operator over a xi-lattice, with per-node energies
/// and residuals.
#[derive(Debug, Clone)]
pub struct EffectiveTable {
    pub axes: Vec<Vec<f64>>,
    pub hat_a: Vec<Vector>,
    pub f_vals: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    /// (node index, error message) for failed solves; successful nodes are
    /// still populated.
    pub failures: Vec<(usize, String)>,
}

impl EffectiveTable {
    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn node_xi(&self, idx: usize) -> Vector {
        match self.axes.len() {
            1 => [self.axes[0][idx], 0.0],
            _ => {
                let ny = self.axes[1].len();
                [self.axes[0][idx / ny], self.axes[1][idx % ny]]
            }
        }
    }
}

fn axis_is_symmetric(ax: &[f64]) -> bool {
    let n = ax.len();
    (0..n).all(|i| (ax[i] + ax[n - 1 - i]).abs() < 1e-12)
}

/// Solve the cell problem on every lattice node. Even gauges admit the odd
/// reflection hat A(-xi) = -hat A(xi); on symmetric axes only the canonical
/// half is solved. Nodes run in parallel.
pub fn effective_operator_table(
    op: &MonotoneOperator,
    axes: Vec<Vec<f64>>,
    grid: &PeriodicGrid,
    tol: f64,
) -> EffectiveTable {
    let d = axes.len();
    let n_total: usize = axes.iter().map(|a| a.len()).product();
    let node_xi = |idx: usize| -> Vector {
        match d {
            1 => [axes[0][idx], 0.0],
            _ => {
                let ny = axes[1].len();
                [axes[0][idx / ny], axes[1][idx % ny]]
            }
        }
    };
    let reflectable = axes.iter().all(|a| axis_is_symmetric(a));
    let reflected_index = |idx: usize| -> usize {
        match d {
            1 => axes[0].len() - 1 - idx,
            _ => {
                let ny = axes[1].len();
                let (i, j) = (idx / ny, idx % ny);
                (axes[0].len() - 1 - i) * ny + (ny - 1 - j)
            }
        }
    };
    let canonical = |idx: usize| -> bool {
        if !reflectable {
            return true;
        }
        let xi = node_xi(idx);
        // canonical half: first nonzero component positive
        if xi[0] != 0.0 {
            xi[0] > 0.0
        } else {
            xi[1] >= 0.0
        }
    };

    let results: Vec<Option<Result<CellSolution>>> = (0..n_total)
        .into_par_iter()
        .map(|idx| {
            if canonical(idx) {
                Some(solve_cell(op, node_xi(idx), grid, tol))
            } else {
                None
            }
        })
        .collect();

    let mut hat_a = vec![[0.0; 2]; n_total];
    let mut f_vals = vec![0.0; n_total];
    let mut residuals = vec![0.0; n_total];
    let mut iterations = vec![0; n_total];
    let mut failures = Vec::new();
    for idx in 0..n_total {
        let source = if canonical(idx) { idx } else { reflected_index(idx) };
        let sign = if source == idx { 1.0 } else { -1.0 };
        match &results[source] {
            Some(Ok(sol)) => {
                hat_a[idx] = [sign * sol.hat_a[0], sign * sol.hat_a[1]];
                f_vals[idx] = sol.energy;
                residuals[idx] = sol.residual;
                iterations[idx] = sol.iterations;
            }
            Some(Err(e)) => failures.push((idx, e.to_string())),
            None => failures.push((idx, "missing canonical solve".into())),
        }
    }
    EffectiveTable { axes, hat_a, f_vals, residuals, iterations, failures }
}

/// Effective potential f and conjugate f*, with the node-wise cross-check
/// between the Legendre-transform route and the direct dual minimization.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    pub f: TabulatedConvexFunction,
    /// Route (i): discrete Legendre transform of the f table.
    pub f_star: TabulatedConvexFunction,
    /// Per-f-node provenance: "converged" or "reflected".
    pub provenance: Vec<&'static str>,
    /// Sampled eta: (|eta| probe, route (i) value, route (ii) value).
    pub cross_checks: Vec<(Vector, f64, f64)>,
    /// Dual sample indices where the two routes disagree beyond tolerance.
    pub flagged: Vec<usize>,
}

/// Dual density M*(y, .) with flux and Jacobian derived from the inverse of
/// the radial derivative.
pub struct DualGauge<'a> {
    pub m: &'a NFunction,
}

impl<'a> Density for DualGauge<'a> {
    fn value(&self, y: &Vector, g: &Vector) -> f64 {
        self.m.conjugate_radial(y, norm(g))
    }
    fn flux(&self, y: &Vector, g: &Vector) -> Vector {
        let t = norm(g);
        if t == 0.0 {
            return [0.0; 2];
        }
        let d1 = self.m.conjugate_radial_deriv(y, t);
        [d1 / t * g[0], d1 / t * g[1]]
    }
    fn flux_jacobian(&self, y: &Vector, g: &Vector) -> [[f64; 2]; 2] {
        let t = norm(g);
        if t < 1e-14 {
            return [[0.0; 2]; 2];
        }
        let d1 = self.m.conjugate_radial_deriv(y, t);
        // (phi*)''(s) = 1 / phi''(t*) at the maximizer t* = (phi*)'(s)
        let curv = self.m.radial_deriv2(y, d1.max(1e-14));
        let d2 = if curv > 1e-14 { 1.0 / curv } else { 1e14 };
        let s = d1 / t;
        let q = (d2 - s) / (t * t);
        [
            [s + q * g[0] * g[0], q * g[0] * g[1]],
            [q * g[0] * g[1], s + q * g[1] * g[1]],
        ]
    }
}

/// Route (ii) for f*: minimize the dual modular over the discrete
/// annihilator of gradients with prescribed mean eta. In 1D the annihilator
/// is the constants, so the problem is zero-dimensional; in 2D the
/// fluctuations are rotated gradients of periodic scalars.
pub fn f_star_direct(
    m: &NFunction,
    eta: Vector,
    grid: &PeriodicGrid,
    tol: f64,
) -> Result<f64> {
    let mesh = Mesh::from_periodic(grid);
    if grid.d() == 1 {
        let mut total = 0.0;
        for s in &mesh.simplices {
            total += s.measure * m.conjugate_radial(&s.centroid, norm(&eta));
        }
        return Ok(total);
    }
    let dual = DualGauge { m };
    let problem = SimplexProblem::periodic(&mesh, &dual, eta, true);
    let cfg = NewtonConfig::new(tol);
    let (s_red, _) = solve_with_continuation(&problem, vec![0.0; problem.dof()], &cfg, 1.0)?;
    let args = problem.arguments(&s_red);
    let mut total = 0.0;
    for (s, arg) in mesh.simplices.iter().zip(&args) {
        total += s.measure * m.conjugate_radial(&s.centroid, norm(arg));
    }
    Ok(total)
}

/// Tabulate f over the xi-lattice (cell-solve energies), conjugate it onto
/// the dual lattice, and cross-check f* against the direct dual
/// minimization at sampled eta.
pub fn effective_potential(
    m: &NFunction,
    axes: Vec<Vec<f64>>,
    dual_axes: Vec<Vec<f64>>,
    grid: &PeriodicGrid,
    tol: f64,
    cross_check_tol: f64,
) -> Result<EffectivePotential> {
    let op = MonotoneOperator::GradientOfGauge { m: m.clone() };
    let table = effective_operator_table(&op, axes.clone(), grid, tol);
    if let Some((idx, msg)) = table.failures.first() {
        return Err(HomogError::NonConvergence {
            residual: f64::NAN,
            iterations: 0,
            tol,
        })
        .map_err(|_| HomogError::InvalidConfig(format!("cell solve failed at node {idx}: {msg}")));
    }
    let provenance: Vec<&'static str> = (0..table.node_count())
        .map(|i| {
            let xi = table.node_xi(i);
            if xi[0] > 0.0 || (xi[0] == 0.0 && xi[1] >= 0.0) {
                "converged"
            } else {
                "reflected"
            }
        })
        .collect();
    let f = TabulatedConvexFunction::new(axes, table.f_vals.clone());
    let f_star = conjugate(&ConjugateSource::Table(&f), dual_axes.clone())?;

    // Cross-check at up to 11 interior dual samples per axis direction.
    let mut cross_checks = Vec::new();
    let mut flagged = Vec::new();
    let probes: Vec<(usize, Vector)> = match dual_axes.len() {
        1 => {
            let ax = &dual_axes[0];
            let take = (ax.len() / 11).max(1);
            ax.iter()
                .enumerate()
                .filter(|(k, _)| k % take == 0 && *k > 0 && *k + 1 < ax.len())
                .take(11)
                .map(|(k, &s)| (k, [s, 0.0]))
                .collect()
        }
        _ => {
            let (ax, ay) = (&dual_axes[0], &dual_axes[1]);
            let mid = ay.len() / 2;
            let take = (ax.len() / 5).max(1);
            ax.iter()
                .enumerate()
                .filter(|(k, _)| k % take == 0 && *k > 0 && *k + 1 < ax.len())
                .take(5)
                .map(|(k, &s)| (k * ay.len() + mid, [s, ay[mid]]))
                .collect()
        }
    };
    for (node, eta) in probes {
        let route_i = f_star.values()[node];
        let route_ii = f_star_direct(m, eta, grid, tol)?;
        let scale = route_i.abs().max(route_ii.abs()).max(1e-12);
        if (route_i - route_ii).abs() > cross_check_tol * scale {
            flagged.push(node);
        }
        cross_checks.push((eta, route_i, route_ii));
    }
    Ok(EffectivePotential { f, f_star, provenance, cross_checks, flagged })
}

#[derive(Debug, Clone)]
pub struct HatAReport {
    /// inf over nonzero nodes of hat A(xi) . xi / (f(xi) + f*(hat A(xi))).
    pub fitted_c: f64,
    /// min over node pairs of (hat A(xi) - hat A(eta)) . (xi - eta).
    pub monotonicity_min: f64,
    /// Largest adjacent-node jump of hat A on the coarse and refined grids.
    pub max_jump_coarse: f64,
    pub max_jump_fine: f64,
    /// coarse/fine jump ratio; ~2 for continuously differentiable hat A.
    pub jump_ratio: f64,
    pub coercive: bool,
    pub monotone: bool,
    pub continuous: bool,
    pub passes: bool,
}

fn max_adjacent_jump(table: &EffectiveTable) -> f64 {
    let mut worst = 0.0_f64;
    match table.axes.len() {
        1 => {
            for i in 0..table.hat_a.len() - 1 {
                let d = [
                    table.hat_a[i + 1][0] - table.hat_a[i][0],
                    table.hat_a[i + 1][1] - table.hat_a[i][1],
                ];
                worst = worst.max(norm(&d));
            }
        }
        _ => {
            let ny = table.axes[1].len();
            let nx = table.axes[0].len();
            for i in 0..nx {
                for j in 0..ny {
                    let here = table.hat_a[i * ny + j];
                    if i + 1 < nx {
                        let b = table.hat_a[(i + 1) * ny + j];
                        worst = worst.max(norm(&[b[0] - here[0], b[1] - here[1]]));
                    }
                    if j + 1 < ny {
                        let b = table.hat_a[i * ny + j + 1];
                        worst = worst.max(norm(&[b[0] - here[0], b[1] - here[1]]));
                    }
                }
            }
        }
    }
    worst
}

/// The effective-operator property battery: fitted coercivity through the
/// effective pair (f, f*), pairwise monotonicity, and a modulus-of-
/// continuity ratio test between a coarse table and its 2x refinement.
pub fn verify_hat_a_properties(
    coarse: &EffectiveTable,
    fine: &EffectiveTable,
    potential: &EffectivePotential,
) -> Result<HatAReport> {
    let mut fitted_c = f64::INFINITY;
    for idx in 0..coarse.node_count() {
        let xi = coarse.node_xi(idx);
        if norm(&xi) < 1e-12 {
            continue;
        }
        let a = coarse.hat_a[idx];
        let num = dot(&a, &xi);
        let f_val = coarse.f_vals[idx];
        let f_star_val = match potential.f_star.dims() {
            1 => potential.f_star.eval(&[a[0]])?,
            _ => potential.f_star.eval(&[a[0], a[1]])?,
        };
        let den = f_val + f_star_val;
        if den > 1e-300 {
            fitted_c = fitted_c.min(num / den);
        }
    }
    let mut monotonicity_min = f64::INFINITY;
    for i in 0..coarse.node_count() {
        let xi = coarse.node_xi(i);
        let ai = coarse.hat_a[i];
        for j in i + 1..coarse.node_count() {
            let eta = coarse.node_xi(j);
            let d = [xi[0] - eta[0], xi[1] - eta[1]];
            if dot(&d, &d) < 1e-20 {
                continue;
            }
            let da = [ai[0] - coarse.hat_a[j][0], ai[1] - coarse.hat_a[j][1]];
            monotonicity_min = monotonicity_min.min(dot(&da, &d));
        }
    }
    let max_jump_coarse = max_adjacent_jump(coarse);
    let max_jump_fine = max_adjacent_jump(fine);
    let jump_ratio = max_jump_coarse / max_jump_fine.max(1e-300);
    let coercive = fitted_c > 1e-3;
    let monotone = monotonicity_min > 0.0;
    let continuous = (1.7..=2.5).contains(&jump_ratio);
    Ok(HatAReport {
        fitted_c,
        monotonicity_min,
        max_jump_coarse,
        max_jump_fine,
        jump_ratio,
        coercive,
        monotone,
        continuous,
        passes: coercive && monotone && continuous,
    })
}

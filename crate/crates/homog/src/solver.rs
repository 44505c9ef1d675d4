//! Shared numerical machinery for the nonlinear solves: sparse matrices,
//! Jacobi-preconditioned conjugate gradients, a damped Newton driver with
//! Armijo backtracking, the quadratic-regularization continuation schedule,
//! and the simplex-based weak-form assembly common to the cell and
//! Dirichlet problems.

use crate::error::{HomogError, Result};
use crate::pgrid::{dot, Mesh, Vector};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row accumulation lists; duplicate columns are summed.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            out[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Jacobi-preconditioned conjugate gradients. When `mean_zero` is set, the
/// right-hand side and all iterates are projected onto the mean-free
/// subspace, which handles the constant nullspace of periodic stiffness
/// matrices.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    mean_zero: bool,
) -> (usize, f64) {
    let n = a.n;
    let diag = a.diagonal();
    let precond = |v: &[f64], out: &mut Vec<f64>| {
        for i in 0..n {
            out[i] = if diag[i].abs() > 1e-300 { v[i] / diag[i] } else { v[i] };
        }
    };
    let mut b = b.to_vec();
    if mean_zero {
        subtract_mean(&mut b);
        subtract_mean(x);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if mean_zero {
        subtract_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let b_norm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let r_norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if r_norm <= tol * b_norm {
            return (it, r_norm);
        }
        a.matvec(&p, &mut ap);
        if mean_zero {
            subtract_mean(&mut ap);
        }
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.abs() < 1e-300 {
            return (it, r_norm);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if mean_zero {
        subtract_mean(x);
    }
    let r_norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (max_iter, r_norm)
}

/// A discrete nonlinear system F(u) = 0 with optional variational structure
/// (F = grad E for an energy E, used in the line search).
pub trait NonlinearSystem {
    fn dof(&self) -> usize;
    fn residual(&self, u: &[f64], out: &mut [f64]);
    fn jacobian(&self, u: &[f64]) -> CsrMatrix;
    fn energy(&self, _u: &[f64]) -> Option<f64> {
        None
    }
    /// Constraint projection applied to iterates (e.g. mean-zero).
    fn project(&self, _u: &mut [f64]) {}
    fn mean_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Sup-norm residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl NewtonConfig {
    pub fn new(tol: f64) -> Self {
        NewtonConfig { tol, max_iter: 60, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

const ARMIJO: f64 = 1e-4;

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton: solve the linearized step with PCG, then backtrack on the
/// energy (variational case) or on the residual norm until sufficient
/// decrease holds.
pub fn newton_solve<S: NonlinearSystem>(
    sys: &S,
    mut u: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport)> {
    let n = sys.dof();
    assert_eq!(u.len(), n);
    sys.project(&mut u);
    let mut r = vec![0.0; n];
    sys.residual(&u, &mut r);
    let mut r_norm = sup_norm(&r);
    for it in 0..cfg.max_iter {
        if r_norm <= cfg.tol {
            return Ok((u, NewtonReport { iterations: it, residual: r_norm }));
        }
        let jac = sys.jacobian(&u);
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let mut d = vec![0.0; n];
        let lin_tol = 1e-10_f64.max(1e-4 * (r_norm / (1.0 + r_norm)).min(1.0));
        pcg(&jac, &rhs, &mut d, lin_tol, 40 * n.max(50), sys.mean_zero());
        // Backtracking line search.
        let slope: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
        let e0 = sys.energy(&u);
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; n];
        for _ in 0..=cfg.max_backtracks {
            for i in 0..n {
                trial[i] = u[i] + alpha * d[i];
            }
            sys.project(&mut trial);
            let ok = match e0 {
                Some(e0) => match sys.energy(&trial) {
                    Some(e1) if e1.is_finite() => {
                        // Near convergence the Newton decrement is below the
                        // rounding floor of the energy; fall back to the
                        // residual test there.
                        e1 <= e0 + ARMIJO * alpha * slope || {
                            sys.residual(&trial, &mut r_trial);
                            let rn = sup_norm(&r_trial);
                            e1 <= e0 + 1e-14 * e0.abs().max(1.0)
                                && rn.is_finite()
                                && rn <= (1.0 - ARMIJO * alpha) * r_norm
                        }
                    }
                    _ => false,
                },
                None => {
                    sys.residual(&trial, &mut r_trial);
                    let rn = sup_norm(&r_trial);
                    rn.is_finite() && rn <= (1.0 - ARMIJO * alpha) * r_norm
                }
            };
            if ok {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(HomogError::NonConvergence {
                residual: r_norm,
                iterations: it,
                tol: cfg.tol,
            });
        }
        std::mem::swap(&mut u, &mut trial);
        sys.residual(&u, &mut r);
        r_norm = sup_norm(&r);
    }
    if r_norm <= cfg.tol {
        Ok((u, NewtonReport { iterations: cfg.max_iter, residual: r_norm }))
    } else {
        Err(HomogError::NonConvergence {
            residual: r_norm,
            iterations: cfg.max_iter,
            tol: cfg.tol,
        })
    }
}

/// Geometric continuation schedule for the quadratic regularization of the
/// auxiliary problem; each solve warm-starts the next, ending unregularized.
pub fn delta_schedule() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 0.0]
}

/// Local energy density with flux and flux-Jacobian, evaluated at the fast
/// variable y and a gradient-like argument g.
pub trait Density: Sync {
    fn value(&self, y: &Vector, g: &Vector) -> f64;
    fn flux(&self, y: &Vector, g: &Vector) -> Vector;
    fn flux_jacobian(&self, y: &Vector, g: &Vector) -> [[f64; 2]; 2];
    /// Whether `value` is a true potential for `flux` (enables the energy
    /// line search).
    fn is_variational(&self) -> bool {
        true
    }
}

/// `inner` plus delta * |g|^2 / 2 scaled by `lam`: the uniformly elliptic
/// regularization used by the continuation schedule.
pub struct Regularized<'a, D: Density> {
    pub inner: &'a D,
    pub coeff: f64,
}

impl<'a, D: Density> Density for Regularized<'a, D> {
    fn value(&self, y: &Vector, g: &Vector) -> f64 {
        self.inner.value(y, g) + 0.5 * self.coeff * dot(g, g)
    }
    fn flux(&self, y: &Vector, g: &Vector) -> Vector {
        let f = self.inner.flux(y, g);
        [f[0] + self.coeff * g[0], f[1] + self.coeff * g[1]]
    }
    fn flux_jacobian(&self, y: &Vector, g: &Vector) -> [[f64; 2]; 2] {
        let mut j = self.inner.flux_jacobian(y, g);
        j[0][0] += self.coeff;
        j[1][1] += self.coeff;
        j
    }
    fn is_variational(&self) -> bool {
        self.inner.is_variational()
    }
}

fn rot(g: &Vector) -> Vector {
    [-g[1], g[0]]
}

/// Weak form of div flux(y(x), base + [R] grad u) = div F assembled on a
/// simplex mesh: periodic cell problems (mean-zero, all nodes free), the
/// rotated dual problem, and Dirichlet box problems (boundary pinned).
pub struct SimplexProblem<'a, D: Density> {
    pub mesh: &'a Mesh,
    pub density: &'a D,
    /// Fast variable: y = inv_eps * x (1 for cell problems).
    pub inv_eps: f64,
    /// Constant gradient offset (the macroscopic xi; zero for Dirichlet).
    pub base: Vector,
    /// Apply the rotation g -> (-g_2, g_1) before the density (the
    /// divergence-free parameterization of the dual problem).
    pub rotate: bool,
    /// Per-simplex load F(centroid); pairs as integral of F . grad phi.
    pub load: Option<Vec<Vector>>,
    /// Free node indices (all nodes periodic, interior nodes for boxes).
    pub free: Vec<usize>,
    /// node index -> reduced dof index.
    pub node_to_free: Vec<Option<usize>>,
    pub mean_zero: bool,
}

impl<'a, D: Density> SimplexProblem<'a, D> {
    pub fn periodic(mesh: &'a Mesh, density: &'a D, base: Vector, rotate: bool) -> Self {
        let free: Vec<usize> = (0..mesh.num_nodes).collect();
        let node_to_free = (0..mesh.num_nodes).map(Some).collect();
        SimplexProblem {
            mesh,
            density,
            inv_eps: 1.0,
            base,
            rotate,
            load: None,
            free,
            node_to_free,
            mean_zero: true,
        }
    }

    pub fn dirichlet(
        mesh: &'a Mesh,
        density: &'a D,
        inv_eps: f64,
        load: Vec<Vector>,
        boundary: &[bool],
    ) -> Self {
        assert_eq!(boundary.len(), mesh.num_nodes);
        assert_eq!(load.len(), mesh.simplices.len());
        let mut free = Vec::new();
        let mut node_to_free = vec![None; mesh.num_nodes];
        for (i, &b) in boundary.iter().enumerate() {
            if !b {
                node_to_free[i] = Some(free.len());
                free.push(i);
            }
        }
        SimplexProblem {
            mesh,
            density,
            inv_eps,
            base: [0.0; 2],
            rotate: false,
            load: Some(load),
            free,
            node_to_free,
            mean_zero: false,
        }
    }

    /// Expand reduced dofs to full nodal values (pinned nodes at zero).
    pub fn expand(&self, red: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_nodes];
        for (a, &node) in self.free.iter().enumerate() {
            full[node] = red[a];
        }
        full
    }

    fn fast_var(&self, centroid: &Vector) -> Vector {
        [centroid[0] * self.inv_eps, centroid[1] * self.inv_eps]
    }

    /// base + [R] grad u on each simplex.
    pub fn arguments(&self, red: &[f64]) -> Vec<Vector> {
        let full = self.expand(red);
        self.mesh
            .simplices
            .iter()
            .map(|s| {
                let g = s.gradient(&full);
                let g = if self.rotate { rot(&g) } else { g };
                [self.base[0] + g[0], self.base[1] + g[1]]
            })
            .collect()
    }
}

impl<'a, D: Density> NonlinearSystem for SimplexProblem<'a, D> {
    fn dof(&self) -> usize {
        self.free.len()
    }

    fn residual(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let full = self.expand(u);
        for (si, s) in self.mesh.simplices.iter().enumerate() {
            let g = s.gradient(&full);
            let arg_g = if self.rotate { rot(&g) } else { g };
            let arg = [self.base[0] + arg_g[0], self.base[1] + arg_g[1]];
            let y = self.fast_var(&s.centroid);
            let flux = self.density.flux(&y, &arg);
            // chain rule: d(arg)/du_a = [R] grad phi_a
            for a in 0..s.nnodes {
                if let Some(dof) = self.node_to_free[s.nodes[a]] {
                    let ga = if self.rotate { rot(&s.grads[a]) } else { s.grads[a] };
                    let mut v = s.measure * dot(&flux, &ga);
                    if let Some(load) = &self.load {
                        v -= s.measure * dot(&load[si], &s.grads[a]);
                    }
                    out[dof] += v;
                }
            }
        }
    }

    fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let full = self.expand(u);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.free.len()];
        for s in &self.mesh.simplices {
            let g = s.gradient(&full);
            let arg_g = if self.rotate { rot(&g) } else { g };
            let arg = [self.base[0] + arg_g[0], self.base[1] + arg_g[1]];
            let y = self.fast_var(&s.centroid);
            let j = self.density.flux_jacobian(&y, &arg);
            for a in 0..s.nnodes {
                let Some(ra) = self.node_to_free[s.nodes[a]] else { continue };
                let ga = if self.rotate { rot(&s.grads[a]) } else { s.grads[a] };
                for b in 0..s.nnodes {
                    let Some(rb) = self.node_to_free[s.nodes[b]] else { continue };
                    let gb = if self.rotate { rot(&s.grads[b]) } else { s.grads[b] };
                    let jgb = [
                        j[0][0] * gb[0] + j[0][1] * gb[1],
                        j[1][0] * gb[0] + j[1][1] * gb[1],
                    ];
                    rows[ra].push((rb, s.measure * dot(&ga, &jgb)));
                }
            }
        }
        CsrMatrix::from_rows(rows)
    }

    fn energy(&self, u: &[f64]) -> Option<f64> {
        if !self.density.is_variational() {
            return None;
        }
        let full = self.expand(u);
        let mut e = 0.0;
        for (si, s) in self.mesh.simplices.iter().enumerate() {
            let g = s.gradient(&full);
            let arg_g = if self.rotate { rot(&g) } else { g };
            let arg = [self.base[0] + arg_g[0], self.base[1] + arg_g[1]];
            let y = self.fast_var(&s.centroid);
            e += s.measure * self.density.value(&y, &arg);
            if let Some(load) = &self.load {
                e -= s.measure * dot(&load[si], &g);
            }
        }
        Some(e)
    }

    fn project(&self, u: &mut [f64]) {
        if self.mean_zero {
            subtract_mean(u);
        }
    }

    fn mean_zero(&self) -> bool {
        self.mean_zero
    }
}

/// Newton with the continuation fallback: try the plain problem first; on
/// failure, sweep the regularization schedule with warm starts.
pub fn solve_with_continuation<D: Density>(
    problem: &SimplexProblem<'_, D>,
    u0: Vec<f64>,
    cfg: &NewtonConfig,
    reg_scale: f64,
) -> Result<(Vec<f64>, NewtonReport)> {
    match newton_solve(problem, u0.clone(), cfg) {
        Ok(out) => Ok(out),
        Err(_) => {
            let mut u = u0;
            let mut last = NewtonReport { iterations: 0, residual: f64::INFINITY };
            for &delta in &delta_schedule() {
                let reg = Regularized { inner: problem.density, coeff: delta * reg_scale };
                let sub = SimplexProblem {
                    mesh: problem.mesh,
                    density: &reg,
                    inv_eps: problem.inv_eps,
                    base: problem.base,
                    rotate: problem.rotate,
                    load: problem.load.clone(),
                    free: problem.free.clone(),
                    node_to_free: problem.node_to_free.clone(),
                    mean_zero: problem.mean_zero,
                };
                // Loose tolerance on the regularized waypoints, full
                // tolerance on the final unregularized solve.
                let sub_cfg = if delta == 0.0 {
                    *cfg
                } else {
                    NewtonConfig { tol: (cfg.tol * 1e2).max(1e-12), ..*cfg }
                };
                let (u_next, rep) = newton_solve(&sub, u, &sub_cfg)?;
                u = u_next;
                last = rep;
            }
            Ok((u, last))
        }
    }
}

//! Grid-tabulated convex functions and the discrete Legendre-Fenchel
//! transform, on 1D and 2D lattices.

use crate::error::{HomogError, Result};
use crate::scalar::ScalarNFunction;

/// Function samples on a tensor-product lattice over a box in R^n, n in {1, 2}.
///
/// The lattice does not need to be uniform; axes only need to be strictly
/// increasing. Evaluation between nodes is multilinear.
#[derive(Debug, Clone)]
pub struct TabulatedConvexFunction {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TabulatedConvexFunction {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        assert!(!axes.is_empty() && axes.len() <= 2, "only 1D and 2D lattices are supported");
        for ax in &axes {
            assert!(ax.len() >= 2);
            assert!(ax.windows(2).all(|w| w[1] - w[0] > 0.0), "axis must be strictly increasing");
        }
        let n: usize = axes.iter().map(|a| a.len()).product();
        assert_eq!(values.len(), n);
        assert!(values.iter().all(|v| v.is_finite()), "values must be finite");
        TabulatedConvexFunction { axes, values }
    }

    /// Tabulate a function of the grid point.
    pub fn from_fn(axes: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = match axes.len() {
            1 => axes[0].iter().map(|&t| f(&[t])).collect(),
            2 => {
                let mut v = Vec::with_capacity(axes[0].len() * axes[1].len());
                for &x in &axes[0] {
                    for &y in &axes[1] {
                        v.push(f(&[x, y]));
                    }
                }
                v
            }
            _ => unreachable!(),
        };
        TabulatedConvexFunction::new(axes, values)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute coordinate covered by the lattice.
    pub fn radius(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| [a[0].abs(), a[a.len() - 1].abs()])
            .fold(0.0, f64::max)
    }

    pub fn node(&self, idx: &[usize]) -> f64 {
        match idx.len() {
            1 => self.values[idx[0]],
            2 => self.values[idx[0] * self.axes[1].len() + idx[1]],
            _ => unreachable!(),
        }
    }

    fn bracket(ax: &[f64], x: f64) -> Option<usize> {
        if x < ax[0] || x > ax[ax.len() - 1] {
            return None;
        }
        let i = match ax.binary_search_by(|a| a.total_cmp(&x)) {
            Ok(i) => i.min(ax.len() - 2),
            Err(i) => i - 1,
        };
        Some(i)
    }

    /// Multilinear interpolation; errors outside the lattice.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        assert_eq!(x.len(), self.dims());
        let out_of_range = || HomogError::DualRange { point: x.to_vec(), radius: self.radius() };
        match self.dims() {
            1 => {
                let ax = &self.axes[0];
                let i = Self::bracket(ax, x[0]).ok_or_else(out_of_range)?;
                let t = (x[0] - ax[i]) / (ax[i + 1] - ax[i]);
                Ok(self.values[i] * (1.0 - t) + self.values[i + 1] * t)
            }
            2 => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let i = Self::bracket(ax, x[0]).ok_or_else(out_of_range)?;
                let j = Self::bracket(ay, x[1]).ok_or_else(out_of_range)?;
                let tx = (x[0] - ax[i]) / (ax[i + 1] - ax[i]);
                let ty = (x[1] - ay[j]) / (ay[j + 1] - ay[j]);
                let v = |i: usize, j: usize| self.values[i * ay.len() + j];
                Ok(v(i, j) * (1.0 - tx) * (1.0 - ty)
                    + v(i + 1, j) * tx * (1.0 - ty)
                    + v(i, j + 1) * (1.0 - tx) * ty
                    + v(i + 1, j + 1) * tx * ty)
            }
            _ => unreachable!(),
        }
    }

    /// Largest slope magnitude between adjacent nodes, per axis.
    pub fn max_slopes(&self) -> Vec<f64> {
        match self.dims() {
            1 => {
                let ax = &self.axes[0];
                let s = ax
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| ((self.values[i + 1] - self.values[i]) / (w[1] - w[0])).abs())
                    .fold(0.0, f64::max);
                vec![s]
            }
            2 => {
                let (ax, ay) = (&self.axes[0], &self.axes[1]);
                let v = |i: usize, j: usize| self.values[i * ay.len() + j];
                let mut sx: f64 = 0.0;
                let mut sy: f64 = 0.0;
                for i in 0..ax.len() {
                    for j in 0..ay.len() {
                        if i + 1 < ax.len() {
                            sx = sx.max(((v(i + 1, j) - v(i, j)) / (ax[i + 1] - ax[i])).abs());
                        }
                        if j + 1 < ay.len() {
                            sy = sy.max(((v(i, j + 1) - v(i, j)) / (ay[j + 1] - ay[j])).abs());
                        }
                    }
                }
                vec![sx, sy]
            }
            _ => unreachable!(),
        }
    }

    /// Lower convex envelope on the lattice, computed as the biconjugate.
    pub fn convexify(&self) -> Result<Self> {
        biconjugate(self)
    }
}

/// Lattice specification for conjugate tabulation: `n` nodes from 0 to
/// `radius` with logarithmic spacing near zero and a linear far field.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub radius: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(radius: f64, n: usize) -> Self {
        assert!(radius > 0.0 && n >= 8);
        GridSpec { radius, n }
    }

    /// Nonnegative grid: 0, then log-spaced up to radius/10, then linear.
    pub fn nonnegative(&self) -> Vec<f64> {
        let n_log = self.n / 2;
        let n_lin = self.n - n_log - 1;
        let lo = self.radius * 1e-6;
        let knee = self.radius * 0.1;
        let mut g = vec![0.0];
        for i in 0..n_log {
            let f = i as f64 / (n_log - 1) as f64;
            g.push(lo * (knee / lo).powf(f));
        }
        for i in 1..=n_lin {
            g.push(knee + (self.radius - knee) * i as f64 / n_lin as f64);
        }
        g
    }

    /// Symmetric grid over [-radius, radius].
    pub fn symmetric(&self) -> Vec<f64> {
        let pos = self.nonnegative();
        let mut g: Vec<f64> = pos.iter().skip(1).map(|&t| -t).collect();
        g.reverse();
        g.extend(pos);
        g
    }

    /// Uniform grid over [-radius, radius] with 2n+1 nodes.
    pub fn uniform_symmetric(&self) -> Vec<f64> {
        let m = self.n;
        (0..=2 * m).map(|i| self.radius * (i as f64 / m as f64 - 1.0)).collect()
    }
}

/// Input to the discrete Legendre-Fenchel transform.
pub enum ConjugateSource<'a> {
    /// Closed-form scalar N-function; the supremum is sharpened by a
    /// ternary-search pass around the discrete maximizer.
    Scalar(&'a ScalarNFunction, GridSpec),
    /// Piecewise-linear tabulated function; the nodal supremum is exact
    /// for the interpolant.
    Table(&'a TabulatedConvexFunction),
}

fn saturation_check(argmax_on_boundary: bool, dual_interior: bool, point: &[f64], radius: f64) -> Result<()> {
    if argmax_on_boundary && dual_interior {
        return Err(HomogError::BoundarySaturation { dual_point: point.to_vec(), primal_radius: radius });
    }
    Ok(())
}

/// Discrete Legendre-Fenchel transform m*(s) = sup_t { s.t - m(t) }.
///
/// Brute force over the primal lattice; ties in the maximizer break toward
/// the smallest index. Detects dual-grid saturation when the maximizer sits
/// on the primal boundary for an interior dual node.
pub fn conjugate(source: &ConjugateSource, dual_axes: Vec<Vec<f64>>) -> Result<TabulatedConvexFunction> {
    match source {
        ConjugateSource::Scalar(m, spec) => {
            assert_eq!(dual_axes.len(), 1, "scalar conjugates are one-dimensional");
            let primal = spec.nonnegative();
            let radius = spec.radius;
            let vals: Vec<f64> = primal.iter().map(|&t| m.eval(t)).collect();
            let ds = &dual_axes[0];
            let s_max = ds[ds.len() - 1];
            let mut out = Vec::with_capacity(ds.len());
            for (k, &s) in ds.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for (i, (&t, &v)) in primal.iter().zip(&vals).enumerate() {
                    let g = s * t - v;
                    if g > best {
                        best = g;
                        best_i = i;
                    }
                }
                let interior = k + 1 < ds.len() && s < s_max;
                saturation_check(best_i + 1 == primal.len(), interior, &[s], radius)?;
                // t -> s t - m(t) is concave, so a ternary search between the
                // lattice neighbours of the discrete maximizer recovers the
                // supremum to machine precision.
                let lo = if best_i == 0 { primal[0] } else { primal[best_i - 1] };
                let hi = if best_i + 1 == primal.len() { primal[best_i] } else { primal[best_i + 1] };
                out.push(ternary_max(|t| s * t - m.eval(t), lo, hi).max(best));
            }
            Ok(TabulatedConvexFunction::new(dual_axes, out))
        }
        ConjugateSource::Table(tab) => match tab.dims() {
            1 => {
                assert_eq!(dual_axes.len(), 1);
                let ax = &tab.axes()[0];
                let vals = tab.values();
                // A dual point within the attained slope range has its
                // supremum inside the table; beyond it the maximizer pins to
                // the primal boundary and the tabulation is saturated.
                let (s_lo, s_hi) = slope_range_1d(ax, vals);
                let tol = 1e-9 * s_lo.abs().max(s_hi.abs()) + 1e-12;
                let ds = &dual_axes[0];
                let mut out = Vec::with_capacity(ds.len());
                for (k, &s) in ds.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    for (&t, &v) in ax.iter().zip(vals) {
                        let g = s * t - v;
                        if g > best {
                            best = g;
                        }
                    }
                    let out_of_range = s > s_hi + tol || s < s_lo - tol;
                    saturation_check(out_of_range, k > 0 && k + 1 < ds.len(), &[s], tab.radius())?;
                    out.push(best);
                }
                Ok(TabulatedConvexFunction::new(dual_axes, out))
            }
            2 => {
                assert_eq!(dual_axes.len(), 2);
                let (ax, ay) = (&tab.axes()[0], &tab.axes()[1]);
                let vals = tab.values();
                let mut out = Vec::with_capacity(dual_axes[0].len() * dual_axes[1].len());
                let (nx, ny) = (ax.len(), ay.len());
                let slopes = tab.max_slopes();
                let (tx, ty) = (1e-9 * slopes[0] + 1e-12, 1e-9 * slopes[1] + 1e-12);
                for (p, &sx) in dual_axes[0].iter().enumerate() {
                    for (q, &sy) in dual_axes[1].iter().enumerate() {
                        let mut best = f64::NEG_INFINITY;
                        for i in 0..nx {
                            for j in 0..ny {
                                let g = sx * ax[i] + sy * ay[j] - vals[i * ny + j];
                                if g > best {
                                    best = g;
                                }
                            }
                        }
                        let out_of_range =
                            sx.abs() > slopes[0] + tx || sy.abs() > slopes[1] + ty;
                        let interior = p > 0
                            && p + 1 < dual_axes[0].len()
                            && q > 0
                            && q + 1 < dual_axes[1].len();
                        saturation_check(out_of_range, interior, &[sx, sy], tab.radius())?;
                        out.push(best);
                    }
                }
                Ok(TabulatedConvexFunction::new(dual_axes, out))
            }
            _ => unreachable!(),
        },
    }
}

/// Signed range of segment slopes of a 1D tabulation.
fn slope_range_1d(ax: &[f64], vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..ax.len() - 1 {
        let s = (vals[i + 1] - vals[i]) / (ax[i + 1] - ax[i]);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

/// m** = conjugate(conjugate(m)), back on the original lattice. Equals the
/// lower convex envelope of the piecewise-linear interpolant at the nodes.
pub fn biconjugate(tab: &TabulatedConvexFunction) -> Result<TabulatedConvexFunction> {
    let slopes = tab.max_slopes();
    match tab.dims() {
        1 => {
            // The conjugate of a piecewise-linear function is piecewise
            // linear with breakpoints exactly at the attained segment
            // slopes; using those as the dual axis makes the double
            // transform exact at the primal nodes.
            let ax = &tab.axes()[0];
            let vals = tab.values();
            let (s_lo, s_hi) = slope_range_1d(ax, vals);
            let pad = 1e-4 * (s_hi - s_lo).max(s_hi.abs()) + 1e-12;
            let mut dual: Vec<f64> = (0..ax.len() - 1)
                .map(|i| (vals[i + 1] - vals[i]) / (ax[i + 1] - ax[i]))
                .collect();
            dual.push(s_lo - pad);
            dual.push(s_hi + pad);
            dual.sort_by(f64::total_cmp);
            let scale = s_hi.abs().max(s_lo.abs()) + 1e-30;
            dual.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * scale);
            let star = conjugate(&ConjugateSource::Table(tab), vec![dual])?;
            conjugate(&ConjugateSource::Table(&star), vec![ax.clone()])
        }
        2 => {
            let (sx, sy) = (slopes[0] * 1.0001 + 1e-12, slopes[1] * 1.0001 + 1e-12);
            let (nx, ny) = (tab.axes()[0].len(), tab.axes()[1].len());
            let dx: Vec<f64> = (0..=2 * nx).map(|i| sx * (i as f64 / nx as f64 - 1.0)).collect();
            let dy: Vec<f64> = (0..=2 * ny).map(|i| sy * (i as f64 / ny as f64 - 1.0)).collect();
            let star = conjugate(&ConjugateSource::Table(tab), vec![dx, dy])?;
            conjugate(&ConjugateSource::Table(&star), tab.axes().to_vec())
        }
        _ => unreachable!(),
    }
}

/// Maximum of a concave function on [lo, hi] by ternary search.
pub fn ternary_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mid = 0.5 * (lo + hi);
    f(mid).max(f(lo)).max(f(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarNFunction;

    /// Dense brute-force sup oracle, independent of the transform above.
    fn brute_conjugate(m: impl Fn(f64) -> f64, s: f64, radius: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| {
                let t = radius * i as f64 / n as f64;
                s * t - m(t)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let m = ScalarNFunction::power(2.0);
        let spec = GridSpec::new(16.0, 256);
        let star = conjugate(&ConjugateSource::Scalar(&m, spec), vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        for (s, want) in [(0.0, 0.0), (1.0, 0.5), (2.0, 2.0)] {
            assert!((star.eval(&[s]).unwrap() - want).abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn quartic_conjugate_matches_closed_form_and_brute_force() {
        // (t^4/4)* = (3/4) s^{4/3}; frozen value at s = 1 is 3/4,
        // cross-checked against the dense sup oracle.
        let oracle = brute_conjugate(|t| t.powi(4) / 4.0, 1.0, 4.0, 4_000_000);
        assert!((oracle - 0.75).abs() < 1e-6);

        let m = ScalarNFunction::power(4.0);
        let spec = GridSpec::new(8.0, 512);
        let duals = vec![vec![0.0, 0.5, 1.0, 2.0, 4.0]];
        let star = conjugate(&ConjugateSource::Scalar(&m, spec), duals).unwrap();
        for s in [0.5, 1.0, 2.0_f64] {
            let want = 0.75 * s.powf(4.0 / 3.0);
            assert!((star.eval(&[s]).unwrap() - want).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn exponential_conjugate_matches_closed_form() {
        // (e^t - t - 1)* = (1+s) ln(1+s) - s; at s = e-1 this equals 1,
        // cross-checked against the dense sup oracle.
        let s = std::f64::consts::E - 1.0;
        let oracle = brute_conjugate(|t| t.exp() - t - 1.0, s, 10.0, 4_000_000);
        assert!((oracle - 1.0).abs() < 1e-6);

        let m = ScalarNFunction::exp_type();
        let spec = GridSpec::new(20.0, 512);
        let star = conjugate(&ConjugateSource::Scalar(&m, spec), vec![vec![0.0, 1.0, s, 5.0]]).unwrap();
        assert!((star.eval(&[s]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn saturation_is_detected() {
        // Primal radius 1 cannot support slopes beyond m'(1) = 1 for t^2/2.
        let m = ScalarNFunction::power(2.0);
        let spec = GridSpec::new(1.0, 64);
        let res = conjugate(&ConjugateSource::Scalar(&m, spec), vec![vec![0.0, 5.0, 10.0, 20.0]]);
        assert!(matches!(res, Err(HomogError::BoundarySaturation { .. })));
    }

    #[test]
    fn biconjugate_fixes_convex_tables() {
        let ax: Vec<f64> = (0..=64).map(|i| -2.0 + 4.0 * i as f64 / 64.0).collect();
        let tab = TabulatedConvexFunction::from_fn(vec![ax], |x| x[0] * x[0]);
        let bi = biconjugate(&tab).unwrap();
        for (v, w) in tab.values().iter().zip(bi.values()) {
            assert!((v - w).abs() <= 1e-6 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn biconjugate_of_nonconvex_is_convex_hull() {
        // m = min(t^2, (t-2)^2 + 1): the hull bridges between tangency points,
        // computed here by a brute-force lower convex envelope oracle.
        let m = |t: f64| (t * t).min((t - 2.0) * (t - 2.0) + 1.0);
        let n = 257;
        let ax: Vec<f64> = (0..n).map(|i| -1.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let tab = TabulatedConvexFunction::from_fn(vec![ax.clone()], |x| m(x[0]));
        let bi = biconjugate(&tab).unwrap();

        // Oracle: lower convex envelope via max over all chords/supports,
        // i.e. sup over lines below all samples.
        let hull_at = |t0: f64| -> f64 {
            let mut best = f64::NEG_INFINITY;
            for k in 0..200 {
                let slope = -6.0 + 12.0 * k as f64 / 199.0;
                let intercept = ax
                    .iter()
                    .map(|&t| m(t) - slope * t)
                    .fold(f64::INFINITY, f64::min);
                best = best.max(slope * t0 + intercept);
            }
            best
        };
        // Midpoint of the bridge: strictly below m.
        let mid = 1.25;
        let hull_mid = hull_at(mid);
        let bi_mid = bi.eval(&[mid]).unwrap();
        assert!(bi_mid < m(mid) - 1e-3);
        assert!((bi_mid - hull_mid).abs() < 5e-3);
        // Everywhere: hull <= m, and bi tracks the oracle.
        for &t in ax.iter().step_by(16) {
            assert!(bi.eval(&[t]).unwrap() <= m(t) + 1e-9);
        }
    }

    #[test]
    fn biconjugate_of_zero_is_zero() {
        let ax: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let tab = TabulatedConvexFunction::new(vec![ax], vec![0.0; 17]);
        let bi = biconjugate(&tab).unwrap();
        assert!(bi.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn biconjugate_is_idempotent() {
        let m = |t: f64| (t * t).min((t - 2.0) * (t - 2.0) + 1.0);
        let ax: Vec<f64> = (0..=128).map(|i| -1.0 + 4.0 * i as f64 / 128.0).collect();
        let tab = TabulatedConvexFunction::from_fn(vec![ax], |x| m(x[0]));
        let bi = biconjugate(&tab).unwrap();
        let bibi = biconjugate(&bi).unwrap();
        for (v, w) in bi.values().iter().zip(bibi.values()) {
            assert!((v - w).abs() < 1e-8 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn conjugation_is_order_reversing() {
        let spec = GridSpec::new(8.0, 128);
        let duals: Vec<f64> = (0..=32).map(|i| 4.0 * i as f64 / 32.0).collect();
        let m = ScalarNFunction::power(2.0);
        let n = ScalarNFunction::scaled(2.0, ScalarNFunction::power(2.0));
        // m <= n pointwise, so n* <= m*.
        let ms = conjugate(&ConjugateSource::Scalar(&m, spec), vec![duals.clone()]).unwrap();
        let ns = conjugate(&ConjugateSource::Scalar(&n, spec), vec![duals]).unwrap();
        for (a, b) in ns.values().iter().zip(ms.values()) {
            assert!(a <= &(b + 1e-10));
        }
    }

    #[test]
    fn fenchel_young_on_product_lattice() {
        let m = ScalarNFunction::power(3.0);
        let spec = GridSpec::new(10.0, 256);
        let duals: Vec<f64> = (0..=64).map(|i| 50.0 * i as f64 / 64.0).collect();
        let star = conjugate(&ConjugateSource::Scalar(&m, spec), vec![duals.clone()]).unwrap();
        for &t in &spec.nonnegative() {
            for (k, &s) in duals.iter().enumerate() {
                let gap = m.eval(t) + star.values()[k] - t * s;
                assert!(gap >= -1e-6, "t={t} s={s} gap={gap}");
            }
        }
    }

    #[test]
    fn two_dimensional_conjugate_of_quadratic() {
        let ax: Vec<f64> = (0..=40).map(|i| -4.0 + 8.0 * i as f64 / 40.0).collect();
        let tab = TabulatedConvexFunction::from_fn(vec![ax.clone(), ax.clone()], |x| {
            0.5 * (x[0] * x[0] + x[1] * x[1])
        });
        let duals: Vec<f64> = (0..=20).map(|i| -2.0 + 4.0 * i as f64 / 20.0).collect();
        let star = conjugate(&ConjugateSource::Table(&tab), vec![duals.clone(), duals.clone()]).unwrap();
        // |xi|^2/2 is self-conjugate up to the PL discretization error O(h^2).
        for (p, &sx) in duals.iter().enumerate() {
            for (q, &sy) in duals.iter().enumerate() {
                let want = 0.5 * (sx * sx + sy * sy);
                let got = star.values()[p * duals.len() + q];
                assert!((got - want).abs() < 2e-2, "({sx},{sy}): {got} vs {want}");
            }
        }
    }
}

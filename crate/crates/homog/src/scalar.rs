//! Scalar N-functions: convex, even-extendable functions of t >= 0 that
//! vanish at zero, grow superlinearly at infinity and sublinearly at zero.

use crate::tabulated::{ternary_max, TabulatedConvexFunction};

/// A scalar N-function t >= 0 -> value >= 0 from a closed-form family or a
/// grid tabulation.
#[derive(Debug, Clone)]
pub enum ScalarNFunction {
    /// t^p / p, p > 1.
    Power { p: f64 },
    /// e^t - t - 1. Fails the Delta_2 doubling condition.
    ExpType,
    /// (1+t) ln(1+t) - t, the conjugate of `ExpType`.
    ExpDual,
    /// t ln(1+t). Delta_2 holds with doubling constant tending to 2.
    XLogX,
    /// c * m(t) for c > 0.
    Scaled { c: f64, inner: Box<ScalarNFunction> },
    /// Sum of N-functions (weighted blends are Scaled terms).
    Sum(Vec<ScalarNFunction>),
    /// Pointwise envelope inf/sup over the power family p in [p_lo, p_hi] of
    /// t^p / p. Used as growth envelope for variable-exponent functions; the
    /// lower envelope is not convex at t = 1 but brackets correctly.
    PowerEnvelope { p_lo: f64, p_hi: f64, upper: bool },
    /// Grid-tabulated profile, piecewise linear between nodes.
    Tabulated(TabulatedConvexFunction),
    /// c * m(t / c); arises as the conjugate of `Scaled`.
    ScaledArg { c: f64, inner: Box<ScalarNFunction> },
}

impl ScalarNFunction {
    pub fn power(p: f64) -> Self {
        assert!(p > 1.0, "power family needs p > 1");
        ScalarNFunction::Power { p }
    }

    pub fn exp_type() -> Self {
        ScalarNFunction::ExpType
    }

    pub fn xlogx() -> Self {
        ScalarNFunction::XLogX
    }

    pub fn scaled(c: f64, inner: ScalarNFunction) -> Self {
        assert!(c > 0.0);
        ScalarNFunction::Scaled { c, inner: Box::new(inner) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            ScalarNFunction::Power { p } => t.powf(*p) / p,
            ScalarNFunction::ExpType => t.exp() - t - 1.0,
            ScalarNFunction::ExpDual => (1.0 + t) * (1.0 + t).ln() - t,
            ScalarNFunction::XLogX => t * (1.0 + t).ln(),
            ScalarNFunction::Scaled { c, inner } => c * inner.eval(t),
            ScalarNFunction::Sum(terms) => terms.iter().map(|m| m.eval(t)).sum(),
            ScalarNFunction::PowerEnvelope { p_lo, p_hi, upper } => {
                let a = t.powf(*p_lo) / p_lo;
                let b = t.powf(*p_hi) / p_hi;
                if *upper {
                    a.max(b)
                } else {
                    a.min(b)
                }
            }
            ScalarNFunction::ScaledArg { c, inner } => c * inner.eval(t / c),
            ScalarNFunction::Tabulated(tab) => tab.eval(&[t]).unwrap_or_else(|_| {
                // Extrapolate linearly past the last node.
                let ax = &tab.axes()[0];
                let n = ax.len();
                let slope = (tab.values()[n - 1] - tab.values()[n - 2]) / (ax[n - 1] - ax[n - 2]);
                tab.values()[n - 1] + slope * (t - ax[n - 1])
            }),
        }
    }

    /// Right derivative at t >= 0.
    pub fn deriv(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            ScalarNFunction::Power { p } => t.powf(p - 1.0),
            ScalarNFunction::ExpType => t.exp() - 1.0,
            ScalarNFunction::ExpDual => (1.0 + t).ln(),
            ScalarNFunction::XLogX => (1.0 + t).ln() + t / (1.0 + t),
            ScalarNFunction::Scaled { c, inner } => c * inner.deriv(t),
            ScalarNFunction::Sum(terms) => terms.iter().map(|m| m.deriv(t)).sum(),
            ScalarNFunction::PowerEnvelope { p_lo, p_hi, upper } => {
                let a = t.powf(*p_lo) / p_lo;
                let b = t.powf(*p_hi) / p_hi;
                let active = if (a > b) == *upper { *p_lo } else { *p_hi };
                t.powf(active - 1.0)
            }
            ScalarNFunction::ScaledArg { c, inner } => inner.deriv(t / c),
            ScalarNFunction::Tabulated(_) => {
                let h = 1e-6 * (1.0 + t);
                (self.eval(t + h) - self.eval((t - h).max(0.0))) / (h + (t - (t - h).max(0.0)))
            }
        }
    }

    /// Second derivative at t > 0.
    pub fn deriv2(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            ScalarNFunction::Power { p } => (p - 1.0) * t.powf(p - 2.0),
            ScalarNFunction::ExpType => t.exp(),
            ScalarNFunction::ExpDual => 1.0 / (1.0 + t),
            ScalarNFunction::XLogX => 1.0 / (1.0 + t) + 1.0 / ((1.0 + t) * (1.0 + t)),
            ScalarNFunction::Scaled { c, inner } => c * inner.deriv2(t),
            ScalarNFunction::Sum(terms) => terms.iter().map(|m| m.deriv2(t)).sum(),
            ScalarNFunction::ScaledArg { c, inner } => inner.deriv2(t / c) / c,
            _ => {
                let h = 1e-5 * (1.0 + t);
                (self.deriv(t + h) - self.deriv((t - h).max(0.0))) / (h + (t - (t - h).max(0.0)))
            }
        }
    }

    /// Closed-form conjugate, when the family has one.
    pub fn conjugate_closed_form(&self) -> Option<ScalarNFunction> {
        match self {
            ScalarNFunction::Power { p } => {
                let q = p / (p - 1.0);
                Some(ScalarNFunction::Power { p: q })
            }
            ScalarNFunction::ExpType => Some(ScalarNFunction::ExpDual),
            ScalarNFunction::ExpDual => Some(ScalarNFunction::ExpType),
            // (c m)*(s) = c m*(s/c)
            ScalarNFunction::Scaled { c, inner } => inner
                .conjugate_closed_form()
                .map(|star| ScalarNFunction::ScaledArg { c: *c, inner: Box::new(star) }),
            ScalarNFunction::ScaledArg { c, inner } => inner
                .conjugate_closed_form()
                .map(|star| ScalarNFunction::Scaled { c: *c, inner: Box::new(star) }),
            _ => None,
        }
    }

    /// Conjugate value m*(s) = sup_{t>=0} { s t - m(t) }: closed form when
    /// available, otherwise a bracketed ternary search (the objective is
    /// concave in t).
    pub fn conjugate_value(&self, s: f64) -> f64 {
        let s = s.abs();
        if let Some(star) = self.conjugate_closed_form() {
            return star.eval(s);
        }
        // Bracket: grow t until the slope m'(t) exceeds s.
        let mut hi = 1.0;
        let mut guard = 0;
        while self.deriv(hi) < s && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        ternary_max(|t| s * t - self.eval(t), 0.0, hi)
    }
}

//! Closed-form and sampled Y-periodic coefficient functions on the unit cell.

/// A Y-periodic scalar coefficient y -> k(y). Evaluation reduces each
/// coordinate to its fractional part, so callers may pass any point of R^d.
#[derive(Debug, Clone)]
pub enum SpatialFn {
    Const(f64),
    /// base + amp * sin(2 pi y_1)
    Sin { base: f64, amp: f64 },
    /// base + amp * cos(2 pi y_1)
    Cos { base: f64, amp: f64 },
    /// base + amp * sin^2(pi y_1)
    SinSq { base: f64, amp: f64 },
    /// base + amp * prod_i sin^2(pi y_i); smooth in every dimension.
    SinSqProd { base: f64, amp: f64 },
    /// lo on [0, split), hi on [split, 1), in y_1. Discontinuous.
    Step { lo: f64, hi: f64, split: f64 },
    /// Periodic samples over [0,1) in y_1, piecewise-linear interpolation.
    Samples(Vec<f64>),
}

pub fn fract(y: f64) -> f64 {
    let f = y - y.floor();
    if f == 1.0 {
        0.0
    } else {
        f
    }
}

impl SpatialFn {
    pub fn eval(&self, y: &[f64]) -> f64 {
        let y1 = fract(y[0]);
        match self {
            SpatialFn::Const(c) => *c,
            SpatialFn::Sin { base, amp } => base + amp * (2.0 * std::f64::consts::PI * y1).sin(),
            SpatialFn::Cos { base, amp } => base + amp * (2.0 * std::f64::consts::PI * y1).cos(),
            SpatialFn::SinSq { base, amp } => {
                let s = (std::f64::consts::PI * y1).sin();
                base + amp * s * s
            }
            SpatialFn::SinSqProd { base, amp } => {
                let mut prod = 1.0;
                for &yi in y {
                    let s = (std::f64::consts::PI * fract(yi)).sin();
                    prod *= s * s;
                }
                base + amp * prod
            }
            SpatialFn::Step { lo, hi, split } => {
                if y1 < *split {
                    *lo
                } else {
                    *hi
                }
            }
            SpatialFn::Samples(v) => {
                let n = v.len();
                let x = y1 * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let t = x - i as f64;
                let j = (i + 1) % n;
                v[i] * (1.0 - t) + v[j] * t
            }
        }
    }

    /// Range of the coefficient over the cell, exact for closed forms and
    /// sampled for `Samples`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            SpatialFn::Const(c) => (*c, *c),
            SpatialFn::Sin { base, amp } | SpatialFn::Cos { base, amp } => {
                (base - amp.abs(), base + amp.abs())
            }
            SpatialFn::SinSq { base, amp } | SpatialFn::SinSqProd { base, amp } => {
                if *amp >= 0.0 {
                    (*base, base + amp)
                } else {
                    (base + amp, *base)
                }
            }
            SpatialFn::Step { lo, hi, .. } => (lo.min(*hi), lo.max(*hi)),
            SpatialFn::Samples(v) => {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// True when the coefficient has no spatial dependence.
    pub fn is_constant(&self) -> bool {
        matches!(self, SpatialFn::Const(_))
    }

    /// True for families that are continuous in y.
    pub fn is_continuous(&self) -> bool {
        !matches!(self, SpatialFn::Step { .. })
    }
}

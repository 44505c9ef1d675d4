//! Concrete monotone operator models A(y, xi) with their growth gauges, and
//! sampled verifiers for the coercivity and strict-monotonicity assumptions.

use crate::error::{HomogError, Result};
use crate::nfunction::{NFunction, SampleSpec};
use crate::pgrid::{dot, norm, Vector};
use crate::scalar::ScalarNFunction;
use crate::solver::Density;
use crate::spatial::SpatialFn;
use crate::tabulated::TabulatedConvexFunction;

/// A monotone operator A(y, xi), Y-periodic in y. All built-ins are
/// gradients of their attached gauge: A = grad_xi M, so A(y, xi) =
/// phi_y'(|xi|) xi / |xi| with phi_y the frozen radial profile.
#[derive(Debug, Clone)]
pub enum MonotoneOperator {
    /// A = a(y) xi, gauge a(y)|xi|^2/2.
    Linear { a: SpatialFn },
    /// A = a(y) |xi|^{p-2} xi, gauge a(y)|xi|^p/p.
    PWeighted { p: f64, a: SpatialFn },
    /// A = |xi|^{p(y)-2} xi, gauge |xi|^{p(y)}/p(y).
    VariableExponent { p: SpatialFn },
    /// A = grad_xi M for any built-in gauge.
    GradientOfGauge { m: NFunction },
}

impl MonotoneOperator {
    pub fn family_tag(&self) -> &'static str {
        match self {
            MonotoneOperator::Linear { .. } => "linear",
            MonotoneOperator::PWeighted { .. } => "p-weighted",
            MonotoneOperator::VariableExponent { .. } => "variable-exponent",
            MonotoneOperator::GradientOfGauge { .. } => "gradient",
        }
    }

    /// All built-ins carry the gradient structure.
    pub fn is_gradient(&self) -> bool {
        true
    }

    /// The growth gauge M attached to the operator.
    pub fn gauge(&self) -> NFunction {
        match self {
            MonotoneOperator::Linear { a } => NFunction::Radial {
                weight: a.clone(),
                base: ScalarNFunction::power(2.0),
            },
            MonotoneOperator::PWeighted { p, a } => NFunction::Radial {
                weight: a.clone(),
                base: ScalarNFunction::power(*p),
            },
            MonotoneOperator::VariableExponent { p } => {
                NFunction::VariableExponent { p: p.clone() }
            }
            MonotoneOperator::GradientOfGauge { m } => m.clone(),
        }
    }

    /// phi_y'(t), the radial profile of |A|.
    pub fn radial_flux(&self, y: &[f64], t: f64) -> f64 {
        match self {
            MonotoneOperator::Linear { a } => a.eval(y) * t,
            MonotoneOperator::PWeighted { p, a } => a.eval(y) * t.powf(p - 1.0),
            MonotoneOperator::VariableExponent { p } => t.powf(p.eval(y) - 1.0),
            MonotoneOperator::GradientOfGauge { m } => m.radial_deriv(y, t),
        }
    }

    pub fn eval(&self, y: &[f64], xi: &Vector) -> Vector {
        let t = norm(xi);
        if t == 0.0 {
            return [0.0; 2];
        }
        let s = self.radial_flux(y, t) / t;
        [s * xi[0], s * xi[1]]
    }

    /// d A / d xi: (phi'/t) I + (phi'' - phi'/t) xi xi^T / t^2.
    pub fn jacobian(&self, y: &[f64], xi: &Vector) -> [[f64; 2]; 2] {
        let t = norm(xi);
        let m = self.gauge();
        if t < 1e-14 {
            // isotropic limit; may vanish for degenerate (p > 2) families,
            // which the continuation schedule regularizes
            let d2 = m.radial_deriv2(y, 1e-14);
            let d2 = if d2.is_finite() { d2 } else { 0.0 };
            return [[d2, 0.0], [0.0, d2]];
        }
        let d1 = self.radial_flux(y, t);
        let d2 = m.radial_deriv2(y, t);
        let s = d1 / t;
        let q = (d2 - s) / (t * t);
        [
            [s + q * xi[0] * xi[0], q * xi[0] * xi[1]],
            [q * xi[0] * xi[1], s + q * xi[1] * xi[1]],
        ]
    }
}

impl Density for MonotoneOperator {
    fn value(&self, y: &Vector, g: &Vector) -> f64 {
        self.gauge().eval(y, g)
    }
    fn flux(&self, y: &Vector, g: &Vector) -> Vector {
        self.eval(y, g)
    }
    fn flux_jacobian(&self, y: &Vector, g: &Vector) -> [[f64; 2]; 2] {
        self.jacobian(y, g)
    }
}

/// Build an operator from a declarative family name plus parameters.
pub fn make_operator(
    family: &str,
    p: Option<f64>,
    coeff: Option<SpatialFn>,
    gauge: Option<NFunction>,
) -> Result<MonotoneOperator> {
    let coeff_or_one = || coeff.clone().unwrap_or(SpatialFn::Const(1.0));
    match family {
        "linear" => Ok(MonotoneOperator::Linear { a: coeff_or_one() }),
        "p-weighted" => {
            let p = p.ok_or_else(|| {
                HomogError::InvalidConfig("p-weighted family needs an exponent p".into())
            })?;
            if p <= 1.0 {
                return Err(HomogError::InvalidConfig(format!("exponent p = {p} must exceed 1")));
            }
            Ok(MonotoneOperator::PWeighted { p, a: coeff_or_one() })
        }
        "variable-exponent" => {
            let p = coeff.ok_or_else(|| {
                HomogError::InvalidConfig("variable-exponent family needs a coefficient p(y)".into())
            })?;
            if p.range().0 <= 1.0 {
                return Err(HomogError::InvalidConfig(
                    "variable exponent must stay above 1".into(),
                ));
            }
            Ok(MonotoneOperator::VariableExponent { p })
        }
        "gradient" => {
            let m = gauge.ok_or_else(|| {
                HomogError::InvalidConfig("gradient family needs a gauge N-function".into())
            })?;
            Ok(MonotoneOperator::GradientOfGauge { m })
        }
        other => Err(HomogError::UnknownFamily(other.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct CoercivityReport {
    pub fitted_c: f64,
    pub coarse_c: f64,
    pub worst_y: Vector,
    pub worst_t: f64,
    pub passes: bool,
}

fn coercivity_inf(op: &MonotoneOperator, spec: &SampleSpec) -> Result<(f64, Vector, f64)> {
    let gauge = op.gauge();
    let ts = spec.t_samples();
    let mut inf = f64::INFINITY;
    let mut worst_y = [0.0; 2];
    let mut worst_t = 0.0;
    for y in spec.y_samples() {
        // Tabulate M*(y, .) exactly at the sampled flux magnitudes, so the
        // table lookup introduces no interpolation error at the probes.
        let prof = gauge.profile(&y);
        let mut dual_axis: Vec<f64> = ts.iter().map(|&t| op.radial_flux(&y, t)).collect();
        dual_axis.push(0.0);
        dual_axis.sort_by(f64::total_cmp);
        dual_axis.dedup_by(|a, b| *a == *b);
        let star_vals: Vec<f64> = dual_axis.iter().map(|&s| prof.conjugate_value(s)).collect();
        let star = TabulatedConvexFunction::new(vec![dual_axis], star_vals);
        for &t in &ts {
            let a_mag = op.radial_flux(&y, t);
            let m_star = star.eval(&[a_mag])?;
            let num = a_mag * t; // A(y, xi) . xi for radial A
            let den = gauge.radial_eval(&y, t) + m_star;
            if den <= 1e-300 {
                continue;
            }
            let r = num / den;
            if r < inf {
                inf = r;
                worst_y = y;
                worst_t = t;
            }
        }
    }
    Ok((inf, worst_y, worst_t))
}

/// Coercivity fit: inf over the lattice of A . xi / (M + M*(A)), which is
/// exactly 1 for gradient operators by the Fenchel-Young equality case.
pub fn verify_coercivity_a3(op: &MonotoneOperator, spec: &SampleSpec) -> Result<CoercivityReport> {
    let (fitted_c, worst_y, worst_t) = coercivity_inf(op, spec)?;
    let mut coarse = *spec;
    coarse.y_per_axis = (spec.y_per_axis / 2).max(3);
    let (coarse_c, _, _) = coercivity_inf(op, &coarse)?;
    let passes = fitted_c > 1e-3 && (fitted_c - coarse_c).abs() <= 0.05 * coarse_c.max(1e-12);
    Ok(CoercivityReport { fitted_c, coarse_c, worst_y, worst_t, passes })
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// min over pairs of (A(xi) - A(eta)) . (xi - eta) / |xi - eta|^2.
    pub min_normalized: f64,
    pub witness: (Vector, Vector, Vector),
    pub passes: bool,
}

/// Strict monotonicity probe over a pair lattice with separations spanning
/// the |xi| sweep.
pub fn verify_monotonicity_a4(op: &MonotoneOperator, spec: &SampleSpec) -> MonotonicityReport {
    let ts = spec.t_samples();
    // signed/rotated probe points around the radial sweep
    let mut points: Vec<Vector> = Vec::new();
    for &t in &ts {
        points.push([t, 0.0]);
        points.push([-t, 0.0]);
        if spec.d == 2 {
            points.push([0.0, t]);
            points.push([t / 2.0_f64.sqrt(), t / 2.0_f64.sqrt()]);
        }
    }
    let ys = spec.y_samples();
    let mut min_norm = f64::INFINITY;
    let mut witness = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for y in &ys {
        for (i, xi) in points.iter().enumerate() {
            let a_xi = op.eval(y, xi);
            for eta in points.iter().skip(i + 1) {
                let dx = [xi[0] - eta[0], xi[1] - eta[1]];
                let sep2 = dot(&dx, &dx);
                if sep2 < 1e-20 {
                    continue;
                }
                let a_eta = op.eval(y, eta);
                let da = [a_xi[0] - a_eta[0], a_xi[1] - a_eta[1]];
                let r = dot(&da, &dx) / sep2;
                if r < min_norm {
                    min_norm = r;
                    witness = (*y, *xi, *eta);
                }
            }
        }
    }
    MonotonicityReport { min_normalized: min_norm, witness, passes: min_norm > 0.0 }
}

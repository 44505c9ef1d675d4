//! Experiment configuration: a fixed TOML schema with defaults for every
//! omitted numeric field. Parsing fails with a line-anchored message; the
//! resolved config is echoed into the output directory for reproducibility.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};
use crate::nfunction::NFunction;
use crate::operator::{make_operator, MonotoneOperator};
use crate::pgrid::Vector;
use crate::scalar::ScalarNFunction;
use crate::spatial::SpatialFn;
use crate::tabulated::GridSpec;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Spatial dimension of the cell (1 or 2).
    pub d: usize,
    /// Operator family: linear | p-weighted | variable-exponent |
    /// gauge-gradient.
    pub operator: String,
    /// Growth exponent for p-weighted.
    pub p: Option<f64>,
    /// Coefficient a(y) for linear / p-weighted.
    pub weight: Option<SpatialSpec>,
    /// Exponent function p(y) for variable-exponent.
    pub exponent: Option<SpatialSpec>,
    /// N-function for gauge-gradient operators and the conjugation /
    /// condition-checking commands.
    pub gauge: Option<GaugeSpec>,
    pub load: LoadSpec,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            d: 1,
            operator: "linear".into(),
            p: None,
            weight: None,
            exponent: None,
            gauge: None,
            load: LoadSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialSpec {
    Const { value: f64 },
    Sin { base: f64, amp: f64 },
    Cos { base: f64, amp: f64 },
    SinSq { base: f64, amp: f64 },
    SinSqProd { base: f64, amp: f64 },
    Step { lo: f64, hi: f64, split: f64 },
}

impl SpatialSpec {
    pub fn build(&self) -> SpatialFn {
        match *self {
            SpatialSpec::Const { value } => SpatialFn::Const(value),
            SpatialSpec::Sin { base, amp } => SpatialFn::Sin { base, amp },
            SpatialSpec::Cos { base, amp } => SpatialFn::Cos { base, amp },
            SpatialSpec::SinSq { base, amp } => SpatialFn::SinSq { base, amp },
            SpatialSpec::SinSqProd { base, amp } => SpatialFn::SinSqProd { base, amp },
            SpatialSpec::Step { lo, hi, split } => SpatialFn::Step { lo, hi, split },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GaugeSpec {
    /// weight(y) |xi|^p / p; spatially constant when weight is omitted.
    Power { p: f64, weight: Option<SpatialSpec> },
    /// weight(y) (e^|xi| - |xi| - 1).
    Exp { weight: Option<SpatialSpec> },
    /// weight(y) ((1 + |xi|) ln(1 + |xi|) - |xi|).
    Xlogx { weight: Option<SpatialSpec> },
    /// |xi|^{p(y)} / p(y).
    VariableExponent { exponent: SpatialSpec },
}

impl GaugeSpec {
    pub fn build(&self) -> Result<NFunction> {
        let radial = |weight: &Option<SpatialSpec>, base: ScalarNFunction| match weight {
            None => NFunction::Constant { base },
            Some(w) => NFunction::Radial { weight: w.build(), base },
        };
        Ok(match self {
            GaugeSpec::Power { p, weight } => {
                if *p <= 1.0 {
                    return Err(HomogError::InvalidConfig(format!(
                        "power gauge needs p > 1, got {p}"
                    )));
                }
                radial(weight, ScalarNFunction::power(*p))
            }
            GaugeSpec::Exp { weight } => radial(weight, ScalarNFunction::exp_type()),
            GaugeSpec::Xlogx { weight } => radial(weight, ScalarNFunction::xlogx()),
            GaugeSpec::VariableExponent { exponent } => {
                NFunction::VariableExponent { p: exponent.build() }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadSpec {
    Zero,
    Constant { fx: f64, fy: f64 },
    /// F(x) = scale * x (componentwise in the active dimensions).
    Linear { scale: f64 },
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec::Linear { scale: 1.0 }
    }
}

impl LoadSpec {
    pub fn eval(&self, x: &Vector, d: usize) -> Vector {
        match *self {
            LoadSpec::Zero => [0.0; 2],
            LoadSpec::Constant { fx, fy } => [fx, if d == 1 { 0.0 } else { fy }],
            LoadSpec::Linear { scale } => {
                [scale * x[0], if d == 1 { 0.0 } else { scale * x[1] }]
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Dirichlet grid intervals per axis.
    pub k: usize,
    /// Cell-problem grid intervals per axis.
    pub cell_k: usize,
    /// xi-lattice half-width and intervals per side.
    pub xi_radius: f64,
    pub xi_n: usize,
    /// Dual (eta) lattice half-width and intervals per side; 0 radius means
    /// 1.5 * xi_radius, 0 intervals means xi_n (the aligned choice: dual
    /// spacing 1.5x the xi spacing keeps quadratic transforms lattice-exact).
    pub dual_radius: f64,
    pub dual_n: usize,
    /// Relative tolerance for the f* route cross-check flags.
    pub cross_check_tol: f64,
    pub tol: f64,
    pub eps_list: Vec<f64>,
    /// Cube edge half-lengths for the M3 checker; empty means the built-in
    /// schedule below delta_0.
    pub deltas: Vec<f64>,
    pub min_nodes_per_cell: usize,
    /// Conjugation tabulation radius and intervals per side.
    pub conj_radius: f64,
    pub conj_n: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            k: 256,
            cell_k: 128,
            xi_radius: 2.0,
            xi_n: 16,
            dual_radius: 0.0,
            dual_n: 0,
            cross_check_tol: 1e-4,
            tol: 1e-10,
            eps_list: vec![0.25, 0.125, 0.0625],
            deltas: Vec::new(),
            min_nodes_per_cell: 16,
            conj_radius: 4.0,
            conj_n: 64,
        }
    }
}

impl NumericsConfig {
    pub fn xi_axis(&self) -> Vec<f64> {
        GridSpec::new(self.xi_radius, self.xi_n).uniform_symmetric()
    }

    pub fn dual_axis(&self) -> Vec<f64> {
        let radius = if self.dual_radius > 0.0 { self.dual_radius } else { 1.5 * self.xi_radius };
        let n = if self.dual_n > 0 { self.dual_n } else { self.xi_n };
        GridSpec::new(radius, n).uniform_symmetric()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| HomogError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if !(self.problem.d == 1 || self.problem.d == 2) {
            return Err(HomogError::InvalidConfig(format!(
                "d must be 1 or 2, got {}",
                self.problem.d
            )));
        }
        if self.numerics.k == 0 || self.numerics.cell_k == 0 {
            return Err(HomogError::InvalidConfig("grid sizes must be positive".into()));
        }
        if !(self.numerics.tol > 0.0) {
            return Err(HomogError::InvalidConfig("tol must be positive".into()));
        }
        Ok(())
    }

    /// Resolved-config echo written into the output directory.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_operator(&self) -> Result<MonotoneOperator> {
        let p = &self.problem;
        match p.operator.as_str() {
            "variable-exponent" => {
                let exponent = p.exponent.as_ref().ok_or_else(|| {
                    HomogError::InvalidConfig("variable-exponent needs [problem.exponent]".into())
                })?;
                make_operator("variable-exponent", None, Some(exponent.build()), None)
            }
            "gauge-gradient" => {
                let gauge = p.gauge.as_ref().ok_or_else(|| {
                    HomogError::InvalidConfig("gauge-gradient needs [problem.gauge]".into())
                })?;
                make_operator("gradient", None, None, Some(gauge.build()?))
            }
            other => make_operator(other, p.p, p.weight.as_ref().map(|w| w.build()), None),
        }
    }

    /// The N-function driving conjugation and condition checking: the
    /// explicit gauge when present, else the operator's own gauge.
    pub fn build_gauge(&self) -> Result<NFunction> {
        match &self.problem.gauge {
            Some(g) => g.build(),
            None => Ok(self.build_operator()?.gauge()),
        }
    }

    pub fn load_fn(&self) -> impl Fn(&Vector) -> Vector + Sync + '_ {
        let load = self.problem.load.clone();
        let d = self.problem.d;
        move |x: &Vector| load.eval(x, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = ExperimentConfig::from_str("").unwrap();
        assert_eq!(cfg.problem.d, 1);
        assert_eq!(cfg.problem.operator, "linear");
        assert_eq!(cfg.numerics.k, 256);
        assert_eq!(cfg.numerics.tol, 1e-10);
        assert_eq!(cfg.output.dir, "out");
        assert!(matches!(cfg.problem.load, LoadSpec::Linear { scale } if scale == 1.0));
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            [problem]
            d = 1
            operator = "p-weighted"
            p = 3.0
            weight = { kind = "step", lo = 1.0, hi = 8.0, split = 0.5 }
            load = { kind = "constant", fx = 2.0, fy = 0.0 }

            [numerics]
            k = 512
            cell_k = 256
            xi_radius = 1.5
            eps_list = [0.25, 0.125]

            [output]
            dir = "results"
        "#;
        let cfg = ExperimentConfig::from_str(text).unwrap();
        assert_eq!(cfg.numerics.k, 512);
        assert_eq!(cfg.numerics.xi_n, 16, "default survives partial override");
        let op = cfg.build_operator().unwrap();
        assert_eq!(op.family_tag(), "p-weighted");
    }

    #[test]
    fn unknown_field_is_an_anchored_error() {
        let err = ExperimentConfig::from_str("[numerics]\nnot_a_field = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not_a_field"), "{msg}");
        assert!(msg.contains("line") || msg.contains('2'), "{msg}");
    }

    #[test]
    fn echo_reparses_to_the_same_config() {
        let cfg = ExperimentConfig::from_str(
            "[problem]\noperator = \"linear\"\nweight = { kind = \"sin-sq\", base = 2.0, amp = 1.0 }\n",
        )
        .unwrap();
        let echoed = ExperimentConfig::from_str(&cfg.echo()).unwrap();
        assert_eq!(cfg.echo(), echoed.echo());
    }

    #[test]
    fn gauge_specs_build() {
        let cfg = ExperimentConfig::from_str(
            "[problem]\ngauge = { family = \"power\", p = 2.0, weight = { kind = \"step\", lo = 1.0, hi = 3.0, split = 0.5 } }\n",
        )
        .unwrap();
        let m = cfg.build_gauge().unwrap();
        assert!((m.eval(&[0.25, 0.0], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let bad = ExperimentConfig::from_str("[problem]\ngauge = { family = \"power\", p = 0.5 }\n")
            .unwrap();
        assert!(bad.build_gauge().is_err());
    }

    #[test]
    fn invalid_dimension_rejected() {
        assert!(ExperimentConfig::from_str("[problem]\nd = 3\n").is_err());
    }
}

//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [function]
//! label = "f2"          # f1 | f2 | f3 | linear | constant
//! dim = 1
//! beta = 0.5            # number, or one entry per axis for f3
//!
//! [perturbation]
//! kind = "lp_ball"      # lp_ball | sparse_lp_ball | box | segment | finite | singleton
//! p = "inf"
//! q = 0.05
//!
//! [estimator]
//! method = "local_poly" # local_poly | aniso_kernel | exact | constant
//! c_h = 1.0
//!
//! [experiment]
//! n = [1024, 4096]
//! replicates = 20
//! sigma = 0.2
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    pub function: FunctionSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// A number, or one number per axis.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

/// An `ℓp` exponent: a number or the string `"inf"`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Text(String),
}

impl Exponent {
    pub fn value(&self) -> Result<f64> {
        match self {
            Exponent::Number(v) => Ok(*v),
            Exponent::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Inf") => Ok(f64::INFINITY),
            Exponent::Text(s) => Err(Error::Config(format!(
                "perturbation.p: expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    pub label: String,
    pub dim: Option<usize>,
    pub beta: Option<OneOrMany>,
    pub lipschitz: Option<OneOrMany>,
    /// Zero-based coordinate carried by the anisotropic witness.
    pub axis: Option<usize>,
    pub coefficients: Option<Vec<f64>>,
    pub intercept: Option<f64>,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub p: Option<Exponent>,
    /// Radius for balls; scale factor on the listed geometry otherwise.
    pub q: Option<f64>,
    /// `q_n = q · n^{−decay}`.
    #[serde(default)]
    pub decay: f64,
    pub s: Option<usize>,
    pub half_widths: Option<Vec<f64>>,
    pub start: Option<Vec<f64>>,
    pub end: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<f64>>>,
    /// Sample points per axis; chosen from the lattice spacing when absent.
    pub resolution: Option<usize>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            p: None,
            q: None,
            decay: 0.0,
            s: None,
            half_widths: None,
            start: None,
            end: None,
            points: None,
            resolution: None,
        }
    }
}

fn default_kind() -> String {
    "singleton".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "one")]
    pub c_h: f64,
    /// Local polynomial degree; `⌊β⌋` when absent.
    pub degree: Option<usize>,
    /// Value of the `constant` method.
    #[serde(default)]
    pub value: f64,
    /// Whether `eval-loss` and `fit` robustify the base fit.
    #[serde(default = "yes")]
    pub plug_in: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            c_h: 1.0,
            degree: None,
            value: 0.0,
            plug_in: true,
        }
    }
}

fn default_method() -> String {
    "local_poly".into()
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            replicates: default_replicates(),
            sigma: default_sigma(),
        }
    }
}

fn default_n() -> Vec<usize> {
    vec![1024]
}

fn default_replicates() -> usize {
    10
}

fn default_sigma() -> f64 {
    0.2
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub points_per_axis: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub q: Vec<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ConfigFile::parse("[function]\nlabel = \"f1\"\n").unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.perturbation.kind, "singleton");
        assert_eq!(c.estimator.c_h, 1.0);
        assert_eq!(c.experiment.sigma, 0.2);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ConfigFile::parse("[function]\nlabel = \"f1\"\n[estimator]\nbandwith = 2\n").unwrap_err();
        assert!(err.to_string().contains("bandwith"), "{err}");
        let err = ConfigFile::parse("sed = 1\n[function]\nlabel = \"f1\"\n").unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn exponent_forms() {
        let c = ConfigFile::parse("[function]\nlabel = \"f1\"\n[perturbation]\nkind = \"lp_ball\"\np = \"inf\"\nq = 0.1\n").unwrap();
        assert_eq!(c.perturbation.p.unwrap().value().unwrap(), f64::INFINITY);
        let c = ConfigFile::parse("[function]\nlabel = \"f1\"\n[perturbation]\np = 2\n").unwrap();
        assert_eq!(c.perturbation.p.unwrap().value().unwrap(), 2.0);
        assert!(Exponent::Text("big".into()).value().is_err());
    }

    #[test]
    fn scalar_or_vector_beta() {
        let c = ConfigFile::parse("[function]\nlabel = \"f3\"\nbeta = [1.0, 0.5]\n").unwrap();
        assert_eq!(c.function.beta, Some(OneOrMany::Many(vec![1.0, 0.5])));
    }
}

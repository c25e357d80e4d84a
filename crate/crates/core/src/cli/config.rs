//! Run configuration: a TOML file, optionally overridden from the command line.
//!
//! ```toml
//! problem = "compatible_nonsmooth"
//! N = 32
//! M = 80
//! T = 1.0
//! m = 3
//! bootstrap_ratio = 100
//! output_dir = "out"
//!
//! [study]
//! param = "tau"
//! levels = [10, 20, 40, 80]
//! ```
//!
//! A `[custom]` section replaces the named problem by an inline definition
//! with power-law time factors.

use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::adi_solver::{RunOptions, DEFAULT_BOOTSTRAP_RATIO};
use crate::error::{Error, Result};
use crate::frac_weights::{Exponents, MAX_CORRECTIONS};
use crate::problems::{by_name, Domain, PowerSeries, ProblemSpec, SeparableTerm, SpatialFactor, TimeProfile};
use crate::spectral_basis::DEFAULT_EXTRA_QUADRATURE;

/// Which parameter a study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum StudyParam {
    #[serde(rename = "tau")]
    #[value(name = "tau")]
    Tau,
    #[serde(rename = "N")]
    #[value(name = "N")]
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub param: StudyParam,
    /// Values of `M` (for `tau`) or `N`.
    pub levels: Vec<usize>,
}

/// Spatial factor of an inline problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialSpec {
    /// `sin(wx·x) sin(wy·y)`
    Sines { wx: f64, wy: f64 },
    /// `exp(-(x²+y²))`
    Gaussian,
    /// `P(x²+y²) exp(-(x²+y²))`, coefficients of `P` in ascending order.
    GaussianPoly { coeffs: Vec<f64> },
}

impl SpatialSpec {
    fn build(&self) -> SpatialFactor {
        match self {
            SpatialSpec::Sines { wx, wy } => SpatialFactor::Sines { wx: *wx, wy: *wy },
            SpatialSpec::Gaussian => SpatialFactor::gaussian(),
            SpatialSpec::GaussianPoly { coeffs } => SpatialFactor::GaussianPoly {
                coeffs: coeffs.clone(),
            },
        }
    }
}

/// `Σ c t^e · space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// `(coefficient, exponent)` pairs.
    pub time: Vec<(f64, f64)>,
    pub space: SpatialSpec,
}

/// `coeff · space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub coeff: f64,
    pub space: SpatialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub alpha: f64,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    pub mu: f64,
    #[serde(default = "reference_interval")]
    pub x: (f64, f64),
    #[serde(default = "reference_interval")]
    pub y: (f64, f64),
    #[serde(default)]
    pub forcing: Vec<TermSpec>,
    #[serde(default)]
    pub exact: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub g1: Vec<FieldSpec>,
    #[serde(default)]
    pub g2: Vec<FieldSpec>,
}

fn reference_interval() -> (f64, f64) {
    (-1.0, 1.0)
}

impl CustomProblem {
    pub fn build(&self, name: &str) -> Result<ProblemSpec> {
        let terms = |list: &[TermSpec]| -> Vec<SeparableTerm> {
            list.iter()
                .map(|t| SeparableTerm {
                    time: TimeProfile::Power(PowerSeries::new(t.time.clone())),
                    space: t.space.build(),
                })
                .collect()
        };
        let fields = |list: &[FieldSpec]| list.iter().map(|f| (f.coeff, f.space.build())).collect();
        let spec = ProblemSpec {
            name: name.to_string(),
            alpha: self.alpha,
            alphas: self.alphas.clone(),
            coeffs: self.coeffs.clone(),
            mu: self.mu,
            domain: Domain::new(self.x, self.y)?,
            g1: fields(&self.g1),
            g2: fields(&self.g2),
            forcing: terms(&self.forcing),
            exact: self.exact.as_deref().map(terms),
            laplacian_g1: None,
            qualitative_only: false,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Everything needed for one run or study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_problem")]
    pub problem: String,
    #[serde(default)]
    pub custom: Option<CustomProblem>,
    #[serde(rename = "N", default = "default_degree")]
    pub degree: usize,
    #[serde(rename = "M", default = "default_steps")]
    pub steps: usize,
    #[serde(rename = "T", default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    #[serde(default = "default_bootstrap_ratio")]
    pub bootstrap_ratio: usize,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_problem() -> String {
    "compatible_smooth".into()
}
fn default_degree() -> usize {
    32
}
fn default_steps() -> usize {
    80
}
fn default_t_final() -> f64 {
    1.0
}
fn default_bootstrap_ratio() -> usize {
    DEFAULT_BOOTSTRAP_RATIO
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: default_problem(),
            custom: None,
            degree: default_degree(),
            steps: default_steps(),
            t_final: default_t_final(),
            m: 0,
            sigma: None,
            bootstrap_ratio: default_bootstrap_ratio(),
            study: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks ranges and consistency; every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.degree < 4 {
            return Err(Error::invalid("N", format!("{} < 4", self.degree)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("T", "final time must be positive"));
        }
        if self.m > MAX_CORRECTIONS {
            return Err(Error::invalid("m", format!("{} > {MAX_CORRECTIONS}", self.m)));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.m {
                return Err(Error::invalid(
                    "sigma",
                    format!("{} exponents given for m = {}", s.len(), self.m),
                ));
            }
        }
        self.exponents()?;
        if self.bootstrap_ratio == 0 {
            return Err(Error::invalid("bootstrap_ratio", "must be at least 1"));
        }
        if self.m > 0 && self.steps > 0 && self.steps < self.m {
            return Err(Error::invalid("M", format!("{} steps cannot hold {} starting values", self.steps, self.m)));
        }
        if let Some(study) = &self.study {
            if study.levels.len() < 2 {
                return Err(Error::invalid("study.levels", "a study needs at least two levels"));
            }
            if study.param == StudyParam::Degree {
                if let Some(&n) = study.levels.iter().find(|&&n| n < 4) {
                    return Err(Error::invalid("study.levels", format!("N = {n} < 4")));
                }
            }
        }
        self.problem_spec()?;
        if self.steps > 0 && self.t_final / self.steps as f64 >= 1.0 {
            warn!("tau = T/M = {} >= 1: outside the stability hypothesis", self.t_final / self.steps as f64);
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match &self.custom {
            Some(c) => c.build(&self.problem),
            None => by_name(&self.problem),
        }
    }

    /// Correction exponents: `sigma` if given, else `1.1, 1.2, …`.
    pub fn exponents(&self) -> Result<Exponents> {
        match &self.sigma {
            Some(s) => Exponents::new(s.clone()),
            None => Exponents::default_for(self.m),
        }
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            degree: self.degree,
            steps: self.steps,
            t_final: self.t_final,
            exponents: self.exponents()?.as_slice().to_vec(),
            bootstrap_ratio: self.bootstrap_ratio,
            extra_quadrature: DEFAULT_EXTRA_QUADRATURE,
        })
    }

    /// The configuration of one study level.
    pub fn at_level(&self, param: StudyParam, level: usize) -> Self {
        let mut c = self.clone();
        c.study = None;
        match param {
            StudyParam::Tau => c.steps = level,
            StudyParam::Degree => c.degree = level,
        }
        c
    }
}

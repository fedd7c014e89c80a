//! TOML configuration for the `analyze` and `simulate` subcommands.

use serde::Deserialize;

use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::estimators::Mu0Kind;
use crate::model::{EffectScale, LinkFamily};
use crate::simulation::{Allocation, CovariateSetting, ModelSpec, OutcomeType, Scenario};

/// Analysis configuration (one dataset, several methods and weights).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Methods to run, by name.
    pub methods: Vec<String>,
    /// Borrowing weights; each method except `rct_only` is run per weight.
    #[serde(default = "default_w_values")]
    pub w_values: Vec<f64>,
    #[serde(default = "default_scale")]
    pub effect_scale: String,
    /// Inverse link of the outcome working models.
    #[serde(default = "default_link")]
    pub link: String,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    /// Control-arm outcome-regression columns.
    #[serde(default)]
    pub or_model: Option<ModelColumns>,
    /// Treated-arm outcome-regression columns; defaults to `or_model`.
    #[serde(default)]
    pub or_model_treated: Option<ModelColumns>,
    /// Propensity-score columns.
    #[serde(default)]
    pub ps_model: Option<ModelColumns>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
}

fn default_w_values() -> Vec<f64> {
    vec![0.5]
}
fn default_scale() -> String {
    "difference".into()
}
fn default_link() -> String {
    "identity".into()
}
fn default_ci_level() -> f64 {
    0.95
}

/// Columns of one working model, with optional transformations.
/// Interactions are written as `"a:b"` pairs of base columns.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelColumns {
    pub columns: Vec<String>,
    #[serde(default)]
    pub sqrt: Vec<String>,
    #[serde(default)]
    pub square: Vec<String>,
    #[serde(default)]
    pub interact: Vec<String>,
}

impl ModelColumns {
    pub fn to_design_spec(&self) -> Result<DesignSpec> {
        let mut interact = Vec::new();
        for pair in &self.interact {
            let mut parts = pair.splitn(2, ':');
            let a = parts.next().unwrap_or_default();
            let b = parts.next().ok_or_else(|| {
                Error::Config(format!("interaction '{pair}' must be written as 'a:b'"))
            })?;
            interact.push((a.trim().to_string(), b.trim().to_string()));
        }
        Ok(DesignSpec {
            columns: self.columns.clone(),
            sqrt: self.sqrt.clone(),
            square: self.square.clone(),
            interact,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_bootstrap_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

fn default_true() -> bool {
    true
}
fn default_bootstrap_samples() -> usize {
    1000
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            enabled: true,
            samples: 1000,
            seed: 0,
            stratified: true,
        }
    }
}

impl AnalysisConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        for m in &self.methods {
            Mu0Kind::parse(m)?;
        }
        for &w in &self.w_values {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("w must lie in [0,1], got {w}")));
            }
        }
        if self.w_values.is_empty() {
            return Err(Error::Config("w_values must not be empty".into()));
        }
        if !(0.0 < self.ci_level && self.ci_level < 1.0) {
            return Err(Error::Config(format!(
                "ci_level must lie in (0,1), got {}",
                self.ci_level
            )));
        }
        self.parse_scale()?;
        self.parse_link()?;
        let needs_or = self
            .methods
            .iter()
            .any(|m| Mu0Kind::parse(m).unwrap().uses_or_model());
        if needs_or && self.or_model.is_none() {
            return Err(Error::Config(
                "methods with an outcome-regression model need [or_model]".into(),
            ));
        }
        let needs_ps = self
            .methods
            .iter()
            .any(|m| Mu0Kind::parse(m).unwrap().uses_ps_model());
        if needs_ps && self.ps_model.is_none() {
            return Err(Error::Config(
                "methods with a propensity model need [ps_model]".into(),
            ));
        }
        Ok(())
    }

    pub fn parse_scale(&self) -> Result<EffectScale> {
        match self.effect_scale.as_str() {
            "difference" => Ok(EffectScale::Difference),
            "log_ratio" => Ok(EffectScale::LogRatio),
            "log_odds_ratio" => Ok(EffectScale::LogOddsRatio),
            other => Err(Error::Config(format!("unknown effect scale '{other}'"))),
        }
    }

    pub fn parse_link(&self) -> Result<LinkFamily> {
        match self.link.as_str() {
            "identity" => Ok(LinkFamily::Identity),
            "log" => Ok(LinkFamily::Log),
            "logit" => Ok(LinkFamily::Logit),
            other => Err(Error::Config(format!("unknown link '{other}'"))),
        }
    }

    pub fn parse_methods(&self) -> Vec<Mu0Kind> {
        self.methods
            .iter()
            .map(|m| Mu0Kind::parse(m).unwrap())
            .collect()
    }
}

/// Scenario configuration for `simulate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub covariates: String,
    pub outcome: String,
    #[serde(default = "default_n_external")]
    pub n_external: usize,
    #[serde(default = "default_n_rct")]
    pub n_rct: usize,
    #[serde(default = "default_alloc_treated")]
    pub alloc_treated: u32,
    #[serde(default = "default_alloc_control")]
    pub alloc_control: u32,
    #[serde(default = "default_allocation")]
    pub allocation: String,
    #[serde(default = "default_w")]
    pub w: f64,
    #[serde(default)]
    pub rct_cov_mean: f64,
    #[serde(default = "default_one")]
    pub rct_cov_sd: f64,
    #[serde(default = "default_ext_mean")]
    pub ext_cov_mean: f64,
    #[serde(default = "default_ext_sd")]
    pub ext_cov_sd: f64,
}

fn default_n_external() -> usize {
    100
}
fn default_n_rct() -> usize {
    150
}
fn default_alloc_treated() -> u32 {
    2
}
fn default_alloc_control() -> u32 {
    1
}
fn default_allocation() -> String {
    "exact".into()
}
fn default_w() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}
fn default_ext_mean() -> f64 {
    -0.5
}
fn default_ext_sd() -> f64 {
    1.5
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let covariates = match self.covariates.as_str() {
            "one" => CovariateSetting::One,
            "two" => CovariateSetting::Two,
            other => {
                return Err(Error::Config(format!(
                    "covariates must be 'one' or 'two', got '{other}'"
                )))
            }
        };
        let outcome = match self.outcome.as_str() {
            "binary" => OutcomeType::Binary,
            "continuous" => OutcomeType::Continuous,
            other => {
                return Err(Error::Config(format!(
                    "outcome must be 'binary' or 'continuous', got '{other}'"
                )))
            }
        };
        let allocation = match self.allocation.as_str() {
            "exact" => Allocation::Exact,
            "bernoulli" => Allocation::Bernoulli,
            other => {
                return Err(Error::Config(format!(
                    "allocation must be 'exact' or 'bernoulli', got '{other}'"
                )))
            }
        };
        let sc = Scenario {
            covariates,
            outcome,
            n_external: self.n_external,
            n_rct: self.n_rct,
            alloc_treated: self.alloc_treated,
            alloc_control: self.alloc_control,
            allocation,
            w: self.w,
            or_spec: ModelSpec::Correct,
            ps_spec: ModelSpec::Correct,
            rct_cov_mean: self.rct_cov_mean,
            rct_cov_sd: self.rct_cov_sd,
            ext_cov_mean: self.ext_cov_mean,
            ext_cov_sd: self.ext_cov_sd,
        };
        sc.validate()?;
        Ok(sc)
    }
}

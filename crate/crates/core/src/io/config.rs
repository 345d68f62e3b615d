//! Fit configuration files.
//!
//! A configuration is a JSON document. Values given on the command line
//! replace the corresponding keys of the file; keys missing from both take
//! the defaults below.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{FrailtyVariant, PriorSpec};
use crate::mcmc::ChainConfig;
use crate::model::{Family, ModelSpec};
use crate::posterior::DrawSubsample;
use crate::survival::TimePartition;

/// Default PSRF above which `--strict` fails a run.
pub const DEFAULT_PSRF_THRESHOLD: f64 = 1.1;

/// Covariate columns of one design matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    /// Columns in design order.
    pub covariates: Vec<String>,
    /// Factor columns and their reference level; expanded to indicators.
    pub factors: BTreeMap<String, String>,
    /// Numeric columns centred and scaled by their sample standard deviation.
    pub standardize: Vec<String>,
    /// Prepend a column of ones.
    pub intercept: bool,
}

/// Columns of the `times1, delta, times2, time, status` illness-death layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllnessDeathColumns {
    pub times1: String,
    pub delta: String,
    pub times2: String,
    pub time: String,
    pub status: String,
}

impl Default for IllnessDeathColumns {
    fn default() -> Self {
        Self {
            times1: "times1".into(),
            delta: "delta".into(),
            times2: "times2".into(),
            time: "time".into(),
            status: "status".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseTransform {
    #[default]
    Identity,
    Log,
}

/// Repeated measurements stored in a second file, one row per measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongitudinalBindings {
    pub path: PathBuf,
    /// Subject key matching `Bindings::id` of the survival file.
    pub id: String,
    pub time: String,
    pub response: String,
    #[serde(default)]
    pub transform: ResponseTransform,
    #[serde(default)]
    pub design: DesignSpec,
}

/// How CSV columns map onto a survival dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bindings {
    /// Subject key; row number when absent.
    pub id: Option<String>,
    pub time: Option<String>,
    /// Event indicator (1 = event, 0 = right-censored), or cause number
    /// (0 = censored) for competing risks.
    pub event: Option<String>,
    pub design: DesignSpec,
    /// Incidence design of the cure model.
    pub incidence: Option<DesignSpec>,
    /// Cluster column of the frailty model.
    pub group: Option<String>,
    pub illness_death: Option<IllnessDeathColumns>,
    pub longitudinal: Option<LongitudinalBindings>,
}

/// Baseline partition of the piecewise PH model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionSpec {
    Knots {
        knots: Vec<f64>,
    },
    /// `intervals` equal pieces of `(0, max time + pad]`.
    Intervals {
        intervals: usize,
        #[serde(default = "default_pad")]
        pad: f64,
    },
}

fn default_pad() -> f64 {
    0.001
}

impl PartitionSpec {
    pub fn resolve(&self, max_time: f64) -> Result<TimePartition> {
        match self {
            PartitionSpec::Knots { knots } => TimePartition::new(knots.clone()),
            PartitionSpec::Intervals { intervals, pad } => TimePartition::equally_spaced(max_time + pad, *intervals),
        }
    }
}

/// Quantities computed from the draws after a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeriveRequest {
    /// `exp((x1 - x2)' beta)` of a PH-type fit.
    HazardRatio { name: String, x1: Vec<f64>, x2: Vec<f64> },
    /// Ratio of median survival times of an AFT fit.
    RelativeMedian { name: String, x1: Vec<f64>, x2: Vec<f64> },
    /// Cure probability at incidence covariates `x`.
    CureFraction { name: String, x: Vec<f64> },
    /// Survival of the uncured at latency covariates `x`.
    UncuredSurvival { name: String, x: Vec<f64>, times: Vec<f64> },
    /// Cumulative incidence of every cause and the overall survival.
    Cif { name: String, x: Vec<f64>, times: Vec<f64> },
    /// `p11, p12, p13` from 0 to each time and `p22, p23` from `s` to `s + time`.
    Transitions { name: String, x: Vec<f64>, s: f64, times: Vec<f64> },
    /// Conditional survival of every cluster at covariates `x`.
    FrailtySurvival { name: String, x: Vec<f64>, times: Vec<f64> },
}

impl DeriveRequest {
    pub fn name(&self) -> &str {
        match self {
            DeriveRequest::HazardRatio { name, .. }
            | DeriveRequest::RelativeMedian { name, .. }
            | DeriveRequest::CureFraction { name, .. }
            | DeriveRequest::UncuredSurvival { name, .. }
            | DeriveRequest::Cif { name, .. }
            | DeriveRequest::Transitions { name, .. }
            | DeriveRequest::FrailtySurvival { name, .. } => name,
        }
    }

    /// Families the request applies to.
    pub fn families(&self) -> &'static [Family] {
        match self {
            DeriveRequest::HazardRatio { .. } => &[Family::PiecewisePh, Family::Frailty],
            DeriveRequest::RelativeMedian { .. } => &[Family::Aft],
            DeriveRequest::CureFraction { .. } | DeriveRequest::UncuredSurvival { .. } => &[Family::Cure],
            DeriveRequest::Cif { .. } => &[Family::CompetingRisks],
            DeriveRequest::Transitions { .. } => &[Family::IllnessDeath],
            DeriveRequest::FrailtySurvival { .. } => &[Family::Frailty],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: Family,
    /// Survival data file, relative to the configuration file.
    pub data: PathBuf,
    pub columns: Bindings,
    #[serde(default)]
    pub priors: PriorSpec,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    /// Number of competing causes; the largest cause in the data when absent.
    #[serde(default)]
    pub n_risks: Option<usize>,
    #[serde(default = "default_gl")]
    pub gl_order: usize,
    #[serde(default)]
    pub frailty: FrailtyVariant,
    #[serde(default)]
    pub chains: ChainConfig,
    #[serde(default = "default_threshold")]
    pub psrf_threshold: f64,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub derive: Vec<DeriveRequest>,
    /// Draws averaged by curve requests.
    #[serde(default)]
    pub subsample: DrawSubsample,
}

fn default_gl() -> usize {
    15
}

fn default_threshold() -> f64 {
    DEFAULT_PSRF_THRESHOLD
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub burn_in: Option<usize>,
    pub n_iter: Option<usize>,
    pub thin: Option<usize>,
    pub strict: bool,
    pub out_dir: Option<PathBuf>,
}

impl FitConfig {
    pub fn new(family: Family, data: impl Into<PathBuf>, columns: Bindings) -> Self {
        Self {
            family,
            data: data.into(),
            columns,
            priors: PriorSpec::new(),
            partition: None,
            n_risks: None,
            gl_order: default_gl(),
            frailty: FrailtyVariant::default(),
            chains: ChainConfig::default(),
            psrf_threshold: DEFAULT_PSRF_THRESHOLD,
            strict: false,
            out_dir: None,
            derive: Vec::new(),
            subsample: DrawSubsample::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration and makes its data paths relative to the file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = base.join(&cfg.data);
        if let Some(long) = cfg.columns.longitudinal.as_mut() {
            long.path = base.join(&long.path);
        }
        if let Some(out) = cfg.out_dir.as_mut() {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let c = &mut self.chains;
        c.seed = o.seed.unwrap_or(c.seed);
        c.n_chains = o.chains.unwrap_or(c.n_chains);
        c.burn_in = o.burn_in.unwrap_or(c.burn_in);
        c.n_iter = o.n_iter.unwrap_or(c.n_iter);
        c.thin = o.thin.unwrap_or(c.thin);
        self.strict |= o.strict;
        if o.out_dir.is_some() {
            self.out_dir = o.out_dir.clone();
        }
    }

    /// Checks that the bindings the family needs are present.
    pub fn validate(&self) -> Result<()> {
        let b = &self.columns;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{} model needs {what}", self.family)))
            }
        };
        if self.family == Family::IllnessDeath {
            need(b.illness_death.is_some(), "`columns.illness_death`")?;
        } else {
            need(b.time.is_some(), "`columns.time`")?;
            need(b.event.is_some(), "`columns.event`")?;
        }
        match self.family {
            Family::PiecewisePh => need(self.partition.is_some(), "a `partition`")?,
            Family::Cure => need(b.incidence.is_some(), "`columns.incidence`")?,
            Family::Frailty => need(b.group.is_some(), "`columns.group`")?,
            Family::Joint => {
                need(b.longitudinal.is_some(), "`columns.longitudinal`")?;
                need(b.id.is_some(), "`columns.id` to link measurements")?;
            }
            _ => {}
        }
        if !(self.psrf_threshold > 1.0) {
            return Err(Error::Config(format!("psrf_threshold must exceed 1, got {}", self.psrf_threshold)));
        }
        for r in &self.derive {
            if !r.families().contains(&self.family) {
                return Err(Error::FamilyMismatch(format!(
                    "`{}` cannot be derived from a {} fit",
                    r.name(),
                    self.family
                )));
            }
        }
        Ok(())
    }

    /// Model specification for a loaded dataset.
    pub fn model_spec(&self, data: &crate::survival::SurvivalDataset) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(self.family).with_frailty(self.frailty);
        spec.priors = self.priors.clone();
        spec.gl_order = self.gl_order;
        if let Some(p) = &self.partition {
            spec.partition = Some(p.resolve(data.max_time())?);
        }
        if self.family == Family::CompetingRisks {
            let observed = data.observations.iter().filter_map(|o| o.event_label).max().unwrap_or(0) as usize;
            spec.n_risks = self.n_risks.unwrap_or(observed.max(1));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn larynx_json() -> &'static str {
        r#"{
            "family": "aft",
            "data": "larynx.csv",
            "columns": {
                "time": "time",
                "event": "delta",
                "design": {
                    "covariates": ["stage", "age", "diagyr"],
                    "factors": {"stage": "1"},
                    "standardize": ["age", "diagyr"],
                    "intercept": true
                }
            },
            "chains": {"n_iter": 500, "thin": 5}
        }"#
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = FitConfig::from_json(larynx_json()).unwrap();
        assert_eq!(cfg.family, Family::Aft);
        assert_eq!(cfg.chains.n_chains, 3);
        assert_eq!(cfg.chains.n_iter, 500);
        assert_eq!(cfg.psrf_threshold, 1.1);
        assert_eq!(cfg.columns.design.factors["stage"], "1");
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = FitConfig::from_json(larynx_json()).unwrap();
        cfg.apply(&Overrides { seed: Some(9), thin: Some(2), strict: true, ..Overrides::default() });
        assert_eq!(cfg.chains.seed, 9);
        assert_eq!(cfg.chains.thin, 2);
        assert_eq!(cfg.chains.n_iter, 500);
        assert!(cfg.strict);
    }

    #[test]
    fn unknown_family_is_rejected() {
        let text = larynx_json().replace("\"aft\"", "\"weibull\"");
        assert!(matches!(FitConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn missing_family_fields() {
        let text = larynx_json().replace("\"aft\"", "\"ph\"");
        let err = FitConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("partition"), "{err}");
    }

    #[test]
    fn mismatched_request() {
        let text = larynx_json()
            .replace("\"chains\"", r#""derive": [{"quantity": "cif", "name": "c", "x": [1], "times": [1]}], "chains""#);
        assert!(matches!(FitConfig::from_json(&text), Err(Error::FamilyMismatch(_))));
    }

    #[test]
    fn partition_from_intervals() {
        let p = PartitionSpec::Intervals { intervals: 3, pad: 0.001 }.resolve(10.7).unwrap();
        assert_eq!(p.n_intervals(), 3);
        assert!((p.end() - 10.701).abs() < 1e-12);
    }
}

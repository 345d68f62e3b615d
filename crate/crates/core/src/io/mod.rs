//! Configuration files, CSV ingestion, fit orchestration and output files.

pub mod config;
pub mod data;
pub mod derive;
pub mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    Bindings, DeriveRequest, DesignSpec, FitConfig, IllnessDeathColumns, LongitudinalBindings, Overrides,
    PartitionSpec, ResponseTransform,
};
pub use data::{build_design, load_dataset, write_dataset, Table};
pub use derive::{derive, Derived};
pub use output::{read_samples, DiagnosticRow};

use crate::diagnostics::{psrf_all, summarize, SummaryTable};
use crate::error::{Error, Result};
use crate::mcmc::{run_chains, PosteriorSamples};
use crate::model::FamilyModel;
use crate::survival::SurvivalDataset;

/// Default output directory when neither the file nor the flags name one.
pub const DEFAULT_OUT_DIR: &str = "bayesurv-out";

/// Record of a fit stored next to its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub config: FitConfig,
    pub n_subjects: usize,
    pub parameters: Vec<String>,
    pub acceptance: Vec<std::collections::BTreeMap<String, f64>>,
}

/// What a fit produced.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub out_dir: PathBuf,
    pub samples: PosteriorSamples,
    pub summary: SummaryTable,
    pub diagnostics: Vec<DiagnosticRow>,
    pub derived: Derived,
}

impl FitReport {
    /// Parameters whose PSRF exceeds `threshold`.
    pub fn psrf_failures(&self, threshold: f64) -> Vec<&DiagnosticRow> {
        psrf_failures(&self.diagnostics, threshold)
    }
}

pub fn psrf_failures(rows: &[DiagnosticRow], threshold: f64) -> Vec<&DiagnosticRow> {
    rows.iter().filter(|r| r.psrf.is_some_and(|v| !(v <= threshold))).collect()
}

pub fn out_dir(config: &FitConfig) -> PathBuf {
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Loads the dataset a configuration points at.
pub fn load_for(config: &FitConfig) -> Result<SurvivalDataset> {
    load_dataset(&config.data, config.family, &config.columns)
}

pub fn diagnose(samples: &PosteriorSamples) -> Result<Vec<DiagnosticRow>> {
    Ok(psrf_all(samples)?.into_iter().map(|(parameter, psrf)| DiagnosticRow { parameter, psrf }).collect())
}

/// Loads the data, runs the chains and writes every output file.
pub fn run_fit(config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    let data = load_for(config)?;
    let spec = config.model_spec(&data)?;
    let model = FamilyModel::new(spec, data)?;
    let mut chains = config.chains.clone();
    chains.keep_latent |= config.derive.iter().any(|r| matches!(r, DeriveRequest::FrailtySurvival { .. }));
    let samples = run_chains(&model, &chains)?;
    let dir = out_dir(config);
    std::fs::create_dir_all(&dir)?;
    let record = FitRecord {
        config: FitConfig { chains, ..config.clone() },
        n_subjects: model.data.len(),
        parameters: samples.param_names.clone(),
        acceptance: samples.acceptance.clone(),
    };
    output::write_json(&dir.join(output::FIT_FILE), &record)?;
    let report = write_outputs(&dir, config, samples)?;
    Ok(report)
}

/// Writes samples, summary, diagnostics and derived quantities to `dir`.
pub fn write_outputs(dir: &Path, config: &FitConfig, samples: PosteriorSamples) -> Result<FitReport> {
    output::write_samples(&dir.join(output::SAMPLES_FILE), &samples)?;
    let summary = summarize(&samples)?;
    output::write_summary(&dir.join(output::SUMMARY_FILE), &summary)?;
    let diagnostics = if samples.n_chains() >= 2 { diagnose(&samples)? } else { Vec::new() };
    output::write_diagnostics(&dir.join(output::DIAGNOSTICS_FILE), &diagnostics)?;
    let derived = write_derived(dir, config, &samples)?;
    Ok(FitReport { out_dir: dir.to_path_buf(), samples, summary, diagnostics, derived })
}

/// Evaluates the configuration's requests and writes `curves.csv` and
/// `contrasts.csv` for whichever kinds were requested.
pub fn write_derived(dir: &Path, config: &FitConfig, samples: &PosteriorSamples) -> Result<Derived> {
    let derived = derive(config.family, config.frailty, samples, &config.derive, &config.subsample)?;
    if !derived.curves.is_empty() {
        output::write_curves(&dir.join(output::CURVES_FILE), &derived.curves)?;
    }
    if !derived.contrasts.rows.is_empty() {
        output::write_summary(&dir.join(output::CONTRASTS_FILE), &derived.contrasts)?;
    }
    Ok(derived)
}

/// Reads the record and samples of an earlier fit.
pub fn load_fit(dir: &Path) -> Result<(FitRecord, PosteriorSamples)> {
    let fit_path = dir.join(output::FIT_FILE);
    let text = std::fs::read_to_string(&fit_path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", fit_path.display())))?;
    let record: FitRecord = serde_json::from_str(&text)?;
    let mut samples = read_samples(&dir.join(output::SAMPLES_FILE), record.config.chains.clone())?;
    samples.acceptance = record.acceptance.clone();
    Ok((record, samples))
}

/// Simulates `scenario` into `dir`: the dataset CSV files, the true
/// parameters (`truth.json`) and a fit configuration (`config.json`) that
/// reads the data back.
pub fn simulate_to_dir(scenario: &crate::sim::SimScenario, dir: &Path) -> Result<FitConfig> {
    use crate::sim::{simulate, FamilyParams};
    let data = simulate(scenario)?;
    let family = scenario.truth.family();
    let (file, columns) = write_dataset(&data, family, dir, "data")?;
    let mut config = FitConfig::new(family, file, columns);
    let spec = scenario.model_spec();
    config.frailty = spec.frailty;
    if let FamilyParams::PiecewisePh { partition, .. } = &scenario.truth {
        config.partition = Some(PartitionSpec::Knots { knots: partition.knots().to_vec() });
    }
    if family == crate::model::Family::CompetingRisks {
        config.n_risks = Some(spec.n_risks);
    }
    config.chains.seed = scenario.seed;
    output::write_json(&dir.join("truth.json"), &scenario.truth)?;
    output::write_json(&dir.join("config.json"), &config)?;
    Ok(config)
}

/// Reads a simulation scenario file.
pub fn read_scenario(path: &Path) -> Result<crate::sim::SimScenario> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

//! CSV files written by a fit and read back by later commands.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{SummaryRow, SummaryTable};
use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, PosteriorSamples};
use crate::posterior::CurveGrid;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const CONTRASTS_FILE: &str = "contrasts.csv";
pub const FIT_FILE: &str = "fit.json";

/// Long-format samples: one row per chain, stored iteration and parameter.
/// Values are written in shortest round-trip form, so reading them back gives
/// the same bits.
pub fn write_samples(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["chain", "iteration", "parameter", "value"])?;
    let cfg = &samples.config;
    for (c, chain) in samples.draws.iter().enumerate() {
        let chain_label = (c + 1).to_string();
        for (d, row) in chain.iter().enumerate() {
            let iteration = (cfg.burn_in + (d + 1) * cfg.thin).to_string();
            for (name, v) in samples.param_names.iter().zip(row) {
                w.write_record([chain_label.as_str(), iteration.as_str(), name.as_str(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SampleRecord {
    chain: usize,
    iteration: u64,
    parameter: String,
    value: f64,
}

/// Reads a long-format samples file; chains, iterations and parameters keep
/// the order in which they first appear.
pub fn read_samples(path: &Path, config: ChainConfig) -> Result<PosteriorSamples> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut names: Vec<String> = Vec::new();
    let mut name_index: HashMap<String, usize> = HashMap::new();
    let mut chain_index: HashMap<usize, usize> = HashMap::new();
    let mut rows: Vec<(usize, u64, usize, f64)> = Vec::new();
    for (line, rec) in reader.deserialize::<SampleRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), line + 2)))?;
        let p = *name_index.entry(rec.parameter.clone()).or_insert_with(|| {
            names.push(rec.parameter.clone());
            names.len() - 1
        });
        let next = chain_index.len();
        let c = *chain_index.entry(rec.chain).or_insert(next);
        rows.push((c, rec.iteration, p, rec.value));
    }
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut draws: Vec<Vec<Vec<f64>>> = vec![Vec::new(); chain_index.len()];
    let mut iter_index: Vec<HashMap<u64, usize>> = vec![HashMap::new(); chain_index.len()];
    let mut filled: Vec<Vec<Vec<bool>>> = vec![Vec::new(); chain_index.len()];
    for (c, it, p, v) in rows {
        let next = iter_index[c].len();
        let d = *iter_index[c].entry(it).or_insert(next);
        if d == draws[c].len() {
            draws[c].push(vec![f64::NAN; names.len()]);
            filled[c].push(vec![false; names.len()]);
        }
        if filled[c][d][p] {
            return Err(Error::Data(format!("{}: duplicate value of {} at iteration {it}", path.display(), names[p])));
        }
        draws[c][d][p] = v;
        filled[c][d][p] = true;
    }
    if filled.iter().flatten().any(|row| row.iter().any(|f| !f)) {
        return Err(Error::Data(format!("{}: some iterations miss parameters", path.display())));
    }
    PosteriorSamples::new(names, draws, config)
}

pub fn write_summary(path: &Path, table: &SummaryTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &table.rows {
        w.serialize(row)?;
    }
    if table.rows.is_empty() {
        w.write_record(summary_header())?;
    }
    w.flush()?;
    Ok(())
}

fn summary_header() -> [&'static str; 11] {
    ["parameter", "mean", "sd", "naive_se", "time_series_se", "q2_5", "q25", "q50", "q75", "q97_5", "p_positive"]
}

pub fn read_summary(path: &Path) -> Result<SummaryTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize::<SummaryRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SummaryTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub parameter: String,
    /// Empty when the parameter has no within-chain variance.
    pub psrf: Option<f64>,
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "psrf"])?;
    for r in rows {
        w.write_record([r.parameter.clone(), r.psrf.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize::<DiagnosticRow>().collect::<std::result::Result<Vec<_>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub curve: String,
    pub time: f64,
    pub value: f64,
}

pub fn write_curves(path: &Path, curves: &[CurveGrid<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["curve", "time", "value"])?;
    for c in curves {
        for (t, v) in c.times.iter().zip(&c.values) {
            w.write_record([c.label.clone(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize::<CurveRow>().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

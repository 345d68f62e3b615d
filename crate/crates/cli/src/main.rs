use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bayesurv::diagnostics::SummaryTable;
use bayesurv::io::{self, output, DiagnosticRow, FitConfig, Overrides};
use bayesurv::{summarize, Error};

/// Bayesian survival models fitted by MCMC.
#[derive(Parser)]
#[command(name = "bayesurv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model described by a configuration file.
    Fit(Flags),
    /// Recompute posterior summaries from stored samples.
    Summarize(Flags),
    /// Recompute convergence diagnostics from stored samples.
    Diagnose(Flags),
    /// Compute derived quantities from stored samples.
    Derive(Flags),
    /// Simulate a dataset from a scenario file.
    Simulate(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Configuration file (a fit configuration, or a scenario for `simulate`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Burn-in iterations per chain.
    #[arg(long)]
    burnin: Option<usize>,
    /// Iterations per chain after burn-in.
    #[arg(long)]
    iter: Option<usize>,
    /// Keep one draw in this many.
    #[arg(long)]
    thin: Option<usize>,
    /// Exit with status 3 if any PSRF exceeds the threshold.
    #[arg(long)]
    strict: bool,
    /// Directory for output files (input directory for summarize, diagnose, derive).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            chains: self.chains,
            burn_in: self.burnin,
            n_iter: self.iter,
            thin: self.thin,
            strict: self.strict,
            out_dir: self.out_dir.clone(),
        }
    }

    fn require_config(&self) -> Result<&Path> {
        self.config.as_deref().context("--config is required")
    }

    fn fit_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = &self.out_dir {
            return Ok(dir.clone());
        }
        match &self.config {
            Some(path) => Ok(io::out_dir(&FitConfig::from_file(path)?)),
            None => Ok(PathBuf::from(io::DEFAULT_OUT_DIR)),
        }
    }
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    PsrfFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(f) => fit(&f),
        Command::Summarize(f) => summarize_cmd(&f),
        Command::Diagnose(f) => diagnose_cmd(&f),
        Command::Derive(f) => derive_cmd(&f),
        Command::Simulate(f) => simulate_cmd(&f),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::PsrfFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn load_config(flags: &Flags) -> Result<FitConfig> {
    let path = flags.require_config()?;
    let mut config = FitConfig::from_file(path)?;
    config.apply(&flags.overrides());
    Ok(config)
}

fn fit(flags: &Flags) -> Result<Status> {
    let config = load_config(flags)?;
    let start = Instant::now();
    let report = io::run_fit(&config).with_context(|| format!("fitting {}", config.data.display()))?;
    eprintln!(
        "{} fit: {} chains x {} draws in {:.1} s, outputs in {}",
        config.family,
        report.samples.n_chains(),
        report.samples.n_draws(),
        start.elapsed().as_secs_f64(),
        report.out_dir.display()
    );
    print_summary(&report.summary);
    if !report.derived.contrasts.rows.is_empty() {
        println!();
        print_summary(&report.derived.contrasts);
    }
    Ok(check_psrf(&report.diagnostics, config.psrf_threshold, config.strict))
}

fn check_psrf(rows: &[DiagnosticRow], threshold: f64, strict: bool) -> Status {
    let failures = io::psrf_failures(rows, threshold);
    for r in &failures {
        eprintln!("warning: PSRF of {} is {:.4} (threshold {threshold})", r.parameter, r.psrf.unwrap_or(f64::NAN));
    }
    if strict && !failures.is_empty() {
        Status::PsrfFailed
    } else {
        Status::Ok
    }
}

fn summarize_cmd(flags: &Flags) -> Result<Status> {
    let dir = flags.fit_dir()?;
    let (_, samples) = io::load_fit(&dir)?;
    let table = summarize(&samples)?;
    output::write_summary(&dir.join(output::SUMMARY_FILE), &table)?;
    print_summary(&table);
    Ok(Status::Ok)
}

fn diagnose_cmd(flags: &Flags) -> Result<Status> {
    let dir = flags.fit_dir()?;
    let (record, samples) = io::load_fit(&dir)?;
    if samples.n_chains() < 2 {
        bail!("PSRF needs at least two chains");
    }
    let rows = io::diagnose(&samples)?;
    output::write_diagnostics(&dir.join(output::DIAGNOSTICS_FILE), &rows)?;
    println!("{:<16} {:>10}", "parameter", "psrf");
    for r in &rows {
        let v = r.psrf.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
        println!("{:<16} {:>10}", r.parameter, v);
    }
    Ok(check_psrf(&rows, record.config.psrf_threshold, flags.strict || record.config.strict))
}

fn derive_cmd(flags: &Flags) -> Result<Status> {
    let dir = flags.fit_dir()?;
    let (record, samples) = io::load_fit(&dir)?;
    let mut config = record.config;
    if let Some(path) = &flags.config {
        let requested = FitConfig::from_file(path)?;
        config.derive = requested.derive;
        config.subsample = requested.subsample;
    }
    if config.derive.is_empty() {
        bail!("no derived quantities requested");
    }
    let derived = io::write_derived(&dir, &config, &samples)?;
    if !derived.contrasts.rows.is_empty() {
        print_summary(&derived.contrasts);
    }
    for c in &derived.curves {
        eprintln!("curve {} ({} points)", c.label, c.times.len());
    }
    Ok(Status::Ok)
}

fn simulate_cmd(flags: &Flags) -> Result<Status> {
    let path = flags.require_config()?;
    let mut scenario = io::read_scenario(path)?;
    if let Some(seed) = flags.seed {
        scenario.seed = seed;
    }
    let dir = flags.out_dir.clone().unwrap_or_else(|| PathBuf::from(io::DEFAULT_OUT_DIR));
    io::simulate_to_dir(&scenario, &dir)?;
    eprintln!("{} subjects written to {}", scenario.n_subjects, dir.display());
    Ok(Status::Ok)
}

fn print_summary(table: &SummaryTable) {
    println!(
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "parameter", "mean", "sd", "ts_se", "2.5%", "50%", "97.5%", "P(>0)"
    );
    for r in &table.rows {
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.3}",
            r.parameter, r.mean, r.sd, r.time_series_se, r.q2_5, r.q50, r.q97_5, r.p_positive
        );
    }
}

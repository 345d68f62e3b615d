//! Adaptive random-walk Metropolis-within-Gibbs sampler.
//!
//! Each iteration updates every global coordinate with a scalar random walk,
//! then the mode-searched globals jointly with a multivariate random walk,
//! then every latent block using only the terms of the target it enters.
//! Proposal scales adapt during burn-in and are frozen afterwards.

pub mod optimize;
mod sampler;
pub mod transform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub n_iter: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations between proposal-scale updates during burn-in.
    pub adapt_window: usize,
    /// Store draws of latent effects (frailties, random effects).
    pub keep_latent: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_chains: 3, burn_in: 1000, n_iter: 10_000, thin: 10, seed: 1, adapt_window: 50, keep_latent: false }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::ChainConfig(m.to_string()));
        if self.n_chains == 0 {
            return fail("need at least one chain");
        }
        if self.thin == 0 {
            return fail("thin must be at least 1");
        }
        if self.n_iter < self.thin {
            return fail(&format!("n_iter ({}) is smaller than thin ({})", self.n_iter, self.thin));
        }
        if self.adapt_window == 0 {
            return fail("adapt_window must be at least 1");
        }
        Ok(())
    }

    /// Stored draws per chain.
    pub fn draws_per_chain(&self) -> usize {
        self.n_iter / self.thin
    }
}

/// Draws of several chains: `draws[chain][iteration][parameter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub param_names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub config: ChainConfig,
    /// Post burn-in acceptance rate of every update kind, per chain.
    #[serde(default)]
    pub acceptance: Vec<BTreeMap<String, f64>>,
}

impl PosteriorSamples {
    pub fn new(param_names: Vec<String>, draws: Vec<Vec<Vec<f64>>>, config: ChainConfig) -> Result<Self> {
        let p = param_names.len();
        for chain in &draws {
            if let Some(row) = chain.iter().find(|r| r.len() != p) {
                return Err(Error::Dimension(format!("draw of length {} for {p} parameters", row.len())));
            }
        }
        Ok(Self { param_names, draws, config, acceptance: Vec::new() })
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    /// Draws per chain (the shortest chain if lengths differ).
    pub fn n_draws(&self) -> usize {
        self.draws.iter().map(|c| c.len()).min().unwrap_or(0)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::Data(format!("no parameter named `{name}` in samples")))
    }

    /// Per-chain draws of one parameter.
    pub fn chains_of(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let j = self.require(name)?;
        Ok(self.draws.iter().map(|c| c.iter().map(|r| r[j]).collect()).collect())
    }

    /// Draws of one parameter with chains concatenated in order.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.chains_of(name)?.concat())
    }

    /// Pooled draws of several parameters, one row per draw.
    pub fn pooled_rows(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = names.iter().map(|n| self.require(n)).collect::<Result<_>>()?;
        Ok(self.draws.iter().flatten().map(|r| idx.iter().map(|&j| r[j]).collect()).collect())
    }
}

/// Runs `config.n_chains` chains in parallel; deterministic given the seed.
pub fn run_chains<M: Model>(model: &M, config: &ChainConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let start = sampler::Start::new(model)?;
    let outputs: Vec<Result<sampler::ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|chain| {
                let start = &start;
                scope.spawn(move || sampler::run_chain(model, config, chain, start))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let mut draws = Vec::with_capacity(config.n_chains);
    let mut acceptance = Vec::with_capacity(config.n_chains);
    for out in outputs {
        let out = out?;
        draws.push(out.draws);
        acceptance.push(out.acceptance);
    }
    let mut samples = PosteriorSamples::new(sampler::output_names(model, config), draws, config.clone())?;
    samples.acceptance = acceptance;
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let bad = ChainConfig { n_iter: 5, thin: 10, ..ChainConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::ChainConfig(_))));
        assert_eq!(ChainConfig { n_iter: 50_000, ..ChainConfig::default() }.draws_per_chain(), 5000);
    }
}

//! Gelman-Rubin diagnostic and posterior summary tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::PosteriorSamples;

/// Potential scale reduction factor `sqrt(((n-1)/n W + B/n) / W)` of one
/// parameter from `m >= 2` chains of `n >= 4` draws each.
pub fn gelman_rubin_psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::ChainConfig("PSRF needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 4 {
        return Err(Error::ChainConfig(format!("PSRF needs at least 4 draws per chain, got {n}")));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains have different lengths".into()));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().zip(&means).map(|(c, &mu)| variance_about(c, mu)).sum::<f64>() / m as f64;
    if !(w > 0.0) {
        return Err(Error::ZeroVariance("parameter".into()));
    }
    let grand = mean(&means);
    let b = nf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// PSRF of every parameter; `None` where it is undefined (zero variance).
pub fn psrf_all(samples: &PosteriorSamples) -> Result<Vec<(String, Option<f64>)>> {
    samples
        .param_names
        .iter()
        .map(|name| {
            let chains = samples.chains_of(name)?;
            match gelman_rubin_psrf(&chains) {
                Ok(v) => Ok((name.clone(), Some(v))),
                Err(Error::ZeroVariance(_)) => Ok((name.clone(), None)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Draws of all chains stacked in chain order, iteration order preserved.
pub fn merge_chains(samples: &PosteriorSamples) -> Vec<Vec<f64>> {
    samples.draws.iter().flatten().cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub naive_se: f64,
    pub time_series_se: f64,
    pub q2_5: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q97_5: f64,
    /// Posterior probability that the parameter is positive.
    pub p_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.parameter == name)
    }
}

pub fn summarize(samples: &PosteriorSamples) -> Result<SummaryTable> {
    let rows =
        samples.param_names.iter().map(|name| summarize_draws(name, &samples.pooled(name)?)).collect::<Result<_>>()?;
    Ok(SummaryTable { rows })
}

/// Summary row of one pooled draw vector.
pub fn summarize_draws(name: &str, draws: &[f64]) -> Result<SummaryRow> {
    if draws.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let n = draws.len() as f64;
    let mu = mean(draws);
    let sd = (variance_about(draws, mu)).sqrt();
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    Ok(SummaryRow {
        parameter: name.to_string(),
        mean: mu,
        sd,
        naive_se: sd / n.sqrt(),
        time_series_se: time_series_se(draws),
        q2_5: q(0.025),
        q25: q(0.25),
        q50: q(0.5),
        q75: q(0.75),
        q97_5: q(0.975),
        p_positive: draws.iter().filter(|&&x| x > 0.0).count() as f64 / n,
    })
}

/// Two-pass mean; exact for constant input.
pub fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let rough = x.iter().sum::<f64>() / n;
    rough + x.iter().map(|v| v - rough).sum::<f64>() / n
}

fn variance_about(x: &[f64], mu: f64) -> f64 {
    x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// Standard error of the mean from an AR fit's spectral density at zero
/// (order by AIC, Yule-Walker estimates); batch means if the fit degenerates.
pub fn time_series_se(x: &[f64]) -> f64 {
    let n = x.len();
    let mu = mean(x);
    let acov =
        |lag: usize| x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - mu) * (b - mu)).sum::<f64>() / n as f64;
    let r0 = acov(0);
    if r0 <= 0.0 {
        return 0.0;
    }
    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n - 1);
    let r: Vec<f64> = (0..=max_order).map(acov).collect();
    match ar_spectrum0(&r, n) {
        Some(s) if s.is_finite() && s > 0.0 => (s / n as f64).sqrt(),
        _ => batch_means_se(x),
    }
}

/// Levinson-Durbin recursion over orders `0..=r.len()-1`; returns the AIC-best
/// `sigma^2 / (1 - sum phi)^2`.
fn ar_spectrum0(r: &[f64], n: usize) -> Option<f64> {
    let mut phi: Vec<f64> = Vec::new();
    let mut var = r[0];
    let mut best = (n as f64 * var.ln(), var, 0.0);
    for k in 1..r.len() {
        let acc: f64 = phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum();
        let refl = (r[k] - acc) / var;
        if !refl.is_finite() || refl.abs() >= 1.0 {
            break;
        }
        let prev = phi.clone();
        for j in 0..prev.len() {
            phi[j] = prev[j] - refl * prev[prev.len() - 1 - j];
        }
        phi.push(refl);
        var *= 1.0 - refl * refl;
        if var <= 0.0 {
            break;
        }
        let aic = n as f64 * var.ln() + 2.0 * k as f64;
        if aic < best.0 {
            best = (aic, var, phi.iter().sum());
        }
    }
    let denom = 1.0 - best.2;
    if denom.abs() < 1e-8 {
        return None;
    }
    Some(best.1 / (denom * denom))
}

fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    let size = ((n as f64).sqrt().floor() as usize).max(1);
    let means: Vec<f64> = x.chunks_exact(size).map(mean).collect();
    if means.len() < 2 {
        return 0.0;
    }
    (variance_about(&means, mean(&means)) / means.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_chains_give_formula_floor() {
        let c = vec![1.0, 2.0, 4.0, 3.0, 5.0];
        let v = gelman_rubin_psrf(&[c.clone(), c]).unwrap();
        assert!((v - (4.0f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn separated_chains_are_flagged() {
        let a = vec![0.0, 0.01, -0.01, 0.005];
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(gelman_rubin_psrf(&[a, b]).unwrap() > 1.1);
    }

    #[test]
    fn hand_computed_psrf() {
        // means 2.5 and 4.5; W = (5/3 + 5/3) / 2; B = 4 * 2 = 8
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![3.0, 4.0, 5.0, 6.0];
        let w = 5.0_f64 / 3.0;
        let want = ((0.75 * w + 8.0 / 4.0) / w).sqrt();
        assert!((gelman_rubin_psrf(&[a, b]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(gelman_rubin_psrf(&[vec![1.0; 5], vec![1.0; 5]]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn summary_examples() {
        let r = summarize_draws("x", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.q50, 2.5);
        assert_eq!(r.p_positive, 1.0);
        let r = summarize_draws("c", &[0.7; 10]).unwrap();
        assert_eq!((r.mean, r.sd, r.q2_5, r.q97_5, r.time_series_se), (0.7, 0.0, 0.7, 0.7, 0.0));
        assert!(summarize_draws("e", &[1.0]).is_err());
    }

    #[test]
    fn ar1_spectral_se() {
        // AR(1) with phi = 0.5: var(mean) ~ sigma^2 / (n (1 - phi)^2)
        let n = 20_000;
        let mut x = vec![0.0; n];
        let mut state = 12345u64;
        let mut unif = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        for i in 1..n {
            let z = (-2.0 * unif().ln()).sqrt() * (std::f64::consts::TAU * unif()).cos();
            x[i] = 0.5 * x[i - 1] + z;
        }
        let se = time_series_se(&x);
        let want = (1.0 / (n as f64 * 0.25)).sqrt();
        assert!((se / want - 1.0).abs() < 0.1, "{se} vs {want}");
    }
}

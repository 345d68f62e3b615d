use serde::{Deserialize, Serialize};

use super::{check_len, check_positive, weibull_cumhaz, weibull_log_hazard};
use crate::error::{Error, Result};
use crate::scalar::{c, dot, ln_gamma, Real};
use crate::survival::{censoring_loglik_contribution, DatasetExtras, SurvivalDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrailtyVariant {
    /// `h_ij = w_i h(t)`, `w_i ~ Gamma(psi, psi)`.
    #[default]
    MultiplicativeGamma,
    /// `h_ij = exp(b_i) h(t)`, `b_i ~ N(0, 1 / tau)`.
    AdditiveNormal,
}

/// Group-level random effects and their hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrailtyTerm<T> {
    Gamma { psi: T, w: Vec<T> },
    Normal { tau: T, b: Vec<T> },
}

impl<T: Real> FrailtyTerm<T> {
    pub fn n_groups(&self) -> usize {
        match self {
            Self::Gamma { w, .. } => w.len(),
            Self::Normal { b, .. } => b.len(),
        }
    }

    /// Log of the multiplicative effect of group `g` on the hazard.
    pub fn log_effect(&self, g: usize) -> T {
        match self {
            Self::Gamma { w, .. } => w[g].ln(),
            Self::Normal { b, .. } => b[g],
        }
    }

    /// Log-density of group `g`'s effect under its mixing distribution.
    fn log_mixing(&self, g: usize) -> T {
        match self {
            Self::Gamma { psi, w } => {
                let psi = *psi;
                psi * psi.ln() - ln_gamma(psi) + (psi - T::one()) * w[g].ln() - psi * w[g]
            }
            Self::Normal { tau, b } => c::<T>(0.5) * (*tau / T::TAU()).ln() - *tau * b[g] * b[g] / c(2.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gamma { psi, w } => {
                check_positive("psi", *psi)?;
                w.iter().try_for_each(|&v| check_positive("w", v))
            }
            Self::Normal { tau, b } => {
                check_positive("tau", *tau)?;
                match b.iter().find(|v| !v.is_finite()) {
                    Some(v) => Err(Error::InvalidParameter(format!("frailty b must be finite, got {v:?}"))),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Shared-frailty Weibull PH model. `beta[0]` multiplies the intercept column,
/// so the baseline scale is `lambda = exp(beta[0])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrailtyParams<T> {
    pub beta: Vec<T>,
    pub alpha: T,
    pub frailty: FrailtyTerm<T>,
}

pub(crate) fn frailty_groups(data: &SurvivalDataset) -> Result<(&[usize], usize)> {
    match &data.extras {
        DatasetExtras::Frailty { groups, n_groups } => Ok((groups, *n_groups)),
        _ => Err(Error::Data("frailty model needs group labels".into())),
    }
}

fn check_params<T: Real>(params: &FrailtyParams<T>, data: &SurvivalDataset, n_groups: usize) -> Result<()> {
    check_positive("alpha", params.alpha)?;
    check_len("beta", params.beta.len(), data.design.n_cols())?;
    check_len("frailty", params.frailty.n_groups(), n_groups)?;
    params.frailty.validate()
}

fn observation_loglik<T: Real>(params: &FrailtyParams<T>, data: &SurvivalDataset, i: usize, g: usize) -> Result<T> {
    let alpha = params.alpha;
    let log_rate = dot(data.design.row(i), &params.beta) + params.frailty.log_effect(g);
    censoring_loglik_contribution(
        &data.observations[i],
        |t| weibull_log_hazard(log_rate, alpha, t) - weibull_cumhaz(log_rate, alpha, t),
        |t| -weibull_cumhaz(log_rate, alpha, t),
    )
}

/// Conditional log-likelihood given the frailties plus their mixing density.
pub fn frailty_loglik<T: Real>(params: &FrailtyParams<T>, data: &SurvivalDataset) -> Result<T> {
    let (groups, n_groups) = frailty_groups(data)?;
    check_params(params, data, n_groups)?;
    let mut total = T::zero();
    for (i, &g) in groups.iter().enumerate() {
        total = total + observation_loglik(params, data, i, g)?;
    }
    for g in 0..n_groups {
        total = total + params.frailty.log_mixing(g);
    }
    Ok(total)
}

/// Terms of [`frailty_loglik`] that involve group `g`; `members` are its rows.
pub fn frailty_group_loglik<T: Real>(
    params: &FrailtyParams<T>,
    data: &SurvivalDataset,
    g: usize,
    members: &[usize],
) -> Result<T> {
    let (_, n_groups) = frailty_groups(data)?;
    check_params(params, data, n_groups)?;
    let mut total = params.frailty.log_mixing(g);
    for &i in members {
        total = total + observation_loglik(params, data, i, g)?;
    }
    Ok(total)
}

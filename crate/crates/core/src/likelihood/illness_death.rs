use serde::{Deserialize, Serialize};

use super::competing::validate_weibull_set;
use super::{weibull_cumhaz, weibull_log_hazard};
use crate::error::{Error, Result};
use crate::scalar::{dot, Real};
use crate::survival::{DatasetExtras, SurvivalDataset};

/// Weibull PH hazards of the transitions 1->2, 1->3 and 2->3 (in that order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllnessDeathParams<T> {
    /// `beta[k]` holds the coefficients of transition `k + 1`.
    pub beta: Vec<Vec<T>>,
    pub lambdas: Vec<T>,
    pub alphas: Vec<T>,
}

/// Semi-Markov illness-death log-likelihood. Transition 1->2 is evaluated at
/// `t1`, 1->3 at the total time `t2` and 2->3 at the sojourn `t3`.
pub fn illness_death_loglik<T: Real>(params: &IllnessDeathParams<T>, data: &SurvivalDataset) -> Result<T> {
    let DatasetExtras::IllnessDeath(records) = &data.extras else {
        return Err(Error::Data("illness-death model needs transition records".into()));
    };
    if params.lambdas.len() != 3 {
        return Err(Error::Dimension(format!("{} transitions, expected 3", params.lambdas.len())));
    }
    validate_weibull_set(&params.beta, &params.lambdas, &params.alphas, data.design.n_cols())?;
    let log_lambdas: Vec<T> = params.lambdas.iter().map(|l| l.ln()).collect();
    let mut total = T::zero();
    for (rec, x) in records.iter().zip(data.design.rows()) {
        rec.validate()?;
        for (k, t) in [rec.t1, rec.t2, rec.t3].into_iter().enumerate() {
            let log_rate = log_lambdas[k] + dot(x, &params.beta[k]);
            if rec.events[k] {
                total = total + weibull_log_hazard(log_rate, params.alphas[k], t);
            }
            total = total - weibull_cumhaz(log_rate, params.alphas[k], t);
        }
    }
    Ok(total)
}

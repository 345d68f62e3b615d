use serde::{Deserialize, Serialize};

use super::{check_len, check_positive, weibull_cumhaz, weibull_log_hazard};
use crate::error::{Error, Result};
use crate::scalar::{dot, log_add_exp, softplus, Real};
use crate::survival::{censoring_loglik_contribution, DatasetExtras, SurvivalDataset};

/// Mixture cure model: logistic incidence, Weibull PH latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CureParams<T> {
    /// Incidence coefficients; `logit(eta) = x_C'beta_c` is the cure probability.
    pub beta_c: Vec<T>,
    /// Latency coefficients (no intercept).
    pub beta_u: Vec<T>,
    pub lambda: T,
    pub alpha: T,
}

/// Population survival is `eta + (1 - eta) S_u(t)`; events contribute
/// `(1 - eta) f_u(t)`. The latency design is `data.design`, the incidence
/// design lives in [`DatasetExtras::Cure`].
pub fn cure_loglik<T: Real>(params: &CureParams<T>, data: &SurvivalDataset) -> Result<T> {
    let DatasetExtras::Cure { incidence } = &data.extras else {
        return Err(Error::Data("cure model needs an incidence design".into()));
    };
    check_positive("lambda", params.lambda)?;
    check_positive("alpha", params.alpha)?;
    check_len("betaC", params.beta_c.len(), incidence.n_cols())?;
    check_len("betaU", params.beta_u.len(), data.design.n_cols())?;
    let (alpha, log_lambda) = (params.alpha, params.lambda.ln());
    let mut total = T::zero();
    for (i, obs) in data.observations.iter().enumerate() {
        let z = dot(incidence.row(i), &params.beta_c);
        let (log_eta, log_uncured) = (-softplus(-z), -softplus(z));
        let log_rate = log_lambda + dot(data.design.row(i), &params.beta_u);
        total = total
            + censoring_loglik_contribution(
                obs,
                |t| log_uncured + weibull_log_hazard(log_rate, alpha, t) - weibull_cumhaz(log_rate, alpha, t),
                |t| log_add_exp(log_eta, log_uncured - weibull_cumhaz(log_rate, alpha, t)),
            )?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CensoredObservation, Censoring, DesignMatrix};

    #[test]
    fn censored_at_zero_contributes_nothing() {
        let obs = vec![CensoredObservation::new(1, Censoring::Right(0.0)).unwrap()];
        let inc = DesignMatrix::new(1, 1, vec![1.0], vec!["(Intercept)".into()]).unwrap();
        let data = SurvivalDataset::new(obs, DesignMatrix::empty(1), DatasetExtras::Cure { incidence: inc }).unwrap();
        for b in [-3.0_f64, 0.0, 2.0] {
            let p = CureParams { beta_c: vec![b], beta_u: vec![], lambda: 0.5, alpha: 1.2 };
            assert!(cure_loglik(&p, &data).unwrap().abs() < 1e-15);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{check_len, check_positive, weibull_cumhaz, weibull_log_hazard};
use crate::error::Result;
use crate::scalar::{dot, Real};
use crate::survival::{censoring_loglik_contribution, SurvivalDataset};

/// Weibull AFT parameters: `log T = x'beta + sigma * W` with `alpha = 1 / sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftParams<T> {
    pub beta: Vec<T>,
    pub alpha: T,
}

/// Log-likelihood of the Weibull AFT model; subject `i` has rate
/// `exp(-alpha * x_i'beta)`.
pub fn aft_loglik<T: Real>(params: &AftParams<T>, data: &SurvivalDataset) -> Result<T> {
    check_positive("alpha", params.alpha)?;
    check_len("beta", params.beta.len(), data.design.n_cols())?;
    let alpha = params.alpha;
    let mut total = T::zero();
    for (obs, x) in data.observations.iter().zip(data.design.rows()) {
        let log_rate = -alpha * dot(x, &params.beta);
        total = total
            + censoring_loglik_contribution(
                obs,
                |t| weibull_log_hazard(log_rate, alpha, t) - weibull_cumhaz(log_rate, alpha, t),
                |t| -weibull_cumhaz(log_rate, alpha, t),
            )?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CensoredObservation, Censoring, DatasetExtras, DesignMatrix};

    fn one(c: Censoring) -> SurvivalDataset {
        let obs = vec![CensoredObservation::new(1, c).unwrap()];
        let design = DesignMatrix::new(1, 1, vec![1.0], vec!["(Intercept)".into()]).unwrap();
        SurvivalDataset::new(obs, design, DatasetExtras::None).unwrap()
    }

    #[test]
    fn exponential_special_cases() {
        let p = AftParams { beta: vec![0.0], alpha: 1.0_f64 };
        let v = aft_loglik(&p, &one(Censoring::Exact(1.0))).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
        let v = aft_loglik(&p, &one(Censoring::Right(2.0))).unwrap();
        assert!((v + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_shape() {
        let p = AftParams { beta: vec![0.0], alpha: 0.0 };
        assert!(aft_loglik(&p, &one(Censoring::Exact(1.0))).is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::{check_len, check_positive, weibull_cumhaz, weibull_log_hazard};
use crate::error::{Error, Result};
use crate::scalar::{dot, Real};
use crate::survival::{Censoring, SurvivalDataset};

/// Weibull cause-specific hazards `lambda_k alpha_k t^(alpha_k - 1) exp(x'beta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetingRisksParams<T> {
    /// `beta[k]` holds the coefficients of cause `k + 1`.
    pub beta: Vec<Vec<T>>,
    pub lambdas: Vec<T>,
    pub alphas: Vec<T>,
}

impl<T: Real> CompetingRisksParams<T> {
    pub fn n_risks(&self) -> usize {
        self.lambdas.len()
    }
}

/// Shape checks shared by the multi-hazard families.
pub(crate) fn validate_weibull_set<T: Real>(beta: &[Vec<T>], lambdas: &[T], alphas: &[T], n_cols: usize) -> Result<()> {
    let k = lambdas.len();
    check_len("alpha", alphas.len(), k)?;
    check_len("beta", beta.len(), k)?;
    for (b, (&l, &a)) in beta.iter().zip(lambdas.iter().zip(alphas)) {
        check_len("beta", b.len(), n_cols)?;
        check_positive("lambda", l)?;
        check_positive("alpha", a)?;
    }
    Ok(())
}

/// Cause of an observation: 0 when censored, `k` for an event of cause `k`.
pub(crate) fn cause_of(obs: &crate::survival::CensoredObservation, n_risks: usize) -> Result<(f64, usize)> {
    let bad = |msg: String| Error::InvalidEvent(format!("subject {}: {msg}", obs.subject_id));
    match obs.censoring {
        Censoring::Right(t) => match obs.event_label {
            None | Some(0) => Ok((t, 0)),
            Some(k) => Err(bad(format!("right-censored record carries cause {k}"))),
        },
        Censoring::Exact(t) => match obs.event_label {
            None if n_risks == 1 => Ok((t, 1)),
            Some(k) if (1..=n_risks).contains(&(k as usize)) => Ok((t, k as usize)),
            other => Err(bad(format!("event needs a cause in 1..={n_risks}, got {other:?}"))),
        },
        _ => Err(bad("only exact and right-censored times are supported".into())),
    }
}

pub fn competing_risks_loglik<T: Real>(params: &CompetingRisksParams<T>, data: &SurvivalDataset) -> Result<T> {
    validate_weibull_set(&params.beta, &params.lambdas, &params.alphas, data.design.n_cols())?;
    let log_lambdas: Vec<T> = params.lambdas.iter().map(|l| l.ln()).collect();
    let mut total = T::zero();
    for (obs, x) in data.observations.iter().zip(data.design.rows()) {
        let (t, cause) = cause_of(obs, params.n_risks())?;
        for k in 0..params.n_risks() {
            let log_rate = log_lambdas[k] + dot(x, &params.beta[k]);
            if cause == k + 1 {
                total = total + weibull_log_hazard(log_rate, params.alphas[k], t);
            }
            total = total - weibull_cumhaz(log_rate, params.alphas[k], t);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CensoredObservation, DatasetExtras, DesignMatrix};

    #[test]
    fn fully_censored_is_minus_total_cumhaz() {
        let obs: Vec<_> = [0.5, 1.5, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| CensoredObservation::new(i as u64, Censoring::Right(t)).unwrap())
            .collect();
        let data = SurvivalDataset::new(obs, DesignMatrix::empty(3), DatasetExtras::None).unwrap();
        let p = CompetingRisksParams { beta: vec![vec![], vec![]], lambdas: vec![0.3, 0.7], alphas: vec![1.0, 2.0] };
        let want: f64 = [0.5f64, 1.5, 2.0].iter().map(|t| 0.3 * t + 0.7 * t * t).sum();
        assert!((competing_risks_loglik(&p, &data).unwrap() + want).abs() < 1e-14);
    }

    #[test]
    fn invalid_cause_label_is_an_error() {
        let obs = vec![CensoredObservation::new(1, Censoring::Exact(1.0)).unwrap().with_label(3)];
        let data = SurvivalDataset::new(obs, DesignMatrix::empty(1), DatasetExtras::None).unwrap();
        let p = CompetingRisksParams { beta: vec![vec![], vec![]], lambdas: vec![1.0, 1.0], alphas: vec![1.0, 1.0] };
        assert!(matches!(competing_risks_loglik(&p, &data), Err(Error::InvalidEvent(_))));
    }
}

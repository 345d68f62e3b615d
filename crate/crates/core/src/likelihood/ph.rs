use serde::{Deserialize, Serialize};

use super::{check_len, check_positive};
use crate::error::Result;
use crate::scalar::{dot, Real};
use crate::survival::{
    censoring_loglik_contribution, interval_index, piecewise_cumhaz, SurvivalDataset, TimePartition,
};

/// Proportional hazards with a piecewise-constant baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhParams<T> {
    pub beta: Vec<T>,
    pub lambdas: Vec<T>,
}

pub fn ph_piecewise_loglik<T: Real>(
    params: &PhParams<T>,
    data: &SurvivalDataset,
    partition: &TimePartition,
) -> Result<T> {
    check_len("lambda", params.lambdas.len(), partition.n_intervals())?;
    check_len("beta", params.beta.len(), data.design.n_cols())?;
    for &l in &params.lambdas {
        check_positive("lambda", l)?;
    }
    let log_lambdas: Vec<T> = params.lambdas.iter().map(|l| l.ln()).collect();
    let mut total = T::zero();
    for (obs, x) in data.observations.iter().zip(data.design.rows()) {
        let eta = dot(x, &params.beta);
        let risk = eta.exp();
        // every time the closures see is at most this one
        let t_max = obs.max_time();
        if t_max > 0.0 {
            interval_index(t_max, partition)?;
        }
        let h0 = |t: f64| piecewise_cumhaz(t, partition, &params.lambdas).expect("time inside partition");
        total = total
            + censoring_loglik_contribution(
                obs,
                |t| {
                    let k = interval_index(t, partition).expect("time inside partition");
                    log_lambdas[k - 1] + eta - h0(t) * risk
                },
                |t| -h0(t) * risk,
            )?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{CensoredObservation, Censoring, DatasetExtras, DesignMatrix};

    #[test]
    fn single_interval_exponential() {
        let obs = vec![CensoredObservation::new(1, Censoring::Exact(1.0)).unwrap()];
        let data = SurvivalDataset::new(obs, DesignMatrix::empty(1), DatasetExtras::None).unwrap();
        let part = TimePartition::new(vec![0.0, 2.0]).unwrap();
        let p = PhParams { beta: vec![], lambdas: vec![1.0_f64] };
        assert!((ph_piecewise_loglik(&p, &data, &part).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn time_beyond_partition_is_an_error() {
        let obs = vec![CensoredObservation::new(1, Censoring::Right(3.0)).unwrap()];
        let data = SurvivalDataset::new(obs, DesignMatrix::empty(1), DatasetExtras::None).unwrap();
        let part = TimePartition::new(vec![0.0, 2.0]).unwrap();
        let p = PhParams { beta: vec![], lambdas: vec![1.0_f64] };
        assert!(ph_piecewise_loglik(&p, &data, &part).is_err());
    }
}

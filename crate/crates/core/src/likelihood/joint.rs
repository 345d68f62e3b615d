use serde::{Deserialize, Serialize};

use super::{check_len, check_positive};
use crate::error::{Error, Result};
use crate::quadrature::GlRule;
use crate::scalar::{c, dot, Real};
use crate::survival::{Censoring, DatasetExtras, Longitudinal, SurvivalDataset};

/// Shared-parameter joint model.
///
/// Longitudinal: `y_ij = x_L'beta_l + b_i1 + b_i2 t_ij + e_ij`, `e ~ N(0, sigma^2)`.
/// Survival: `h_i(t) = alpha t^(alpha - 1) exp(x_S'beta_s + gamma (b_i1 + b_i2 t))`,
/// with `lambda = exp(beta_s[0])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointParams<T> {
    pub beta_l: Vec<T>,
    pub beta_s: Vec<T>,
    pub gamma: T,
    pub alpha: T,
    pub sigma: T,
    /// Random-effects covariance `(Sigma11, Sigma12, Sigma22)`.
    pub sigma_b: [T; 3],
    pub b: Vec<[T; 2]>,
}

/// Log-density of `N(0, Sigma)` at `b` for a 2x2 covariance.
pub fn mvn2_log_density<T: Real>(b: [T; 2], sigma: [T; 3]) -> Result<T> {
    let [s11, s12, s22] = sigma;
    let det = s11 * s22 - s12 * s12;
    if !(s11 > T::zero() && det > T::zero()) {
        return Err(Error::NotPositiveDefinite);
    }
    let q = (s22 * b[0] * b[0] - c::<T>(2.0) * s12 * b[0] * b[1] + s11 * b[1] * b[1]) / det;
    Ok(-T::TAU().ln() - c::<T>(0.5) * det.ln() - c::<T>(0.5) * q)
}

pub(crate) fn longitudinal(data: &SurvivalDataset) -> Result<&Longitudinal> {
    match &data.extras {
        DatasetExtras::Joint(long) => Ok(long),
        _ => Err(Error::Data("joint model needs longitudinal records".into())),
    }
}

fn check_params<T: Real>(params: &JointParams<T>, data: &SurvivalDataset, long: &Longitudinal) -> Result<()> {
    check_len("betaL", params.beta_l.len(), long.design.n_cols())?;
    check_len("betaS", params.beta_s.len(), data.design.n_cols())?;
    check_len("b", params.b.len(), data.len())
}

/// All terms of subject `i`: its measurements, its survival record and the
/// random-effects density. `rows` indexes the subject's measurements.
pub fn joint_subject_loglik<T: Real>(
    params: &JointParams<T>,
    data: &SurvivalDataset,
    i: usize,
    rows: std::ops::Range<usize>,
    rule: &GlRule<f64>,
) -> Result<T> {
    let long = longitudinal(data)?;
    check_positive("alpha", params.alpha)?;
    check_positive("sigma", params.sigma)?;
    let [b1, b2] = params.b[i];
    let sigma = params.sigma;
    let log_norm = -c::<T>(0.5) * T::TAU().ln() - sigma.ln();
    let two_var = c::<T>(2.0) * sigma * sigma;
    let mut total = T::zero();
    for j in rows {
        let t = long.time[j];
        let mu = dot(long.design.row(j), &params.beta_l) + b1 + b2 * c(t);
        let r = c::<T>(long.response[j]) - mu;
        total = total + log_norm - r * r / two_var;
    }

    let (time, event) = match data.observations[i].censoring {
        Censoring::Exact(t) => (t, true),
        Censoring::Right(t) => (t, false),
        _ => return Err(Error::InvalidObservation("joint model takes exact or right-censored times".into())),
    };
    let eta = dot(data.design.row(i), &params.beta_s);
    let (alpha, gamma) = (params.alpha, params.gamma);
    let log_h = |u: f64| alpha.ln() + (alpha - T::one()) * c(u.ln()) + eta + gamma * (b1 + b2 * c(u));
    if time > 0.0 {
        let half = time / 2.0;
        let mut cumhaz = T::zero();
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            cumhaz = cumhaz + c::<T>(w) * log_h(half * (x + 1.0)).exp();
        }
        total = total - c::<T>(half) * cumhaz;
        if event {
            total = total + log_h(time);
        }
    }
    Ok(total + mvn2_log_density(params.b[i], params.sigma_b)?)
}

pub fn joint_loglik<T: Real>(params: &JointParams<T>, data: &SurvivalDataset, rule: &GlRule<f64>) -> Result<T> {
    let long = longitudinal(data)?;
    check_params(params, data, long)?;
    let mut total = T::zero();
    for (i, rows) in long.ranges(data.len()).into_iter().enumerate() {
        total = total + joint_subject_loglik(params, data, i, rows, rule)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mvn2_at_identity() {
        let v = mvn2_log_density([0.3, -1.0], [1.0, 0.0, 1.0]).unwrap();
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * (0.09 + 1.0);
        assert!((v - want).abs() < 1e-15);
        assert!(mvn2_log_density([0.0, 0.0], [1.0, 1.0, 1.0]).is_err());
    }
}

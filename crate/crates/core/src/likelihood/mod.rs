//! Log-likelihoods of the seven model families and their priors.
//!
//! Every evaluator is generic over the scalar type and returns an error for
//! parameters outside their support; the sampler maps such errors to a
//! rejected proposal.

mod aft;
mod competing;
mod cure;
mod frailty;
mod illness_death;
mod joint;
mod ph;
pub mod prior;

pub use aft::{aft_loglik, AftParams};
pub(crate) use competing::cause_of as competing_cause;
pub use competing::{competing_risks_loglik, CompetingRisksParams};
pub use cure::{cure_loglik, CureParams};
pub use frailty::{frailty_group_loglik, frailty_loglik, FrailtyParams, FrailtyTerm, FrailtyVariant};
pub use illness_death::{illness_death_loglik, IllnessDeathParams};
pub use joint::{joint_loglik, joint_subject_loglik, mvn2_log_density, JointParams};
pub use ph::{ph_piecewise_loglik, PhParams};
pub use prior::{Prior, PriorSpec};

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Weibull log-hazard `log(rate) + log(alpha) + (alpha - 1) log(t)`.
#[inline]
pub(crate) fn weibull_log_hazard<T: Real>(log_rate: T, alpha: T, t: f64) -> T {
    log_rate + alpha.ln() + (alpha - T::one()) * c(t.ln())
}

/// Weibull cumulative hazard `rate * t^alpha`.
#[inline]
pub(crate) fn weibull_cumhaz<T: Real>(log_rate: T, alpha: T, t: f64) -> T {
    if t == 0.0 {
        return T::zero();
    }
    (log_rate + alpha * c(t.ln())).exp()
}

pub(crate) fn check_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v:?}")))
    }
}

pub(crate) fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{name} has length {got}, design needs {want}")))
    }
}

//! Maps between constrained parameters and the unconstrained sampling space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, softplus, Real};

/// Open interval `(lower, upper)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub const REAL: Support = Support { lower: f64::NEG_INFINITY, upper: f64::INFINITY };
    pub const POSITIVE: Support = Support { lower: 0.0, upper: f64::INFINITY };

    pub fn bounded(lower: f64, upper: f64) -> Self {
        Support { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Constrained value and `log |dx/du|`.
    pub fn constrain<T: Real>(&self, u: T) -> (T, T) {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (false, false) => (u, T::zero()),
            (true, false) => (c::<T>(self.lower) + u.exp(), u),
            (false, true) => (c::<T>(self.upper) - u.exp(), u),
            (true, true) => {
                let width = self.upper - self.lower;
                let p = T::one() / (T::one() + (-u).exp());
                (c::<T>(self.lower) + c::<T>(width) * p, c::<T>(width.ln()) - softplus(-u) - softplus(u))
            }
        }
    }

    pub fn unconstrain(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::InvalidParameter(format!("{x} is not inside ({}, {})", self.lower, self.upper)));
        }
        Ok(match (self.lower.is_finite(), self.upper.is_finite()) {
            (false, false) => x,
            (true, false) => (x - self.lower).ln(),
            (false, true) => (self.upper - x).ln(),
            (true, true) => {
                let p = (x - self.lower) / (self.upper - self.lower);
                (p / (1.0 - p)).ln()
            }
        })
    }
}

/// `Sigma = L L'` with `u = (log L11, L21, log L22)`; returns
/// `(Sigma11, Sigma12, Sigma22)` and the log-Jacobian `ln 4 + 3 u1 + 2 u3`.
pub fn log_cholesky_constrain<T: Real>(u: [T; 3]) -> ([T; 3], T) {
    let (l11, l21, l22) = (u[0].exp(), u[1], u[2].exp());
    let s = [l11 * l11, l11 * l21, l21 * l21 + l22 * l22];
    let log_jac = c::<T>(4f64.ln()) + c::<T>(3.0) * u[0] + c::<T>(2.0) * u[2];
    (s, log_jac)
}

pub fn log_cholesky_unconstrain(s: [f64; 3]) -> Result<[f64; 3]> {
    let det = s[0] * s[2] - s[1] * s[1];
    if !(s[0] > 0.0 && det > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let l11 = s[0].sqrt();
    let l21 = s[1] / l11;
    let l22 = (s[2] - l21 * l21).sqrt();
    Ok([l11.ln(), l21, l22.ln()])
}

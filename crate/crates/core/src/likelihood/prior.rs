//! Prior distributions. Normal priors use precision, Gamma priors shape/rate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, ln_gamma, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    Normal {
        mean: f64,
        precision: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    /// Inverse-Wishart on a 2x2 covariance matrix.
    InverseWishart {
        scale: [[f64; 2]; 2],
        df: f64,
    },
}

/// Prior overrides keyed by element name (`beta[2]`) or group name (`beta`).
pub type PriorSpec = BTreeMap<String, Prior>;

impl Prior {
    pub const fn vague_normal() -> Self {
        Prior::Normal { mean: 0.0, precision: 0.001 }
    }

    pub const fn vague_gamma() -> Self {
        Prior::Gamma { shape: 0.01, rate: 0.01 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Normal { mean, precision } => mean.is_finite() && precision > 0.0 && precision.is_finite(),
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Prior::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Prior::InverseWishart { scale, df } => {
                let det = scale[0][0] * scale[1][1] - scale[0][1] * scale[1][0];
                df > 1.0 && scale[0][0] > 0.0 && det > 0.0 && scale[0][1] == scale[1][0]
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior {self:?}")))
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, Prior::InverseWishart { .. })
    }

    /// Log-density at a scalar value; `-inf` outside the support.
    pub fn log_density<T: Real>(&self, x: T) -> T {
        match *self {
            Prior::Normal { mean, precision } => {
                let d = x - c(mean);
                c::<T>(0.5 * (precision / std::f64::consts::TAU).ln()) - c::<T>(0.5 * precision) * d * d
            }
            Prior::Gamma { shape, rate } => {
                if !(x > T::zero()) {
                    return T::neg_infinity();
                }
                c::<T>(shape * rate.ln() - ln_gamma(shape)) + c::<T>(shape - 1.0) * x.ln() - c::<T>(rate) * x
            }
            Prior::Uniform { lower, upper } => {
                if x > c(lower) && x < c(upper) {
                    c(-(upper - lower).ln())
                } else {
                    T::neg_infinity()
                }
            }
            Prior::InverseWishart { .. } => T::nan(),
        }
    }

    /// Inverse-Wishart log-density at `Sigma = (s11, s12, s22)`; `-inf` if
    /// `Sigma` is not positive definite or the prior is not inverse-Wishart.
    pub fn matrix_log_density<T: Real>(&self, sigma: [T; 3]) -> T {
        let Prior::InverseWishart { scale, df } = *self else {
            return T::neg_infinity();
        };
        let [s11, s12, s22] = sigma;
        let det = s11 * s22 - s12 * s12;
        if !(s11 > T::zero() && det > T::zero()) {
            return T::neg_infinity();
        }
        let p = 2.0;
        let psi_det = scale[0][0] * scale[1][1] - scale[0][1] * scale[1][0];
        let ln_mgamma = 0.5 * std::f64::consts::PI.ln() + ln_gamma(df / 2.0) + ln_gamma(df / 2.0 - 0.5);
        let norm = 0.5 * df * psi_det.ln() - 0.5 * df * p * std::f64::consts::LN_2 - ln_mgamma;
        // tr(Psi Sigma^-1) with Sigma^-1 = [s22, -s12; -s12, s11] / det
        let tr =
            (c::<T>(scale[0][0]) * s22 - c::<T>(scale[0][1] + scale[1][0]) * s12 + c::<T>(scale[1][1]) * s11) / det;
        c::<T>(norm) - c::<T>(0.5 * (df + p + 1.0)) * det.ln() - c::<T>(0.5) * tr
    }

    /// Support bounds `(lower, upper)` implied by the prior.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Prior::Gamma { .. } => (0.0, f64::INFINITY),
            Prior::Uniform { lower, upper } => (lower, upper),
            Prior::InverseWishart { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// Looks a prior up by element name, then by group name, then falls back.
pub fn resolve(spec: &PriorSpec, element: &str, group: &str, default: Prior) -> Prior {
    spec.get(element).or_else(|| spec.get(group)).copied().unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_at_mean() {
        let v = Prior::vague_normal().log_density(0.0_f64);
        assert!((v - 0.5 * (0.001 / (2.0 * std::f64::consts::PI)).ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_support() {
        let u = Prior::Uniform { lower: 0.0, upper: 10.0 };
        assert_eq!(u.log_density(11.0_f64), f64::NEG_INFINITY);
        assert!((u.log_density(5.0_f64) + 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gamma_matches_closed_form() {
        let g = Prior::Gamma { shape: 2.0, rate: 3.0 };
        let x: f64 = 0.7;
        let want = (9.0 * x * (-3.0 * x).exp()).ln();
        assert!((g.log_density(x) - want).abs() < 1e-14);
    }

    #[test]
    fn serde_shape() {
        let p: Prior = serde_json::from_str(r#"{"normal":{"mean":0,"precision":0.001}}"#).unwrap();
        assert_eq!(p, Prior::vague_normal());
        let p: Prior = serde_json::from_str(r#"{"inverse_wishart":{"scale":[[1,0],[0,1]],"df":2}}"#).unwrap();
        assert!(p.validate().is_ok());
    }
}

//! Scalar abstraction shared by every numeric kernel.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar: `f32`, `f64` or [`crate::Dual`].
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {}

/// Converts an `f64` literal or data value into `T`.
#[inline]
pub fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 is representable in every Real type")
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 - exp(x))` for `x < 0`, accurate on both ends.
#[inline]
pub fn log1m_exp<T: Real>(x: T) -> T {
    if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Inner product of an `f64` data row with a parameter vector.
#[inline]
pub fn dot<T: Real>(row: &[f64], coef: &[T]) -> T {
    row.iter().zip(coef).fold(T::zero(), |acc, (&x, &b)| acc + b * c(x))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x < c(0.5) {
        // reflection keeps the series in its accurate range
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = c::<T>(LANCZOS[0]);
    for (k, &coef) in LANCZOS.iter().enumerate().skip(1) {
        a = a + c::<T>(coef) / (x + c(k as f64));
    }
    let t = x + c(LANCZOS_G + 0.5);
    c::<T>(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + c(0.5)) * t.ln() - t + a.ln()
}

/// Value in `f64` of any `Real`; used when leaving the generic code path.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(800.0_f64), 800.0);
        assert!((softplus(-800.0_f64)).abs() < 1e-300);
        assert!((softplus(0.0_f64) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log1m_exp_matches_direct_form() {
        for &x in &[-1e-10, -0.1, -0.5, -3.0, -40.0] {
            let direct = (1.0 - f64::exp(x)).ln();
            let got = log1m_exp(x);
            assert!((got - direct).abs() <= 1e-6 * direct.abs().max(1.0), "{x}");
        }
    }

    #[test]
    fn ln_gamma_matches_reference() {
        for &x in &[0.01, 0.3, 0.5, 1.0, 1.5, 2.417, 4.01, 10.0, 171.3] {
            let want = statrs::function::gamma::ln_gamma(x);
            assert!((ln_gamma(x) - want).abs() < 1e-12 * want.abs().max(1.0), "{x}");
        }
    }

    #[test]
    fn log_add_exp_handles_neg_infinity() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
        let v = log_add_exp(0.0_f64, 0.0);
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }
}

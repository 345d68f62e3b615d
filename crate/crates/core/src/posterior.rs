//! Derived quantities computed draw by draw from posterior samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{CompetingRisksParams, CureParams, FrailtyParams, IllnessDeathParams};
use crate::quadrature::{gauss_kronrod, simpson};
use crate::scalar::{c, dot, Real};

/// Simpson panels per cumulative incidence evaluation.
pub const CIF_PANELS: usize = 256;
/// Relative tolerance of the transition probability integrals.
pub const TRANSITION_REL_TOL: f64 = 1e-8;
/// Slack allowed on probabilities before they are reported as invalid.
const PROB_SLACK: f64 = 1e-8;

/// Posterior means of a quantity over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGrid<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub label: String,
}

impl<T: Real> CurveGrid<T> {
    pub fn new(times: Vec<T>, values: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!("{} times, {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("curve times must be nondecreasing".into()));
        }
        Ok(Self { times, values, label: label.into() })
    }
}

/// Which posterior draws enter a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrawSubsample {
    /// Draws used; `None` keeps all of them.
    pub size: Option<usize>,
    pub seed: u64,
}

impl Default for DrawSubsample {
    fn default() -> Self {
        Self { size: Some(200), seed: 1 }
    }
}

impl DrawSubsample {
    pub fn all() -> Self {
        Self { size: None, seed: 0 }
    }

    /// Sorted draw indices out of `n`, sampled without replacement.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        match self.size {
            Some(k) if k < n => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        }
    }
}

/// Mean of `f` over the selected draws; draws are split across threads and
/// reduced in draw order.
pub fn posterior_mean<P, F>(draws: &[P], subsample: &DrawSubsample, f: F) -> Result<f64>
where
    P: Sync,
    F: Fn(&P) -> Result<f64> + Sync,
{
    let values = per_draw(draws, subsample, f)?;
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Values of `f` at the selected draws, in draw order.
pub fn per_draw<P, F>(draws: &[P], subsample: &DrawSubsample, f: F) -> Result<Vec<f64>>
where
    P: Sync,
    F: Fn(&P) -> Result<f64> + Sync,
{
    let idx = subsample.indices(draws.len());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(idx.len().max(1));
    let chunk = idx.len().div_ceil(threads).max(1);
    let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = idx
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(|&i| f(&draws[i])).collect::<Result<Vec<f64>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(idx.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Curve of posterior means of `f(draw, t)` over `times`.
pub fn mean_curve<P, F>(
    times: &[f64],
    draws: &[P],
    subsample: &DrawSubsample,
    label: &str,
    f: F,
) -> Result<CurveGrid<f64>>
where
    P: Sync,
    F: Fn(&P, f64) -> Result<f64> + Sync,
{
    let values = times.iter().map(|&t| posterior_mean(draws, subsample, |p| f(p, t))).collect::<Result<Vec<_>>>()?;
    CurveGrid::new(times.to_vec(), values, label)
}

fn contrast<T: Real>(x1: &[f64], x2: &[f64], beta_draws: &[Vec<T>]) -> Result<Vec<T>> {
    if x1.len() != x2.len() {
        return Err(Error::Dimension(format!("covariate vectors of length {} and {}", x1.len(), x2.len())));
    }
    let diff: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
    beta_draws
        .iter()
        .map(|beta| {
            if beta.len() != diff.len() {
                return Err(Error::Dimension(format!("{} coefficients for {} covariates", beta.len(), diff.len())));
            }
            Ok(dot(&diff, beta).exp())
        })
        .collect()
}

/// `exp((x1 - x2)'beta)` per draw of AFT coefficients.
pub fn relative_median<T: Real>(x1: &[f64], x2: &[f64], beta_draws: &[Vec<T>]) -> Result<Vec<T>> {
    contrast(x1, x2, beta_draws)
}

/// `exp((x1 - x2)'beta)` per draw of PH coefficients.
pub fn hazard_ratio<T: Real>(x1: &[f64], x2: &[f64], beta_draws: &[Vec<T>]) -> Result<Vec<T>> {
    contrast(x1, x2, beta_draws)
}

/// Logistic function without overflow for large `|z|`.
pub fn inv_logit<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Cure probability `logit^-1(x_C'beta_C)` per draw.
pub fn cure_fraction<T: Real>(x_c: &[f64], beta_c_draws: &[Vec<T>]) -> Result<Vec<T>> {
    beta_c_draws
        .iter()
        .map(|beta| {
            if beta.len() != x_c.len() {
                return Err(Error::Dimension(format!("{} coefficients for {} covariates", beta.len(), x_c.len())));
            }
            Ok(inv_logit(dot(x_c, beta)))
        })
        .collect()
}

/// Uncured survival `exp(-lambda exp(x_U'beta_U) t^alpha)` of one draw.
pub fn uncured_survival<T: Real>(params: &CureParams<T>, x_u: &[f64], t: f64) -> Result<T> {
    if params.beta_u.len() != x_u.len() {
        return Err(Error::Dimension(format!("{} coefficients for {} covariates", params.beta_u.len(), x_u.len())));
    }
    check_time(t)?;
    let rate = params.lambda * dot(x_u, &params.beta_u).exp();
    Ok((-rate * c::<T>(t).powf(params.alpha)).exp())
}

pub fn uncured_survival_curve(
    times: &[f64],
    draws: &[CureParams<f64>],
    x_u: &[f64],
    label: &str,
) -> Result<CurveGrid<f64>> {
    mean_curve(times, draws, &DrawSubsample::all(), label, |p, t| uncured_survival(p, x_u, t))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")))
    }
}

/// Cumulative incidence of cause `k` (0-based) at `t` for one draw:
/// `int_0^t h_k(u) exp(-sum_l H_l(u)) du` by composite Simpson.
pub fn cif_draw<T: Real>(params: &CompetingRisksParams<T>, k: usize, x: &[f64], t: f64, panels: usize) -> Result<T> {
    let n_risks = params.lambdas.len();
    if k >= n_risks || params.alphas.len() != n_risks || params.beta.len() != n_risks {
        return Err(Error::Dimension(format!("cause {k} of {n_risks}")));
    }
    if params.beta.iter().any(|b| b.len() != x.len()) {
        return Err(Error::Dimension(format!("coefficients do not match {} covariates", x.len())));
    }
    check_time(t)?;
    if t == 0.0 {
        return Ok(T::zero());
    }
    let rates: Vec<T> = (0..n_risks).map(|l| params.lambdas[l] * dot(x, &params.beta[l]).exp()).collect();
    let alphas = &params.alphas;
    let surv = |u: T| {
        let h = (0..n_risks).fold(T::zero(), |s, l| s + rates[l] * u.powf(alphas[l]));
        (-h).exp()
    };
    let (rate, alpha) = (rates[k], alphas[k]);
    let tt = c::<T>(t);
    // u = t v^(1/alpha_k) turns h_k(u) du into a constant times dv
    let scale = rate * tt.powf(alpha);
    let inv = T::one() / alpha;
    simpson(|v: T| scale * surv(tt * v.powf(inv)), T::zero(), T::one(), panels)
}

/// Posterior-mean cumulative incidence of cause `k` at `t`.
pub fn cif(k: usize, t: f64, x: &[f64], draws: &[CompetingRisksParams<f64>], subsample: &DrawSubsample) -> Result<f64> {
    posterior_mean(draws, subsample, |p| cif_draw(p, k, x, t, CIF_PANELS))
}

/// Overall survival `exp(-sum_l H_l(t))` of one competing-risks draw.
pub fn overall_survival<T: Real>(params: &CompetingRisksParams<T>, x: &[f64], t: f64) -> Result<T> {
    check_time(t)?;
    let mut h = T::zero();
    for l in 0..params.lambdas.len() {
        h = h + params.lambdas[l] * dot(x, &params.beta[l]).exp() * c::<T>(t).powf(params.alphas[l]);
    }
    Ok((-h).exp())
}

/// Transition rates `lambda_k exp(x'beta_k)` of an illness-death draw.
fn transition_rates<T: Real>(params: &IllnessDeathParams<T>, x: &[f64]) -> Result<[T; 3]> {
    if params.lambdas.len() != 3 || params.alphas.len() != 3 || params.beta.len() != 3 {
        return Err(Error::Dimension("illness-death draws need three transitions".into()));
    }
    if params.beta.iter().any(|b| b.len() != x.len()) {
        return Err(Error::Dimension(format!("coefficients do not match {} covariates", x.len())));
    }
    Ok([0, 1, 2].map(|k| params.lambdas[k] * dot(x, &params.beta[k]).exp()))
}

fn check_window(s: f64, t: f64) -> Result<()> {
    check_time(s)?;
    if t < s || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("need s <= t, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// Probability of staying in the initial state over `(s, t]` for one draw.
pub fn p11_draw<T: Real>(params: &IllnessDeathParams<T>, x: &[f64], s: f64, t: f64) -> Result<T> {
    check_window(s, t)?;
    let r = transition_rates(params, x)?;
    let a = &params.alphas;
    let (st, tt) = (c::<T>(s), c::<T>(t));
    Ok((-r[0] * (tt.powf(a[0]) - st.powf(a[0])) - r[1] * (tt.powf(a[1]) - st.powf(a[1]))).exp())
}

/// Probability of remaining in the intermediate state at `t` given entry
/// into it before `s`, for one draw.
pub fn p22_draw<T: Real>(params: &IllnessDeathParams<T>, x: &[f64], s: f64, t: f64) -> Result<T> {
    check_window(s, t)?;
    if s == 0.0 {
        return Err(Error::InvalidParameter("p22 needs s > 0".into()));
    }
    let r = transition_rates(params, x)?;
    let a = &params.alphas;
    let (st, tt) = (c::<T>(s), c::<T>(t));
    let norm = -(-r[0] * st.powf(a[0])).exp_m1();
    let integrand = |u: T| {
        if u <= T::zero() {
            return T::zero();
        }
        let h1 = r[0] * a[0] * u.powf(a[0] - T::one());
        let h3 = r[2] * ((tt - u).powf(a[2]) - (st - u).max(T::zero()).powf(a[2]));
        h1 * (-r[0] * u.powf(a[0]) - h3).exp() / norm
    };
    Ok(gauss_kronrod(integrand, T::zero(), st, c(TRANSITION_REL_TOL))?.0)
}

/// Probability of being in the intermediate state at `t` starting from the
/// initial state at `s`, for one draw.
pub fn p12_draw<T: Real>(params: &IllnessDeathParams<T>, x: &[f64], s: f64, t: f64) -> Result<T> {
    check_window(s, t)?;
    if s == t {
        return Ok(T::zero());
    }
    let r = transition_rates(params, x)?;
    let a = &params.alphas;
    let (st, tt) = (c::<T>(s), c::<T>(t));
    let integrand = |u: T| {
        if u <= T::zero() {
            return T::zero();
        }
        let h1 = r[0] * a[0] * u.powf(a[0] - T::one());
        let stay = r[0] * (u.powf(a[0]) - st.powf(a[0])) + r[1] * (u.powf(a[1]) - st.powf(a[1]));
        let sojourn = r[2] * (tt - u).max(T::zero()).powf(a[2]);
        h1 * (-stay - sojourn).exp()
    };
    Ok(gauss_kronrod(integrand, st, tt, c(TRANSITION_REL_TOL))?.0)
}

pub fn p11(s: f64, t: f64, draws: &[IllnessDeathParams<f64>], x: &[f64], subsample: &DrawSubsample) -> Result<f64> {
    posterior_mean(draws, subsample, |p| p11_draw(p, x, s, t))
}

pub fn p22(s: f64, t: f64, draws: &[IllnessDeathParams<f64>], x: &[f64], subsample: &DrawSubsample) -> Result<f64> {
    posterior_mean(draws, subsample, |p| p22_draw(p, x, s, t))
}

pub fn p12(s: f64, t: f64, draws: &[IllnessDeathParams<f64>], x: &[f64], subsample: &DrawSubsample) -> Result<f64> {
    posterior_mean(draws, subsample, |p| p12_draw(p, x, s, t))
}

fn check_probability(name: &str, v: f64) -> Result<f64> {
    if (-PROB_SLACK..=1.0 + PROB_SLACK).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::RowSum(format!("{name} = {v}")))
    }
}

/// `(p13, p23) = (1 - p11 - p12, 1 - p22)`; values outside `[0, 1]` by more
/// than `1e-8` are an error, smaller excursions are clamped.
pub fn p13_p23(p11: f64, p12: f64, p22: f64) -> Result<(f64, f64)> {
    let p11 = check_probability("p11", p11)?;
    let p12 = check_probability("p12", p12)?;
    let p22 = check_probability("p22", p22)?;
    let p13 = check_probability("p13", 1.0 - p11 - p12)?;
    Ok((p13, 1.0 - p22))
}

/// Conditional survival `exp(-w_g exp(x'beta) t^alpha)` of a member of group
/// `g` for one draw.
pub fn frailty_survival<T: Real>(params: &FrailtyParams<T>, group: usize, x: &[f64], t: f64) -> Result<T> {
    if params.beta.len() != x.len() {
        return Err(Error::Dimension(format!("{} coefficients for {} covariates", params.beta.len(), x.len())));
    }
    if group >= params.frailty.n_groups() {
        return Err(Error::Dimension(format!("group {group} of {}", params.frailty.n_groups())));
    }
    check_time(t)?;
    let rate = (dot(x, &params.beta) + params.frailty.log_effect(group)).exp();
    Ok((-rate * c::<T>(t).powf(params.alpha)).exp())
}

pub fn frailty_survival_curve(
    group: usize,
    x: &[f64],
    times: &[f64],
    draws: &[FrailtyParams<f64>],
    label: &str,
) -> Result<CurveGrid<f64>> {
    mean_curve(times, draws, &DrawSubsample::all(), label, |p, t| frailty_survival(p, group, x, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::FrailtyTerm;

    fn id_draw() -> IllnessDeathParams<f64> {
        IllnessDeathParams {
            beta: vec![vec![0.3], vec![-0.2], vec![0.1]],
            lambdas: vec![0.02, 0.01, 0.05],
            alphas: vec![0.7, 1.1, 1.3],
        }
    }

    #[test]
    fn contrasts() {
        let draws = vec![vec![0.5_f64, -1.0], vec![0.1, 0.2]];
        for v in relative_median(&[1.0, 2.0], &[1.0, 2.0], &draws).unwrap() {
            assert_eq!(v, 1.0);
        }
        let ab = hazard_ratio(&[1.0, 0.0], &[0.0, 1.0], &draws).unwrap();
        let ba = hazard_ratio(&[0.0, 1.0], &[1.0, 0.0], &draws).unwrap();
        for (a, b) in ab.iter().zip(&ba) {
            assert!((a * b - 1.0).abs() < 1e-14);
        }
        assert!(hazard_ratio(&[1.0], &[1.0, 0.0], &draws).is_err());
    }

    #[test]
    fn cure_fraction_is_stable() {
        let v = cure_fraction(&[1.0], &[vec![0.0], vec![800.0], vec![-800.0]]).unwrap();
        assert_eq!(v[0], 0.5);
        assert_eq!(v[1], 1.0);
        assert!(v[2] >= 0.0 && v[2] < 1e-300);
    }

    #[test]
    fn uncured_survival_examples() {
        let p = CureParams { beta_c: vec![0.0], beta_u: vec![0.0], lambda: 1.0, alpha: 1.0 };
        assert_eq!(uncured_survival(&p, &[1.0], 0.0).unwrap(), 1.0);
        assert!((uncured_survival(&p, &[1.0], 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_cause_cif_matches_closed_form() {
        for alpha in [0.6, 1.0, 1.8] {
            let p = CompetingRisksParams { beta: vec![vec![0.4]], lambdas: vec![0.3], alphas: vec![alpha] };
            for t in [0.5, 2.0, 7.0] {
                let got = cif_draw(&p, 0, &[1.0], t, CIF_PANELS).unwrap();
                let want = -(-(0.3 * 0.4f64.exp()) * f64::powf(t, alpha)).exp_m1();
                assert!((got / want - 1.0).abs() < 1e-6, "{alpha} {t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cif_partition_of_probability() {
        let p = CompetingRisksParams {
            beta: vec![vec![0.2_f64], vec![-0.5]],
            lambdas: vec![0.1, 0.25],
            alphas: vec![0.8, 1.4],
        };
        assert_eq!(cif_draw(&p, 0, &[1.0], 0.0, CIF_PANELS).unwrap(), 0.0);
        for t in [0.3, 1.0, 4.0] {
            let total = cif_draw(&p, 0, &[1.0], t, CIF_PANELS).unwrap()
                + cif_draw(&p, 1, &[1.0], t, CIF_PANELS).unwrap()
                + overall_survival(&p, &[1.0], t).unwrap();
            assert!((total - 1.0).abs() < 1e-4, "{t}: {total}");
        }
    }

    #[test]
    fn p11_matches_integrated_hazard() {
        let p = id_draw();
        let x = [1.0];
        let r = transition_rates(&p, &x).unwrap();
        for (s, t) in [(0.0, 10.0), (2.0, 30.0)] {
            let h = |u: f64| (0..2).map(|k| r[k] * p.alphas[k] * u.powf(p.alphas[k] - 1.0)).sum::<f64>();
            let (int, _) = gauss_kronrod(h, s, t, 1e-12).unwrap();
            let got = p11_draw(&p, &x, s, t).unwrap();
            assert!((got / (-int).exp() - 1.0).abs() < 1e-8);
        }
        assert_eq!(p11_draw(&p, &x, 3.0, 3.0).unwrap(), 1.0);
        assert!(p11_draw(&p, &x, 4.0, 3.0).is_err());
    }

    #[test]
    fn p22_boundary_and_exponential_sojourn() {
        let p = id_draw();
        let x = [1.0];
        assert!((p22_draw(&p, &x, 26.0, 26.0).unwrap() - 1.0).abs() < 1e-8);
        assert!(p22_draw(&p, &x, 0.0, 5.0).is_err());
        // with alpha3 = 1 the sojourn term is exp(-r3 (t - s)) for every u
        let mut q = p.clone();
        q.alphas[2] = 1.0;
        let r3 = q.lambdas[2] * 0.1f64.exp();
        for t in [30.0, 80.0] {
            let got = p22_draw(&q, &x, 26.0, t).unwrap();
            assert!((got - (-r3 * (t - 26.0)).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn p12_matches_trapezoid() {
        let p = id_draw();
        let x = [1.0];
        let r = transition_rates(&p, &x).unwrap();
        let a = &p.alphas;
        let (s, t) = (5.0_f64, 40.0);
        let f = |u: f64| {
            r[0] * a[0]
                * u.powf(a[0] - 1.0)
                * (-r[0] * (u.powf(a[0]) - s.powf(a[0]))
                    - r[1] * (u.powf(a[1]) - s.powf(a[1]))
                    - r[2] * (t - u).powf(a[2]))
                .exp()
        };
        let n = 10_000;
        let hstep = (t - s) / n as f64;
        let trap = hstep * ((1..n).map(|i| f(s + i as f64 * hstep)).sum::<f64>() + 0.5 * (f(s) + f(t)));
        let got = p12_draw(&p, &x, s, t).unwrap();
        assert!((got / trap - 1.0).abs() < 1e-4, "{got} vs {trap}");
        assert_eq!(p12_draw(&p, &x, 7.0, 7.0).unwrap(), 0.0);
        let p11 = p11_draw(&p, &x, 0.0, t).unwrap();
        let p12 = p12_draw(&p, &x, 0.0, t).unwrap();
        assert!((0.0..=1.0).contains(&p12) && p11 + p12 <= 1.0);
    }

    #[test]
    fn complements() {
        assert_eq!(p13_p23(1.0, 0.0, 1.0).unwrap(), (0.0, 0.0));
        let (p13, p23) = p13_p23(0.3, 0.5, 0.25).unwrap();
        assert!((p13 - 0.2).abs() < 1e-15 && p23 == 0.75);
        assert!(p13_p23(0.7, 0.5, 0.5).is_err());
        assert_eq!(p13_p23(0.6, 0.4 + 1e-10, 0.5).unwrap().0, 0.0);
    }

    #[test]
    fn frailty_curve() {
        let draw = |w: f64| FrailtyParams {
            beta: vec![(0.1f64).ln(), 0.5],
            alpha: 1.2,
            frailty: FrailtyTerm::Gamma { psi: 2.0, w: vec![w, 3.0] },
        };
        let draws = vec![draw(1.0), draw(1.0)];
        let times = [0.0, 1.0, 5.0];
        let curve = frailty_survival_curve(0, &[1.0, 1.0], &times, &draws, "g0").unwrap();
        assert_eq!(curve.values[0], 1.0);
        let want = (-0.1 * 0.5f64.exp() * 5f64.powf(1.2)).exp();
        assert!((curve.values[2] - want).abs() < 1e-14);
        assert!(curve.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn subsample_is_reproducible() {
        let s = DrawSubsample { size: Some(5), seed: 9 };
        assert_eq!(s.indices(100), s.indices(100));
        assert_eq!(s.indices(100).len(), 5);
        assert_eq!(s.indices(3), vec![0, 1, 2]);
        let mean =
            posterior_mean(&(0..10).map(f64::from).collect::<Vec<_>>(), &DrawSubsample::all(), |v| Ok(*v)).unwrap();
        assert_eq!(mean, 4.5);
    }
}

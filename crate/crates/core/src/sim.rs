//! Synthetic datasets for parameter-recovery runs, and straight-line
//! reference log-likelihoods used to cross-check the model code.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{FrailtyTerm, FrailtyVariant};
use crate::model::{Family, ModelSpec};
use crate::survival::{
    CensoredObservation, Censoring, DatasetExtras, DesignMatrix, IllnessDeathRecord, Longitudinal, SurvivalDataset,
    TimePartition,
};
use crate::{
    AftParams64, CompetingRisksParams64, CureParams64, FrailtyParams64, IllnessDeathParams64, JointParams64, PhParams64,
};

/// Parameters of one model family in double precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Aft(AftParams64),
    #[serde(rename = "ph")]
    PiecewisePh {
        params: PhParams64,
        partition: TimePartition,
    },
    Cure(CureParams64),
    CompetingRisks(CompetingRisksParams64),
    IllnessDeath(IllnessDeathParams64),
    /// Latent frailties are drawn by the simulator; only the hyperparameter is read.
    Frailty(FrailtyParams64),
    /// Random effects are drawn by the simulator; `b` is ignored.
    Joint(JointParams64),
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            Self::Aft(_) => Family::Aft,
            Self::PiecewisePh { .. } => Family::PiecewisePh,
            Self::Cure(_) => Family::Cure,
            Self::CompetingRisks(_) => Family::CompetingRisks,
            Self::IllnessDeath(_) => Family::IllnessDeath,
            Self::Frailty(_) => Family::Frailty,
            Self::Joint(_) => Family::Joint,
        }
    }

    /// Global parameters under the names the fitted model uses.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let vec_names = |group: &str, v: &[f64]| -> Vec<(String, f64)> {
            v.iter().enumerate().map(|(j, &x)| (format!("{group}[{}]", j + 1), x)).collect()
        };
        let matrix = |beta: &[Vec<f64>]| -> Vec<(String, f64)> {
            beta.iter()
                .enumerate()
                .flat_map(|(k, b)| b.iter().enumerate().map(move |(l, &x)| (format!("beta[{},{}]", l + 1, k + 1), x)))
                .collect()
        };
        let mut out = Vec::new();
        match self {
            Self::Aft(p) => {
                out.extend(vec_names("beta", &p.beta));
                out.push(("alpha".into(), p.alpha));
            }
            Self::PiecewisePh { params, .. } => {
                out.extend(vec_names("beta", &params.beta));
                out.extend(vec_names("lambda", &params.lambdas));
            }
            Self::Cure(p) => {
                out.extend(vec_names("betaC", &p.beta_c));
                out.extend(vec_names("betaU", &p.beta_u));
                out.push(("lambda".into(), p.lambda));
                out.push(("alpha".into(), p.alpha));
            }
            Self::CompetingRisks(CompetingRisksParams64 { beta, lambdas, alphas })
            | Self::IllnessDeath(IllnessDeathParams64 { beta, lambdas, alphas }) => {
                out.extend(matrix(beta));
                out.extend(vec_names("lambda", lambdas));
                out.extend(vec_names("alpha", alphas));
            }
            Self::Frailty(p) => {
                out.extend(vec_names("beta", &p.beta));
                out.push(("alpha".into(), p.alpha));
                match &p.frailty {
                    FrailtyTerm::Gamma { psi, .. } => out.push(("psi".into(), *psi)),
                    FrailtyTerm::Normal { tau, .. } => out.push(("tau".into(), *tau)),
                }
            }
            Self::Joint(p) => {
                out.extend(vec_names("betaL", &p.beta_l));
                out.extend(vec_names("betaS", &p.beta_s));
                out.push(("gamma".into(), p.gamma));
                out.push(("alpha".into(), p.alpha));
                out.push(("sigma".into(), p.sigma));
                for (name, v) in ["Sigma[1,1]", "Sigma[1,2]", "Sigma[2,2]"].into_iter().zip(p.sigma_b) {
                    out.push((name.into(), v));
                }
            }
        }
        out
    }
}

/// How follow-up ends.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimCensoring {
    #[default]
    None,
    /// Everyone still at risk is censored at this time.
    Administrative { time: f64 },
    /// Administrative time chosen so that this fraction of subjects is censored.
    Rate { target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub truth: FamilyParams,
    /// Subjects (survival records); frailty groups hold `group_size` of them.
    pub n_subjects: usize,
    #[serde(default)]
    pub censoring: SimCensoring,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    /// Gap between scheduled biomarker measurements (joint model).
    #[serde(default = "default_visit_interval")]
    pub visit_interval: f64,
    #[serde(default = "default_max_visits")]
    pub max_visits: usize,
}

fn default_seed() -> u64 {
    1
}
fn default_group_size() -> usize {
    2
}
fn default_visit_interval() -> f64 {
    1.0
}
fn default_max_visits() -> usize {
    10
}

impl SimScenario {
    pub fn new(truth: FamilyParams, n_subjects: usize) -> Self {
        Self {
            truth,
            n_subjects,
            censoring: SimCensoring::None,
            seed: default_seed(),
            group_size: default_group_size(),
            visit_interval: default_visit_interval(),
            max_visits: default_max_visits(),
        }
    }

    pub fn with_censoring(mut self, censoring: SimCensoring) -> Self {
        self.censoring = censoring;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Model specification matching the simulated structure.
    pub fn model_spec(&self) -> ModelSpec {
        let spec = ModelSpec::new(self.truth.family());
        match &self.truth {
            FamilyParams::PiecewisePh { partition, .. } => spec.with_partition(partition.clone()),
            FamilyParams::CompetingRisks(p) => spec.with_risks(p.lambdas.len()),
            FamilyParams::Frailty(p) => spec.with_frailty(match p.frailty {
                FrailtyTerm::Gamma { .. } => FrailtyVariant::MultiplicativeGamma,
                FrailtyTerm::Normal { .. } => FrailtyVariant::AdditiveNormal,
            }),
            _ => spec,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Config("scenario needs at least one subject".into()));
        }
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be at least 1".into()));
        }
        match self.censoring {
            SimCensoring::Administrative { time } if !(time > 0.0) => {
                return Err(Error::Config(format!("administrative time must be positive, got {time}")))
            }
            SimCensoring::Rate { target } if !(0.0..1.0).contains(&target) => {
                return Err(Error::Config(format!("censoring rate must lie in [0, 1), got {target}")))
            }
            _ => {}
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        match &self.truth {
            FamilyParams::Aft(p) => {
                positive("alpha", p.alpha)?;
                if p.beta.is_empty() {
                    return Err(Error::Config("AFT truth needs an intercept".into()));
                }
            }
            FamilyParams::PiecewisePh { params, partition } => {
                if params.lambdas.len() != partition.n_intervals() {
                    return Err(Error::Dimension("one lambda per partition interval".into()));
                }
                params.lambdas.iter().try_for_each(|&l| positive("lambda", l))?;
            }
            FamilyParams::Cure(p) => {
                positive("lambda", p.lambda)?;
                positive("alpha", p.alpha)?;
                if p.beta_c.is_empty() {
                    return Err(Error::Config("cure truth needs an incidence intercept".into()));
                }
            }
            FamilyParams::CompetingRisks(CompetingRisksParams64 { beta, lambdas, alphas })
            | FamilyParams::IllnessDeath(IllnessDeathParams64 { beta, lambdas, alphas }) => {
                if lambdas.is_empty() || beta.len() != lambdas.len() || alphas.len() != lambdas.len() {
                    return Err(Error::Dimension("one beta, lambda and alpha per hazard".into()));
                }
                if beta.iter().any(|b| b.len() != beta[0].len()) {
                    return Err(Error::Dimension("hazards need the same covariates".into()));
                }
                lambdas.iter().chain(alphas).try_for_each(|&v| positive("lambda/alpha", v))?;
                if self.truth.family() == Family::IllnessDeath && lambdas.len() != 3 {
                    return Err(Error::Dimension("illness-death truth needs three transitions".into()));
                }
            }
            FamilyParams::Frailty(p) => {
                positive("alpha", p.alpha)?;
                if p.beta.is_empty() {
                    return Err(Error::Config("frailty truth needs an intercept".into()));
                }
                match &p.frailty {
                    FrailtyTerm::Gamma { psi, .. } => positive("psi", *psi)?,
                    FrailtyTerm::Normal { tau, .. } => positive("tau", *tau)?,
                }
            }
            FamilyParams::Joint(p) => {
                positive("alpha", p.alpha)?;
                positive("sigma", p.sigma)?;
                positive("visit_interval", self.visit_interval)?;
                let [s11, s12, s22] = p.sigma_b;
                if !(s11 > 0.0 && s11 * s22 - s12 * s12 > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                if p.beta_l.is_empty() || p.beta_s.is_empty() {
                    return Err(Error::Config("joint truth needs longitudinal and survival intercepts".into()));
                }
            }
        }
        Ok(())
    }
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Covariate `j` (1-based): odd columns standard normal, even columns Bernoulli(1/2).
fn covariates(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (1..=m)
        .map(|j| {
            if j % 2 == 1 {
                rng.sample::<f64, _>(StandardNormal)
            } else if rng.random::<f64>() < 0.5 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn covariate_names(m: usize, intercept: bool) -> Vec<String> {
    let mut names: Vec<String> = if intercept { vec!["(Intercept)".into()] } else { Vec::new() };
    names.extend((1..=m).map(|j| format!("x{j}")));
    names
}

fn with_intercept(x: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(x.iter().copied()).collect()
}

fn lin(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Standard exponential variate `-log U`.
fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Weibull time with cumulative hazard `rate * t^alpha`.
fn weibull_time(rng: &mut ChaCha8Rng, rate: f64, alpha: f64) -> f64 {
    (exp1(rng) / rate).powf(1.0 / alpha)
}

/// Inverts a piecewise-constant cumulative hazard; the last rate extends
/// past the final knot.
fn piecewise_time(rng: &mut ChaCha8Rng, knots: &[f64], rates: &[f64]) -> f64 {
    let mut e = exp1(rng);
    for (k, &r) in rates.iter().enumerate() {
        let width = knots[k + 1] - knots[k];
        if k + 1 == rates.len() || e <= r * width {
            return knots[k] + e / r;
        }
        e -= r * width;
    }
    unreachable!("at least one interval")
}

/// Event time with hazard `alpha t^(alpha-1) exp(c + d t)` by thinning on
/// the clock `s = t^alpha`, where the hazard is `exp(c + d s^(1/alpha))`.
fn joint_event_time(rng: &mut ChaCha8Rng, alpha: f64, c: f64, d: f64, horizon: f64) -> f64 {
    let s_end = horizon.powf(alpha);
    let bound = (c + (d * horizon).max(0.0)).exp();
    let mut s = 0.0;
    loop {
        s += exp1(rng) / bound;
        if s > s_end {
            return f64::INFINITY;
        }
        let t = s.powf(1.0 / alpha);
        if rng.random::<f64>() * bound <= (c + d * t).exp() {
            return t;
        }
    }
}

/// Latent event times are censored at `c`; `None` keeps them all.
fn censor_time(times: &[f64], rule: SimCensoring) -> Option<f64> {
    match rule {
        SimCensoring::None => None,
        SimCensoring::Administrative { time } => Some(time),
        SimCensoring::Rate { target } => Some(rate_target_time(times, target)),
    }
}

/// Bisection for the administrative time leaving `target` of the sample censored.
fn rate_target_time(times: &[f64], target: f64) -> f64 {
    let n = times.len() as f64;
    let censored = |c: f64| times.iter().filter(|&&t| t > c).count() as f64 / n;
    let finite_max = times.iter().copied().filter(|t| t.is_finite()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, finite_max.max(f64::MIN_POSITIVE));
    if censored(hi) >= target {
        return hi * (1.0 + 1e-12);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn observation(id: u64, t: f64, cens: Option<f64>) -> Result<(CensoredObservation, bool)> {
    match cens {
        Some(c) if t > c => Ok((CensoredObservation::new(id, Censoring::Right(c))?, false)),
        _ => Ok((CensoredObservation::new(id, Censoring::Exact(t))?, true)),
    }
}

/// Simulated dataset; deterministic in the scenario (each subject draws from
/// its own substream of the seed).
pub fn simulate(scenario: &SimScenario) -> Result<SurvivalDataset> {
    scenario.validate()?;
    let n = scenario.n_subjects;
    let seed = scenario.seed;
    match &scenario.truth {
        FamilyParams::Aft(p) => {
            let m = p.beta.len() - 1;
            let mut rows = Vec::with_capacity(n);
            let mut times = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = subject_rng(seed, i as u64);
                let x = with_intercept(&covariates(&mut rng, m));
                times.push(weibull_time(&mut rng, (-p.alpha * lin(&x, &p.beta)).exp(), p.alpha));
                rows.push(x);
            }
            simple_dataset(&times, rows, covariate_names(m, true), scenario.censoring, DatasetExtras::None)
        }
        FamilyParams::PiecewisePh { params, partition } => {
            let m = params.beta.len();
            let mut rows = Vec::with_capacity(n);
            let mut times = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = subject_rng(seed, i as u64);
                let x = covariates(&mut rng, m);
                let risk = lin(&x, &params.beta).exp();
                let rates: Vec<f64> = params.lambdas.iter().map(|l| l * risk).collect();
                times.push(piecewise_time(&mut rng, partition.knots(), &rates));
                rows.push(x);
            }
            // the model is only defined on the partition
            let rule = match scenario.censoring {
                SimCensoring::None => SimCensoring::Administrative { time: partition.end() },
                SimCensoring::Administrative { time } => {
                    SimCensoring::Administrative { time: time.min(partition.end()) }
                }
                SimCensoring::Rate { target } => {
                    SimCensoring::Administrative { time: rate_target_time(&times, target).min(partition.end()) }
                }
            };
            simple_dataset(&times, rows, covariate_names(m, false), rule, DatasetExtras::None)
        }
        FamilyParams::Cure(p) => {
            let (pc, pu) = (p.beta_c.len() - 1, p.beta_u.len());
            let m = pc.max(pu);
            let mut inc_rows = Vec::with_capacity(n);
            let mut lat_rows = Vec::with_capacity(n);
            let mut times = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = subject_rng(seed, i as u64);
                let x = covariates(&mut rng, m);
                let xc = with_intercept(&x[..pc]);
                let xu = x[..pu].to_vec();
                let cure = crate::posterior::inv_logit(lin(&xc, &p.beta_c));
                let cured = rng.random::<f64>() < cure;
                let t = weibull_time(&mut rng, p.lambda * lin(&xu, &p.beta_u).exp(), p.alpha);
                times.push(if cured { f64::INFINITY } else { t });
                inc_rows.push(xc);
                lat_rows.push(xu);
            }
            let names: Vec<String> = covariate_names(m, false);
            let incidence = DesignMatrix::from_rows(&inc_rows, covariate_names(pc, true))?;
            let rule = match scenario.censoring {
                // cured subjects never fail; follow them to the largest event time
                SimCensoring::None => SimCensoring::Administrative {
                    time: times.iter().copied().filter(|t| t.is_finite()).fold(1.0, f64::max),
                },
                other => other,
            };
            simple_dataset(&times, lat_rows, names[..pu].to_vec(), rule, DatasetExtras::Cure { incidence })
        }
        FamilyParams::CompetingRisks(p) => {
            let m = p.beta[0].len();
            let mut rows = Vec::with_capacity(n);
            let mut latent = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = subject_rng(seed, i as u64);
                let x = covariates(&mut rng, m);
                let (mut t, mut cause) = (f64::INFINITY, 0);
                for k in 0..p.lambdas.len() {
                    let tk = weibull_time(&mut rng, p.lambdas[k] * lin(&x, &p.beta[k]).exp(), p.alphas[k]);
                    if tk < t {
                        (t, cause) = (tk, k + 1);
                    }
                }
                latent.push((t, cause));
                rows.push(x);
            }
            let times: Vec<f64> = latent.iter().map(|l| l.0).collect();
            let cens = censor_time(&times, scenario.censoring);
            let mut obs = Vec::with_capacity(n);
            for (i, &(t, cause)) in latent.iter().enumerate() {
                let (o, event) = observation(i as u64 + 1, t, cens)?;
                obs.push(if event { o.with_label(cause as u8) } else { o.with_label(0) });
            }
            let design = DesignMatrix::from_rows(&rows, covariate_names(m, false))?;
            SurvivalDataset::new(obs, design, DatasetExtras::None)
        }
        FamilyParams::IllnessDeath(p) => simulate_illness_death(scenario, p),
        FamilyParams::Frailty(p) => simulate_frailty(scenario, p),
        FamilyParams::Joint(p) => simulate_joint(scenario, p),
    }
}

fn simple_dataset(
    times: &[f64],
    rows: Vec<Vec<f64>>,
    names: Vec<String>,
    rule: SimCensoring,
    extras: DatasetExtras,
) -> Result<SurvivalDataset> {
    let cens = censor_time(times, rule);
    let obs = times
        .iter()
        .enumerate()
        .map(|(i, &t)| observation(i as u64 + 1, t, cens).map(|o| o.0))
        .collect::<Result<Vec<_>>>()?;
    let design =
        if names.is_empty() { DesignMatrix::empty(times.len()) } else { DesignMatrix::from_rows(&rows, names)? };
    SurvivalDataset::new(obs, design, extras)
}

/// Semi-Markov process: competing 1->2 and 1->3 times on the study clock,
/// then a 2->3 sojourn on a clock reset at the transition.
fn simulate_illness_death(scenario: &SimScenario, p: &IllnessDeathParams64) -> Result<SurvivalDataset> {
    let n = scenario.n_subjects;
    let m = p.beta[0].len();
    let mut rows = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = subject_rng(scenario.seed, i as u64);
        let x = covariates(&mut rng, m);
        let rate = |k: usize| p.lambdas[k] * lin(&x, &p.beta[k]).exp();
        let t12 = weibull_time(&mut rng, rate(0), p.alphas[0]);
        let t13 = weibull_time(&mut rng, rate(1), p.alphas[1]);
        let t23 = weibull_time(&mut rng, rate(2), p.alphas[2]);
        paths.push((t12, t13, t23));
        rows.push(x);
    }
    let absorption: Vec<f64> = paths.iter().map(|&(a, b, s)| if a < b { a + s } else { b }).collect();
    let cens = censor_time(&absorption, scenario.censoring).unwrap_or(f64::INFINITY);
    let mut obs = Vec::with_capacity(n);
    let mut recs = Vec::with_capacity(n);
    for (i, &(t12, t13, t23)) in paths.iter().enumerate() {
        let (times1, times2, delta, status) = if t12 < t13 && t12 <= cens {
            let sojourn = t23.min(cens - t12);
            (t12, sojourn, true, t23 <= cens - t12)
        } else if t13 <= cens {
            (t13, 0.0, false, true)
        } else {
            (cens, 0.0, false, false)
        };
        let total = times1 + times2;
        recs.push(IllnessDeathRecord::from_indicators(times1, times2, total, delta, status)?);
        obs.push(CensoredObservation::from_indicator(i as u64 + 1, total, status)?);
    }
    let design =
        if m == 0 { DesignMatrix::empty(n) } else { DesignMatrix::from_rows(&rows, covariate_names(m, false))? };
    SurvivalDataset::new(obs, design, DatasetExtras::IllnessDeath(recs))
}

fn simulate_frailty(scenario: &SimScenario, p: &FrailtyParams64) -> Result<SurvivalDataset> {
    let n = scenario.n_subjects;
    let size = scenario.group_size;
    let n_groups = n.div_ceil(size);
    let m = p.beta.len() - 1;
    let effects: Vec<f64> = (0..n_groups)
        .map(|g| {
            // group streams sit after the subject streams
            let mut rng = subject_rng(scenario.seed, (n + g) as u64);
            match p.frailty {
                FrailtyTerm::Gamma { psi, .. } => rng.sample(Gamma::new(psi, 1.0 / psi).expect("validated shape")).ln(),
                FrailtyTerm::Normal { tau, .. } => {
                    rng.sample(Normal::new(0.0, 1.0 / tau.sqrt()).expect("validated precision"))
                }
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = subject_rng(scenario.seed, i as u64);
        let g = i / size;
        let x = with_intercept(&covariates(&mut rng, m));
        times.push(weibull_time(&mut rng, (lin(&x, &p.beta) + effects[g]).exp(), p.alpha));
        rows.push(x);
        groups.push(g);
    }
    simple_dataset(
        &times,
        rows,
        covariate_names(m, true),
        scenario.censoring,
        DatasetExtras::Frailty { groups, n_groups },
    )
}

fn simulate_joint(scenario: &SimScenario, p: &JointParams64) -> Result<SurvivalDataset> {
    let n = scenario.n_subjects;
    let ms = p.beta_s.len() - 1;
    // longitudinal design is [1, time, covariates...]
    let ml = p.beta_l.len().saturating_sub(2);
    let m = ms.max(ml);
    let [s11, s12, s22] = p.sigma_b;
    let l11 = s11.sqrt();
    let l21 = s12 / l11;
    let l22 = (s22 - l21 * l21).sqrt();
    let horizon = match scenario.censoring {
        SimCensoring::Administrative { time } => time,
        _ => scenario.visit_interval * scenario.max_visits as f64,
    };
    let mut subjects = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = subject_rng(scenario.seed, i as u64);
        let x = covariates(&mut rng, m);
        let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let b = [l11 * z1, l21 * z1 + l22 * z2];
        let xs = with_intercept(&x[..ms]);
        let c = lin(&xs, &p.beta_s) + p.gamma * b[0];
        let t = joint_event_time(&mut rng, p.alpha, c, p.gamma * b[1], horizon);
        let noise: Vec<f64> =
            (0..scenario.max_visits).map(|_| rng.sample::<f64, _>(StandardNormal) * p.sigma).collect();
        subjects.push((x, xs, b, t, noise));
    }
    let times: Vec<f64> = subjects.iter().map(|s| s.3).collect();
    let cens = match scenario.censoring {
        SimCensoring::Rate { target } => Some(rate_target_time(&times, target)),
        _ => Some(horizon),
    };
    let mut obs = Vec::with_capacity(n);
    let mut surv_rows = Vec::with_capacity(n);
    let (mut subject, mut time, mut response, mut long_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (x, xs, b, t, noise)) in subjects.into_iter().enumerate() {
        let (o, _) = observation(i as u64 + 1, t, cens)?;
        let end = o.max_time();
        for (v, e) in noise.iter().enumerate() {
            let tv = v as f64 * scenario.visit_interval;
            if v > 0 && tv >= end {
                break;
            }
            let mut xl = vec![1.0];
            if p.beta_l.len() >= 2 {
                xl.push(tv);
            }
            xl.extend_from_slice(&x[..ml]);
            subject.push(i);
            time.push(tv);
            response.push(lin(&xl, &p.beta_l) + b[0] + b[1] * tv + e);
            long_rows.push(xl);
        }
        obs.push(o);
        surv_rows.push(xs);
    }
    let mut long_names = vec!["(Intercept)".to_string()];
    if p.beta_l.len() >= 2 {
        long_names.push("time".into());
    }
    long_names.extend((1..=ml).map(|j| format!("x{j}")));
    let long = Longitudinal { subject, time, response, design: DesignMatrix::from_rows(&long_rows, long_names)? };
    let design = DesignMatrix::from_rows(&surv_rows, covariate_names(ms, true))?;
    SurvivalDataset::new(obs, design, DatasetExtras::Joint(long))
}

// Straight-line reference likelihoods. They share no code with the model
// implementations and favour the obvious formula over numerical care.

fn ref_contribution(censoring: Censoring, log_h: impl Fn(f64) -> f64, cum_h: impl Fn(f64) -> f64) -> f64 {
    match censoring {
        Censoring::Exact(t) => log_h(t) - cum_h(t),
        Censoring::Right(t) => -cum_h(t),
        Censoring::Left(t) => (1.0 - (-cum_h(t)).exp()).ln(),
        Censoring::Interval(l, u) => ((-cum_h(l)).exp() - (-cum_h(u)).exp()).ln(),
    }
}

fn ref_weibull(rate: f64, alpha: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    (move |t: f64| (rate * alpha * t.powf(alpha - 1.0)).ln(), move |t: f64| rate * t.powf(alpha))
}

/// 15-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL15: [(f64, f64); 15] = [
    (-0.9879925180204854, 0.030753241996118647),
    (-0.937273392400706, 0.07036604748810807),
    (-0.8482065834104272, 0.10715922046717177),
    (-0.7244177313601701, 0.1395706779261539),
    (-0.5709721726085388, 0.16626920581699378),
    (-0.3941513470775634, 0.18616100001556188),
    (-0.20119409399743451, 0.19843148532711125),
    (0.0, 0.2025782419255609),
    (0.20119409399743451, 0.19843148532711125),
    (0.3941513470775634, 0.18616100001556188),
    (0.5709721726085388, 0.16626920581699378),
    (0.7244177313601701, 0.1395706779261539),
    (0.8482065834104272, 0.10715922046717177),
    (0.937273392400706, 0.07036604748810807),
    (0.9879925180204854, 0.030753241996118647),
];

/// Reference log-likelihood of `params` on `data`. The joint model is
/// evaluated with the 15-point rule only.
pub fn oracle_loglik(params: &FamilyParams, data: &SurvivalDataset) -> Result<f64> {
    let rows: Vec<&[f64]> = data.design.rows().collect();
    let mut total = 0.0;
    match params {
        FamilyParams::Aft(p) => {
            for (o, x) in data.observations.iter().zip(&rows) {
                let (lh, ch) = ref_weibull((-p.alpha * lin(x, &p.beta)).exp(), p.alpha);
                total += ref_contribution(o.censoring, lh, ch);
            }
        }
        FamilyParams::PiecewisePh { params: p, partition } => {
            let knots = partition.knots();
            for (o, x) in data.observations.iter().zip(&rows) {
                let risk = lin(x, &p.beta).exp();
                let cum = |t: f64| {
                    let mut h = 0.0;
                    for k in 0..p.lambdas.len() {
                        let lo = knots[k];
                        let hi = knots[k + 1].min(t);
                        if hi > lo {
                            h += p.lambdas[k] * (hi - lo);
                        }
                    }
                    h * risk
                };
                let log_h = |t: f64| {
                    let k = (0..p.lambdas.len()).find(|&k| t <= knots[k + 1]).unwrap_or(p.lambdas.len() - 1);
                    (p.lambdas[k] * risk).ln()
                };
                total += ref_contribution(o.censoring, log_h, cum);
            }
        }
        FamilyParams::Cure(p) => {
            let DatasetExtras::Cure { incidence } = &data.extras else {
                return Err(Error::Data("cure data needs an incidence design".into()));
            };
            for (i, (o, x)) in data.observations.iter().zip(&rows).enumerate() {
                let z = lin(incidence.row(i), &p.beta_c);
                let eta = z.exp() / (1.0 + z.exp());
                let rate = p.lambda * lin(x, &p.beta_u).exp();
                let su = |t: f64| (-rate * t.powf(p.alpha)).exp();
                let fu = |t: f64| rate * p.alpha * t.powf(p.alpha - 1.0) * su(t);
                total += match o.censoring {
                    Censoring::Exact(t) => ((1.0 - eta) * fu(t)).ln(),
                    Censoring::Right(t) => (eta + (1.0 - eta) * su(t)).ln(),
                    Censoring::Left(t) => ((1.0 - eta) * (1.0 - su(t))).ln(),
                    Censoring::Interval(l, u) => ((1.0 - eta) * (su(l) - su(u))).ln(),
                };
            }
        }
        FamilyParams::CompetingRisks(p) => {
            for (o, x) in data.observations.iter().zip(&rows) {
                let (t, cause) = match (o.censoring, o.event_label) {
                    (Censoring::Right(t), _) => (t, 0),
                    (Censoring::Exact(t), Some(k)) => (t, k as usize),
                    (Censoring::Exact(t), None) => (t, 1),
                    _ => return Err(Error::Data("competing risks takes exact or right-censored times".into())),
                };
                for k in 0..p.lambdas.len() {
                    let (lh, ch) = ref_weibull(p.lambdas[k] * lin(x, &p.beta[k]).exp(), p.alphas[k]);
                    if cause == k + 1 {
                        total += lh(t);
                    }
                    total -= ch(t);
                }
            }
        }
        FamilyParams::IllnessDeath(p) => {
            let DatasetExtras::IllnessDeath(recs) = &data.extras else {
                return Err(Error::Data("illness-death data needs transition records".into()));
            };
            for (r, x) in recs.iter().zip(&rows) {
                let t = [r.t1, r.t2, r.t3];
                for k in 0..3 {
                    let (lh, ch) = ref_weibull(p.lambdas[k] * lin(x, &p.beta[k]).exp(), p.alphas[k]);
                    if r.events[k] {
                        total += lh(t[k]);
                    }
                    total -= ch(t[k]);
                }
            }
        }
        FamilyParams::Frailty(p) => {
            let DatasetExtras::Frailty { groups, .. } = &data.extras else {
                return Err(Error::Data("frailty data needs group labels".into()));
            };
            for (i, (o, x)) in data.observations.iter().zip(&rows).enumerate() {
                let mult = match &p.frailty {
                    FrailtyTerm::Gamma { w, .. } => w[groups[i]],
                    FrailtyTerm::Normal { b, .. } => b[groups[i]].exp(),
                };
                let (lh, ch) = ref_weibull(mult * lin(x, &p.beta).exp(), p.alpha);
                total += ref_contribution(o.censoring, lh, ch);
            }
            match &p.frailty {
                FrailtyTerm::Gamma { psi, w } => {
                    let d = statrs::distribution::Gamma::new(*psi, *psi)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    total += w.iter().map(|&v| statrs::distribution::Continuous::ln_pdf(&d, v)).sum::<f64>();
                }
                FrailtyTerm::Normal { tau, b } => {
                    let d = statrs::distribution::Normal::new(0.0, 1.0 / tau.sqrt())
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    total += b.iter().map(|&v| statrs::distribution::Continuous::ln_pdf(&d, v)).sum::<f64>();
                }
            }
        }
        FamilyParams::Joint(p) => {
            let DatasetExtras::Joint(long) = &data.extras else {
                return Err(Error::Data("joint data needs longitudinal records".into()));
            };
            let norm =
                statrs::distribution::Normal::new(0.0, p.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for j in 0..long.len() {
                let b = p.b[long.subject[j]];
                let mu = lin(long.design.row(j), &p.beta_l) + b[0] + b[1] * long.time[j];
                total += statrs::distribution::Continuous::ln_pdf(&norm, long.response[j] - mu);
            }
            let [s11, s12, s22] = p.sigma_b;
            let det = s11 * s22 - s12 * s12;
            for (i, (o, x)) in data.observations.iter().zip(&rows).enumerate() {
                let b = p.b[i];
                let h =
                    |u: f64| p.alpha * u.powf(p.alpha - 1.0) * (lin(x, &p.beta_s) + p.gamma * (b[0] + b[1] * u)).exp();
                let (t, event) = match o.censoring {
                    Censoring::Exact(t) => (t, true),
                    Censoring::Right(t) => (t, false),
                    _ => return Err(Error::Data("joint model takes exact or right-censored times".into())),
                };
                if t > 0.0 {
                    let cum: f64 = GL15.iter().map(|&(xk, wk)| wk * h(t / 2.0 * (xk + 1.0))).sum::<f64>() * t / 2.0;
                    total -= cum;
                    if event {
                        total += h(t).ln();
                    }
                }
                let quad = (s22 * b[0] * b[0] - 2.0 * s12 * b[0] * b[1] + s11 * b[1] * b[1]) / det;
                total += -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weibull_truth() -> FamilyParams {
        FamilyParams::Aft(AftParams64 { beta: vec![0.0], alpha: 1.0 })
    }

    #[test]
    fn exponential_survival_at_one() {
        let data = simulate(&SimScenario::new(weibull_truth(), 100_000).with_seed(3)).unwrap();
        let alive = data.observations.iter().filter(|o| o.max_time() > 1.0).count() as f64 / 1e5;
        assert!((alive - (-1.0f64).exp()).abs() < 0.005, "{alive}");
    }

    #[test]
    fn deterministic_in_seed() {
        let s = SimScenario::new(weibull_truth(), 50).with_censoring(SimCensoring::Rate { target: 0.3 });
        assert_eq!(simulate(&s).unwrap(), simulate(&s).unwrap());
        assert_ne!(simulate(&s).unwrap(), simulate(&s.clone().with_seed(2)).unwrap());
    }

    #[test]
    fn all_cured_means_no_events() {
        let truth = FamilyParams::Cure(CureParams64 { beta_c: vec![50.0], beta_u: vec![], lambda: 1.0, alpha: 1.0 });
        let data = simulate(&SimScenario::new(truth, 200)).unwrap();
        assert!(data.observations.iter().all(|o| !o.is_event()));
    }

    #[test]
    fn censoring_rate_is_hit() {
        let s = SimScenario::new(weibull_truth(), 1000).with_censoring(SimCensoring::Rate { target: 0.25 });
        let data = simulate(&s).unwrap();
        let censored = data.observations.iter().filter(|o| !o.is_event()).count();
        assert!((censored as i64 - 250).abs() <= 1, "{censored}");
    }

    #[test]
    fn piecewise_inversion() {
        let mut rng = subject_rng(1, 0);
        let knots = [0.0, 1.0, 3.0];
        let n = 50_000;
        let times: Vec<f64> = (0..n).map(|_| piecewise_time(&mut rng, &knots, &[0.5, 2.0])).collect();
        for t in [0.5_f64, 1.0, 2.0, 4.0] {
            let h = 0.5 * t.min(1.0) + 2.0 * (t - 1.0).max(0.0);
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            assert!((emp - (-h).exp()).abs() < 0.01, "{t}: {emp}");
        }
    }

    #[test]
    fn joint_thinning_matches_cumulative_hazard() {
        let (alpha, c, d) = (0.8, -1.0, 0.4);
        let mut rng = subject_rng(5, 0);
        let n = 40_000;
        let times: Vec<f64> = (0..n).map(|_| joint_event_time(&mut rng, alpha, c, d, 5.0)).collect();
        for t in [0.5, 2.0, 4.0] {
            let (h, _) = crate::quadrature::gauss_kronrod(
                |u: f64| alpha * u.powf(alpha - 1.0) * (c + d * u).exp(),
                0.0,
                t,
                1e-10,
            )
            .unwrap();
            let emp = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            assert!((emp - (-h).exp()).abs() < 0.01, "{t}: {emp}");
        }
    }
}

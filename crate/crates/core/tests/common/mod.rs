#![allow(dead_code)]

use bayesurv::likelihood::FrailtyTerm;
use bayesurv::model::Model;
use bayesurv::sim::{simulate, FamilyParams, SimCensoring, SimScenario};
use bayesurv::{
    AftParams64, CompetingRisksParams64, CureParams64, Family, FamilyModel, FrailtyParams64, IllnessDeathParams64,
    JointParams64, PhParams64, SurvivalDataset, TimePartition,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameter draws used by the recovery runs, one scenario per family.
pub fn recovery_scenarios(seed: u64) -> Vec<(&'static str, SimScenario)> {
    let joint = {
        let truth = FamilyParams::Joint(JointParams64 {
            beta_l: vec![4.0, -0.2, 0.3],
            beta_s: vec![0.1f64.ln(), 0.5],
            gamma: -0.5,
            alpha: 1.2,
            sigma: 0.3,
            sigma_b: [0.5, 0.05, 0.1],
            b: vec![],
        });
        let mut s = SimScenario::new(truth, 200).with_censoring(SimCensoring::Administrative { time: 6.0 });
        s.max_visits = 6;
        s
    };
    let scenarios = vec![
        (
            "aft",
            SimScenario::new(FamilyParams::Aft(AftParams64 { beta: vec![1.5, -0.5, 0.8], alpha: 1.3 }), 500)
                .with_censoring(SimCensoring::Rate { target: 0.2 }),
        ),
        (
            "ph",
            SimScenario::new(
                FamilyParams::PiecewisePh {
                    params: PhParams64 { beta: vec![0.5, -0.7], lambdas: vec![0.3, 0.5, 0.8] },
                    partition: TimePartition::new(vec![0.0, 1.0, 2.0, 4.0]).unwrap(),
                },
                500,
            ),
        ),
        (
            "cure",
            SimScenario::new(
                FamilyParams::Cure(CureParams64 {
                    beta_c: vec![-0.5, 1.0],
                    beta_u: vec![0.6],
                    lambda: 0.5,
                    alpha: 1.2,
                }),
                500,
            )
            .with_censoring(SimCensoring::Administrative { time: 8.0 }),
        ),
        (
            "competing_risks",
            SimScenario::new(
                FamilyParams::CompetingRisks(CompetingRisksParams64 {
                    beta: vec![vec![0.5, -0.3], vec![-0.4, 0.6]],
                    lambdas: vec![0.2, 0.1],
                    alphas: vec![1.2, 0.8],
                }),
                500,
            )
            .with_censoring(SimCensoring::Rate { target: 0.2 }),
        ),
        (
            "illness_death",
            SimScenario::new(
                FamilyParams::IllnessDeath(IllnessDeathParams64 {
                    beta: vec![vec![0.3], vec![-0.2], vec![0.5]],
                    lambdas: vec![0.1, 0.05, 0.2],
                    alphas: vec![1.1, 0.9, 1.2],
                }),
                500,
            )
            .with_censoring(SimCensoring::Administrative { time: 10.0 }),
        ),
        (
            "frailty",
            SimScenario::new(
                FamilyParams::Frailty(FrailtyParams64 {
                    beta: vec![0.1f64.ln(), -0.8],
                    alpha: 1.2,
                    frailty: FrailtyTerm::Gamma { psi: 2.0, w: vec![] },
                }),
                500,
            ),
        ),
        ("joint", joint),
    ];
    scenarios.into_iter().map(|(n, s)| (n, s.with_seed(seed))).collect()
}

fn unif(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn coefs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| unif(rng, -0.8, 0.8)).collect()
}

/// Random parameters of `family` together with a dataset simulated from
/// them, with latent effects filled in for the simulated structure.
pub fn random_case(family: Family, seed: u64) -> (FamilyParams, SurvivalDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 40;
    let alpha = |rng: &mut ChaCha8Rng| unif(rng, 0.6, 1.8);
    let truth = match family {
        Family::Aft => {
            let mut beta = coefs(&mut rng, 3);
            beta[0] = unif(&mut rng, 0.0, 1.5);
            FamilyParams::Aft(AftParams64 { beta, alpha: alpha(&mut rng) })
        }
        Family::PiecewisePh => FamilyParams::PiecewisePh {
            params: PhParams64 {
                beta: coefs(&mut rng, 2),
                lambdas: (0..3).map(|_| unif(&mut rng, 0.1, 1.0)).collect(),
            },
            partition: TimePartition::new(vec![0.0, 0.7, 1.5, 6.0]).unwrap(),
        },
        Family::Cure => FamilyParams::Cure(CureParams64 {
            beta_c: coefs(&mut rng, 2),
            beta_u: coefs(&mut rng, 2),
            lambda: unif(&mut rng, 0.2, 1.5),
            alpha: alpha(&mut rng),
        }),
        Family::CompetingRisks => {
            let k = rng.random_range(1..=3usize);
            FamilyParams::CompetingRisks(CompetingRisksParams64 {
                beta: (0..k).map(|_| coefs(&mut rng, 2)).collect(),
                lambdas: (0..k).map(|_| unif(&mut rng, 0.1, 0.6)).collect(),
                alphas: (0..k).map(|_| alpha(&mut rng)).collect(),
            })
        }
        Family::IllnessDeath => FamilyParams::IllnessDeath(IllnessDeathParams64 {
            beta: (0..3).map(|_| coefs(&mut rng, 2)).collect(),
            lambdas: (0..3).map(|_| unif(&mut rng, 0.05, 0.5)).collect(),
            alphas: (0..3).map(|_| alpha(&mut rng)).collect(),
        }),
        Family::Frailty => {
            let frailty = if rng.random::<bool>() {
                FrailtyTerm::Gamma { psi: unif(&mut rng, 0.5, 4.0), w: vec![] }
            } else {
                FrailtyTerm::Normal { tau: unif(&mut rng, 0.5, 4.0), b: vec![] }
            };
            FamilyParams::Frailty(FrailtyParams64 { beta: coefs(&mut rng, 2), alpha: alpha(&mut rng), frailty })
        }
        Family::Joint => FamilyParams::Joint(JointParams64 {
            beta_l: coefs(&mut rng, 3),
            beta_s: coefs(&mut rng, 2),
            gamma: unif(&mut rng, -1.0, 1.0),
            alpha: alpha(&mut rng),
            sigma: unif(&mut rng, 0.2, 1.0),
            sigma_b: [unif(&mut rng, 0.2, 1.0), unif(&mut rng, -0.1, 0.1), unif(&mut rng, 0.05, 0.4)],
            b: vec![],
        }),
    };
    let censoring = match family {
        Family::Cure | Family::Joint | Family::IllnessDeath => SimCensoring::Administrative { time: 5.0 },
        Family::PiecewisePh => SimCensoring::None,
        _ => SimCensoring::Rate { target: 0.3 },
    };
    let scenario = SimScenario::new(truth.clone(), n).with_censoring(censoring).with_seed(seed);
    let data = simulate(&scenario).expect("simulation");
    let truth = match truth {
        FamilyParams::Frailty(mut p) => {
            let groups = match &data.extras {
                bayesurv::DatasetExtras::Frailty { n_groups, .. } => *n_groups,
                _ => unreachable!(),
            };
            p.frailty = match p.frailty {
                FrailtyTerm::Gamma { psi, .. } => {
                    FrailtyTerm::Gamma { psi, w: (0..groups).map(|_| unif(&mut rng, 0.2, 3.0)).collect() }
                }
                FrailtyTerm::Normal { tau, .. } => {
                    FrailtyTerm::Normal { tau, b: (0..groups).map(|_| unif(&mut rng, -1.0, 1.0)).collect() }
                }
            };
            FamilyParams::Frailty(p)
        }
        FamilyParams::Joint(mut p) => {
            p.b = (0..data.len()).map(|_| [unif(&mut rng, -0.8, 0.8), unif(&mut rng, -0.3, 0.3)]).collect();
            FamilyParams::Joint(p)
        }
        other => other,
    };
    (truth, data)
}

/// Model spec matching the structure of `truth`.
pub fn spec_for(truth: &FamilyParams) -> bayesurv::ModelSpec {
    SimScenario::new(truth.clone(), 1).model_spec()
}

/// Parameter vector of `model` holding the values of `truth`, latents included.
pub fn theta_of(model: &FamilyModel, truth: &FamilyParams) -> Vec<f64> {
    let named = truth.named_values();
    model
        .layout()
        .names()
        .iter()
        .map(|name| {
            if let Some((_, v)) = named.iter().find(|(n, _)| n == name) {
                return *v;
            }
            latent_value(truth, name).unwrap_or_else(|| panic!("no value for {name}"))
        })
        .collect()
}

fn latent_value(truth: &FamilyParams, name: &str) -> Option<f64> {
    let inner = name.split_once('[')?.1.strip_suffix(']')?;
    let idx: Vec<usize> = inner.split(',').map(|s| s.parse().ok()).collect::<Option<_>>()?;
    match truth {
        FamilyParams::Frailty(p) => match &p.frailty {
            FrailtyTerm::Gamma { w, .. } if name.starts_with("w[") => w.get(idx[0] - 1).copied(),
            FrailtyTerm::Normal { b, .. } if name.starts_with("b[") => b.get(idx[0] - 1).copied(),
            _ => None,
        },
        FamilyParams::Joint(p) if name.starts_with("b[") => p.b.get(idx[0] - 1).map(|b| b[idx[1] - 1]),
        _ => None,
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Outcome of sampling the exponential/gamma conjugate posterior.
pub struct ConjugateRun {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub want_mean: f64,
    pub want_variance: f64,
    pub seconds: f64,
}

impl ConjugateRun {
    pub fn within(&self, n_se: f64) -> bool {
        (self.mean - self.want_mean).abs() < n_se * self.mean_se
            && (self.variance - self.want_variance).abs() < n_se * self.variance_se
    }
}

/// Four exact unit failure times under a constant hazard with a
/// Gamma(0.01, 0.01) prior, whose posterior is Gamma(4.01, 4.01).
pub fn conjugate_run(seed: u64) -> ConjugateRun {
    use bayesurv::diagnostics::time_series_se;
    use bayesurv::{run_chains, CensoredObservation, Censoring, ChainConfig, DatasetExtras, DesignMatrix, ModelSpec};

    let start = std::time::Instant::now();
    let obs = (0..4).map(|i| CensoredObservation::new(i, Censoring::Exact(1.0)).unwrap()).collect();
    let data = SurvivalDataset::new(obs, DesignMatrix::empty(4), DatasetExtras::None).unwrap();
    let spec = ModelSpec::new(Family::PiecewisePh).with_partition(TimePartition::new(vec![0.0, 2.0]).unwrap());
    let model = FamilyModel::new(spec, data).unwrap();
    let config = ChainConfig { n_chains: 4, burn_in: 2000, n_iter: 50_000, thin: 5, seed, ..ChainConfig::default() };
    let samples = run_chains(&model, &config).unwrap();
    let (shape, rate) = (4.01, 4.01);
    let want_mean = shape / rate;
    let chains = samples.chains_of("lambda[1]").unwrap();
    let pooled_se = |per_chain: Vec<f64>| -> f64 {
        let m = per_chain.len() as f64;
        (per_chain.iter().map(|s| s * s).sum::<f64>()).sqrt() / m
    };
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let sq: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| (v - want_mean).powi(2)).collect()).collect();
    let variance = sq.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).sum::<f64>() / sq.len() as f64;
    ConjugateRun {
        mean,
        mean_se: pooled_se(chains.iter().map(|c| time_series_se(c)).collect()),
        variance,
        variance_se: pooled_se(sq.iter().map(|c| time_series_se(c)).collect()),
        want_mean,
        want_variance: shape / (rate * rate),
        seconds: start.elapsed().as_secs_f64(),
    }
}

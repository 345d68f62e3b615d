use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::optimize::find_mode;
use super::ChainConfig;
use crate::error::{Error, Result};
use crate::model::{Block, BlockKind, Model};

const SCALAR_TARGET: f64 = 0.44;
const BLOCK_TARGET: f64 = 0.234;
const INIT_ATTEMPTS: usize = 100;

/// Shared starting information computed once before the chains run.
pub(super) struct Start {
    u: Vec<f64>,
    /// Per-coordinate scale on the unconstrained space (0 for latents).
    sd: Vec<f64>,
    opt: Vec<usize>,
    cov: DMatrix<f64>,
}

impl Start {
    pub(super) fn new<M: Model>(model: &M) -> Result<Self> {
        let layout = model.layout();
        let u0 = layout.unconstrain(&model.initial_values())?;
        if !eval(model, &u0).1.is_finite() {
            return Err(Error::Initialization(1));
        }
        let opt = layout.optimized_indices();
        let mode = find_mode(model, &u0, &opt);
        let mut sd = vec![0.0; layout.dim()];
        for &j in &layout.global_indices() {
            sd[j] = 0.3;
        }
        for (k, &j) in opt.iter().enumerate() {
            sd[j] = mode.cov[(k, k)].sqrt();
        }
        Ok(Start { u: mode.u, sd, opt, cov: mode.cov })
    }
}

pub(super) struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    pub acceptance: BTreeMap<String, f64>,
}

pub(super) fn output_names<M: Model>(model: &M, config: &ChainConfig) -> Vec<String> {
    let layout = model.layout();
    let mut names: Vec<String> =
        layout.blocks.iter().filter(|b| !b.is_latent()).flat_map(|b| b.names.iter().cloned()).collect();
    names.extend(model.derived_names());
    if config.keep_latent {
        names.extend(layout.latent_blocks().flat_map(|b| b.names.iter().cloned()));
    }
    names
}

fn eval<M: Model>(model: &M, u: &[f64]) -> (Vec<f64>, f64) {
    let (theta, lj) = model.layout().constrain(u);
    let lp = model.log_density(&theta);
    let lp = if lp.is_nan() { f64::NEG_INFINITY } else { lp + lj };
    (theta, lp)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn accept(rng: &mut ChaCha8Rng, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Acceptance counts and a log proposal scale with diminishing adaptation.
#[derive(Clone)]
struct Tuner {
    log_scale: f64,
    target: f64,
    accepted: usize,
    tried: usize,
    post_accepted: usize,
    post_tried: usize,
}

impl Tuner {
    fn new(scale: f64, target: f64) -> Self {
        Self { log_scale: scale.ln(), target, accepted: 0, tried: 0, post_accepted: 0, post_tried: 0 }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, ok: bool, burn_in: bool) {
        if burn_in {
            self.tried += 1;
            self.accepted += ok as usize;
        } else {
            self.post_tried += 1;
            self.post_accepted += ok as usize;
        }
    }

    fn adapt(&mut self, delta: f64) {
        if self.tried == 0 {
            return;
        }
        let rate = self.accepted as f64 / self.tried as f64;
        let far = !(0.02..=0.98).contains(&rate);
        let step = if far { 3.0 * delta } else { delta };
        self.log_scale += if rate > self.target { step } else { -step };
        self.log_scale = self.log_scale.clamp(-25.0, 5.0);
        self.accepted = 0;
        self.tried = 0;
    }

    fn rate(&self) -> f64 {
        if self.post_tried == 0 {
            f64::NAN
        } else {
            self.post_accepted as f64 / self.post_tried as f64
        }
    }
}

/// Running mean and covariance (Welford).
struct Moments {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self { n: 0, mean: DVector::zeros(d), m2: DMatrix::zeros(d, d) }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    /// Cholesky factor of the sample covariance, if well conditioned.
    fn cholesky(&self) -> Option<DMatrix<f64>> {
        if self.n < 2 {
            return None;
        }
        let d = self.mean.len();
        let cov = &self.m2 / (self.n - 1) as f64 + DMatrix::identity(d, d) * 1e-10;
        cov.cholesky().map(|c| c.l())
    }
}

/// Random-walk block with a full proposal covariance.
struct MultiBlock {
    idx: Vec<usize>,
    chol: DMatrix<f64>,
    tuner: Tuner,
    moments: Moments,
}

impl MultiBlock {
    fn new(idx: Vec<usize>, chol: DMatrix<f64>, scale: f64, target: f64) -> Self {
        let d = idx.len();
        Self { idx, chol, tuner: Tuner::new(scale, target), moments: Moments::new(d) }
    }

    fn step(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_iterator(self.idx.len(), (0..self.idx.len()).map(|_| normal(rng)));
        &self.chol * z * self.tuner.scale()
    }

    fn observe(&mut self, u: &[f64]) {
        self.moments.push(&DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| u[i])));
    }

    fn adapt(&mut self, delta: f64) {
        self.tuner.adapt(delta);
        let d = self.idx.len();
        if self.moments.n >= (10 * d).max(100) {
            if let Some(l) = self.moments.cholesky() {
                self.chol = l;
            }
        }
    }
}

struct Latent<'a> {
    block: &'a Block,
    group: usize,
    /// Scalar tuner for one-dimensional blocks, otherwise `None`.
    scalar: Option<Tuner>,
    multi: Option<MultiBlock>,
}

struct Chain<'a, M> {
    model: &'a M,
    u: Vec<f64>,
    theta: Vec<f64>,
    lp: f64,
    scalars: Vec<(usize, Tuner)>,
    joint: Option<MultiBlock>,
    latents: Vec<Latent<'a>>,
}

impl<M: Model> Chain<'_, M> {
    fn scalar_sweep(&mut self, rng: &mut ChaCha8Rng, burn_in: bool) {
        for k in 0..self.scalars.len() {
            let (j, ref tuner) = self.scalars[k];
            let old = self.u[j];
            self.u[j] = old + tuner.scale() * normal(rng);
            let (theta, lp) = eval(self.model, &self.u);
            let ok = accept(rng, lp - self.lp);
            if ok {
                self.theta = theta;
                self.lp = lp;
            } else {
                self.u[j] = old;
            }
            self.scalars[k].1.record(ok, burn_in);
        }
    }

    fn joint_step(&mut self, rng: &mut ChaCha8Rng, burn_in: bool) {
        let Some(block) = self.joint.as_mut() else { return };
        let step = block.step(rng);
        let old: Vec<f64> = block.idx.iter().map(|&i| self.u[i]).collect();
        for (k, &i) in block.idx.iter().enumerate() {
            self.u[i] += step[k];
        }
        let (theta, lp) = eval(self.model, &self.u);
        let ok = accept(rng, lp - self.lp);
        if ok {
            self.theta = theta;
            self.lp = lp;
        } else {
            for (k, &i) in block.idx.iter().enumerate() {
                self.u[i] = old[k];
            }
        }
        block.tuner.record(ok, burn_in);
        if burn_in {
            block.observe(&self.u);
        }
    }

    fn latent_sweep(&mut self, rng: &mut ChaCha8Rng, burn_in: bool) {
        if self.latents.is_empty() {
            return;
        }
        for lat in &mut self.latents {
            let r = lat.block.range();
            let lj_now = lat.block.constrain(&self.u[r.clone()], &mut self.theta[r.clone()]);
            let now = self.model.local_log_density(lat.group, &self.theta) + lj_now;
            let old_u: Vec<f64> = self.u[r.clone()].to_vec();
            let old_theta: Vec<f64> = self.theta[r.clone()].to_vec();
            match (&lat.scalar, &lat.multi) {
                (Some(t), _) => self.u[r.start] += t.scale() * normal(rng),
                (None, Some(m)) => {
                    let step = m.step(rng);
                    for (k, i) in r.clone().enumerate() {
                        self.u[i] += step[k];
                    }
                }
                (None, None) => unreachable!(),
            }
            let lj = lat.block.constrain(&self.u[r.clone()], &mut self.theta[r.clone()]);
            let prop = self.model.local_log_density(lat.group, &self.theta) + lj;
            let ok = accept(rng, prop - now);
            if !ok {
                self.u[r.clone()].copy_from_slice(&old_u);
                self.theta[r.clone()].copy_from_slice(&old_theta);
            }
            match (&mut lat.scalar, &mut lat.multi) {
                (Some(t), _) => t.record(ok, burn_in),
                (None, Some(m)) => {
                    m.tuner.record(ok, burn_in);
                    if burn_in {
                        m.observe(&self.u);
                    }
                }
                (None, None) => unreachable!(),
            }
        }
        let (theta, lp) = eval(self.model, &self.u);
        self.theta = theta;
        self.lp = lp;
    }

    fn adapt(&mut self, delta: f64) {
        for (_, t) in &mut self.scalars {
            t.adapt(delta);
        }
        if let Some(b) = self.joint.as_mut() {
            b.adapt(delta);
        }
        for lat in &mut self.latents {
            if let Some(t) = lat.scalar.as_mut() {
                t.adapt(delta);
            }
            if let Some(m) = lat.multi.as_mut() {
                m.adapt(delta);
            }
        }
    }

    fn record(&self, keep_latent: bool) -> Vec<f64> {
        let layout = self.model.layout();
        let mut row: Vec<f64> = layout
            .blocks
            .iter()
            .filter(|b| !b.is_latent())
            .flat_map(|b| self.theta[b.range()].iter().copied())
            .collect();
        row.extend(self.model.derived(&self.theta));
        if keep_latent {
            row.extend(layout.latent_blocks().flat_map(|b| self.theta[b.range()].iter().copied()));
        }
        row
    }

    fn acceptance(&self) -> BTreeMap<String, f64> {
        let names = self.model.layout().names();
        let mut out = BTreeMap::new();
        for (j, t) in &self.scalars {
            out.insert(names[*j].clone(), t.rate());
        }
        if let Some(b) = &self.joint {
            out.insert("joint".into(), b.tuner.rate());
        }
        if !self.latents.is_empty() {
            let rates: Vec<f64> = self
                .latents
                .iter()
                .map(|l| l.scalar.as_ref().map_or_else(|| l.multi.as_ref().unwrap().tuner.rate(), |t| t.rate()))
                .collect();
            out.insert("latent".into(), rates.iter().sum::<f64>() / rates.len() as f64);
        }
        out
    }
}

pub(super) fn run_chain<M: Model>(model: &M, config: &ChainConfig, chain: usize, start: &Start) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let layout = model.layout();

    // overdispersed start around the mode
    let mut init = None;
    for _ in 0..INIT_ATTEMPTS {
        let u: Vec<f64> =
            start.u.iter().zip(&start.sd).map(|(&m, &s)| m + (2.0 * s).min(3.0) * normal(&mut rng)).collect();
        let (theta, lp) = eval(model, &u);
        if lp.is_finite() {
            init = Some((u, theta, lp));
            break;
        }
    }
    let (u, theta, lp) = init.ok_or(Error::Initialization(INIT_ATTEMPTS))?;

    let scalars = layout
        .global_indices()
        .into_iter()
        .map(|j| (j, Tuner::new(start.sd[j].clamp(1e-3, 5.0), SCALAR_TARGET)))
        .collect();
    let joint = (start.opt.len() >= 2).then(|| {
        let d = start.opt.len();
        let chol = start.cov.clone().cholesky().map(|c| c.l()).unwrap_or_else(|| DMatrix::identity(d, d) * 0.1);
        MultiBlock::new(start.opt.clone(), chol, 2.38 / (d as f64).sqrt(), BLOCK_TARGET)
    });
    let latents = layout
        .latent_blocks()
        .map(|b| {
            let BlockKind::Latent { group } = b.kind else { unreachable!() };
            if b.len() == 1 {
                Latent { block: b, group, scalar: Some(Tuner::new(0.5, SCALAR_TARGET)), multi: None }
            } else {
                let d = b.len();
                let multi = MultiBlock::new(b.range().collect(), DMatrix::identity(d, d), 0.1, BLOCK_TARGET);
                Latent { block: b, group, scalar: None, multi: Some(multi) }
            }
        })
        .collect();
    let mut state = Chain { model, u, theta, lp, scalars, joint, latents };

    let mut n_adapt = 0usize;
    for it in 0..config.burn_in {
        state.scalar_sweep(&mut rng, true);
        state.joint_step(&mut rng, true);
        state.latent_sweep(&mut rng, true);
        if (it + 1) % config.adapt_window == 0 {
            n_adapt += 1;
            state.adapt((1.0 / (n_adapt as f64).sqrt()).min(0.5));
        }
    }

    let mut draws = Vec::with_capacity(config.draws_per_chain());
    for it in 1..=config.n_iter {
        state.scalar_sweep(&mut rng, false);
        state.joint_step(&mut rng, false);
        state.latent_sweep(&mut rng, false);
        if it % config.thin == 0 {
            draws.push(state.record(config.keep_latent));
        }
    }
    Ok(ChainOutput { draws, acceptance: state.acceptance() })
}

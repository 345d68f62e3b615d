//! Model specification, parameter layout and the log-posterior of each family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::prior::resolve;
use crate::likelihood::{
    aft_loglik, competing_risks_loglik, cure_loglik, frailty_group_loglik, frailty_loglik, illness_death_loglik,
    joint_loglik, joint_subject_loglik, ph_piecewise_loglik, AftParams, CompetingRisksParams, CureParams,
    FrailtyParams, FrailtyTerm, FrailtyVariant, IllnessDeathParams, JointParams, PhParams, Prior, PriorSpec,
};
use crate::mcmc::transform::{log_cholesky_constrain, log_cholesky_unconstrain, Support};
use crate::quadrature::{gauss_legendre, GlRule};
use crate::scalar::Real;
use crate::survival::{Censoring, DatasetExtras, SurvivalDataset, TimePartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Aft,
    #[serde(rename = "ph")]
    PiecewisePh,
    Cure,
    CompetingRisks,
    IllnessDeath,
    Frailty,
    Joint,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Aft,
        Family::PiecewisePh,
        Family::Cure,
        Family::CompetingRisks,
        Family::IllnessDeath,
        Family::Frailty,
        Family::Joint,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Aft => "aft",
            Family::PiecewisePh => "ph",
            Family::Cure => "cure",
            Family::CompetingRisks => "competing_risks",
            Family::IllnessDeath => "illness_death",
            Family::Frailty => "frailty",
            Family::Joint => "joint",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
    }
}

/// Family tag plus the structural choices each family needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub priors: PriorSpec,
    /// Baseline partition of the piecewise PH model.
    #[serde(default)]
    pub partition: Option<TimePartition>,
    /// Number of competing causes.
    #[serde(default = "default_risks")]
    pub n_risks: usize,
    /// Gauss-Legendre order of the joint model's survival integral.
    #[serde(default = "default_gl")]
    pub gl_order: usize,
    #[serde(default)]
    pub frailty: FrailtyVariant,
}

fn default_risks() -> usize {
    2
}

fn default_gl() -> usize {
    15
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            priors: PriorSpec::new(),
            partition: None,
            n_risks: default_risks(),
            gl_order: default_gl(),
            frailty: FrailtyVariant::default(),
        }
    }

    pub fn with_partition(mut self, partition: TimePartition) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn with_risks(mut self, n_risks: usize) -> Self {
        self.n_risks = n_risks;
        self
    }

    pub fn with_prior(mut self, name: &str, prior: Prior) -> Self {
        self.priors.insert(name.to_string(), prior);
        self
    }

    pub fn with_frailty(mut self, variant: FrailtyVariant) -> Self {
        self.frailty = variant;
        self
    }
}

/// How a block of coordinates maps to the unconstrained space.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Elementwise(Vec<Support>),
    /// A 2x2 covariance stored as `(Sigma11, Sigma12, Sigma22)`.
    LogCholesky2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Global parameter; `optimize` marks it for the mode search and the
    /// joint random-walk block.
    Global { optimize: bool },
    /// Latent effect of one group or subject.
    Latent { group: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub offset: usize,
    pub names: Vec<String>,
    pub kind: BlockKind,
    pub transform: Transform,
}

impl Block {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn is_latent(&self) -> bool {
        matches!(self.kind, BlockKind::Latent { .. })
    }

    /// Constrained values of the block and their log-Jacobian.
    pub fn constrain<T: Real>(&self, u: &[T], out: &mut [T]) -> T {
        match &self.transform {
            Transform::Elementwise(supports) => {
                let mut lj = T::zero();
                for ((s, &ui), o) in supports.iter().zip(u).zip(out.iter_mut()) {
                    let (x, j) = s.constrain(ui);
                    *o = x;
                    lj = lj + j;
                }
                lj
            }
            Transform::LogCholesky2 => {
                let (s, lj) = log_cholesky_constrain([u[0], u[1], u[2]]);
                out.copy_from_slice(&s);
                lj
            }
        }
    }

    pub fn unconstrain(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.transform {
            Transform::Elementwise(supports) => {
                for (((s, &xi), o), name) in supports.iter().zip(x).zip(out.iter_mut()).zip(&self.names) {
                    *o = s.unconstrain(xi).map_err(|e| Error::InvalidParameter(format!("{name}: {e}")))?;
                }
            }
            Transform::LogCholesky2 => out.copy_from_slice(&log_cholesky_unconstrain([x[0], x[1], x[2]])?),
        }
        Ok(())
    }
}

/// Ordered blocks covering every coordinate of a model's parameter vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub blocks: Vec<Block>,
    dim: usize,
}

impl Layout {
    pub fn push(&mut self, names: Vec<String>, kind: BlockKind, transform: Transform) {
        let offset = self.dim;
        self.dim += names.len();
        self.blocks.push(Block { offset, names, kind, transform });
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> Vec<String> {
        self.blocks.iter().flat_map(|b| b.names.iter().cloned()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.blocks.iter().find_map(|b| b.names.iter().position(|n| n == name).map(|k| b.offset + k))
    }

    /// Coordinates of global parameters, in layout order.
    pub fn global_indices(&self) -> Vec<usize> {
        self.blocks.iter().filter(|b| !b.is_latent()).flat_map(|b| b.range()).collect()
    }

    /// Coordinates that take part in the mode search.
    pub fn optimized_indices(&self) -> Vec<usize> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Global { optimize: true }).flat_map(|b| b.range()).collect()
    }

    pub fn latent_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.is_latent())
    }

    pub fn constrain<T: Real>(&self, u: &[T]) -> (Vec<T>, T) {
        let mut theta = vec![T::zero(); self.dim];
        let mut lj = T::zero();
        for b in &self.blocks {
            let r = b.range();
            lj = lj + b.constrain(&u[r.clone()], &mut theta[r]);
        }
        (theta, lj)
    }

    pub fn unconstrain(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim {
            return Err(Error::Dimension(format!("{} values for {} parameters", theta.len(), self.dim)));
        }
        let mut u = vec![0.0; self.dim];
        for b in &self.blocks {
            let r = b.range();
            b.unconstrain(&theta[r.clone()], &mut u[r])?;
        }
        Ok(u)
    }
}

/// A target density the sampler can work with.
pub trait Model: Sync {
    fn layout(&self) -> &Layout;

    /// Log-posterior at constrained parameters; `-inf` outside the support.
    fn log_density<T: Real>(&self, theta: &[T]) -> T;

    /// Terms of the log-posterior that involve latent group `group`.
    fn local_log_density(&self, _group: usize, _theta: &[f64]) -> f64 {
        unreachable!("model has no latent blocks")
    }

    /// Starting point in the constrained space.
    fn initial_values(&self) -> Vec<f64>;

    /// Names of quantities computed from each draw.
    fn derived_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn derived(&self, _theta: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

fn indexed(group: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{group}[{j}]")).collect()
}

fn matrix_names(group: &str, p: usize, k: usize) -> Vec<String> {
    (1..=k).flat_map(|kk| (1..=p).map(move |l| format!("{group}[{l},{kk}]"))).collect()
}

/// Parameter roles, used for default priors and supports.
#[derive(Clone, Copy)]
enum Role {
    Coefficient,
    Scale,
    Shape,
    Precision,
    ResidualSd,
}

impl Role {
    fn default_prior(self) -> Prior {
        match self {
            Role::Coefficient => Prior::vague_normal(),
            Role::Scale | Role::Precision => Prior::vague_gamma(),
            Role::Shape => Prior::Uniform { lower: 0.0, upper: 10.0 },
            Role::ResidualSd => Prior::Uniform { lower: 0.0, upper: 100.0 },
        }
    }

    fn natural(self) -> Support {
        match self {
            Role::Coefficient => Support::REAL,
            _ => Support::POSITIVE,
        }
    }
}

/// A family model bound to its data: the object the sampler runs on.
#[derive(Debug, Clone)]
pub struct FamilyModel {
    pub spec: ModelSpec,
    pub data: SurvivalDataset,
    layout: Layout,
    /// Scalar prior of every coordinate (`None` for latents and matrices).
    priors: Vec<Option<Prior>>,
    matrix_prior: Option<(usize, Prior)>,
    dims: Dims,
    groups: Vec<Vec<usize>>,
    ranges: Vec<std::ops::Range<usize>>,
    rule: GlRule<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Dims {
    p: usize,
    p2: usize,
    k: usize,
}

struct Builder<'a> {
    spec: &'a PriorSpec,
    layout: Layout,
    priors: Vec<Option<Prior>>,
    matrix_prior: Option<(usize, Prior)>,
}

impl Builder<'_> {
    fn scalar(&mut self, group: &str, names: Vec<String>, role: Role, optimize: bool) -> Result<()> {
        let mut supports = Vec::with_capacity(names.len());
        for n in &names {
            let prior = resolve(self.spec, n, group, role.default_prior());
            prior.validate()?;
            if !prior.is_scalar() {
                return Err(Error::Config(format!("{n} needs a scalar prior")));
            }
            let nat = role.natural();
            let (lo, hi) = prior.support();
            supports.push(Support::bounded(lo.max(nat.lower), hi.min(nat.upper)));
            self.priors.push(Some(prior));
        }
        self.layout.push(names, BlockKind::Global { optimize }, Transform::Elementwise(supports));
        Ok(())
    }

    fn covariance(&mut self, group: &str) -> Result<()> {
        let prior =
            resolve(self.spec, group, group, Prior::InverseWishart { scale: [[1.0, 0.0], [0.0, 1.0]], df: 2.0 });
        prior.validate()?;
        if prior.is_scalar() {
            return Err(Error::Config(format!("{group} needs an inverse-Wishart prior")));
        }
        self.matrix_prior = Some((self.layout.dim(), prior));
        let names = vec![format!("{group}[1,1]"), format!("{group}[1,2]"), format!("{group}[2,2]")];
        self.priors.extend([None, None, None]);
        self.layout.push(names, BlockKind::Global { optimize: false }, Transform::LogCholesky2);
        Ok(())
    }

    fn latent(&mut self, group: usize, names: Vec<String>, support: Support) {
        self.priors.extend(names.iter().map(|_| None));
        let n = names.len();
        self.layout.push(names, BlockKind::Latent { group }, Transform::Elementwise(vec![support; n]));
    }
}

fn data_error(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

impl FamilyModel {
    pub fn new(spec: ModelSpec, data: SurvivalDataset) -> Result<Self> {
        let mut b = Builder { spec: &spec.priors, layout: Layout::default(), priors: Vec::new(), matrix_prior: None };
        let mut dims = Dims { p: data.design.n_cols(), ..Dims::default() };
        let mut groups = Vec::new();
        let mut ranges = Vec::new();
        let exact_or_right = |family: Family| -> Result<()> {
            match data.observations.iter().find(|o| !matches!(o.censoring, Censoring::Exact(_) | Censoring::Right(_))) {
                Some(o) => Err(data_error(format!(
                    "{family} model supports exact and right-censored times only (subject {})",
                    o.subject_id
                ))),
                None => Ok(()),
            }
        };
        match spec.family {
            Family::Aft => {
                b.scalar("beta", indexed("beta", dims.p), Role::Coefficient, true)?;
                b.scalar("alpha", vec!["alpha".into()], Role::Shape, true)?;
            }
            Family::PiecewisePh => {
                let part = spec
                    .partition
                    .as_ref()
                    .ok_or_else(|| Error::Config("piecewise PH model needs a time partition".into()))?;
                if data.max_time() > part.end() {
                    return Err(Error::OutsidePartition { t: data.max_time(), end: part.end() });
                }
                dims.k = part.n_intervals();
                b.scalar("beta", indexed("beta", dims.p), Role::Coefficient, true)?;
                b.scalar("lambda", indexed("lambda", dims.k), Role::Scale, true)?;
            }
            Family::Cure => {
                let DatasetExtras::Cure { incidence } = &data.extras else {
                    return Err(data_error("cure model needs an incidence design"));
                };
                dims.p2 = incidence.n_cols();
                b.scalar("betaC", indexed("betaC", dims.p2), Role::Coefficient, true)?;
                b.scalar("betaU", indexed("betaU", dims.p), Role::Coefficient, true)?;
                b.scalar("lambda", vec!["lambda".into()], Role::Scale, true)?;
                b.scalar("alpha", vec!["alpha".into()], Role::Shape, true)?;
            }
            Family::CompetingRisks | Family::IllnessDeath => {
                dims.k = if spec.family == Family::IllnessDeath { 3 } else { spec.n_risks };
                if dims.k == 0 {
                    return Err(Error::Config("competing risks model needs at least one cause".into()));
                }
                if spec.family == Family::IllnessDeath {
                    let DatasetExtras::IllnessDeath(recs) = &data.extras else {
                        return Err(data_error("illness-death model needs transition records"));
                    };
                    recs.iter().try_for_each(|r| r.validate())?;
                } else {
                    exact_or_right(spec.family)?;
                    for o in &data.observations {
                        crate::likelihood::competing_cause(o, dims.k)?;
                    }
                }
                b.scalar("beta", matrix_names("beta", dims.p, dims.k), Role::Coefficient, true)?;
                b.scalar("lambda", indexed("lambda", dims.k), Role::Scale, true)?;
                b.scalar("alpha", indexed("alpha", dims.k), Role::Shape, true)?;
            }
            Family::Frailty => {
                let DatasetExtras::Frailty { groups: labels, n_groups } = &data.extras else {
                    return Err(data_error("frailty model needs group labels"));
                };
                groups = vec![Vec::new(); *n_groups];
                for (i, &g) in labels.iter().enumerate() {
                    groups[g].push(i);
                }
                dims.k = *n_groups;
                b.scalar("beta", indexed("beta", dims.p), Role::Coefficient, true)?;
                b.scalar("alpha", vec!["alpha".into()], Role::Shape, true)?;
                match spec.frailty {
                    FrailtyVariant::MultiplicativeGamma => {
                        b.scalar("psi", vec!["psi".into()], Role::Precision, false)?;
                        for g in 0..dims.k {
                            b.latent(g, vec![format!("w[{}]", g + 1)], Support::POSITIVE);
                        }
                    }
                    FrailtyVariant::AdditiveNormal => {
                        b.scalar("tau", vec!["tau".into()], Role::Precision, false)?;
                        for g in 0..dims.k {
                            b.latent(g, vec![format!("b[{}]", g + 1)], Support::REAL);
                        }
                    }
                }
            }
            Family::Joint => {
                let DatasetExtras::Joint(long) = &data.extras else {
                    return Err(data_error("joint model needs longitudinal records"));
                };
                exact_or_right(spec.family)?;
                if spec.gl_order < 2 {
                    return Err(Error::Config("Gauss-Legendre order must be at least 2".into()));
                }
                ranges = long.ranges(data.len());
                dims.p2 = long.design.n_cols();
                b.scalar("betaL", indexed("betaL", dims.p2), Role::Coefficient, true)?;
                b.scalar("betaS", indexed("betaS", dims.p), Role::Coefficient, true)?;
                b.scalar("gamma", vec!["gamma".into()], Role::Coefficient, true)?;
                b.scalar("alpha", vec!["alpha".into()], Role::Shape, true)?;
                b.scalar("sigma", vec!["sigma".into()], Role::ResidualSd, true)?;
                b.covariance("Sigma")?;
                for i in 0..data.len() {
                    b.latent(i, vec![format!("b[{},1]", i + 1), format!("b[{},2]", i + 1)], Support::REAL);
                }
            }
        }
        let rule = gauss_legendre(spec.gl_order.max(1))?;
        let Builder { layout, priors, matrix_prior, .. } = b;
        Ok(Self { spec, data, layout, priors, matrix_prior, dims, groups, ranges, rule })
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn gl_rule(&self) -> &GlRule<f64> {
        &self.rule
    }

    /// Members (row indices) of each frailty group.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    fn split<T: Real>(&self, theta: &[T], rows: usize, cols: usize) -> Vec<Vec<T>> {
        (0..cols).map(|k| theta[k * rows..(k + 1) * rows].to_vec()).collect()
    }

    pub fn aft_params<T: Real>(&self, theta: &[T]) -> AftParams<T> {
        let p = self.dims.p;
        AftParams { beta: theta[..p].to_vec(), alpha: theta[p] }
    }

    pub fn ph_params<T: Real>(&self, theta: &[T]) -> PhParams<T> {
        let p = self.dims.p;
        PhParams { beta: theta[..p].to_vec(), lambdas: theta[p..p + self.dims.k].to_vec() }
    }

    pub fn cure_params<T: Real>(&self, theta: &[T]) -> CureParams<T> {
        let (pc, pu) = (self.dims.p2, self.dims.p);
        CureParams {
            beta_c: theta[..pc].to_vec(),
            beta_u: theta[pc..pc + pu].to_vec(),
            lambda: theta[pc + pu],
            alpha: theta[pc + pu + 1],
        }
    }

    fn weibull_set<T: Real>(&self, theta: &[T]) -> (Vec<Vec<T>>, Vec<T>, Vec<T>) {
        let (p, k) = (self.dims.p, self.dims.k);
        let beta = self.split(&theta[..p * k], p, k);
        (beta, theta[p * k..p * k + k].to_vec(), theta[p * k + k..p * k + 2 * k].to_vec())
    }

    pub fn competing_params<T: Real>(&self, theta: &[T]) -> CompetingRisksParams<T> {
        let (beta, lambdas, alphas) = self.weibull_set(theta);
        CompetingRisksParams { beta, lambdas, alphas }
    }

    pub fn illness_death_params<T: Real>(&self, theta: &[T]) -> IllnessDeathParams<T> {
        let (beta, lambdas, alphas) = self.weibull_set(theta);
        IllnessDeathParams { beta, lambdas, alphas }
    }

    pub fn frailty_params<T: Real>(&self, theta: &[T]) -> FrailtyParams<T> {
        let p = self.dims.p;
        let effects = theta[p + 2..p + 2 + self.dims.k].to_vec();
        let frailty = match self.spec.frailty {
            FrailtyVariant::MultiplicativeGamma => FrailtyTerm::Gamma { psi: theta[p + 1], w: effects },
            FrailtyVariant::AdditiveNormal => FrailtyTerm::Normal { tau: theta[p + 1], b: effects },
        };
        FrailtyParams { beta: theta[..p].to_vec(), alpha: theta[p], frailty }
    }

    pub fn joint_params<T: Real>(&self, theta: &[T]) -> JointParams<T> {
        let (pl, ps) = (self.dims.p2, self.dims.p);
        let o = pl + ps;
        let b = theta[o + 6..].chunks(2).map(|c| [c[0], c[1]]).collect();
        JointParams {
            beta_l: theta[..pl].to_vec(),
            beta_s: theta[pl..o].to_vec(),
            gamma: theta[o],
            alpha: theta[o + 1],
            sigma: theta[o + 2],
            sigma_b: [theta[o + 3], theta[o + 4], theta[o + 5]],
            b,
        }
    }

    /// Log-likelihood at constrained parameters.
    pub fn loglik<T: Real>(&self, theta: &[T]) -> Result<T> {
        let d = &self.data;
        match self.spec.family {
            Family::Aft => aft_loglik(&self.aft_params(theta), d),
            Family::PiecewisePh => {
                ph_piecewise_loglik(&self.ph_params(theta), d, self.spec.partition.as_ref().expect("checked in new"))
            }
            Family::Cure => cure_loglik(&self.cure_params(theta), d),
            Family::CompetingRisks => competing_risks_loglik(&self.competing_params(theta), d),
            Family::IllnessDeath => illness_death_loglik(&self.illness_death_params(theta), d),
            Family::Frailty => frailty_loglik(&self.frailty_params(theta), d),
            Family::Joint => joint_loglik(&self.joint_params(theta), d, &self.rule),
        }
    }

    /// Sum of the prior log-densities of the global parameters.
    pub fn log_prior<T: Real>(&self, theta: &[T]) -> T {
        let mut lp = T::zero();
        for (prior, &x) in self.priors.iter().zip(theta) {
            if let Some(prior) = prior {
                lp = lp + prior.log_density(x);
            }
        }
        if let Some((o, prior)) = &self.matrix_prior {
            lp = lp + prior.matrix_log_density([theta[*o], theta[o + 1], theta[o + 2]]);
        }
        lp
    }

    /// Events over total follow-up, a crude constant-hazard rate.
    fn crude_rate(&self) -> f64 {
        let (mut events, mut exposure) = (0.0_f64, 0.0_f64);
        for o in &self.data.observations {
            match o.censoring {
                Censoring::Exact(t) => {
                    events += 1.0;
                    exposure += t;
                }
                Censoring::Right(t) | Censoring::Left(t) => exposure += t,
                Censoring::Interval(l, u) => {
                    events += 1.0;
                    exposure += 0.5 * (l + u);
                }
            }
        }
        events.max(1.0) / exposure.max(1e-12)
    }

    fn intercept_column(&self) -> Option<usize> {
        let x = &self.data.design;
        (0..x.n_cols()).find(|&j| x.n_rows() > 0 && x.rows().all(|r| r[j] == 1.0))
    }

    fn weibull_set_init(&self, rates: &[f64]) -> Vec<f64> {
        let (p, k) = (self.dims.p, self.dims.k);
        let mut theta = vec![0.0; p * k];
        theta.extend(rates.iter().map(|r| r.max(1e-8)));
        theta.extend(std::iter::repeat_n(1.0, k));
        theta
    }

    fn joint_init(&self) -> Vec<f64> {
        let DatasetExtras::Joint(long) = &self.data.extras else { unreachable!() };
        let (pl, ps, n) = (self.dims.p2, self.dims.p, self.data.len());
        // population fit by least squares
        let x = nalgebra::DMatrix::from_fn(long.len(), pl, |i, j| long.design.row(i)[j]);
        let y = nalgebra::DVector::from_column_slice(&long.response);
        let beta_l = (x.transpose() * &x)
            .try_inverse()
            .map(|inv| inv * x.transpose() * &y)
            .unwrap_or_else(|| nalgebra::DVector::zeros(pl));
        let resid = &y - &x * &beta_l;
        // subject-level intercept/slope of the residuals, shrunk toward zero
        let mut b = vec![[0.0; 2]; n];
        for (i, r) in self.ranges.iter().enumerate() {
            let m = r.len() as f64;
            if m == 0.0 {
                continue;
            }
            let ts: Vec<f64> = r.clone().map(|j| long.time[j]).collect();
            let es: Vec<f64> = r.clone().map(|j| resid[j]).collect();
            let tbar = ts.iter().sum::<f64>() / m;
            let ebar = es.iter().sum::<f64>() / m;
            let sxx: f64 = ts.iter().map(|t| (t - tbar).powi(2)).sum();
            let sxy: f64 = ts.iter().zip(&es).map(|(t, e)| (t - tbar) * (e - ebar)).sum();
            let slope = if sxx > 1e-8 && m >= 3.0 { sxy / sxx } else { 0.0 };
            let shrink = m / (m + 1.0);
            b[i] = [shrink * (ebar - slope * tbar), shrink * slope];
        }
        let mut sse = 0.0;
        for (i, r) in self.ranges.iter().enumerate() {
            for j in r.clone() {
                sse += (resid[j] - b[i][0] - b[i][1] * long.time[j]).powi(2);
            }
        }
        let sigma = (sse / long.len().max(1) as f64).sqrt().clamp(1e-3, 50.0);
        let mut cov = [0.0; 3];
        for bi in &b {
            cov[0] += bi[0] * bi[0];
            cov[1] += bi[0] * bi[1];
            cov[2] += bi[1] * bi[1];
        }
        let nn = n.max(1) as f64;
        let cov = [cov[0] / nn + 1e-2, cov[1] / nn, cov[2] / nn + 1e-2];

        let mut theta: Vec<f64> = beta_l.iter().copied().collect();
        let mut beta_s = vec![0.0; ps];
        if let Some(j) = self.intercept_column() {
            beta_s[j] = self.crude_rate().ln();
        }
        theta.extend(beta_s);
        theta.extend([0.0, 1.0, sigma]);
        theta.extend(cov);
        theta.extend(b.into_iter().flatten());
        theta
    }
}

impl Model for FamilyModel {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn log_density<T: Real>(&self, theta: &[T]) -> T {
        let prior = self.log_prior(theta);
        if !(prior > T::neg_infinity()) {
            return T::neg_infinity();
        }
        match self.loglik(theta) {
            Ok(ll) if !ll.is_nan() => ll + prior,
            _ => T::neg_infinity(),
        }
    }

    fn local_log_density(&self, group: usize, theta: &[f64]) -> f64 {
        let ll = match self.spec.family {
            Family::Frailty => {
                frailty_group_loglik(&self.frailty_params(theta), &self.data, group, &self.groups[group])
            }
            Family::Joint => joint_subject_loglik(
                &self.joint_params(theta),
                &self.data,
                group,
                self.ranges[group].clone(),
                &self.rule,
            ),
            _ => unreachable!("family has no latent blocks"),
        };
        match ll {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    fn initial_values(&self) -> Vec<f64> {
        let rate = self.crude_rate();
        let (p, k) = (self.dims.p, self.dims.k);
        let mut theta = match self.spec.family {
            Family::Aft => {
                let mut beta = vec![0.0; p];
                if let Some(j) = self.intercept_column() {
                    beta[j] = -rate.ln();
                }
                beta.push(1.0);
                beta
            }
            Family::PiecewisePh => {
                let mut t = vec![0.0; p];
                t.extend(std::iter::repeat_n(rate, k));
                t
            }
            Family::Cure => {
                let mut t = vec![0.0; self.dims.p2 + p];
                t.extend([rate, 1.0]);
                t
            }
            Family::CompetingRisks => {
                let mut counts = vec![0.0_f64; k];
                let mut exposure = 0.0_f64;
                for o in &self.data.observations {
                    if let Ok((t, cause)) = crate::likelihood::competing_cause(o, k) {
                        exposure += t;
                        if cause > 0 {
                            counts[cause - 1] += 1.0;
                        }
                    }
                }
                let rates: Vec<f64> = counts.iter().map(|c| c.max(1.0) / exposure.max(1e-12)).collect();
                self.weibull_set_init(&rates)
            }
            Family::IllnessDeath => {
                let DatasetExtras::IllnessDeath(recs) = &self.data.extras else { unreachable!() };
                let mut rates = [0.0; 3];
                for k in 0..3 {
                    let events = recs.iter().filter(|r| r.events[k]).count() as f64;
                    let exposure: f64 = recs.iter().map(|r| [r.t1, r.t2, r.t3][k]).sum();
                    rates[k] = events.max(1.0) / exposure.max(1e-12);
                }
                self.weibull_set_init(&rates)
            }
            Family::Frailty => {
                let mut beta = vec![0.0; p];
                if let Some(j) = self.intercept_column() {
                    beta[j] = rate.ln();
                }
                beta.extend([1.0, 1.0]);
                let effect = match self.spec.frailty {
                    FrailtyVariant::MultiplicativeGamma => 1.0,
                    FrailtyVariant::AdditiveNormal => 0.0,
                };
                beta.extend(std::iter::repeat_n(effect, k));
                beta
            }
            Family::Joint => self.joint_init(),
        };
        // move starting values inside user-supplied prior bounds
        for b in &self.layout.blocks {
            if let Transform::Elementwise(supports) = &b.transform {
                for (s, x) in supports.iter().zip(&mut theta[b.range()]) {
                    if !s.contains(*x) {
                        *x = match (s.lower.is_finite(), s.upper.is_finite()) {
                            (true, true) => 0.5 * (s.lower + s.upper),
                            (true, false) => s.lower + 1.0,
                            (false, true) => s.upper - 1.0,
                            (false, false) => 0.0,
                        };
                    }
                }
            }
        }
        theta
    }

    fn derived_names(&self) -> Vec<String> {
        match self.spec.family {
            Family::Frailty | Family::Joint => vec!["lambda".into()],
            _ => Vec::new(),
        }
    }

    fn derived(&self, theta: &[f64]) -> Vec<f64> {
        match self.spec.family {
            Family::Frailty => vec![theta[0].exp()],
            Family::Joint => vec![theta[self.dims.p2].exp()],
            _ => Vec::new(),
        }
    }
}

/// Log-posterior of a family at its constrained parameters (loglik + prior).
pub fn log_posterior<T: Real>(model: &FamilyModel, theta: &[T]) -> T {
    model.log_density(theta)
}

//! Derived quantities requested in a fit configuration, computed from stored draws.

use crate::diagnostics::{summarize_draws, SummaryTable};
use crate::error::{Error, Result};
use crate::io::config::DeriveRequest;
use crate::likelihood::{
    CompetingRisksParams, CureParams, FrailtyParams, FrailtyTerm, FrailtyVariant, IllnessDeathParams,
};
use crate::mcmc::PosteriorSamples;
use crate::model::Family;
use crate::posterior::{
    cif, cure_fraction, frailty_survival_curve, hazard_ratio, mean_curve, overall_survival, p11, p12, p13_p23, p22,
    relative_median, uncured_survival_curve, CurveGrid, DrawSubsample,
};

/// Curves and contrast summaries of a set of requests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Derived {
    pub curves: Vec<CurveGrid<f64>>,
    pub contrasts: SummaryTable,
}

/// Coefficients, scales and shapes of one cause-specific Weibull draw.
type WeibullDraw = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Pooled draws addressed by parameter name.
struct Draws<'a> {
    samples: &'a PosteriorSamples,
    rows: Vec<&'a [f64]>,
}

impl<'a> Draws<'a> {
    fn new(samples: &'a PosteriorSamples) -> Self {
        Self { samples, rows: samples.draws.iter().flatten().map(Vec::as_slice).collect() }
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.samples.index_of(name).ok_or_else(|| Error::Data(format!("samples have no `{name}`")))
    }

    /// Indices of `group[1]`, `group[2]`, ... up to the first missing one.
    fn vector(&self, group: &str) -> Vec<usize> {
        (1..).map_while(|j| self.samples.index_of(&format!("{group}[{j}]"))).collect()
    }

    /// Indices of `group[l,k]` as one column per `k`.
    fn matrix(&self, group: &str) -> Vec<Vec<usize>> {
        (1..)
            .map(|k| (1..).map_while(|l| self.samples.index_of(&format!("{group}[{l},{k}]"))).collect::<Vec<_>>())
            .take_while(|col| !col.is_empty())
            .collect()
    }

    fn pick(row: &[f64], idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&j| row[j]).collect()
    }

    fn vectors(&self, group: &str) -> Result<Vec<Vec<f64>>> {
        let idx = self.vector(group);
        if idx.is_empty() {
            return Err(Error::Data(format!("samples have no `{group}[..]`")));
        }
        Ok(self.rows.iter().map(|r| Self::pick(r, &idx)).collect())
    }

    fn cure(&self) -> Result<Vec<CureParams<f64>>> {
        let (bc, bu) = (self.vector("betaC"), self.vector("betaU"));
        let (l, a) = (self.index("lambda")?, self.index("alpha")?);
        Ok(self
            .rows
            .iter()
            .map(|r| CureParams { beta_c: Self::pick(r, &bc), beta_u: Self::pick(r, &bu), lambda: r[l], alpha: r[a] })
            .collect())
    }

    fn weibull_set(&self) -> Result<Vec<WeibullDraw>> {
        let beta = self.matrix("beta");
        let (lam, alp) = (self.vector("lambda"), self.vector("alpha"));
        if beta.is_empty() || lam.len() != beta.len() || alp.len() != beta.len() {
            return Err(Error::Data("samples do not hold a cause-specific Weibull set".into()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| (beta.iter().map(|b| Self::pick(r, b)).collect(), Self::pick(r, &lam), Self::pick(r, &alp)))
            .collect())
    }

    fn frailty(&self, variant: FrailtyVariant) -> Result<Vec<FrailtyParams<f64>>> {
        let beta = self.vector("beta");
        let a = self.index("alpha")?;
        let (hyper, latent) = match variant {
            FrailtyVariant::MultiplicativeGamma => ("psi", "w"),
            FrailtyVariant::AdditiveNormal => ("tau", "b"),
        };
        let h = self.index(hyper)?;
        let effects = self.vector(latent);
        if effects.is_empty() {
            return Err(Error::Data(format!("samples have no `{latent}[..]`; fit with keep_latent")));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| {
                let e = Self::pick(r, &effects);
                let frailty = match variant {
                    FrailtyVariant::MultiplicativeGamma => FrailtyTerm::Gamma { psi: r[h], w: e },
                    FrailtyVariant::AdditiveNormal => FrailtyTerm::Normal { tau: r[h], b: e },
                };
                FrailtyParams { beta: Self::pick(r, &beta), alpha: r[a], frailty }
            })
            .collect())
    }
}

/// Evaluates `requests` on the draws of a `family` fit.
pub fn derive(
    family: Family,
    frailty: FrailtyVariant,
    samples: &PosteriorSamples,
    requests: &[DeriveRequest],
    subsample: &DrawSubsample,
) -> Result<Derived> {
    let draws = Draws::new(samples);
    let mut out = Derived::default();
    for req in requests {
        if !req.families().contains(&family) {
            return Err(Error::FamilyMismatch(format!("`{}` cannot be derived from a {family} fit", req.name())));
        }
        match req {
            DeriveRequest::HazardRatio { name, x1, x2 } => {
                let values = hazard_ratio(x1, x2, &draws.vectors("beta")?)?;
                out.contrasts.rows.push(summarize_draws(name, &values)?);
            }
            DeriveRequest::RelativeMedian { name, x1, x2 } => {
                let values = relative_median(x1, x2, &draws.vectors("beta")?)?;
                out.contrasts.rows.push(summarize_draws(name, &values)?);
            }
            DeriveRequest::CureFraction { name, x } => {
                let values = cure_fraction(x, &draws.vectors("betaC")?)?;
                out.contrasts.rows.push(summarize_draws(name, &values)?);
            }
            DeriveRequest::UncuredSurvival { name, x, times } => {
                out.curves.push(uncured_survival_curve(times, &draws.cure()?, x, name)?);
            }
            DeriveRequest::Cif { name, x, times } => {
                let params: Vec<CompetingRisksParams<f64>> = draws
                    .weibull_set()?
                    .into_iter()
                    .map(|(beta, lambdas, alphas)| CompetingRisksParams { beta, lambdas, alphas })
                    .collect();
                let n_risks = params[0].lambdas.len();
                for k in 0..n_risks {
                    let values = times.iter().map(|&t| cif(k, t, x, &params, subsample)).collect::<Result<_>>()?;
                    out.curves.push(CurveGrid::new(times.clone(), values, format!("{name}:cif[{}]", k + 1))?);
                }
                let label = format!("{name}:survival");
                out.curves.push(mean_curve(times, &params, subsample, &label, |p, t| overall_survival(p, x, t))?);
            }
            DeriveRequest::Transitions { name, x, s, times } => {
                let params: Vec<IllnessDeathParams<f64>> = draws
                    .weibull_set()?
                    .into_iter()
                    .map(|(beta, lambdas, alphas)| IllnessDeathParams { beta, lambdas, alphas })
                    .collect();
                out.curves.extend(transition_curves(name, &params, x, *s, times, subsample)?);
            }
            DeriveRequest::FrailtySurvival { name, x, times } => {
                let params = draws.frailty(frailty)?;
                for g in 0..params[0].frailty.n_groups() {
                    out.curves.push(frailty_survival_curve(g, x, times, &params, &format!("{name}:group[{}]", g + 1))?);
                }
            }
        }
    }
    Ok(out)
}

/// `p11, p12, p13` over `(0, t]` and `p22, p23` over `(s, s + t]` for every `t`.
fn transition_curves(
    name: &str,
    params: &[IllnessDeathParams<f64>],
    x: &[f64],
    s: f64,
    times: &[f64],
    subsample: &DrawSubsample,
) -> Result<Vec<CurveGrid<f64>>> {
    let mut cols: [Vec<f64>; 5] = Default::default();
    for &t in times {
        let a = p11(0.0, t, params, x, subsample)?;
        let b = p12(0.0, t, params, x, subsample)?;
        let d = p22(s, s + t, params, x, subsample)?;
        let (p13, p23) = p13_p23(a, b, d)?;
        for (col, v) in cols.iter_mut().zip([a.clamp(0.0, 1.0), b.clamp(0.0, 1.0), p13, d.clamp(0.0, 1.0), p23]) {
            col.push(v);
        }
    }
    let shifted: Vec<f64> = times.iter().map(|t| s + t).collect();
    let [c11, c12, c13, c22, c23] = cols;
    Ok(vec![
        CurveGrid::new(times.to_vec(), c11, format!("{name}:p11"))?,
        CurveGrid::new(times.to_vec(), c12, format!("{name}:p12"))?,
        CurveGrid::new(times.to_vec(), c13, format!("{name}:p13"))?,
        CurveGrid::new(shifted.clone(), c22, format!("{name}:p22"))?,
        CurveGrid::new(shifted, c23, format!("{name}:p23"))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::ChainConfig;

    fn samples(names: &[&str], rows: Vec<Vec<f64>>) -> PosteriorSamples {
        PosteriorSamples::new(names.iter().map(|s| s.to_string()).collect(), vec![rows], ChainConfig::default())
            .unwrap()
    }

    #[test]
    fn hazard_ratio_summary() {
        let s = samples(&["beta[1]", "beta[2]", "lambda[1]"], vec![vec![0.5, 1.5, 0.1], vec![0.7, 1.2, 0.2]]);
        let req = DeriveRequest::HazardRatio { name: "hr".into(), x1: vec![1.0, 0.0], x2: vec![0.0, 1.0] };
        let d = derive(Family::PiecewisePh, FrailtyVariant::default(), &s, &[req], &DrawSubsample::all()).unwrap();
        let want = ((-1.0f64).exp() + (-0.5f64).exp()) / 2.0;
        assert!((d.contrasts.rows[0].mean - want).abs() < 1e-12);
    }

    #[test]
    fn family_mismatch() {
        let s = samples(&["beta[1]", "alpha"], vec![vec![0.5, 1.0], vec![0.4, 1.1]]);
        let req = DeriveRequest::Cif { name: "c".into(), x: vec![1.0], times: vec![1.0] };
        let err = derive(Family::Aft, FrailtyVariant::default(), &s, &[req], &DrawSubsample::all()).unwrap_err();
        assert!(matches!(err, Error::FamilyMismatch(_)));
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let names = [
            "beta[1,1]",
            "beta[1,2]",
            "beta[1,3]",
            "lambda[1]",
            "lambda[2]",
            "lambda[3]",
            "alpha[1]",
            "alpha[2]",
            "alpha[3]",
        ];
        let s = samples(
            &names,
            vec![
                vec![0.1, -0.2, 0.3, 0.02, 0.01, 0.05, 1.1, 0.9, 0.8],
                vec![0.2, -0.1, 0.2, 0.03, 0.02, 0.04, 1.0, 1.2, 0.7],
            ],
        );
        let req = DeriveRequest::Transitions { name: "tp".into(), x: vec![1.0], s: 5.0, times: vec![0.0, 5.0, 20.0] };
        let d = derive(Family::IllnessDeath, FrailtyVariant::default(), &s, &[req], &DrawSubsample::all()).unwrap();
        assert_eq!(d.curves.len(), 5);
        for i in 0..3 {
            let row: f64 = d.curves[..3].iter().map(|c| c.values[i]).sum();
            assert!((row - 1.0).abs() < 1e-12);
            assert!((d.curves[3].values[i] + d.curves[4].values[i] - 1.0).abs() < 1e-12);
        }
        assert_eq!(d.curves[0].values[0], 1.0);
        assert_eq!(d.curves[3].times, vec![5.0, 10.0, 25.0]);
    }
}

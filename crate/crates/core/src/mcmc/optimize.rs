//! Posterior mode search on the unconstrained scale, used to start chains and
//! to seed the joint proposal covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dual::{gradient, Dual};
use crate::model::Model;

/// Largest proposal standard deviation taken from the curvature.
const MAX_SD: f64 = 5.0;

pub struct Mode {
    /// Full unconstrained vector at the mode (non-optimized coordinates unchanged).
    pub u: Vec<f64>,
    pub log_density: f64,
    /// Covariance of the optimized coordinates (inverse negative Hessian).
    pub cov: DMatrix<f64>,
}

/// Log-posterior plus log-Jacobian at an unconstrained point.
pub fn unconstrained_log_density<M: Model>(model: &M, u: &[f64]) -> f64 {
    let (theta, lj) = model.layout().constrain(u);
    let lp = model.log_density(&theta);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp + lj
    }
}

struct Objective<'a, M> {
    model: &'a M,
    base: Vec<f64>,
    idx: Vec<usize>,
}

impl<M: Model> Objective<'_, M> {
    fn full(&self, v: &[f64]) -> Vec<f64> {
        let mut u = self.base.clone();
        for (&i, &x) in self.idx.iter().zip(v) {
            u[i] = x;
        }
        u
    }

    fn value(&self, v: &[f64]) -> f64 {
        unconstrained_log_density(self.model, &self.full(v))
    }

    fn grad(&self, v: &[f64]) -> Vec<f64> {
        let base: Vec<Dual> = self.base.iter().map(|&x| Dual::constant(x)).collect();
        gradient(
            |vd: &[Dual]| {
                let mut u = base.clone();
                for (&i, &x) in self.idx.iter().zip(vd) {
                    u[i] = x;
                }
                let (theta, lj) = self.model.layout().constrain(&u);
                self.model.log_density(&theta) + lj
            },
            v,
        )
    }
}

/// Maximizes the log-posterior over the coordinates `idx` by BFGS with a
/// backtracking line search, starting from `u0`.
pub fn find_mode<M: Model>(model: &M, u0: &[f64], idx: &[usize]) -> Mode {
    let obj = Objective { model, base: u0.to_vec(), idx: idx.to_vec() };
    let d = idx.len();
    let mut v: Vec<f64> = idx.iter().map(|&i| u0[i]).collect();
    let mut f = obj.value(&v);
    if d == 0 || !f.is_finite() {
        return Mode { u: u0.to_vec(), log_density: f, cov: DMatrix::identity(d, d) };
    }
    let mut g = DVector::from_vec(obj.grad(&v));
    let mut h_inv = DMatrix::<f64>::identity(d, d);
    for _ in 0..500 {
        if !g.iter().all(|x| x.is_finite()) || g.norm() < 1e-7 {
            break;
        }
        let mut dir = &h_inv * &g;
        if dir.dot(&g) <= 0.0 {
            h_inv = DMatrix::identity(d, d);
            dir = g.clone();
        }
        // keep single steps moderate on the unconstrained scale
        let len = dir.norm();
        if len > 2.0 {
            dir *= 2.0 / len;
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = v.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
            let fc = obj.value(&cand);
            if fc.is_finite() && fc >= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let gc = DVector::from_vec(obj.grad(&cand));
        let s = DVector::from_iterator(d, cand.iter().zip(&v).map(|(a, b)| a - b));
        // we maximize, so the curvature pair uses the negated gradient change
        let y = &g - &gc;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(d, d);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        let done = (fc - f).abs() < 1e-10 * (1.0 + f.abs());
        v = cand;
        f = fc;
        g = gc;
        if done {
            break;
        }
    }
    let cov = curvature_covariance(&obj, &v);
    Mode { u: obj.full(&v), log_density: f, cov }
}

/// Inverse of the negative Hessian by central differences of the exact
/// gradient; eigenvalues are floored so every direction has a sane scale.
fn curvature_covariance<M: Model>(obj: &Objective<'_, M>, v: &[f64]) -> DMatrix<f64> {
    let d = v.len();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let h = 1e-4 * v[j].abs().max(1.0);
        let (mut up, mut dn) = (v.to_vec(), v.to_vec());
        up[j] += h;
        dn[j] -= h;
        let (gu, gd) = (obj.grad(&up), obj.grad(&dn));
        for i in 0..d {
            hess[(i, j)] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    if !sym.iter().all(|x| x.is_finite()) {
        return DMatrix::identity(d, d) * 0.01;
    }
    let eig = SymmetricEigen::new(sym);
    let floor = 1.0 / (MAX_SD * MAX_SD);
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

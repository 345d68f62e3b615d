mod common;

use bayesurv::posterior::{p11_draw, p12_draw, p13_p23, p22_draw};
use bayesurv::quadrature::gauss_kronrod;
use bayesurv::IllnessDeathParams64;
use common::relative_error;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_draw(rng: &mut ChaCha8Rng) -> (IllnessDeathParams64, Vec<f64>) {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let params = IllnessDeathParams64 {
        beta: (0..3).map(|_| vec![u(-0.5, 0.5), u(-0.5, 0.5)]).collect(),
        lambdas: (0..3).map(|_| u(0.02, 0.4)).collect(),
        alphas: (0..3).map(|_| u(0.6, 1.8)).collect(),
    };
    let x = vec![1.0, u(-1.0, 1.0)];
    (params, x)
}

fn rates(p: &IllnessDeathParams64, x: &[f64]) -> [f64; 3] {
    [0, 1, 2].map(|k| p.lambdas[k] * p.beta[k].iter().zip(x).map(|(b, v)| b * v).sum::<f64>().exp())
}

fn hazard(r: f64, a: f64, u: f64) -> f64 {
    r * a * u.powf(a - 1.0)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    gauss_kronrod(f, a, b, 1e-12).unwrap().0
}

/// `exp(-int_s^t (h12 + h13))` by quadrature of the hazards.
fn numeric_p11(p: &IllnessDeathParams64, x: &[f64], s: f64, t: f64) -> f64 {
    let r = rates(p, x);
    let total = integrate(|u| hazard(r[0], p.alphas[0], u) + hazard(r[1], p.alphas[1], u), s, t);
    (-total).exp()
}

/// `p13` from its own integral: death straight from the initial state plus
/// death after passing through the intermediate one.
fn numeric_p13(p: &IllnessDeathParams64, x: &[f64], s: f64, t: f64) -> f64 {
    let r = rates(p, x);
    let a = &p.alphas;
    let direct = integrate(|u| hazard(r[1], a[1], u) * numeric_p11(p, x, s, u), s, t);
    let via =
        integrate(|u| hazard(r[0], a[0], u) * numeric_p11(p, x, s, u) * -(-r[2] * (t - u).powf(a[2])).exp_m1(), s, t);
    direct + via
}

fn windows(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    (0..10)
        .map(|_| {
            let s = 0.05 + 4.0 * rng.random::<f64>();
            (s, s + 0.1 + 6.0 * rng.random::<f64>())
        })
        .collect()
}

#[test]
fn closed_form_p11_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (params, x) = random_draw(&mut rng);
        for (s, t) in windows(&mut rng) {
            let got = p11_draw(&params, &x, s, t).unwrap();
            let want = numeric_p11(&params, &x, s, t);
            assert!(relative_error(got, want) < 1e-8, "s {s} t {t}: {got} vs {want}");
        }
    }
}

#[test]
fn p11_from_time_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (params, x) = random_draw(&mut rng);
    assert_eq!(p11_draw(&params, &x, 0.0, 0.0).unwrap(), 1.0);
    let r = rates(&params, &x);
    let want = (-r[0] * 2f64.powf(params.alphas[0]) - r[1] * 2f64.powf(params.alphas[1])).exp();
    assert!(relative_error(p11_draw(&params, &x, 0.0, 2.0).unwrap(), want) < 1e-14);
}

#[test]
fn rows_of_the_transition_matrix_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (params, x) = random_draw(&mut rng);
        for (s, t) in windows(&mut rng) {
            let a = p11_draw(&params, &x, s, t).unwrap();
            let b = p12_draw(&params, &x, s, t).unwrap();
            let d = p22_draw(&params, &x, s, t).unwrap();
            let (p13, p23) = p13_p23(a, b, d).unwrap();
            assert!((a + b + p13 - 1.0).abs() < 1e-12);
            assert!((d + p23 - 1.0).abs() < 1e-12);
            let want = numeric_p13(&params, &x, s, t);
            assert!((p13 - want).abs() < 1e-7, "s {s} t {t}: p13 {p13} vs {want}");
            for v in [a, b, p13, d, p23] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn p22_is_one_at_the_start_of_the_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (params, x) = random_draw(&mut rng);
    let v = p22_draw(&params, &x, 3.0, 3.0).unwrap();
    assert!((v - 1.0).abs() < 1e-10, "{v}");
    assert!(p22_draw(&params, &x, 0.0, 1.0).is_err());
    assert!(p11_draw(&params, &x, 2.0, 1.0).is_err());
}

use bayesurv::quadrature::{gauss_kronrod, gauss_legendre, simpson};

#[test]
fn gauss_legendre_15_is_exact_to_degree_29() {
    let rule = gauss_legendre::<f64>(15).unwrap();
    for degree in 0..=29 {
        let got = rule.integrate(|x| x.powi(degree), -1.0, 1.0);
        let want = if degree % 2 == 0 { 2.0 / (degree as f64 + 1.0) } else { 0.0 };
        assert!((got - want).abs() < 1e-12, "degree {degree}: {got} vs {want}");
    }
}

#[test]
fn gauss_legendre_on_shifted_interval() {
    let rule = gauss_legendre::<f64>(15).unwrap();
    let got = rule.integrate(|x| x.powi(9) - 3.0 * x * x, 1.0, 2.5);
    let want = (2.5f64.powi(10) - 1.0) / 10.0 - (2.5f64.powi(3) - 1.0);
    assert!((got - want).abs() < 1e-12 * want.abs());
}

#[test]
fn gauss_legendre_weights_sum_to_two() {
    for order in [1, 2, 5, 15, 20] {
        let rule = gauss_legendre::<f64>(order).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14, "order {order}");
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn simpson_is_exact_on_cubics() {
    let f = |x: f64| 2.0 * x.powi(3) - x * x + 4.0 * x - 7.0;
    let antiderivative = |x: f64| 0.5 * x.powi(4) - x.powi(3) / 3.0 + 2.0 * x * x - 7.0 * x;
    for panels in [2, 4, 10] {
        let got = simpson(f, -1.5, 3.0, panels).unwrap();
        let want = antiderivative(3.0) - antiderivative(-1.5);
        assert!((got - want).abs() < 1e-12, "{panels} panels: {got} vs {want}");
    }
}

#[test]
fn simpson_rejects_odd_panel_count() {
    assert!(simpson(|x: f64| x, 0.0, 1.0, 3).is_err());
    assert!(simpson(|x: f64| x, 0.0, 1.0, 0).is_err());
}

#[test]
fn kronrod_handles_endpoint_singularity() {
    let (value, error) = gauss_kronrod(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
    assert!((value - 2.0).abs() < 1e-6, "{value}");
    assert!((0.0..1e-6).contains(&error));
}

#[test]
fn kronrod_on_smooth_integrand() {
    let (value, _) = gauss_kronrod(|x: f64| (-x * x).exp(), 0.0, 3.0, 1e-12).unwrap();
    let want = 0.886_226_925_452_758_f64 * statrs::function::erf::erf(3.0);
    assert!((value - want).abs() < 1e-10, "{value} vs {want}");
}

#[test]
fn single_precision_rules() {
    let rule = gauss_legendre::<f32>(15).unwrap();
    let got = rule.integrate(|x| x * x, 0.0, 3.0);
    assert!((got - 9.0).abs() < 1e-4);
}

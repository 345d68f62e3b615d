mod common;

use bayesurv::io::{derive, DeriveRequest};
use bayesurv::likelihood::FrailtyVariant;
use bayesurv::posterior::{cif_draw, cure_fraction, hazard_ratio, overall_survival, relative_median, DrawSubsample};
use bayesurv::sim::simulate;
use bayesurv::{run_chains, ChainConfig, CompetingRisksParams64, Family, FamilyModel};
use common::recovery_scenarios;

#[test]
fn cumulative_incidences_and_survival_sum_to_one() {
    let (_, scenario) = recovery_scenarios(31).into_iter().find(|(n, _)| *n == "competing_risks").unwrap();
    let data = simulate(&scenario).unwrap();
    let model = FamilyModel::new(scenario.model_spec(), data).unwrap();
    let config = ChainConfig { n_chains: 2, burn_in: 500, n_iter: 2000, thin: 10, seed: 5, ..ChainConfig::default() };
    let samples = run_chains(&model, &config).unwrap();
    let times: Vec<f64> = (0..=12).map(|i| i as f64).collect();
    let request = DeriveRequest::Cif { name: "cr".into(), x: vec![1.0, 0.5], times: times.clone() };
    let derived =
        derive(Family::CompetingRisks, FrailtyVariant::default(), &samples, &[request], &DrawSubsample::all()).unwrap();
    assert_eq!(derived.curves.len(), 3);
    for (i, t) in times.iter().enumerate() {
        let total: f64 = derived.curves.iter().map(|c| c.values[i]).sum();
        assert!((total - 1.0).abs() < 1e-4, "t = {t}: sum {total}");
    }
    let cif1 = &derived.curves[0].values;
    assert!(cif1.windows(2).all(|w| w[0] <= w[1] + 1e-12));
}

#[test]
fn single_cause_incidence_is_one_minus_survival() {
    let p = CompetingRisksParams64 { beta: vec![vec![0.2, -0.4]], lambdas: vec![0.3], alphas: vec![1.4] };
    let x = [1.0, 0.7];
    for t in [0.1, 1.0, 3.0, 8.0] {
        let cif = cif_draw(&p, 0, &x, t, 200).unwrap();
        let s = overall_survival(&p, &x, t).unwrap();
        assert!((cif + s - 1.0).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn contrasts_of_identical_profiles_are_one() {
    let draws = vec![vec![0.3, -1.2, 2.0], vec![-0.1, 0.4, 0.9]];
    let x = [1.0, 0.0, 1.0];
    for v in hazard_ratio(&x, &x, &draws).unwrap() {
        assert_eq!(v, 1.0);
    }
    for v in relative_median(&x, &x, &draws).unwrap() {
        assert_eq!(v, 1.0);
    }
    let hr = hazard_ratio(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &draws).unwrap();
    assert!((hr[0] - (0.3f64 + 1.2).exp()).abs() < 1e-12);
}

#[test]
fn cure_fractions_are_probabilities() {
    let draws = vec![vec![-30.0, 1.0], vec![0.0, 0.0], vec![5.0, 40.0]];
    let cf = cure_fraction(&[1.0, 1.0], &draws).unwrap();
    assert!(cf.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(cf[1], 0.5);
}

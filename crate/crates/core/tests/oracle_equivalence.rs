mod common;

use bayesurv::sim::oracle_loglik;
use bayesurv::{Family, FamilyModel};
use common::{random_case, relative_error, spec_for, theta_of};

const FAMILIES: [Family; 7] = [
    Family::Aft,
    Family::PiecewisePh,
    Family::Cure,
    Family::CompetingRisks,
    Family::IllnessDeath,
    Family::Frailty,
    Family::Joint,
];

#[test]
fn likelihoods_match_reference_implementation() {
    for family in FAMILIES {
        for seed in 0..100 {
            let (truth, data) = random_case(family, 1000 + seed);
            let want = oracle_loglik(&truth, &data).unwrap();
            let model = FamilyModel::new(spec_for(&truth), data).unwrap();
            let got = model.loglik(&theta_of(&model, &truth)).unwrap();
            assert!(want.is_finite(), "{family} seed {seed}: reference is {want}");
            let err = relative_error(got, want);
            assert!(err < 1e-10, "{family} seed {seed}: {got} vs {want} (relative error {err:e})");
        }
    }
}

#[test]
fn single_precision_agrees_with_double() {
    for family in FAMILIES {
        let (truth, data) = random_case(family, 7);
        let model = FamilyModel::new(spec_for(&truth), data).unwrap();
        let theta = theta_of(&model, &truth);
        let double = model.loglik(&theta).unwrap();
        let single: Vec<f32> = theta.iter().map(|&v| v as f32).collect();
        let got = model.loglik(&single).unwrap() as f64;
        assert!(relative_error(got, double) < 1e-3, "{family}: {got} vs {double}");
    }
}

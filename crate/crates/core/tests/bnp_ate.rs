use causal_posterior::bnp::{
    bart_fit_predict, bnp_ate, covariate_rows, dp_fit, gp_fit_predict, kernel_matrix, stacked_test_rows, BartConfig, CovariateKind,
    DpConfig, GpConfig,
};
use causal_posterior::data::ObservedDataset;
use causal_posterior::effects::{standardize_linear, Summary};
use causal_posterior::mcmc::ChainConfig;
use causal_posterior::models::{fit_linear, LinearModelSpec};
use causal_posterior::synth::{generate, Scenario, ScenarioId};
use nalgebra::SymmetricEigen;

const TRUTH: f64 = 0.5;

fn data() -> ObservedDataset {
    generate(&Scenario::new(ScenarioId::Bnp, 500, 2)).unwrap().observed().unwrap()
}

fn check(s: &Summary) {
    assert!(s.covers(TRUTH), "{s:?}");
    assert!(s.q975 - s.q025 < 0.6, "{s:?}");
}

#[test]
fn dp_interval_covers_the_ate() {
    let d = data();
    let cfg = DpConfig::new(vec![CovariateKind::Bernoulli, CovariateKind::Gaussian]);
    let fit = dp_fit(&d.y, &covariate_rows(&d), &cfg, &ChainConfig::new(2, 1500, 500, 11)).unwrap();
    check(&bnp_ate(&fit.predict(&stacked_test_rows(&d)), 21).unwrap().summary().unwrap());
}

#[test]
fn gp_interval_covers_the_ate() {
    let d = data();
    let x = covariate_rows(&d);
    let cfg = GpConfig { pred_draws: 100, ..GpConfig::default() };
    let fit = gp_fit_predict(&x, &d.y, &stacked_test_rows(&d), &cfg, &ChainConfig::new(2, 600, 300, 12)).unwrap();
    check(&bnp_ate(&fit.predictions, 22).unwrap().summary().unwrap());

    let mean = |c: &str| fit.hyper.column(c).unwrap().iter().sum::<f64>() / fit.hyper.n_rows() as f64;
    let k = kernel_matrix(&x, mean("eta"), mean("rho"));
    assert_eq!(k, k.transpose());
    assert!(SymmetricEigen::new(k).eigenvalues.min() >= 0.009);
}

#[test]
fn bart_interval_covers_the_ate() {
    let d = data();
    let fit = bart_fit_predict(&covariate_rows(&d), &d.y, &stacked_test_rows(&d), &BartConfig::default(), &ChainConfig::new(2, 1500, 500, 13).with_thin(2))
        .unwrap();
    check(&bnp_ate(&fit.predictions, 23).unwrap().summary().unwrap());
}

#[test]
fn additive_linear_fit_is_biased_upward() {
    // The large-sample OLS limit of the treatment coefficient here is about
    // 0.65, so the point estimate sits above the truth.
    let d = data();
    let lin = fit_linear(&d, &LinearModelSpec::default(), &ChainConfig::new(2, 3000, 1000, 14)).unwrap();
    let s = standardize_linear(&lin, d.n(), 24).unwrap().summary().unwrap();
    assert!(s.mean > TRUTH + 0.05, "{s:?}");
}

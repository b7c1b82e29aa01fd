use causal_posterior::data::{Column, ObservedDataset};
use causal_posterior::effects::{standardize_linear, standardize_stratified_or};
use causal_posterior::mcmc::ChainConfig;
use causal_posterior::models::partial_pool::{pooled_mle_effect, stratum_mle_effects};
use causal_posterior::models::dose::dose_mle;
use causal_posterior::models::{fit_dose_ar1, fit_linear, fit_partial_pool, DoseModelSpec, LinearModelSpec, PartialPoolSpec};
use causal_posterior::prob::{expit, RngHandle};
use causal_posterior::synth::{dose_increment, generate, oracle_truth, Estimand, Scenario, ScenarioId, DOSE_K};

fn linear_truth(n: usize, seed: u64) -> ObservedDataset {
    let mut r = RngHandle::new(seed, 7);
    let (mut y, mut a, mut l) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let li = r.std_normal();
        let ai = f64::from(u8::from(r.uniform() < expit(0.5 * li)));
        y.push(1.0 + 2.0 * ai + 1.5 * li + r.std_normal());
        a.push(ai);
        l.push(li);
    }
    ObservedDataset::new(y, a, vec![Column::new("L", l)]).unwrap()
}

#[test]
fn linear_standardization_is_theta_and_covers() {
    let mut covered = 0;
    for rep in 0..20 {
        let d = linear_truth(200, rep);
        let draws = fit_linear(&d, &LinearModelSpec::default(), &ChainConfig::new(2, 2000, 1000, 100 + rep)).unwrap();
        let ate = standardize_linear(&draws, d.n(), rep).unwrap();
        assert_eq!(ate.values(), draws.column("theta").unwrap().as_slice());
        if ate.summary().unwrap().covers(2.0) {
            covered += 1;
        }
    }
    assert!(covered >= 17, "{covered}/20");
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// First seed whose realization has three subjects at dose 8, the sparse
/// dose the comparison is about.
fn sparse_dose_data() -> ObservedDataset {
    (1..)
        .map(|seed| generate(&Scenario::with_default_n(ScenarioId::Dose, seed)).unwrap().observed().unwrap())
        .find(|d| d.a.iter().filter(|&&a| a == 8.0).count() == 3 && (0..=DOSE_K).all(|k| d.a.contains(&(k as f64))))
        .unwrap()
}

#[test]
fn dose_curve_shrinks_toward_smoothness() {
    let d = sparse_dose_data();
    let fit = fit_dose_ar1(&d, &DoseModelSpec::new(DOSE_K, 0.0, 10.0, 1.0), &ChainConfig::new(4, 4000, 2000, 3)).unwrap();
    let post: Vec<f64> = fit.curve.iter().map(|c| c.mean()).collect();
    let theta = dose_mle(&d, DOSE_K).unwrap();
    let mle: Vec<f64> = (0..DOSE_K).map(|k| theta[k] - if k == 0 { 0.0 } else { theta[k - 1] }).collect();
    let truth: Vec<f64> = (1..=DOSE_K).map(dose_increment).collect();
    assert!(rmse(&post, &truth) < rmse(&mle, &truth), "{} vs {}", rmse(&post, &truth), rmse(&mle, &truth));
    assert!((post[7] - post[6]).abs() < (mle[7] - mle[6]).abs());
}

#[test]
fn partial_pooling_sits_between_stratum_and_pooled_fits() {
    let d = generate(&Scenario::with_default_n(ScenarioId::PartialPool, 1)).unwrap().observed().unwrap();
    let draws = fit_partial_pool(&d, &PartialPoolSpec::new(4, 0.5), &ChainConfig::new(4, 4000, 2000, 5)).unwrap();
    let strat = stratum_mle_effects(&d).unwrap();
    let pooled = pooled_mle_effect(&d).unwrap();
    for v in [4usize, 5] {
        let col = draws.column(&format!("effect_v{v}")).unwrap();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let (lo, hi) = if strat[v - 1] < pooled { (strat[v - 1], pooled) } else { (pooled, strat[v - 1]) };
        assert!(lo < m && m < hi, "stratum {v}: {m} not in ({lo}, {hi})");
    }
    let ors = standardize_stratified_or(&draws, &d, 9).unwrap();
    assert_eq!(ors.len(), 5);
    for (v, or) in ors.iter().enumerate() {
        let truth = oracle_truth(ScenarioId::PartialPool, &Estimand::StratumOddsRatio(v + 1), 1_000_000, 11).unwrap();
        let s = or.summary().unwrap();
        assert!(s.covers(truth.value), "stratum {}: {s:?} vs {}", v + 1, truth.value);
    }
}

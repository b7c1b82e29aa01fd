//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails other than a recorded known gap.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use causal_posterior::bnp::dp::{Cluster, CovParam};
use causal_posterior::bnp::gp::gp_posterior_moments;
use causal_posterior::bnp::{
    bart_fit_predict, bnp_ate, covariate_rows, dp_fit, dp_regression, gp_fit_predict, kernel_matrix, stacked_test_rows, BartConfig,
    CovariateKind, DpConfig, DpState, GpConfig, GpHyper,
};
use causal_posterior::data::{Column, LongitudinalDataset, ObservedDataset};
use causal_posterior::effects::{
    bb_weights, sensitivity_perturb, standardize_linear, standardize_stratified_or, Direction, EstimandDraws, SensitivitySpec, Summary,
};
use causal_posterior::gcomp::{fit_sequential, gcomp_dynamic, gcomp_static, Regime, ShrinkageSpec};
use causal_posterior::linalg::ols;
use causal_posterior::mcmc::{effective_sample_size, run_chains, ChainConfig, LogPosteriorTarget};
use causal_posterior::models::dose::dose_mle;
use causal_posterior::models::partial_pool::{pooled_mle_effect, stratum_mle_effects};
use causal_posterior::models::{fit_dose_ar1, fit_linear, fit_partial_pool, DoseModelSpec, LinearModelSpec, PartialPoolSpec};
use causal_posterior::prob::{expit, Distribution, RngHandle};
use causal_posterior::synth::{dose_increment, generate, oracle_truth, Estimand, Scenario, ScenarioId, DOSE_K};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

const BIN: &str = env!("CARGO_BIN_EXE_causal-posterior");

enum Verdict {
    Pass(String),
    Fail(String),
    /// Fails for a reason analysed and accepted in advance.
    KnownGap(String),
}

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn interval(s: &Summary) -> String {
    format!("[{:.3}, {:.3}]", s.q025, s.q975)
}

fn c1_bayesian_bootstrap() -> Check {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for n in [3usize, 50] {
        let mut r = RngHandle::new(11, n as u64);
        let (mut s, mut s2, mut s4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..draws {
            let w = bb_weights(n, &mut r).map_err(|e| e.to_string())?;
            for (j, &x) in w.as_slice().iter().enumerate() {
                let c = x - 1.0 / n as f64;
                s[j] += x;
                s2[j] += c * c;
                s4[j] += c.powi(4);
            }
        }
        let (nf, d) = (n as f64, draws as f64);
        let var_true = (nf - 1.0) / (nf * nf * (nf + 1.0));
        for j in 0..n {
            let (m, v) = (s[j] / d, s2[j] / d);
            let z_mean = (m - 1.0 / nf).abs() / (v / d).sqrt();
            let z_var = (v - var_true).abs() / ((s4[j] / d - v * v) / d).sqrt();
            ensure!(z_mean < 3.0 && z_var < 3.0, "n={n} component {j}: mean z {z_mean:.2}, variance z {z_var:.2}");
            worst = worst.max(z_mean).max(z_var);
        }
    }
    Ok(format!("n in {{3, 50}}, 1e5 draws, largest deviation {worst:.2} MC SE"))
}

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

fn c2_linear_identity() -> Check {
    let mut covered = 0;
    for rep in 0..20 {
        let d = linear_truth(200, rep);
        let draws = fit_linear(&d, &LinearModelSpec::default(), &ChainConfig::new(2, 2000, 1000, 100 + rep)).unwrap();
        let ate = standardize_linear(&draws, d.n(), rep).unwrap();
        ensure!(ate.values() == draws.column("theta").unwrap().as_slice(), "replicate {rep}: standardized draws differ from theta");
        covered += usize::from(ate.summary().unwrap().covers(2.0));
    }
    ensure!(covered >= 17, "coverage {covered}/20");
    Ok(format!("bit-exact on 20/20 replicates, coverage {covered}/20"))
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn c3_dose_curve() -> Check {
    let (seed, d) = (1..)
        .map(|seed| (seed, generate(&Scenario::with_default_n(ScenarioId::Dose, seed)).unwrap().observed().unwrap()))
        .find(|(_, d)| d.a.iter().filter(|&&a| a == 8.0).count() == 3 && (0..=DOSE_K).all(|k| d.a.contains(&(k as f64))))
        .unwrap();
    let fit = fit_dose_ar1(&d, &DoseModelSpec::new(DOSE_K, 0.0, 10.0, 1.0), &ChainConfig::new(4, 4000, 2000, 3)).unwrap();
    let post: Vec<f64> = fit.curve.iter().map(EstimandDraws::mean).collect();
    let theta = dose_mle(&d, DOSE_K).unwrap();
    let mle: Vec<f64> = (0..DOSE_K).map(|k| theta[k] - if k == 0 { 0.0 } else { theta[k - 1] }).collect();
    let truth: Vec<f64> = (1..=DOSE_K).map(dose_increment).collect();
    let (rp, rm) = (rmse(&post, &truth), rmse(&mle, &truth));
    let (gp, gm) = ((post[7] - post[6]).abs(), (mle[7] - mle[6]).abs());
    ensure!(rp < rm, "posterior RMSE {rp:.3} not below MLE RMSE {rm:.3}");
    ensure!(gp < gm, "posterior gap {gp:.3} not below MLE gap {gm:.3}");
    Ok(format!("data seed {seed}: RMSE {rp:.3} < {rm:.3}, |Psi(8)-Psi(7)| {gp:.3} < {gm:.3}"))
}

fn c4_partial_pooling() -> Check {
    let d = generate(&Scenario::with_default_n(ScenarioId::PartialPool, 1)).unwrap().observed().unwrap();
    let draws = fit_partial_pool(&d, &PartialPoolSpec::new(4, 0.5), &ChainConfig::new(4, 4000, 2000, 5)).unwrap();
    let strat = stratum_mle_effects(&d).unwrap();
    let pooled = pooled_mle_effect(&d).unwrap();
    let mut detail = Vec::new();
    for v in [4usize, 5] {
        let m = mean(&draws.column(&format!("effect_v{v}")).unwrap());
        let (lo, hi) = if strat[v - 1] < pooled { (strat[v - 1], pooled) } else { (pooled, strat[v - 1]) };
        ensure!(lo < m && m < hi, "stratum {v}: {m:.3} not in ({lo:.3}, {hi:.3})");
        detail.push(format!("v{v} {m:.3} in ({lo:.3}, {hi:.3})"));
    }
    for (v, or) in standardize_stratified_or(&draws, &d, 9).unwrap().iter().enumerate() {
        let truth = oracle_truth(ScenarioId::PartialPool, &Estimand::StratumOddsRatio(v + 1), 1_000_000, 11).unwrap().value;
        let s = or.summary().unwrap();
        ensure!(s.covers(truth), "stratum {} OR {} misses {truth:.3}", v + 1, interval(&s));
    }
    detail.push("5/5 OR intervals cover the oracle".into());
    Ok(detail.join(", "))
}

fn gcomp_data() -> LongitudinalDataset {
    generate(&Scenario::with_default_n(ScenarioId::Gcomp, 1)).unwrap().longitudinal().unwrap()
}

fn c5_time_decay() -> Check {
    let d = gcomp_data();
    let spec = ShrinkageSpec { prior_only: true, ..ShrinkageSpec::ridge(2.0) };
    let prior = fit_sequential(&d, &spec, &ChainConfig::new(4, 6000, 1000, 2)).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..8 {
        let ratio = (var(&prior.column(&format!("L9_L{s}")).unwrap()) / var(&prior.column(&format!("L9_L{}", s + 1)).unwrap())).sqrt();
        ensure!((ratio / 0.5 - 1.0).abs() < 0.05, "lag ratio at L{s}: {ratio:.3}");
        worst = worst.max((ratio / 0.5 - 1.0).abs());
    }

    let post = fit_sequential(&d, &ShrinkageSpec::ridge(1.25), &ChainConfig::new(4, 3000, 1000, 3)).unwrap();
    let h = 9;
    let x = DMatrix::from_fn(d.n(), 1 + 2 * h, |i, j| match j {
        0 => 1.0,
        j if j <= h => d.l[j - 1][i],
        j => d.a[j - 1 - h][i],
    });
    let mle = ols(&x, &DVector::from_column_slice(&d.l[9])).unwrap().coef;
    let b0 = mean(&post.column("L9_L0").unwrap());
    ensure!(b0.abs() < mle[1].abs(), "|beta_0| {b0:.3} vs MLE {:.3}", mle[1]);
    let b1 = Summary::of(&post.column("L9_L1").unwrap()).unwrap();
    ensure!(b1.covers(mle[2]), "beta_1 interval {} misses MLE {:.3}", interval(&b1), mle[2]);
    Ok(format!(
        "sd ratios within {:.1}% of 0.5; |beta_0| {:.3} < {:.3}; beta_1 {} covers {:.3}",
        100.0 * worst,
        b0.abs(),
        mle[1].abs(),
        interval(&b1),
        mle[2]
    ))
}

fn c6_gcomp() -> Check {
    let d = gcomp_data();
    let tp = d.time_points();
    let draws = fit_sequential(&d, &ShrinkageSpec::ridge(1.1), &ChainConfig::new(4, 3000, 1000, 4).with_thin(4)).unwrap();
    let (always, never) = (Regime::always(tp), Regime::never(tp));
    let same = gcomp_static(&draws, &d, &always, &always, 200, 5).unwrap();
    ensure!(same.contrast.values().iter().all(|&v| v == 0.0), "identical regimes gave a non-zero contrast");

    let s = gcomp_static(&draws, &d, &always, &never, 1000, 6).unwrap().contrast.summary().unwrap();
    let t = oracle_truth(ScenarioId::Gcomp, &Estimand::Regimes(always, never.clone()), 1_000_000, 7).unwrap().value;
    ensure!(s.covers(t), "always vs never {} misses {t:.3}", interval(&s));

    let rule = Regime::Dynamic { kappa: 0.0 };
    let never_rule = Regime::Dynamic { kappa: f64::INFINITY };
    let s2 = gcomp_dynamic(&draws, &d, &rule, &never_rule, 1000, 8).unwrap().contrast.summary().unwrap();
    let t2 = oracle_truth(ScenarioId::Gcomp, &Estimand::Regimes(rule, never), 1_000_000, 9).unwrap().value;
    ensure!(s2.covers(t2), "rule vs never {} misses {t2:.3}", interval(&s2));
    Ok(format!("identical regimes exactly 0; always-never {} covers {t:.3}; rule-never {} covers {t2:.3}", interval(&s), interval(&s2)))
}

fn perturb(psi: &EstimandDraws, prior: Distribution, direction: Direction, seed: u64) -> EstimandDraws {
    sensitivity_perturb(psi, &SensitivitySpec::new(prior, direction).unwrap(), &mut RngHandle::new(seed, 0)).unwrap()
}

fn c7_sensitivity() -> Check {
    let d = generate(&Scenario::with_default_n(ScenarioId::Sensitivity, 1)).unwrap().observed().unwrap();
    let d = d.select_confounders(&["L"]).unwrap();
    let draws = fit_linear(&d, &LinearModelSpec::default(), &ChainConfig::new(4, 5000, 1000, 2)).unwrap();
    let psi = standardize_linear(&draws, d.n(), 3).unwrap();
    let m = psi.len() as f64;
    let (m0, v0) = (mean(psi.values()), var(psi.values()));

    ensure!(perturb(&psi, Distribution::PointMass { value: 0.0 }, Direction::AsIs, 1).values() == psi.values(), "point mass changed draws");

    let up = perturb(&psi, Distribution::Gamma { shape: 1.0, rate: 3.0 }, Direction::Negated, 2);
    let shift: Vec<f64> = up.values().iter().zip(psi.values()).map(|(a, b)| a - b).collect();
    let z_shift = (mean(&shift) - 1.0 / 3.0).abs() / (var(&shift) / m).sqrt();
    ensure!(z_shift < 3.0, "gamma shift {:.4} is {z_shift:.2} MC SE from 1/3", mean(&shift));

    let wide = perturb(&psi, Distribution::Normal { mean: 0.0, sd: 3f64.powf(-0.5) }, Direction::AsIs, 3);
    let z_mean = (mean(wide.values()) - m0).abs() / (1.0 / 3.0 / m).sqrt();
    let infl = (var(wide.values()) - v0) / (1.0 / 3.0) - 1.0;
    ensure!(z_mean < 3.0, "normal prior moved the mean by {z_mean:.2} MC SE");
    ensure!(infl.abs() < 0.05, "variance inflation off by {:.1}%", 100.0 * infl);

    let truth = oracle_truth(ScenarioId::Sensitivity, &Estimand::Ate, 1_000_000, 4).unwrap().value;
    let s = psi.summary().unwrap();
    ensure!(!s.covers(truth), "unperturbed interval {} covers {truth:.3}", interval(&s));
    let xi = oracle_truth(ScenarioId::Sensitivity, &Estimand::OmittedBias, 1_000_000, 5).unwrap().value;
    let adj = perturb(&psi, Distribution::Normal { mean: xi, sd: 0.05 }, Direction::AsIs, 6).summary().unwrap();
    ensure!(adj.covers(truth), "perturbed interval {} misses {truth:.3}", interval(&adj));
    Ok(format!(
        "identity exact; shift z {z_shift:.2}; mean z {z_mean:.2}, variance inflation {:+.1}%; {} excludes {truth:.3}, {} covers it",
        100.0 * infl,
        interval(&s),
        interval(&adj)
    ))
}

/// Reference Nadaraya-Watson estimate with a Gaussian kernel of variance `g`.
fn nadaraya_watson(xs: &[f64], ys: &[f64], g: f64, x: f64) -> f64 {
    let logk: Vec<f64> = xs.iter().map(|xi| -(x - xi).powi(2) / (2.0 * g)).collect();
    let top = logk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k: Vec<f64> = logk.iter().map(|l| (l - top).exp()).collect();
    k.iter().zip(ys).map(|(k, y)| k * y).sum::<f64>() / k.iter().sum::<f64>()
}

fn c8_dp_kernel_limit() -> Check {
    let d = generate(&Scenario::new(ScenarioId::Bnp, 60, 3)).unwrap().observed().unwrap();
    let xs = d.confounders[0].values.clone();
    let g = 0.3;
    let cluster = |y: f64, center: f64| Cluster { beta: vec![y, 0.0], phi: 1.0, cov: vec![CovParam::Gaussian { mean: center, var: g }] };
    let state = DpState {
        assignments: (0..xs.len()).collect(),
        clusters: xs.iter().zip(&d.y).map(|(&x, &y)| cluster(y, x)).collect(),
        alpha: 0.0,
    };
    let prior = cluster(100.0, 0.0);
    let mut rng = RngHandle::new(8, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = -3.0 + 6.0 * rng.uniform();
        let err = (dp_regression(&state, &prior, &[x]) - nadaraya_watson(&xs, &d.y, g, x)).abs();
        ensure!(err < 1e-10, "x={x}: error {err:e}");
        worst = worst.max(err);
    }
    Ok(format!("100 points, max error {worst:.1e}"))
}

fn min_eigen(k: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(k).eigenvalues.min()
}

fn c9_gp() -> Check {
    let mut detail = Vec::new();
    for (id, n, seed) in [(ScenarioId::Bnp, 500, 2), (ScenarioId::Sensitivity, 100, 1)] {
        let d = generate(&Scenario::new(id, n, seed)).unwrap().observed().unwrap();
        let x = covariate_rows(&d);
        let cfg = GpConfig { pred_draws: 20, ..GpConfig::default() };
        let fit = gp_fit_predict(&x, &d.y, &x[..1], &cfg, &ChainConfig::new(2, 400, 200, 31)).unwrap();
        let (eta, rho) = (fit.hyper.column("eta").unwrap(), fit.hyper.column("rho").unwrap());
        let mut hypers = vec![(mean(&eta), mean(&rho))];
        hypers.extend((0..eta.len()).step_by(eta.len() / 4).map(|m| (eta[m], rho[m])));
        let mut lowest = f64::INFINITY;
        for (e, r) in hypers {
            let k = kernel_matrix(&x, e, r);
            ensure!(k == k.transpose(), "{id}: kernel not symmetric at eta {e}, rho {r}");
            lowest = lowest.min(min_eigen(k));
        }
        ensure!(lowest >= 0.009, "{id}: min eigenvalue {lowest:.4}");

        let h = GpHyper { eta: mean(&eta), rho: mean(&rho), noise_sd: 1e-6 };
        let matches: Vec<Option<usize>> = (0..x.len()).map(Some).collect();
        let (mu, _) = gp_posterior_moments(&x, &d.y, &x, &matches, &h).unwrap();
        let err = mu.iter().zip(&d.y).map(|(m, y)| (m - y).abs()).fold(0.0, f64::max);
        ensure!(err < 1e-3, "{id}: interpolation error {err:.2e}");
        detail.push(format!("{id}: min eigenvalue {lowest:.4}, interpolation error {err:.1e}"));
    }
    Ok(detail.join("; "))
}

fn c10_bnp_ate() -> Verdict {
    let d = generate(&Scenario::new(ScenarioId::Bnp, 500, 2)).unwrap().observed().unwrap();
    let (x, test) = (covariate_rows(&d), stacked_test_rows(&d));

    let dp_cfg = DpConfig::new(vec![CovariateKind::Bernoulli, CovariateKind::Gaussian]);
    let dp = dp_fit(&d.y, &x, &dp_cfg, &ChainConfig::new(2, 1500, 500, 11)).unwrap();
    let s_dp = bnp_ate(&dp.predict(&test), 21).unwrap().summary().unwrap();
    let gp_cfg = GpConfig { pred_draws: 100, ..GpConfig::default() };
    let gp = gp_fit_predict(&x, &d.y, &test, &gp_cfg, &ChainConfig::new(2, 600, 300, 12)).unwrap();
    let s_gp = bnp_ate(&gp.predictions, 22).unwrap().summary().unwrap();
    let bart = bart_fit_predict(&x, &d.y, &test, &BartConfig::default(), &ChainConfig::new(2, 1500, 500, 13).with_thin(2)).unwrap();
    let s_bart = bnp_ate(&bart.predictions, 23).unwrap().summary().unwrap();
    let lin = fit_linear(&d, &LinearModelSpec::default(), &ChainConfig::new(2, 3000, 1000, 14)).unwrap();
    let s_lin = standardize_linear(&lin, d.n(), 24).unwrap().summary().unwrap();

    let bnp = [("DP", s_dp), ("GP", s_gp), ("BART", s_bart)];
    let mut detail: Vec<String> = bnp.iter().map(|(n, s)| format!("{n} {}", interval(s))).collect();
    detail.push(format!("linear {:.3} {}", s_lin.mean, interval(&s_lin)));
    let detail = detail.join(", ");

    let covers = bnp.iter().all(|(_, s)| s.covers(0.5));
    let overlap = bnp.iter().all(|(_, a)| bnp.iter().all(|(_, b)| a.q025 <= b.q975 && b.q025 <= a.q975));
    if !(covers && overlap) {
        return Verdict::Fail(format!("BNP intervals cover 0.5: {covers}, overlap: {overlap}; {detail}"));
    }
    if s_lin.covers(0.5) {
        // The linear estimate is biased upward (large-sample limit about
        // 0.65) but its interval is wide enough to reach 0.5 on this seed.
        return Verdict::KnownGap(format!("BNP checks pass; linear baseline interval still covers 0.5; {detail}"));
    }
    Verdict::Pass(detail)
}

/// `y_i ~ N(mu, s^2)` with known `s` and `mu ~ N(0, 1)`.
struct NormalNormal {
    y: Vec<f64>,
    s: f64,
}

impl LogPosteriorTarget for NormalNormal {
    fn dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }

    fn log_posterior(&self, x: &[f64]) -> f64 {
        self.y.iter().map(|v| -0.5 * ((v - x[0]) / self.s).powi(2)).sum::<f64>() - 0.5 * x[0] * x[0]
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0]
    }
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(BIN).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    match o.status.code() {
        Some(0) => Ok(()),
        c => Err(format!("`{}` exited {c:?}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr))),
    }
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::fs::write(dir.join("lin.cfg"), "confounders=L\n").unwrap();
    cli(dir, &["simulate", "--scenario", "sensitivity", "--seed", "5", "--out", "d.csv"])?;
    cli(dir, &["fit", "--model", "linear", "--data", "d.csv", "--config", "lin.cfg", "--iter", "3000", "--seed", "6", "--out", "draws.csv"])?;
    cli(dir, &["effects", "--mode", "marginal", "--draws", "draws.csv", "--data", "d.csv", "--seed", "7", "--out", "ate.csv"])?;
    cli(dir, &["effects", "--mode", "sensitivity", "--draws", "ate.csv", "--sens-prior", "normal:0,0.577", "--seed", "8", "--out", "s.csv"])?;
    Ok(pipeline_files(dir))
}

fn c11_engine() -> Check {
    let mut r = RngHandle::new(3, 0);
    let target = NormalNormal { y: (0..25).map(|_| r.normal(1.5, 2.0)).collect(), s: 2.0 };
    let prec = 1.0 + 25.0 / 4.0;
    let (pm, pv) = (target.y.iter().sum::<f64>() / 4.0 / prec, 1.0 / prec);
    let draws = run_chains(&target, &ChainConfig::new(4, 12000, 2000, 5)).unwrap();
    let mu = draws.column("mu").unwrap();
    let ess = effective_sample_size(&draws, "mu").unwrap();
    let z_mean = (mean(&mu) - pm).abs() / (pv / ess).sqrt();
    let z_var = (var(&mu) - pv).abs() / (pv * (2.0 / ess).sqrt());
    ensure!(z_mean < 4.0 && z_var < 4.0, "moment z-scores {z_mean:.2}, {z_var:.2}");

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure!(first == second, "two same-seed pipeline runs differ");
    for manifest in ["d.csv", "draws.csv", "ate.csv", "s.csv"].map(|o| format!("{o}.manifest.json")) {
        cli(a.path(), &["replay", "--manifest", &manifest])?;
    }
    ensure!(pipeline_files(a.path()) == first, "replay changed bytes");
    Ok(format!("moment z-scores {z_mean:.2}, {z_var:.2} (ESS {ess:.0}); {} files byte-identical across runs and replays", first.len()))
}

fn pipeline_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), std::fs::read(dir.join(&n)).unwrap())).collect()
}

fn main() {
    let criteria: Vec<(u8, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "Bayesian bootstrap moments", Box::new(|| c1_bayesian_bootstrap().into())),
        (2, "linear standardization identity", Box::new(|| c2_linear_identity().into())),
        (3, "dose curve shrinkage", Box::new(|| c3_dose_curve().into())),
        (4, "partial pooling", Box::new(|| c4_partial_pooling().into())),
        (5, "time-decay prior", Box::new(|| c5_time_decay().into())),
        (6, "g-computation", Box::new(|| c6_gcomp().into())),
        (7, "sensitivity analysis", Box::new(|| c7_sensitivity().into())),
        (8, "DP kernel limit", Box::new(|| c8_dp_kernel_limit().into())),
        (9, "GP kernel and interpolation", Box::new(|| c9_gp().into())),
        (10, "BNP average treatment effect", Box::new(c10_bnp_ate)),
        (11, "engine soundness and replay", Box::new(|| c11_engine().into())),
    ];
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Verdict::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(d) => println!("criterion {id:>2} PASS  {name} ({secs:.1}s): {d}"),
            Verdict::KnownGap(d) => println!("criterion {id:>2} FAIL  {name} ({secs:.1}s, known gap): {d}"),
            Verdict::Fail(d) => {
                unexpected += 1;
                println!("criterion {id:>2} FAIL  {name} ({secs:.1}s): {d}");
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}

impl From<Check> for Verdict {
    fn from(c: Check) -> Self {
        match c {
            Ok(d) => Verdict::Pass(d),
            Err(d) => Verdict::Fail(d),
        }
    }
}

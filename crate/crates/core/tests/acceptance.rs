//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trendsense::did::{att_dml, riesz_values, AttEstimate};
use trendsense::learners::{
    assign_folds, crossfit, crossfit_with_folds, fit_logistic, fit_ols, isotonic_calibrate, log_likelihood,
    LearnerSpec, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use trendsense::multi::{att_gt, gt_subsample, GroupTimeSpec};
use trendsense::panel::{canonical_2x2, ControlGroup, FirstTreatment, PanelDataset, TwoByTwoView};
use trendsense::sensitivity::{
    benchmark, elements, robustness_value, robustness_value_a, symmetric_bound, BENCHMARK_FLOOR,
};
use trendsense::simulation::{
    calibrate_confounding, run_monte_carlo, CalibrationResult, DgpConfig, MonteCarloSettings, RawDraw, SimTables,
};
use trendsense::stats::{mean, sd};

const CALIBRATION_SEED: u64 = 20240101;
const MC_SEED: u64 = 7;
const THETA0: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn calibration() -> &'static CalibrationResult {
    static CAL: OnceLock<CalibrationResult> = OnceLock::new();
    CAL.get_or_init(|| {
        calibrate_confounding(0.1, 1_000_000, 0.005, CALIBRATION_SEED, &DgpConfig::default())
            .expect("calibration converges")
    })
}

fn calibrated(n: usize) -> DgpConfig {
    let cal = calibration();
    DgpConfig { n, gamma_a: cal.gamma_a, beta_a: cal.beta_a, ..DgpConfig::default() }
}

fn mc_settings() -> MonteCarloSettings {
    MonteCarloSettings { reps: 500, level: 0.9, seed: MC_SEED, learner: LearnerSpec::default(), normalized: false }
}

fn table_run_n1000() -> &'static SimTables {
    static RUN: OnceLock<SimTables> = OnceLock::new();
    RUN.get_or_init(|| run_monte_carlo(&calibrated(1000), &calibration().oracle, &mc_settings()).expect("mc run"))
}

// ---------------------------------------------------------------- 1, 2, 3

fn criterion_1() -> Outcome {
    let t = table_run_n1000();
    let th = t.point.theta_short.mean;
    let tm = t.point.theta_minus.mean;
    let rv = t.point.rv.mean;
    check(
        t.reps_ok == 500 && within(th, 5.25, 5.35) && within(tm, 4.95, 5.05) && within(rv, 0.08, 0.14),
        format!(
            "reps_ok={} mean theta_s={th:.4} in [5.25,5.35]; mean theta_minus={tm:.4} in [4.95,5.05]; mean RV={rv:.4} in [0.08,0.14]; oracle cf_y={:.4} cf_d={:.4} rho={:.4}",
            t.reps_ok, calibration().oracle.cf_y, calibration().oracle.cf_d, calibration().oracle.rho
        ),
    )
}

fn criterion_2() -> Outcome {
    let t = table_run_n1000();
    let cov_minus = t.intervals.coverage_minus;
    let cov_short = t.intervals.coverage_short;
    let gap = (t.intervals.ell_minus.mean - t.intervals.ell_long.mean).abs();
    check(
        t.settings.level == 0.9 && within(cov_minus, 0.89, 0.96) && cov_short <= 0.75 && gap < 0.05,
        format!(
            "P(theta0 >= ell_minus)={cov_minus:.3} in [0.89,0.96]; P(theta0 >= ell_s)={cov_short:.3} <= 0.75; |mean ell_minus - mean ell_long|={gap:.4} < 0.05"
        ),
    )
}

fn criterion_3() -> Outcome {
    let t = run_monte_carlo(&calibrated(5000), &calibration().oracle, &mc_settings()).expect("mc run");
    let gap = (t.point.theta_minus.mean - t.point.theta_long.mean).abs();
    let ratio = t.point.theta_minus.sd.unwrap() / t.point.theta_long.sd.unwrap();
    check(
        t.reps_ok == 500 && gap < 0.02 && within(ratio, 0.9, 1.15),
        format!(
            "n=5000 reps_ok={}: |mean theta_minus - mean theta_long|={gap:.4} < 0.02; sd ratio={ratio:.3} in [0.9,1.15] (sd {:.4} vs {:.4})",
            t.reps_ok,
            t.point.theta_minus.sd.unwrap(),
            t.point.theta_long.sd.unwrap()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let cfg = calibrated(50_000);
    let sample = RawDraw::new(cfg.n, 4401).realize(&cfg);
    let view = sample.short_view().unwrap();
    let fit = crossfit(&view, &LearnerSpec { seed: 4401, ..LearnerSpec::default() }).unwrap();
    let n = fit.n() as f64;
    let alpha = riesz_values(&fit, false);
    let m_alpha = mean(&alpha);
    let se_alpha = sd(&alpha) / n.sqrt();
    let p = fit.p_hat;
    let diff: Vec<f64> =
        alpha.iter().zip(&fit.m_hat).map(|(a, m)| a * a - m / ((1.0 - m) * p * p)).collect();
    let m_diff = mean(&diff);
    let se_diff = sd(&diff) / n.sqrt();
    let ok_a = m_alpha.abs() <= 3.0 * se_alpha;
    let ok_b = m_diff.abs() <= 3.0 * se_diff;

    // bias decomposition on one large draw, short and long fits on shared folds
    let cfg = calibrated(200_000);
    let sample = RawDraw::new(cfg.n, 4402).realize(&cfg);
    let short_view = sample.short_view().unwrap();
    let long_view = sample.long_view().unwrap();
    let learner = LearnerSpec { seed: 4402, ..LearnerSpec::default() };
    let folds = assign_folds(&short_view.treat, learner.folds, learner.seed).unwrap();
    let short = att_dml(&crossfit_with_folds(&short_view, &learner, &folds).unwrap(), false).unwrap();
    let long = att_dml(&crossfit_with_folds(&long_view, &learner, &folds).unwrap(), false).unwrap();
    let product = bias_product(&short, &long);
    // theta_long - theta_short = E[(g - g_s)(alpha - alpha_s)]
    let resid = ((long.theta - short.theta) - product).abs();
    // the same identity with the left side written as theta_short - theta_long
    let resid_flipped = ((short.theta - long.theta) - product).abs();
    check(
        ok_a && ok_b && resid < 0.02,
        format!(
            "n=50000: mean(alpha)={m_alpha:.5} (3 MC-se {:.5}); mean(alpha^2 - m/((1-m)p^2))={m_diff:.4} (3 MC-se {:.4}); n=200000: theta_long-theta_short={:.4}, mean[(g-g_s)(alpha-alpha_s)]={product:.4}, residual={resid:.4} < 0.02 (left side written as theta_short-theta_long: residual {resid_flipped:.4})",
            3.0 * se_alpha,
            3.0 * se_diff,
            long.theta - short.theta
        ),
    )
}

fn bias_product(short: &AttEstimate, long: &AttEstimate) -> f64 {
    let gs = short.fit().unwrap().g_hat();
    let gl = long.fit().unwrap().g_hat();
    let n = gs.len() as f64;
    gl.iter()
        .zip(&gs)
        .zip(long.riesz.iter().zip(&short.riesz))
        .map(|((g, g_s), (a, a_s))| (g - g_s) * (a - a_s))
        .sum::<f64>()
        / n
}

// ---------------------------------------------------------------- 5

/// Bound along the symmetric ray, computed from the fit vectors directly.
fn oracle_bound(est: &AttEstimate, c: f64, rho: f64) -> f64 {
    let fit = est.fit().unwrap();
    let n = fit.n() as f64;
    let p = fit.treat.iter().filter(|&&d| d).count() as f64 / n;
    let mut sigma2 = 0.0;
    let mut nu2 = 0.0;
    for i in 0..fit.n() {
        let (g, a) = if fit.treat[i] {
            (fit.g1_hat[i], 1.0 / p)
        } else {
            (fit.g0_hat[i], -fit.m_hat[i] / (p * (1.0 - fit.m_hat[i])))
        };
        sigma2 += (fit.delta_y[i] - g).powi(2);
        nu2 += a * a;
    }
    rho.abs() * (c * c / (1.0 - c) * (sigma2 / n) * (nu2 / n)).sqrt()
}

fn bisect_rv(est: &AttEstimate, h0: f64, rho: f64) -> f64 {
    let gap = (est.theta - h0).abs();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if oracle_bound(est, mid, rho) < gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_5() -> Outcome {
    let cfg = calibrated(1000);
    let rhos = [1.0, calibration().oracle.rho, 0.3, -1.0];
    let mut worst_root = 0.0f64;
    let mut worst_bisect = 0.0f64;
    let mut rva_violations = 0usize;
    let mut fits = 0usize;
    for k in 0..1000u64 {
        let sample = RawDraw::new(cfg.n, 50_000 + k).realize(&cfg);
        let view = sample.short_view().unwrap();
        let est = att_dml(&crossfit(&view, &LearnerSpec { seed: k, ..LearnerSpec::default() }).unwrap(), false).unwrap();
        let el = elements(&est).unwrap();
        let rho = rhos[k as usize % rhos.len()];
        for h0 in [THETA0, 0.0] {
            let rv = robustness_value(&el, h0, rho).unwrap();
            let gap = (est.theta - h0).abs();
            worst_root = worst_root.max((symmetric_bound(&el, rv, rho) - gap).abs());
            worst_root = worst_root.max((oracle_bound(&est, rv, rho) - gap).abs());
            worst_bisect = worst_bisect.max((rv - bisect_rv(&est, h0, rho)).abs());
            let rva = robustness_value_a(&el, h0, rho, 0.9).unwrap();
            if rva > rv {
                rva_violations += 1;
            }
        }
        fits += 1;
    }
    check(
        worst_root < 1e-8 && worst_bisect < 1e-10 && rva_violations == 0,
        format!(
            "{fits} fits x 2 nulls: max |B(RV) - |theta-h0||={worst_root:.2e} < 1e-8; max |RV - RV_bisect|={worst_bisect:.2e} < 1e-10; RV_a > RV in {rva_violations} cases"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn random_two_period(rng: &mut ChaCha8Rng, n: usize) -> PanelDataset {
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut g = Vec::with_capacity(n);
    let mut y = DMatrix::zeros(n, 2);
    for i in 0..n {
        let d = rng.random_bool(0.4);
        g.push(if d { FirstTreatment::At(2) } else { FirstTreatment::Never });
        let e: f64 = rng.sample(StandardNormal);
        y[(i, 0)] = x[(i, 0)] + rng.sample::<f64, _>(StandardNormal);
        y[(i, 1)] = y[(i, 0)] + 0.5 * x[(i, 1)] + if d { 1.0 } else { 0.0 } + e;
    }
    PanelDataset::new((0..n).map(|i| format!("u{i}")).collect(), vec![1, 2], y, vec!["x1".into(), "x2".into()], x, g, None)
        .unwrap()
}

fn random_staggered(rng: &mut ChaCha8Rng) -> PanelDataset {
    let n = rng.random_range(20..80);
    let t = rng.random_range(3..8);
    let start = rng.random_range(1990..2000);
    let periods: Vec<i64> = (0..t).map(|k| start + k as i64).collect();
    let g = (0..n)
        .map(|_| {
            let k = rng.random_range(0..t);
            if k == 0 { FirstTreatment::Never } else { FirstTreatment::At(periods[k]) }
        })
        .collect();
    let y = DMatrix::from_fn(n, t, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    PanelDataset::new((0..n).map(|i| i.to_string()).collect(), periods, y, vec!["x".into()], x, g, None).unwrap()
}

fn control_units(view: &TwoByTwoView) -> BTreeSet<usize> {
    view.units.iter().zip(&view.treat).filter(|(_, &d)| !d).map(|(&u, _)| u).collect()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut mismatches = 0;
    for k in 0..20u64 {
        let ds = random_two_period(&mut rng, 150);
        let learner = LearnerSpec::default();
        let spec = GroupTimeSpec::with_base_period(&ds, 2, 2, 0, ControlGroup::NeverTreated).unwrap();
        let gt = att_gt(&ds, &spec, &learner, true, k).unwrap().estimate;
        let direct = att_dml(&crossfit(&canonical_2x2(&ds).unwrap(), &learner.with_seed(k)).unwrap(), true).unwrap();
        let same = gt.theta.to_bits() == direct.theta.to_bits()
            && gt.se.to_bits() == direct.se.to_bits()
            && gt.psi.iter().zip(&direct.psi).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches += 1;
        }
    }

    let mut cells = 0;
    let mut violations = 0;
    for _ in 0..100 {
        let ds = random_staggered(&mut rng);
        let delta = rng.random_range(0..2usize);
        for g in ds.cohorts() {
            for &t in &ds.periods()[1..] {
                let sub = |control| {
                    GroupTimeSpec::with_base_period(&ds, g, t, delta, control)
                        .and_then(|s| gt_subsample(&ds, &s))
                        .ok()
                        .map(|v| control_units(&v))
                };
                let never = sub(ControlGroup::NeverTreated);
                let notyet = sub(ControlGroup::NotYetTreated);
                match (never, notyet) {
                    (Some(a), Some(b)) => {
                        cells += 1;
                        if !a.is_subset(&b) {
                            violations += 1;
                        }
                    }
                    (Some(_), None) => violations += 1,
                    _ => {}
                }
            }
        }
    }
    check(
        mismatches == 0 && violations == 0 && cells > 0,
        format!("20 two-period panels: {mismatches} non-identical att_gt vs att_dml; 100 staggered panels: {cells} cells, {violations} never-treated sets not contained in not-yet-treated sets"),
    )
}

// ---------------------------------------------------------------- 7

/// Gaussian elimination with partial pivoting on the augmented system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn ols_oracle(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, p) = x.shape();
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain((0..p).map(|j| x[(i, j)])).collect() };
    let mut xtx = vec![vec![0.0; p + 1]; p + 1];
    let mut xty = vec![0.0; p + 1];
    for i in 0..n {
        let r = row(i);
        for a in 0..=p {
            xty[a] += r[a] * y[i];
            for b in 0..=p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    for (a, row) in xtx.iter_mut().enumerate().skip(1) {
        row[a] += lambda;
    }
    solve_dense(xtx, xty)
}

fn loglik_gd_oracle(x: &DMatrix<f64>, d: &[bool]) -> f64 {
    let (n, p) = x.shape();
    let mut beta = vec![0.0; p + 1];
    // step below 4/λmax(X'X) keeps the ascent monotone
    let frob: f64 = (0..n).map(|i| 1.0 + (0..p).map(|j| x[(i, j)].powi(2)).sum::<f64>()).sum();
    let step = 4.0 / frob;
    for _ in 0..2_000_000 {
        let mut grad = vec![0.0; p + 1];
        for i in 0..n {
            let eta = beta[0] + (0..p).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
            let r = if d[i] { 1.0 } else { 0.0 } - 1.0 / (1.0 + (-eta).exp());
            grad[0] += r;
            for j in 0..p {
                grad[j + 1] += r * x[(i, j)];
            }
        }
        if grad.iter().all(|g| g.abs() < 1e-11) {
            break;
        }
        for (b, g) in beta.iter_mut().zip(&grad) {
            *b += step * g;
        }
    }
    (0..n)
        .map(|i| {
            let eta = beta[0] + (0..p).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
            let pr = 1.0 / (1.0 + (-eta).exp());
            if d[i] { pr.ln() } else { (1.0 - pr).ln() }
        })
        .sum()
}

/// Best monotone fit by enumerating every split of the pooled blocks into
/// consecutive segments whose means are non-decreasing.
fn pav_brute_force(scores: &[f64], labels: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut blocks: Vec<(f64, f64, f64)> = Vec::new(); // (score, sum, weight)
    for &i in &order {
        match blocks.last_mut() {
            Some(b) if b.0 == scores[i] => {
                b.1 += labels[i];
                b.2 += 1.0;
            }
            _ => blocks.push((scores[i], labels[i], 1.0)),
        }
    }
    let m = blocks.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (m - 1)) {
        let mut levels = vec![0.0; m];
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut ok = true;
        for b in 0..m {
            if b == m - 1 || mask & (1 << b) != 0 {
                let (s, w) = blocks[start..=b].iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.1, acc.1 + x.2));
                let level = s / w;
                if level < prev {
                    ok = false;
                    break;
                }
                prev = level;
                levels[start..=b].iter_mut().for_each(|l| *l = level);
                start = b + 1;
            }
        }
        if !ok {
            continue;
        }
        let sse: f64 = (0..scores.len())
            .map(|i| {
                let b = blocks.iter().position(|bl| bl.0 == scores[i]).unwrap();
                (labels[i] - levels[b]).powi(2)
            })
            .sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
            best = Some((sse, levels));
        }
    }
    let levels = best.unwrap().1;
    scores.iter().map(|s| levels[blocks.iter().position(|bl| bl.0 == *s).unwrap()]).collect()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut ols_err = 0.0f64;
    for k in 0..50 {
        let x = DMatrix::from_fn(20, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..20).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect();
        let lambda = if k % 2 == 0 { 0.0 } else { rng.random_range(0.0..5.0) };
        let model = fit_ols(&x, &y, lambda).unwrap();
        let oracle = ols_oracle(&x, &y, lambda);
        ols_err = ols_err.max((model.intercept - oracle[0]).abs());
        for j in 0..3 {
            ols_err = ols_err.max((model.coefficients[j] - oracle[j + 1]).abs());
        }
    }

    let mut ll_err = 0.0f64;
    for _ in 0..10 {
        let x = DMatrix::from_fn(50, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d: Vec<bool> = (0..50)
            .map(|i| {
                let eta = 0.3 + 0.8 * x[(i, 0)] - 0.5 * x[(i, 1)];
                rng.random_bool(1.0 / (1.0 + (-eta).exp()))
            })
            .collect();
        let model = fit_logistic(&x, &d, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let ll = log_likelihood(&model.predict_proba(&x), &d);
        ll_err = ll_err.max((ll - loglik_gd_oracle(&x, &d)).abs());
    }

    let mut pav_fail = 0;
    let mut pav_cases = 0;
    for _ in 0..2000 {
        let n = rng.random_range(1..=10);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 2.0).collect();
        let labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let map = isotonic_calibrate(&scores, &labels);
        let fitted = map.apply(&scores);
        let oracle = pav_brute_force(&scores, &labels);
        pav_cases += 1;
        if fitted.iter().zip(&oracle).any(|(a, b)| (a - b).abs() > 1e-12) {
            pav_fail += 1;
        }
    }

    let leak = leakage_changes(&mut rng);
    check(
        ols_err < 1e-8 && ll_err < 1e-6 && pav_fail == 0 && leak == 0,
        format!(
            "OLS max |beta - normal-equation oracle|={ols_err:.2e} < 1e-8; IRLS max |loglik - gradient-ascent oracle|={ll_err:.2e} < 1e-6; PAV {pav_fail}/{pav_cases} mismatches vs brute force; leakage: {leak} held-out predictions changed"
        ),
    )
}

/// Permutes each held-out fold's labels and counts predictions of that fold
/// that move.
fn leakage_changes(rng: &mut ChaCha8Rng) -> usize {
    use rand::seq::SliceRandom;
    let n = 300;
    let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let treat: Vec<bool> = (0..n).map(|i| rng.random_bool(1.0 / (1.0 + (-x[(i, 0)]).exp()))).collect();
    let dy: Vec<f64> = (0..n).map(|i| x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
    let view = TwoByTwoView::new(dy, treat, x, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let mut changed = 0;
    for calibrate in [false, true] {
        let spec = LearnerSpec { calibrate, seed: 3, ..LearnerSpec::default() };
        let folds = assign_folds(&view.treat, spec.folds, spec.seed).unwrap();
        let base = crossfit_with_folds(&view, &spec, &folds).unwrap();
        for k in 0..spec.folds {
            let rows: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
            let mut perm = rows.clone();
            perm.shuffle(rng);
            let mut v = view.clone();
            for (&dst, &src) in rows.iter().zip(&perm) {
                v.delta_y[dst] = view.delta_y[src];
                v.treat[dst] = view.treat[src];
            }
            let refit = crossfit_with_folds(&v, &spec, &folds).unwrap();
            for &i in &rows {
                if refit.g0_hat[i].to_bits() != base.g0_hat[i].to_bits()
                    || refit.g1_hat[i].to_bits() != base.g1_hat[i].to_bits()
                    || refit.m_hat[i].to_bits() != base.m_hat[i].to_bits()
                {
                    changed += 1;
                }
            }
        }
    }
    changed
}

// ---------------------------------------------------------------- 8

fn with_noise_column(view: &TwoByTwoView, seed: u64) -> TwoByTwoView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = view.n();
    let k = view.xmat.ncols();
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j < k { view.xmat[(i, j)] } else { rng.sample(StandardNormal) });
    let mut names = view.covariate_names.clone();
    names.push("noise".into());
    TwoByTwoView::new(view.delta_y.clone(), view.treat.clone(), x, names).unwrap()
}

fn criterion_8() -> Outcome {
    let cfg = calibrated(10_000);
    let learner = LearnerSpec { seed: 808, ..LearnerSpec::default() };
    let noise_view = with_noise_column(&RawDraw::new(cfg.n, 808).realize(&cfg).short_view().unwrap(), 809);
    let noise = benchmark(&noise_view, &learner, &["noise".into()], true).unwrap();
    let noise_ok = noise.scenario.cf_y == BENCHMARK_FLOOR && noise.scenario.cf_d == BENCHMARK_FLOOR;

    let z1 = benchmark(&RawDraw::new(cfg.n, 810).realize(&cfg).short_view().unwrap(), &learner, &["Z1".into()], true)
        .unwrap();
    let z1_ok = z1.scenario.cf_d > 0.01;

    // backed-out rho over a spread of designs and leave-out sets
    let mut rho_bad = 0;
    let mut raw_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut runs = 0;
    for k in 0..40u64 {
        let cfg = calibrated(2000);
        let view = RawDraw::new(cfg.n, 8100 + k).realize(&cfg).short_view().unwrap();
        let name = format!("Z{}", 1 + k % 5);
        let r = benchmark(&view, &learner.with_seed(k), &[name], k % 2 == 0).unwrap();
        runs += 1;
        if !(0.0..=1.0).contains(&r.scenario.rho.abs()) {
            rho_bad += 1;
        }
        if r.b_short > 0.0 {
            let raw = (r.theta_full - r.theta_short) / r.b_short;
            raw_range = (raw_range.0.min(raw), raw_range.1.max(raw));
        }
    }
    check(
        noise_ok && z1_ok && rho_bad == 0,
        format!(
            "noise leave-out: cf_y={} cf_d={} (floor {BENCHMARK_FLOOR}); Z1 leave-out: cf_d={:.4} > 0.01 (cf_y={:.4}); |rho| outside [0,1] in {rho_bad}/{runs} runs (unclipped ratio range [{:.3}, {:.3}])",
            noise.scenario.cf_y, noise.scenario.cf_d, z1.scenario.cf_d, z1.scenario.cf_y, raw_range.0, raw_range.1
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 point estimation table (n=1000)", criterion_1),
        ("2 confidence-limit coverage (n=1000)", criterion_2),
        ("3 oracle equivalence (n=5000)", criterion_3),
        ("4 Riesz and bias identities", criterion_4),
        ("5 robustness value root property", criterion_5),
        ("6 structural reductions", criterion_6),
        ("7 learner oracles", criterion_7),
        ("8 benchmarking sanity", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = f();
        ran += 1;
        if !out.pass {
            failed += 1;
        }
        println!(
            "acceptance {name}: {} ({:.1}s) {}",
            if out.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

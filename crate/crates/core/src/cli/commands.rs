use serde_json::json;

use super::config::{RunConfig, ScenarioSource};
use super::output::Outputs;
use crate::did::{att_dml, AttEstimate};
use crate::error::{Error, Result};
use crate::learners::crossfit;
use crate::multi::{att_gt, att_gt_all, GroupTimeSpec, GtResult};
use crate::panel::{canonical_2x2, load_csv, PanelDataset, TwoByTwoView};
use crate::sensitivity::{
    benchmark, contour_grid, elements, pretest_scenario, sensitivity_report, write_contour_csv, write_contour_svg,
    Scenario,
};
use crate::simulation::{
    calibrate_confounding, kernel_density, run_monte_carlo, standardized_histogram, write_xy_csv, CalibrationResult,
    MonteCarloSettings, OracleScenario, SimTables,
};

fn f(v: f64) -> String {
    v.to_string()
}

fn load(cfg: &RunConfig) -> Result<PanelDataset> {
    load_csv(cfg.data_path()?, &cfg.schema())
}

fn cell_spec(ds: &PanelDataset, cfg: &RunConfig) -> Result<Option<GroupTimeSpec>> {
    match (cfg.g, cfg.t_eval) {
        (Some(g), Some(t)) => Ok(Some(GroupTimeSpec::with_base_period(ds, g, t, cfg.delta, cfg.control)?)),
        (None, None) if ds.n_periods() == 2 => Ok(None),
        (None, None) => Err(Error::InvalidArgument(
            "--g and --t-eval select the cell to analyse on panels with more than two periods".into(),
        )),
        _ => Err(Error::InvalidArgument("--g and --t-eval must be given together".into())),
    }
}

/// The 2x2 view analysed by the single-cell commands.
fn cell_view(ds: &PanelDataset, cfg: &RunConfig) -> Result<TwoByTwoView> {
    match cell_spec(ds, cfg)? {
        Some(spec) => crate::multi::gt_subsample(ds, &spec),
        None => canonical_2x2(ds),
    }
}

fn cell_estimate(ds: &PanelDataset, cfg: &RunConfig) -> Result<AttEstimate> {
    match cell_spec(ds, cfg)? {
        Some(spec) => Ok(att_gt(ds, &spec, &cfg.learner_spec(), cfg.normalized, cfg.seed)?.estimate),
        None => att_dml(&crossfit(&canonical_2x2(ds)?, &cfg.learner_spec())?, cfg.normalized),
    }
}

fn pre_cells(ds: &PanelDataset, cfg: &RunConfig) -> Vec<GtResult> {
    att_gt_all(ds, cfg.delta, cfg.control, &cfg.learner_spec(), cfg.normalized, cfg.seed)
        .results
        .into_iter()
        .filter(|r| r.pre_period)
        .collect()
}

pub fn estimate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = load(cfg)?;
    let level = cfg.level_or(0.95);
    let batch = att_gt_all(&ds, cfg.delta, cfg.control, &cfg.learner_spec(), cfg.normalized, cfg.seed);
    if batch.results.is_empty() {
        let reasons: Vec<String> = batch.skipped.iter().map(|s| format!("({}, {}): {}", s.g, s.t_eval, s.reason)).collect();
        return Err(Error::DegenerateGroups(format!("no estimable group-time cells; {}", reasons.join("; "))));
    }
    let rows = batch.results.iter().map(|r| r.row(level)).collect::<Result<Vec<_>>>()?;
    let detailed: Vec<_> = batch
        .results
        .iter()
        .zip(&rows)
        .map(|(r, row)| json!({"cell": row, "fragile": r.fragile, "pre_period": r.pre_period, "propensity_converged": r.estimate.nuisance.as_ref().is_none_or(|f| f.propensity_converged)}))
        .collect();
    out.json(
        "att_gt.json",
        json!({"level": level, "normalized": cfg.normalized, "base_period_rule": "consecutive before g - delta, anchored at g - delta - 1 afterwards", "results": detailed, "skipped": batch.skipped}),
    )?;
    out.csv(
        "att_gt.csv",
        &["g", "t_pre", "t_eval", "theta", "se", "ci_low", "ci_high", "n_treated", "n_control"],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.g.to_string(),
                    r.t_pre.to_string(),
                    r.t_eval.to_string(),
                    f(r.theta),
                    f(r.se),
                    f(r.ci_low),
                    f(r.ci_high),
                    r.n_treated.to_string(),
                    r.n_control.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    println!("{:>6} {:>6} {:>6} {:>12} {:>10} {:>24}", "g", "t_pre", "t_eval", "theta", "se", format!("{:.0}% CI", level * 100.0));
    for (r, full) in rows.iter().zip(&batch.results) {
        println!(
            "{:>6} {:>6} {:>6} {:>12.4} {:>10.4}   [{:>9.4}, {:>9.4}]{}",
            r.g,
            r.t_pre,
            r.t_eval,
            r.theta,
            r.se,
            r.ci_low,
            r.ci_high,
            if full.fragile { "  (fragile cohort)" } else { "" }
        );
    }
    for s in &batch.skipped {
        println!("skipped g = {}, t_eval = {}: {}", s.g, s.t_eval, s.reason);
    }
    Ok(())
}

fn scenario_for(ds: &PanelDataset, cfg: &RunConfig) -> Result<Scenario> {
    match cfg.scenario_from {
        Some(ScenarioSource::Pretest) => pretest_scenario(&pre_cells(ds, cfg), cfg.k, cfg.rho),
        Some(ScenarioSource::Benchmark) => {
            Ok(benchmark(&cell_view(ds, cfg)?, &cfg.learner_spec(), &cfg.leave_out, cfg.normalized)?.scenario)
        }
        None => Scenario::new(cfg.cf_y.unwrap_or(0.0), cfg.cf_d.unwrap_or(0.0), cfg.rho, "user"),
    }
}

pub fn sensitivity(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    if cfg.scenario_from.is_none() && (cfg.cf_y.is_none() || cfg.cf_d.is_none()) {
        return Err(Error::InvalidArgument("give --cf-y and --cf-d, or --scenario-from pretest|benchmark".into()));
    }
    let ds = load(cfg)?;
    let level = cfg.level_or(0.95);
    let sc = scenario_for(&ds, cfg)?;
    let est = cell_estimate(&ds, cfg)?;
    let el = elements(&est)?;
    let report = sensitivity_report(&el, &sc, level, cfg.h0)?;
    out.json("sensitivity.json", json!({"report": report}))?;
    let b = &report.bounds;
    out.csv(
        "sensitivity.csv",
        &["theta", "se", "cf_y", "cf_d", "rho", "theta_minus", "theta_plus", "ell_minus", "u_plus", "rv", "rv_a", "h0", "level"],
        &[vec![
            f(report.theta),
            f(report.se),
            f(sc.cf_y),
            f(sc.cf_d),
            f(sc.rho),
            f(b.theta_minus),
            f(b.theta_plus),
            f(b.ell_minus),
            f(b.u_plus),
            report.rv.map(f).unwrap_or_default(),
            report.rv_a.map(f).unwrap_or_default(),
            f(cfg.h0),
            f(level),
        ]],
    )?;
    println!("scenario      {} (cf_y = {:.4}, cf_d = {:.4}, rho = {:.4})", sc.label, sc.cf_y, sc.cf_d, sc.rho);
    println!("theta         {:.4} (se {:.4})", report.theta, report.se);
    println!("bounds        [{:.4}, {:.4}]", b.theta_minus, b.theta_plus);
    println!("{:.0}% bounds   [{:.4}, {:.4}]", level * 100.0, b.ell_minus, b.u_plus);
    match (report.rv, report.rv_a) {
        (Some(rv), Some(rv_a)) => println!("RV (h0 = {})   {:.4}   RV_a {:.4}", cfg.h0, rv, rv_a),
        _ => println!("RV undefined for rho = 0"),
    }
    Ok(())
}

pub fn benchmark_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = load(cfg)?;
    let res = benchmark(&cell_view(&ds, cfg)?, &cfg.learner_spec(), &cfg.leave_out, cfg.normalized)?;
    out.json("benchmark.json", json!({"benchmark": res}))?;
    out.csv(
        "benchmark.csv",
        &["leave_out", "cf_y", "cf_d", "rho", "theta_full", "theta_short"],
        &[vec![
            res.leave_out.join(";"),
            f(res.scenario.cf_y),
            f(res.scenario.cf_d),
            f(res.scenario.rho),
            f(res.theta_full),
            f(res.theta_short),
        ]],
    )?;
    println!("left out      {}", res.leave_out.join(", "));
    println!("cf_y {:.4}   cf_d {:.4}   rho {:.4}", res.scenario.cf_y, res.scenario.cf_d, res.scenario.rho);
    println!("theta full {:.4}   short {:.4}", res.theta_full, res.theta_short);
    Ok(())
}

pub fn pretest(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = load(cfg)?;
    let cells = pre_cells(&ds, cfg);
    let sc = pretest_scenario(&cells, cfg.k, cfg.rho)?;
    let mut rows = Vec::new();
    let mut detail = Vec::new();
    for c in &cells {
        let rv = crate::sensitivity::robustness_value(&elements(&c.estimate)?, 0.0, cfg.rho)?;
        rows.push(vec![
            c.spec.g.to_string(),
            c.spec.t_pre.to_string(),
            c.spec.t_eval.to_string(),
            f(c.estimate.theta),
            f(c.estimate.se),
            f(rv),
        ]);
        detail.push(json!({"g": c.spec.g, "t_pre": c.spec.t_pre, "t_eval": c.spec.t_eval, "theta": c.estimate.theta, "se": c.estimate.se, "rv": rv}));
    }
    out.json("pretest.json", json!({"scenario": sc, "k": cfg.k, "cells": detail}))?;
    out.csv("pretest.csv", &["g", "t_pre", "t_eval", "theta", "se", "rv"], &rows)?;
    for r in &rows {
        println!("placebo g = {}, t_eval = {}: theta {} rv {}", r[0], r[2], r[3], r[5]);
    }
    println!("scenario cf_y = cf_d = {:.4} ({})", sc.cf_y, sc.label);
    Ok(())
}

pub fn contour(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let ds = load(cfg)?;
    let el = elements(&cell_estimate(&ds, cfg)?)?;
    let grid = contour_grid(&el, cfg.cf_y_max, cfg.cf_d_max, cfg.n_grid, cfg.side, cfg.contour_level, cfg.rho)?;
    if out.csv_enabled() {
        out.raw("contour.csv", |w, line| {
            writeln!(w, "# config: {line}")?;
            write_contour_csv(&grid, w)
        })?;
    }
    out.json("contour.json", json!({"grid": grid}))?;
    if cfg.svg {
        out.raw("contour.svg", |w, _| write_contour_svg(&grid, 8, w))?;
    }
    println!("theta {:.4}; grid {}x{} over cf_y <= {}, cf_d <= {}", el.theta, cfg.n_grid, cfg.n_grid, cfg.cf_y_max, cfg.cf_d_max);
    let last = &grid.values[cfg.n_grid - 1][cfg.n_grid - 1];
    println!("value at the far corner {last:.4}");
    Ok(())
}

fn calibrate_for(cfg: &RunConfig) -> Result<CalibrationResult> {
    calibrate_confounding(cfg.target, cfg.superpop_n, cfg.tol, cfg.seed, &cfg.dgp(cfg.superpop_n))
}

pub fn calibrate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let res = calibrate_for(cfg)?;
    out.json("calibration.json", json!({"calibration": res}))?;
    let o = &res.oracle;
    println!("gamma_a {:.6}   beta_a {:.6}", res.gamma_a, res.beta_a);
    println!("cf_y {:.4}   cf_d {:.4}   rho {:.4} (backed out {:.4})", o.cf_y, o.cf_d, o.rho, o.rho_backed_out);
    println!("theta short {:.4}   long {:.4}", o.theta_short, o.theta_long);
    Ok(())
}

fn read_oracle(path: &std::path::Path) -> Result<(f64, f64, OracleScenario)> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let cal = v.get("calibration").cloned().unwrap_or(v);
    let res: CalibrationResult = serde_json::from_value(cal)?;
    Ok((res.gamma_a, res.beta_a, res.oracle))
}

fn table_rows(t: &SimTables) -> (Vec<String>, Vec<String>) {
    let sd = |m: &crate::simulation::MeanSd| m.sd.map(f).unwrap_or_default();
    let p = &t.point;
    let i = &t.intervals;
    (
        vec![
            t.n.to_string(),
            f(p.theta_short.mean),
            sd(&p.theta_short),
            f(p.theta_minus.mean),
            sd(&p.theta_minus),
            f(p.theta_long.mean),
            sd(&p.theta_long),
            f(p.rv.mean),
            sd(&p.rv),
            f(p.rv_rho1.mean),
        ],
        vec![
            t.n.to_string(),
            f(i.ell_short.mean),
            f(i.coverage_short),
            f(i.ell_minus.mean),
            f(i.coverage_minus),
            f(i.ell_long.mean),
            f(i.coverage_long),
            f(i.rv_a.mean),
            sd(&i.rv_a),
        ],
    )
}

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let level = cfg.level_or(0.9);
    let (gamma, beta, oracle) = match (&cfg.oracle, cfg.gamma_a, cfg.beta_a) {
        (Some(path), _, _) => read_oracle(path)?,
        (None, Some(g), Some(b)) => {
            let raw = crate::simulation::RawDraw::new(cfg.superpop_n, cfg.seed);
            (g, b, crate::simulation::oracle_values(&raw, &cfg.dgp(cfg.superpop_n))?)
        }
        _ => {
            let res = calibrate_for(cfg)?;
            (res.gamma_a, res.beta_a, res.oracle)
        }
    };
    let dgp = crate::simulation::DgpConfig { gamma_a: gamma, beta_a: beta, ..cfg.dgp(cfg.n) };
    let settings = MonteCarloSettings {
        reps: cfg.reps,
        level,
        seed: cfg.seed,
        learner: cfg.learner_spec(),
        normalized: cfg.normalized,
    };
    let tables = run_monte_carlo(&dgp, &oracle, &settings)?;
    let (t1, t2) = table_rows(&tables);
    out.csv(
        "point_estimates.csv",
        &["n", "theta_short", "sd_theta_short", "theta_minus", "sd_theta_minus", "theta_long", "sd_theta_long", "rv", "sd_rv", "rv_rho1"],
        &[t1],
    )?;
    out.csv(
        "confidence_limits.csv",
        &["n", "ell_short", "cover_short", "ell_minus", "cover_minus", "ell_long", "cover_long", "rv_a", "sd_rv_a"],
        &[t2],
    )?;
    out.json("simulation.json", json!({"gamma_a": gamma, "beta_a": beta, "tables": tables}))?;
    if tables.reps_ok >= 2 {
        let col = |g: fn(&crate::simulation::RepRecord) -> f64| tables.records.iter().map(g).collect::<Vec<_>>();
        let figures: [(&str, Vec<(f64, f64)>, (&str, &str)); 5] = [
            ("hist_theta_minus.csv", standardized_histogram(&col(|r| r.theta_minus), 40, 4.0), ("z", "density")),
            ("hist_ell_minus.csv", standardized_histogram(&col(|r| r.ell_minus), 40, 4.0), ("z", "density")),
            ("density_theta_short.csv", kernel_density(&col(|r| r.theta_short), 200), ("theta", "density")),
            ("density_theta_minus.csv", kernel_density(&col(|r| r.theta_minus), 200), ("theta", "density")),
            ("density_rv.csv", kernel_density(&col(|r| r.rv), 200), ("rv", "density")),
        ];
        if out.csv_enabled() {
            for (name, rows, header) in figures {
                out.raw(name, |w, line| write_xy_csv(w, line, header, &rows))?;
            }
        }
    }
    let p = &tables.point;
    let i = &tables.intervals;
    println!("n = {}, reps = {} ({} failed), level = {}", tables.n, tables.reps_ok, tables.reps_failed, level);
    println!("theta_s {:.3}  theta_- {:.3}  theta_long {:.3}  RV {:.3}", p.theta_short.mean, p.theta_minus.mean, p.theta_long.mean, p.rv.mean);
    println!(
        "ell_s {:.3} ({:.3})  ell_- {:.3} ({:.3})  ell_long {:.3} ({:.3})  RV_a {:.3}",
        i.ell_short.mean, i.coverage_short, i.ell_minus.mean, i.coverage_minus, i.ell_long.mean, i.coverage_long, i.rv_a.mean
    );
    Ok(())
}

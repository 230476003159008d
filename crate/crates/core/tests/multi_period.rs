mod common;

use trendsense::learners::LearnerSpec;
use trendsense::multi::{att_gt, att_gt_all, enumerate_cells, gt_subsample, GroupTimeSpec};
use trendsense::panel::{ControlGroup, FirstTreatment};
use trendsense::sensitivity::{elements, pretest_scenario, robustness_value};

const PERIODS: [i64; 6] = [1997, 1998, 1999, 2000, 2001, 2002];

#[test]
fn batch_covers_every_cell_in_order() {
    let ds = common::staggered(600, &PERIODS, &[2000, 2001], 3);
    let batch = att_gt_all(&ds, 0, ControlGroup::NeverTreated, &LearnerSpec::default(), true, 1);
    let got: Vec<(i64, i64)> = batch.results.iter().map(|r| (r.spec.g, r.spec.t_eval)).collect();
    assert!(batch.skipped.is_empty(), "{:?}", batch.skipped);
    assert_eq!(got, enumerate_cells(&ds));
    assert_eq!(got.len(), 2 * 5);
}

#[test]
fn post_period_effects_are_recovered() {
    let ds = common::staggered(3000, &PERIODS, &[2000], 11);
    let batch = att_gt_all(&ds, 0, ControlGroup::NotYetTreated, &LearnerSpec::default(), true, 2);
    for r in &batch.results {
        let truth = if r.pre_period { 0.0 } else { 1.0 };
        assert!((r.estimate.theta - truth).abs() < 4.0 * r.estimate.se, "{:?}: {}", r.spec, r.estimate.theta);
        let expected_pre = if r.spec.t_eval < 2000 { r.spec.t_eval - 1 } else { 1999 };
        assert_eq!(r.spec.t_pre, expected_pre);
    }
}

#[test]
fn non_cohort_units_inside_the_window_never_leak() {
    let ds = common::staggered(400, &PERIODS, &[1998, 1999, 2000, 2001, 2002], 7);
    for delta in 0..2 {
        for control in [ControlGroup::NeverTreated, ControlGroup::NotYetTreated] {
            for (g, t) in enumerate_cells(&ds) {
                let Ok(spec) = GroupTimeSpec::with_base_period(&ds, g, t, delta, control) else { continue };
                let Ok(view) = gt_subsample(&ds, &spec) else { continue };
                let ti = ds.period_index(t).unwrap();
                for &u in &view.units {
                    match ds.first_treatment()[u] {
                        FirstTreatment::Never => {}
                        FirstTreatment::At(gu) if gu == g => {}
                        FirstTreatment::At(gu) => {
                            assert_eq!(control, ControlGroup::NotYetTreated);
                            assert!(ds.period_index(gu).unwrap() > ti + delta, "unit {u} with G={gu} in cell ({g},{t})");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn same_seed_same_batch_regardless_of_threads() {
    let ds = common::staggered(300, &PERIODS, &[1999, 2001], 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            att_gt_all(&ds, 0, ControlGroup::NotYetTreated, &LearnerSpec::default(), true, 42)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn pretests_under_parallel_trends_rarely_reject() {
    // placebo cell of a cohort with no pre-trend; count |theta| <= 3 se
    let mut inside = 0;
    let reps = 200;
    for r in 0..reps {
        let ds = common::staggered(300, &[1, 2, 3, 4], &[4], 10_000 + r);
        let spec = GroupTimeSpec::with_base_period(&ds, 4, 2, 0, ControlGroup::NeverTreated).unwrap();
        assert!(spec.is_pre_period(&ds));
        let est = att_gt(&ds, &spec, &LearnerSpec::default(), true, r).unwrap().estimate;
        if est.theta.abs() <= 3.0 * est.se {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.85 * reps as f64, "{inside}/{reps}");
}

#[test]
fn pretest_scenario_takes_the_largest_placebo_rv() {
    let ds = common::staggered(800, &PERIODS, &[2001], 13);
    let batch = att_gt_all(&ds, 0, ControlGroup::NeverTreated, &LearnerSpec::default(), true, 9);
    let pre: Vec<_> = batch.results.iter().filter(|r| r.pre_period).cloned().collect();
    assert_eq!(pre.len(), 3);
    let max_rv = pre
        .iter()
        .map(|r| robustness_value(&elements(&r.estimate).unwrap(), 0.0, 1.0).unwrap())
        .fold(0.0, f64::max);
    let sc = pretest_scenario(&pre, 1.0, 1.0).unwrap();
    assert_eq!(sc.cf_y, max_rv);
    assert_eq!(sc.cf_d, max_rv);
    let doubled = pretest_scenario(&pre, 2.0, 1.0).unwrap();
    assert_eq!(doubled.cf_y, (2.0 * max_rv).min(1.0 - 1e-9));

    let post: Vec<_> = batch.results.iter().filter(|r| !r.pre_period).cloned().collect();
    assert_eq!(pretest_scenario(&post, 1.0, 1.0).unwrap_err().code(), "InvalidArgument");
    assert_eq!(pretest_scenario(&[], 1.0, 1.0).unwrap_err().code(), "NoPrePeriods");
}

#[test]
fn rows_carry_cell_metadata() {
    let ds = common::staggered(300, &PERIODS, &[2000], 1);
    let spec = GroupTimeSpec::with_base_period(&ds, 2000, 2002, 0, ControlGroup::NeverTreated).unwrap();
    let res = att_gt(&ds, &spec, &LearnerSpec::default(), true, 0).unwrap();
    let row = res.row(0.95).unwrap();
    assert_eq!((row.g, row.t_pre, row.t_eval), (2000, 1999, 2002));
    assert!(row.ci_low < row.theta && row.theta < row.ci_high);
    assert_eq!(row.n_treated + row.n_control, res.estimate.n);
    assert_eq!(res.estimate.meta.unwrap().t_pre, 1999);
}

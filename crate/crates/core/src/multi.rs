//! Group-time ATT(g, t) estimation under staggered adoption.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::did::{att_dml, confidence_interval, AttEstimate, Sides};
use crate::error::{Error, Result};
use crate::learners::{crossfit, LearnerSpec};
use crate::panel::{CellMeta, ControlGroup, FirstTreatment, PanelDataset, TwoByTwoView};
use crate::stats::derive_seed;

/// Cohorts with fewer treated units than this are flagged as fragile.
pub const FRAGILE_COHORT_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTimeSpec {
    pub g: i64,
    pub t_pre: i64,
    pub t_eval: i64,
    pub delta: usize,
    pub control: ControlGroup,
}

impl GroupTimeSpec {
    /// Applies the base-period rule: consecutive comparisons before `g − δ`,
    /// anchored at the last period before `g − δ` afterwards. Period offsets
    /// are counted in panel positions, not label arithmetic.
    pub fn with_base_period(
        ds: &PanelDataset,
        g: i64,
        t_eval: i64,
        delta: usize,
        control: ControlGroup,
    ) -> Result<Self> {
        let gi = ds.period_index(g).ok_or(Error::UnknownPeriod(g))?;
        let ti = ds.period_index(t_eval).ok_or(Error::UnknownPeriod(t_eval))?;
        let onset = gi as i64 - delta as i64;
        let pre = if (ti as i64) < onset { ti as i64 - 1 } else { onset - 1 };
        if pre < 0 {
            return Err(Error::InvalidCell(format!(
                "no base period for g = {g}, t_eval = {t_eval}, delta = {delta}"
            )));
        }
        Ok(Self { g, t_pre: ds.periods()[pre as usize], t_eval, delta, control })
    }

    /// True for placebo cells evaluated before (anticipated) treatment onset.
    pub fn is_pre_period(&self, ds: &PanelDataset) -> bool {
        match (ds.period_index(self.g), ds.period_index(self.t_eval)) {
            (Some(gi), Some(ti)) => (ti as i64) < gi as i64 - self.delta as i64,
            _ => false,
        }
    }
}

/// Whether unit `g_i` is in the comparison group for `spec`.
pub fn is_control(ds: &PanelDataset, spec: &GroupTimeSpec, g_i: FirstTreatment) -> bool {
    match (spec.control, g_i) {
        (_, FirstTreatment::Never) => true,
        (ControlGroup::NeverTreated, _) => false,
        (ControlGroup::NotYetTreated, FirstTreatment::At(g)) => {
            let ti = ds.period_index(spec.t_eval).expect("validated period");
            let gi = ds.period_index(g).expect("validated period");
            gi > ti + spec.delta
        }
    }
}

pub fn gt_subsample(ds: &PanelDataset, spec: &GroupTimeSpec) -> Result<TwoByTwoView> {
    let _ = ds.period_index(spec.g).ok_or(Error::UnknownPeriod(spec.g))?;
    let pre = ds.period_index(spec.t_pre).ok_or(Error::UnknownPeriod(spec.t_pre))?;
    let eval = ds.period_index(spec.t_eval).ok_or(Error::UnknownPeriod(spec.t_eval))?;
    if pre >= eval {
        return Err(Error::InvalidCell(format!("t_pre {} must precede t_eval {}", spec.t_pre, spec.t_eval)));
    }
    let cohort = FirstTreatment::At(spec.g);
    let mut units = Vec::new();
    let mut treat = Vec::new();
    for (i, &g_i) in ds.first_treatment().iter().enumerate() {
        if g_i == cohort {
            units.push(i);
            treat.push(true);
        } else if is_control(ds, spec, g_i) {
            units.push(i);
            treat.push(false);
        }
    }
    let n_treated = treat.iter().filter(|&&d| d).count();
    if n_treated == 0 {
        return Err(Error::EmptyTreatedCohort(spec.g));
    }
    if n_treated == units.len() {
        return Err(Error::EmptyControl { g: spec.g, t_eval: spec.t_eval });
    }
    let y = ds.outcomes();
    let delta_y = units.iter().map(|&i| y[(i, eval)] - y[(i, pre)]).collect();
    let xmat = ds.covariates().select_rows(&units);
    let mut view = TwoByTwoView::new(delta_y, treat, xmat, ds.covariate_names().to_vec())?;
    view.hidden_confounder = ds.hidden_confounder().map(|a| units.iter().map(|&i| a[i]).collect());
    view.units = units;
    view.meta = Some(CellMeta { g: spec.g, t_pre: spec.t_pre, t_eval: spec.t_eval, control: spec.control });
    Ok(view)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtResult {
    pub spec: GroupTimeSpec,
    pub estimate: AttEstimate,
    pub n_treated: usize,
    pub n_control: usize,
    /// Cohort smaller than [`FRAGILE_COHORT_SIZE`].
    pub fragile: bool,
    pub pre_period: bool,
}

pub fn att_gt(
    ds: &PanelDataset,
    spec: &GroupTimeSpec,
    learner: &LearnerSpec,
    normalized: bool,
    seed: u64,
) -> Result<GtResult> {
    let view = gt_subsample(ds, spec)?;
    let fit = crossfit(&view, &learner.with_seed(seed))?;
    let mut estimate = att_dml(&fit, normalized)?;
    estimate.meta = view.meta;
    Ok(GtResult {
        spec: *spec,
        estimate,
        n_treated: view.n_treated,
        n_control: view.n_control,
        fragile: view.n_treated < FRAGILE_COHORT_SIZE,
        pre_period: spec.is_pre_period(ds),
    })
}

/// A cell that could not be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub g: i64,
    pub t_eval: i64,
    pub t_pre: Option<i64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBatch {
    pub results: Vec<GtResult>,
    pub skipped: Vec<SkippedCell>,
}

/// All `(g, t_eval)` cells with `g` an observed cohort and `t_eval` any
/// period after the first, in that order.
pub fn enumerate_cells(ds: &PanelDataset) -> Vec<(i64, i64)> {
    let mut cells = Vec::new();
    for g in ds.cohorts() {
        for &t in &ds.periods()[1..] {
            cells.push((g, t));
        }
    }
    cells
}

/// Estimates every cell; cell `k` uses a seed derived from `(seed, k)`.
pub fn att_gt_all(
    ds: &PanelDataset,
    delta: usize,
    control: ControlGroup,
    learner: &LearnerSpec,
    normalized: bool,
    seed: u64,
) -> GtBatch {
    let cells = enumerate_cells(ds);
    let outcomes: Vec<std::result::Result<GtResult, SkippedCell>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(g, t_eval))| {
            let spec = GroupTimeSpec::with_base_period(ds, g, t_eval, delta, control)
                .map_err(|e| SkippedCell { g, t_eval, t_pre: None, reason: e.to_string() })?;
            att_gt(ds, &spec, learner, normalized, derive_seed(seed, k as u64))
                .map_err(|e| SkippedCell { g, t_eval, t_pre: Some(spec.t_pre), reason: e.to_string() })
        })
        .collect();
    let mut batch = GtBatch { results: Vec::new(), skipped: Vec::new() };
    for o in outcomes {
        match o {
            Ok(r) => batch.results.push(r),
            Err(s) => batch.skipped.push(s),
        }
    }
    batch
}

/// One row of the estimation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRow {
    pub g: i64,
    pub t_pre: i64,
    pub t_eval: i64,
    pub theta: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

impl GtResult {
    pub fn row(&self, level: f64) -> Result<GtRow> {
        let ci = confidence_interval(&self.estimate, level, Sides::Two)?;
        Ok(GtRow {
            g: self.spec.g,
            t_pre: self.spec.t_pre,
            t_eval: self.spec.t_eval,
            theta: self.estimate.theta,
            se: self.estimate.se,
            ci_low: ci.lower,
            ci_high: ci.upper,
            n_treated: self.n_treated,
            n_control: self.n_control,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn panel(periods: Vec<i64>, g: Vec<FirstTreatment>) -> PanelDataset {
        let n = g.len();
        let t = periods.len();
        PanelDataset::new(
            (0..n).map(|i| format!("u{i}")).collect(),
            periods,
            DMatrix::from_fn(n, t, |i, j| (i * t + j) as f64),
            vec![],
            DMatrix::zeros(n, 0),
            g,
            None,
        )
        .unwrap()
    }

    #[test]
    fn base_periods_follow_the_rule() {
        let ds = panel((1997..=2002).collect(), vec![FirstTreatment::At(2000), FirstTreatment::Never]);
        let pre: Vec<i64> = (1998..=2002)
            .map(|t| GroupTimeSpec::with_base_period(&ds, 2000, t, 0, ControlGroup::NeverTreated).unwrap().t_pre)
            .collect();
        assert_eq!(pre, vec![1997, 1998, 1999, 1999, 1999]);
    }

    #[test]
    fn anticipation_shifts_the_anchor() {
        let ds = panel((1..=6).collect(), vec![FirstTreatment::At(4), FirstTreatment::Never]);
        let s = GroupTimeSpec::with_base_period(&ds, 4, 5, 1, ControlGroup::NeverTreated).unwrap();
        assert_eq!(s.t_pre, 2);
        let s = GroupTimeSpec::with_base_period(&ds, 4, 2, 1, ControlGroup::NeverTreated).unwrap();
        assert_eq!(s.t_pre, 1);
        assert!(s.is_pre_period(&ds));
    }

    #[test]
    fn not_yet_treated_with_anticipation() {
        use FirstTreatment::*;
        let g = vec![At(3), At(4), At(5), At(6), Never, At(3)];
        let ds = panel((1..=6).collect(), g.clone());
        let spec = GroupTimeSpec { g: 3, t_pre: 2, t_eval: 3, delta: 1, control: ControlGroup::NotYetTreated };
        let view = gt_subsample(&ds, &spec).unwrap();
        // controls need G > t_eval + 1 = 4
        let brute: Vec<usize> =
            (0..6).filter(|&i| g[i] == At(3) || matches!(g[i], Never) || matches!(g[i], At(x) if x > 4)).collect();
        assert_eq!(view.units, brute);
        assert_eq!(view.n_treated, 2);
    }

    #[test]
    fn two_period_cell_matches_canonical_view() {
        let ds = panel(vec![1, 2], vec![FirstTreatment::At(2), FirstTreatment::Never, FirstTreatment::At(2)]);
        let spec = GroupTimeSpec::with_base_period(&ds, 2, 2, 0, ControlGroup::NeverTreated).unwrap();
        let a = gt_subsample(&ds, &spec).unwrap();
        let b = crate::panel::canonical_2x2(&ds).unwrap();
        assert_eq!(a.delta_y, b.delta_y);
        assert_eq!(a.treat, b.treat);
        assert_eq!(a.xmat, b.xmat);
    }

    #[test]
    fn empty_control_is_reported() {
        let ds = panel(vec![1, 2, 3], vec![FirstTreatment::At(2), FirstTreatment::At(3)]);
        let spec = GroupTimeSpec { g: 2, t_pre: 1, t_eval: 3, delta: 0, control: ControlGroup::NeverTreated };
        assert!(matches!(gt_subsample(&ds, &spec), Err(Error::EmptyControl { .. })));
    }

    #[test]
    fn cell_enumeration() {
        let ds = panel((1..=5).collect(), vec![FirstTreatment::At(3), FirstTreatment::Never]);
        assert_eq!(enumerate_cells(&ds), vec![(3, 2), (3, 3), (3, 4), (3, 5)]);
    }
}

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trendsense::panel::{FirstTreatment, PanelDataset, TwoByTwoView};

/// Staggered panel over `periods` with cohorts at the given periods (plus
/// never treated), two covariates and an effect of 1 after treatment.
pub fn staggered(n: usize, periods: &[i64], cohorts: &[i64], seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g: Vec<FirstTreatment> = (0..n)
        .map(|_| {
            let k = rng.random_range(0..=cohorts.len());
            if k == cohorts.len() { FirstTreatment::Never } else { FirstTreatment::At(cohorts[k]) }
        })
        .collect();
    let mut y = DMatrix::zeros(n, periods.len());
    for i in 0..n {
        let fe: f64 = rng.sample(StandardNormal);
        for (j, &t) in periods.iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            let effect = if g[i].treated_at(t) { 1.0 } else { 0.0 };
            y[(i, j)] = fe + 0.1 * j as f64 * x[(i, 0)] + 0.3 * x[(i, 1)] + effect + 0.5 * e;
        }
    }
    PanelDataset::new(
        (0..n).map(|i| format!("u{i}")).collect(),
        periods.to_vec(),
        y,
        vec!["x1".into(), "x2".into()],
        x,
        g,
        None,
    )
    .unwrap()
}

/// Cross-sectional 2x2 view with a confounded treatment.
pub fn view(n: usize, seed: u64) -> TwoByTwoView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let treat: Vec<bool> = (0..n).map(|i| rng.random_bool(1.0 / (1.0 + (-0.5 * x[(i, 0)]).exp()))).collect();
    let dy: Vec<f64> = (0..n)
        .map(|i| 1.0 + x[(i, 0)] - 0.5 * x[(i, 1)] + if treat[i] { 2.0 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal))
        .collect();
    TwoByTwoView::new(dy, treat, x, vec!["x1".into(), "x2".into()]).unwrap()
}

use serde::{Deserialize, Serialize};

/// Monotone step function fitted by pool-adjacent-violators.
///
/// `breakpoints[b]` is the smallest score in block `b`; the map is
/// right-continuous and constant at `levels[0]` below the first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
    /// Number of observations pooled into each block.
    pub weights: Vec<usize>,
}

impl IsotonicMap {
    pub fn evaluate(&self, score: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= score);
        self.levels[idx.saturating_sub(1)]
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.evaluate(s)).collect()
    }
}

/// Tie-pooled observation blocks sorted by score: `(score, sum, count)`.
pub(crate) fn tie_blocks(scores: &[f64], labels: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 += labels[i];
                last.2 += 1;
            }
            _ => blocks.push((scores[i], labels[i], 1)),
        }
    }
    blocks
}

/// Least-squares non-decreasing fit of `labels` against `scores`.
///
/// Observations with equal scores are pooled before PAV runs, so they always
/// share a level.
///
/// # Panics
/// If `scores` is empty or the slices differ in length.
pub fn isotonic_calibrate(scores: &[f64], labels: &[f64]) -> IsotonicMap {
    assert!(!scores.is_empty(), "isotonic calibration needs at least one observation");
    assert_eq!(scores.len(), labels.len());
    // Stack of pooled blocks: (first score, sum, count).
    let mut stack: Vec<(f64, f64, usize)> = Vec::new();
    for block in tie_blocks(scores, labels) {
        let mut cur = block;
        while let Some(&prev) = stack.last() {
            // prev mean >= cur mean, compared without division
            if prev.1 * cur.2 as f64 >= cur.1 * prev.2 as f64 {
                stack.pop();
                cur = (prev.0, prev.1 + cur.1, prev.2 + cur.2);
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    IsotonicMap {
        breakpoints: stack.iter().map(|b| b.0).collect(),
        levels: stack.iter().map(|b| b.1 / b.2 as f64).collect(),
        weights: stack.iter().map(|b| b.2).collect(),
    }
}

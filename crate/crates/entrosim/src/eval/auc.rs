//! One-vs-rest ROC-AUC via the midrank (Mann-Whitney) estimator, which is
//! tie-robust and equals the trapezoidal area under the ROC curve.

use crate::error::{Error, Result};

/// AUC of binary `labels` under `scores`. Returns `None` when the labels are
/// degenerate (no positives or no negatives).
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks: tied scores share the mean of their rank range.
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&l, _)| l)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos as f64) * (n_pos as f64 + 1.0) / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-class one-vs-rest, micro, and macro AUC of an `N x K` score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AucSummary {
    /// `None` for classes with no positives or no negatives in `truths`.
    pub per_class: Vec<Option<f64>>,
    pub micro: f64,
    pub macro_avg: f64,
    /// Class ids excluded from the macro average.
    pub excluded: Vec<usize>,
}

/// `scores[i]` holds the K per-class scores of sample `i`; `truths[i]` its
/// actual class. Micro flattens all (score, is-this-class) pairs into one
/// binary problem; macro averages the defined per-class AUCs.
pub fn roc_auc(scores: &[Vec<f64>], truths: &[usize], n_classes: usize) -> Result<AucSummary> {
    if scores.len() != truths.len() || scores.is_empty() {
        return Err(Error::Invalid("scores/truths size mismatch or empty".into()));
    }
    if scores.len() < 2 {
        return Err(Error::Invalid("need at least 2 samples for AUC".into()));
    }
    for (i, row) in scores.iter().enumerate() {
        if row.len() != n_classes {
            return Err(Error::Invalid(format!(
                "sample {i} has {} scores for {n_classes} classes",
                row.len()
            )));
        }
        if row.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("score row {i}")));
        }
    }
    if let Some(&bad) = truths.iter().find(|&&t| t >= n_classes) {
        return Err(Error::Invalid(format!("label {bad} out of range")));
    }
    let n = truths.len();
    let mut per_class = Vec::with_capacity(n_classes);
    let mut excluded = Vec::new();
    let mut flat_scores = Vec::with_capacity(n * n_classes);
    let mut flat_labels = Vec::with_capacity(n * n_classes);
    for k in 0..n_classes {
        let col: Vec<f64> = scores.iter().map(|row| row[k]).collect();
        let labels: Vec<bool> = truths.iter().map(|&t| t == k).collect();
        flat_scores.extend_from_slice(&col);
        flat_labels.extend_from_slice(&labels);
        match binary_auc(&col, &labels) {
            Some(a) => per_class.push(Some(a)),
            None => {
                per_class.push(None);
                excluded.push(k);
            }
        }
    }
    let defined: Vec<f64> = per_class.iter().filter_map(|&a| a).collect();
    if defined.is_empty() {
        return Err(Error::Invalid(
            "all classes degenerate (single-class truths)".into(),
        ));
    }
    let macro_avg = defined.iter().sum::<f64>() / defined.len() as f64;
    let micro = binary_auc(&flat_scores, &flat_labels)
        .expect("flattened problem has positives and negatives");
    Ok(AucSummary {
        per_class,
        micro,
        macro_avg,
        excluded,
    })
}

//! Training objective: softmax cross-entropy plus an alpha-weighted center
//! loss whose per-class centers are scaled by imbalance weights.

use crate::error::{Error, Result};
use crate::nn::tensor::Scalar;

/// Per-class center vectors `[K, D]` with per-class scalar weights `[K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterBank<T> {
    pub centers: Vec<T>,
    pub class_weights: Vec<T>,
    pub n_classes: usize,
    pub embed_dim: usize,
}

impl<T: Scalar> CenterBank<T> {
    pub fn new(centers: Vec<T>, class_weights: Vec<T>, n_classes: usize, embed_dim: usize) -> Result<Self> {
        if centers.len() != n_classes * embed_dim || class_weights.len() != n_classes {
            return Err(Error::shape("center bank", "size mismatch"));
        }
        if class_weights.iter().any(|w| *w <= T::zero()) {
            return Err(Error::Invalid("class weights must be positive".into()));
        }
        Ok(Self {
            centers,
            class_weights,
            n_classes,
            embed_dim,
        })
    }

    pub fn center(&self, class: usize) -> &[T] {
        &self.centers[class * self.embed_dim..(class + 1) * self.embed_dim]
    }
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut out: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

/// Cross-entropy of one sample: `-log softmax(logits)[label]` and its
/// gradient `softmax - onehot`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if logits.len() < 2 {
        return Err(Error::Invalid("softmax needs at least 2 classes".into()));
    }
    if label >= logits.len() {
        return Err(Error::Invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    // -log p = log(sum exp(l - max)) - (l_label - max)
    let loss = sum.ln() - (logits[label] - max);
    for v in &mut exps {
        *v = *v / sum;
    }
    exps[label] -= T::one();
    Ok((loss, exps))
}

/// Weighted center loss over a batch of embeddings `[N, D]`:
/// `L_c = 1/(2N) * sum_i ||z_i - w_{y_i} * c_{y_i}||^2`, gradient
/// `dL/dz_i = (z_i - w_{y_i} * c_{y_i}) / N`.
pub fn weighted_center_loss<T: Scalar>(
    z_batch: &[T],
    labels: &[usize],
    bank: &CenterBank<T>,
) -> Result<(T, Vec<T>)> {
    let d = bank.embed_dim;
    let n = labels.len();
    if n == 0 {
        return Err(Error::Invalid("center loss over an empty batch".into()));
    }
    if z_batch.len() != n * d {
        return Err(Error::shape("center loss", "embedding batch size"));
    }
    let n_t = T::from_f64(n as f64);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); n * d];
    for (i, &y) in labels.iter().enumerate() {
        if y >= bank.n_classes {
            return Err(Error::Invalid(format!("unknown label {y}")));
        }
        let wy = bank.class_weights[y];
        let c = bank.center(y);
        let z = &z_batch[i * d..(i + 1) * d];
        let g = &mut grad[i * d..(i + 1) * d];
        let mut sq = T::zero();
        for ((gi, &zi), &ci) in g.iter_mut().zip(z).zip(c) {
            let diff = zi - wy * ci;
            sq += diff * diff;
            *gi = diff / n_t;
        }
        loss += sq;
    }
    let half = T::from_f64(0.5);
    Ok((loss * half / n_t, grad))
}

/// Count-normalized moving update toward the batch members of each class:
/// `c_j <- c_j - gamma * (sum_{i: y_i=j} (c_j - z_i)) / (1 + count_j)`.
/// Classes absent from the batch are unchanged.
pub fn update_centers<T: Scalar>(
    bank: &mut CenterBank<T>,
    z_batch: &[T],
    labels: &[usize],
    gamma: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) || gamma == 0.0 {
        return Err(Error::Invalid(format!("gamma {gamma} outside (0, 1]")));
    }
    let d = bank.embed_dim;
    if z_batch.len() != labels.len() * d {
        return Err(Error::shape("update_centers", "embedding batch size"));
    }
    let mut counts = vec![0usize; bank.n_classes];
    let mut delta = vec![T::zero(); bank.centers.len()];
    for (i, &y) in labels.iter().enumerate() {
        if y >= bank.n_classes {
            return Err(Error::Invalid(format!("unknown label {y}")));
        }
        counts[y] += 1;
        let z = &z_batch[i * d..(i + 1) * d];
        let c = bank.center(y);
        let dl = &mut delta[y * d..(y + 1) * d];
        for ((dv, &ci), &zi) in dl.iter_mut().zip(c).zip(z) {
            *dv += ci - zi;
        }
    }
    let gamma_t = T::from_f64(gamma);
    for (j, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            continue;
        }
        let scale = gamma_t / T::from_f64(1.0 + cnt as f64);
        let dl = &delta[j * d..(j + 1) * d];
        let c = &mut bank.centers[j * d..(j + 1) * d];
        for (cv, &dv) in c.iter_mut().zip(dl) {
            *cv -= scale * dv;
        }
    }
    Ok(())
}

/// Inverse-frequency class weights, `w_j = N / (K * n_j)`, normalized so
/// their mean is 1.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    let k = counts.len();
    if k == 0 {
        return Err(Error::Invalid("no classes".into()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Invalid("class with zero count".into()));
    }
    let total: usize = counts.iter().sum();
    let raw: Vec<f64> = counts
        .iter()
        .map(|&c| total as f64 / (k as f64 * c as f64))
        .collect();
    let mean = raw.iter().sum::<f64>() / k as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

/// Element-wise mean of the two branch embeddings, so a single sample
/// duplicated into both branches fuses to exactly its own embedding.
pub fn fuse_embeddings<T: Scalar>(z1: &[T], z2: &[T]) -> Result<Vec<T>> {
    if z1.len() != z2.len() {
        return Err(Error::shape(
            "fuse_embeddings",
            format!("{} vs {}", z1.len(), z2.len()),
        ));
    }
    let half = T::from_f64(0.5);
    Ok(z1.iter().zip(z2).map(|(&a, &b)| (a + b) * half).collect())
}

/// Both loss terms and their alpha-weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub softmax_loss: T,
    pub center_loss: T,
    pub alpha: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn combine(softmax_loss: T, center_loss: T, alpha: T) -> Self {
        Self {
            softmax_loss,
            center_loss,
            alpha,
            total: softmax_loss + alpha * center_loss,
        }
    }
}

//! The positive-pair training loop: encode both branch graphs, fuse, score
//! the fused embedding with softmax cross-entropy plus the alpha-weighted
//! center loss, backpropagate, Adam-step the weights, then move the centers.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamHyper, AdamState};
use crate::nn::loss::{
    class_weights, fuse_embeddings, softmax_cross_entropy, update_centers, weighted_center_loss,
    CenterBank, LossBreakdown,
};
use crate::nn::model::{Model, ModelConfig};
use crate::synth::splitmix64;
use crate::train::dataset::Dataset;
use crate::train::pairs::PairSampler;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub softmax_loss: f64,
    pub center_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: Model<f32>,
    pub history: Vec<EpochStats>,
}

/// Per-pair loss contributions and the full parameter gradient of one pair.
pub struct PairResult<T> {
    pub softmax_loss: f64,
    pub center_sq_half: f64,
    pub z_fused: Vec<T>,
    pub label: usize,
    pub grads: Vec<T>,
}

/// Loss and parameter gradient of one positive pair. The 1/N batch scaling
/// is folded in here so per-pair contributions just add up.
pub fn pair_forward_backward<T: crate::nn::Scalar>(
    model: &Model<T>,
    bank: &CenterBank<T>,
    input_a: &[T],
    input_b: &[T],
    label: usize,
    alpha: f64,
    n_pairs: usize,
) -> Result<PairResult<T>> {
    let tape_a = model.forward_tape(input_a);
    let tape_b = model.forward_tape(input_b);
    let z = fuse_embeddings(&tape_a.embedding, &tape_b.embedding)?;
    let logits = model.head_logits(&z)?;
    let (ls, grad_logits) = softmax_cross_entropy(&logits, label)?;

    let inv_n = T::from_f64(1.0 / n_pairs as f64);
    let scaled_logits_grad: Vec<T> = grad_logits.iter().map(|&g| g * inv_n).collect();

    let mut grads = vec![T::zero(); model.trainable_len()];
    let mut grad_z = model.head_backward(&z, &scaled_logits_grad, &mut grads);

    // Center-loss term on the fused embedding: d/dz of alpha/(2N)*||z - w*c||^2.
    let wy = bank.class_weights[label];
    let c = bank.center(label);
    let mut sq = 0.0f64;
    let alpha_inv_n = T::from_f64(alpha) * inv_n;
    for ((gz, &zi), &ci) in grad_z.iter_mut().zip(&z).zip(c) {
        let diff = zi - wy * ci;
        sq += diff.into_f64() * diff.into_f64();
        *gz += alpha_inv_n * diff;
    }

    // Fused embedding is the branch mean: each branch takes half the gradient.
    let half = T::from_f64(0.5);
    let grad_branch: Vec<T> = grad_z.iter().map(|&g| half * g).collect();
    model.encoder_backward(&tape_a, &grad_branch, &mut grads);
    model.encoder_backward(&tape_b, &grad_branch, &mut grads);

    Ok(PairResult {
        softmax_loss: ls.into_f64(),
        center_sq_half: 0.5 * sq,
        z_fused: z,
        label,
        grads,
    })
}

/// Mean combined loss of a dataset under the current parameters (each sample
/// duplicated into both branches, so the fused embedding is its own).
pub fn dataset_loss(model: &Model<f32>, ds: &Dataset, alpha: f64) -> Result<f64> {
    let bank = model.center_bank();
    let per_sample: Vec<(f64, Vec<f32>, usize)> = ds
        .samples
        .par_iter()
        .map(|s| {
            let z = model.encoder_forward(&s.graph)?;
            let logits = model.head_logits(&z)?;
            let (ls, _) = softmax_cross_entropy(&logits, s.label)?;
            Ok((ls as f64, z, s.label))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_sample.len();
    let ls_mean = per_sample.iter().map(|(ls, _, _)| ls).sum::<f64>() / n as f64;
    let mut z_batch = Vec::with_capacity(n * model.config.embed_units);
    let mut labels = Vec::with_capacity(n);
    for (_, z, label) in &per_sample {
        z_batch.extend_from_slice(z);
        labels.push(*label);
    }
    let (lc, _) = weighted_center_loss(&z_batch, &labels, &bank)?;
    Ok(ls_mean + alpha * lc as f64)
}

/// Train a model on `train_set`; `val_set` is scored each epoch for the loss
/// history and never influences training. Deterministic per
/// `(dataset, config, seed)` for any worker count: pair gradients are
/// reduced in pair order.
pub fn train(
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    config: &TrainConfig,
    mut model_config: ModelConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    train_set.validate()?;
    model_config.n_classes = train_set.n_classes();
    model_config.family_names = train_set.family_names.clone();
    let sample0 = &train_set.samples[0].graph;
    if model_config.input_h != sample0.h() || model_config.input_w != sample0.w() {
        return Err(Error::Config(format!(
            "model expects {}x{} graphs, dataset has {}x{}",
            model_config.input_h,
            model_config.input_w,
            sample0.h(),
            sample0.w()
        )));
    }
    model_config.validate()?;

    let mut model = Model::<f32>::init(model_config, config.seed)?;
    let counts = train_set.counts();
    model.set_class_weights(&class_weights(&counts)?)?;
    let mut bank = model.center_bank();

    let sampler = PairSampler::new(train_set)?;
    let mut pair_rng =
        ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x5041_4952_5351_4c43)); // "PAIRSQLC"
    let mut adam = AdamState::<f32>::new(model.trainable_len());
    let hyper = AdamHyper::with_lr(config.lr);

    // Scaled inputs are reused across epochs.
    let inputs: Vec<Vec<f32>> = train_set
        .samples
        .iter()
        .map(|s| model.graph_input(&s.graph).map(|t| t.into_data()))
        .collect::<Result<Vec<_>>>()?;

    let n_pairs = config.batch_size / 2;
    let batches_per_epoch = train_set.len().div_ceil(config.batch_size);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut sum_total = 0.0f64;
        let mut sum_ls = 0.0f64;
        let mut sum_lc = 0.0f64;
        for batch_idx in 0..batches_per_epoch {
            let batch = sampler.next_batch(config.batch_size, &mut pair_rng)?;
            let results: Vec<PairResult<f32>> = batch
                .pairs
                .par_iter()
                .map(|&(a, b, label)| {
                    pair_forward_backward(
                        &model,
                        &bank,
                        &inputs[a],
                        &inputs[b],
                        label,
                        config.alpha,
                        n_pairs,
                    )
                })
                .collect::<Result<Vec<_>>>()?;

            let mut grads = vec![0.0f32; model.trainable_len()];
            let mut z_batch = Vec::with_capacity(n_pairs * model.config.embed_units);
            let mut labels = Vec::with_capacity(n_pairs);
            let mut ls_sum = 0.0f64;
            let mut lc_sum = 0.0f64;
            for r in &results {
                for (g, &pg) in grads.iter_mut().zip(&r.grads) {
                    *g += pg;
                }
                z_batch.extend_from_slice(&r.z_fused);
                labels.push(r.label);
                ls_sum += r.softmax_loss;
                lc_sum += r.center_sq_half;
            }
            let ls = ls_sum / n_pairs as f64;
            let lc = lc_sum / n_pairs as f64;
            let breakdown = LossBreakdown::combine(ls, lc, config.alpha);
            if !breakdown.total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {}",
                    batch_idx + 1
                )));
            }
            if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of {} at epoch {epoch}, batch {}",
                    model.name_of_trainable_index(bad),
                    batch_idx + 1
                )));
            }
            let trainable_len = model.trainable_len();
            adam_step(
                &mut model.params_mut()[..trainable_len],
                &grads,
                &mut adam,
                &hyper,
                "model",
            )?;
            update_centers(&mut bank, &z_batch, &labels, config.gamma_center)?;

            sum_total += breakdown.total;
            sum_ls += ls;
            sum_lc += lc;
        }
        model.store_center_bank(&bank);
        let val_loss = match val_set {
            Some(vs) => Some(dataset_loss(&model, vs, config.alpha)?),
            None => None,
        };
        history.push(EpochStats {
            epoch,
            train_loss: sum_total / batches_per_epoch as f64,
            val_loss,
            softmax_loss: sum_ls / batches_per_epoch as f64,
            center_loss: sum_lc / batches_per_epoch as f64,
        });
    }
    model.store_center_bank(&bank);
    Ok(TrainOutput { model, history })
}

/// `epoch,train_loss,val_loss,softmax_loss,center_loss` per line; the
/// val column is empty when no validation set was scored.
pub fn write_loss_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_loss,softmax_loss,center_loss\n");
    for h in history {
        let val = h
            .val_loss
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.train_loss, val, h.softmax_loss, h.center_loss
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

//! Minority-class augmentation in the entropy domain.
//!
//! Each synthetic sample is derived from an original of the same class by a
//! circular shift of the flattened stream, a +/-5% resampling-length jitter,
//! and additive Gaussian noise (sigma 0.05 entropy units), clipped to [0, 8].
//! The perturbations move entropy mass around the way obfuscation moves code
//! regions without ever leaving the valid value range.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::entropy::{resample_linear, EntropyGraph, ENTROPY_MAX};
use crate::error::{Error, Result};
use crate::synth::splitmix64;
use crate::train::dataset::{Dataset, Sample};

const NOISE_SIGMA: f64 = 0.05;
const JITTER_FRACTION: f64 = 0.05;

pub(crate) fn augment_graph(graph: &EntropyGraph, rng: &mut ChaCha8Rng) -> EntropyGraph {
    let (h, w) = (graph.h(), graph.w());
    let len = h * w;
    let mut stream: Vec<f64> = graph.cells().iter().map(|&c| c as f64).collect();

    // Circular shift of the flattened stream.
    let shift = rng.random_range(0..len);
    stream.rotate_left(shift);

    // Resampling jitter: stretch/shrink by up to 5%, then rebuild at H*W.
    let jitter = 1.0 + rng.random_range(-JITTER_FRACTION..=JITTER_FRACTION);
    let mid_len = ((len as f64 * jitter).round() as usize).max(2);
    let stretched = resample_linear(&stream, mid_len);
    let mut rebuilt = resample_linear(&stretched, len);

    // Additive Gaussian noise, clipped back into the entropy range.
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    for v in &mut rebuilt {
        *v = (*v + noise.sample(rng)).clamp(0.0, ENTROPY_MAX);
    }

    let data: Vec<f32> = rebuilt
        .into_iter()
        .map(|v| (v as f32).clamp(0.0, ENTROPY_MAX as f32))
        .collect();
    EntropyGraph::new(h, w, data, graph.fill_policy(), graph.sample_id.clone())
        .expect("augmented cells stay in range")
}

/// Grow every class with fewer than `threshold` samples up to `target`
/// (`target == 0` means the median class count). Originals are retained and
/// synthetic samples are flagged `augmented`.
pub fn augment_minority(
    ds: &Dataset,
    seed: u64,
    threshold: usize,
    target: usize,
) -> Result<Dataset> {
    let counts = ds.counts();
    let target = if target == 0 {
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        // Median class count, but never below the threshold itself.
        sorted[sorted.len() / 2].max(threshold)
    } else {
        target
    };
    if target < threshold {
        return Err(Error::Invalid(format!(
            "augment target {target} below threshold {threshold}"
        )));
    }
    let mut out = ds.clone();
    let by_class = ds.indices_by_class();
    for (class, indices) in by_class.iter().enumerate() {
        let count = indices.len();
        if count >= threshold || count == 0 || count >= target {
            continue;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x4155_474d_454e_5400 ^ class as u64));
        for k in 0..(target - count) {
            let base = &ds.samples[indices[k % count]];
            let graph = augment_graph(&base.graph, &mut rng);
            out.samples.push(Sample {
                id: format!("{}#aug{}", base.id, k),
                label: class,
                graph: Arc::new(graph),
                augmented: true,
            });
        }
    }
    Ok(out)
}

//! Shared helpers for integration tests: in-memory toy datasets and a
//! micro encoder configuration that trains in milliseconds.

use std::sync::Arc;

use entrosim::entropy::{build_entropy_graph, EntropyStream, ExtractConfig, FillPolicy};
use entrosim::nn::{BlockSpec, ModelConfig};
use entrosim::synth::{generate_sample, FamilySpec};
use entrosim::train::{Dataset, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOY_GRAPH: usize = 16;

/// Two thin blocks over 16x16 graphs; a full pair step costs well under a
/// millisecond.
pub fn micro_model_config() -> ModelConfig {
    ModelConfig {
        input_h: TOY_GRAPH,
        input_w: TOY_GRAPH,
        blocks: vec![
            BlockSpec { n_conv: 1, filters: 4 },
            BlockSpec { n_conv: 1, filters: 8 },
        ],
        fc1_units: 32,
        embed_units: 16,
        n_classes: 2,
        family_names: vec![],
        segment_len: 200,
        fill_policy: FillPolicy::Resample,
    }
}

/// Dataset of family-spec samples rendered to TOY_GRAPH x TOY_GRAPH graphs.
pub fn dataset_from_specs(specs: &[(FamilySpec, usize)], seed: u64) -> Dataset {
    let cfg = ExtractConfig {
        segment_len: 200,
        graph_h: TOY_GRAPH,
        graph_w: TOY_GRAPH,
        fill_policy: FillPolicy::Resample,
    };
    let mut samples = Vec::new();
    for (label, (spec, count)) in specs.iter().enumerate() {
        for i in 0..*count {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ ((label as u64) << 40) ^ ((i as u64) << 8) ^ 0xD5,
            );
            let bytes = generate_sample(spec, &mut rng);
            let stream = entrosim::entropy::entropy_stream(&bytes, &cfg);
            let graph = build_entropy_graph(&stream, &cfg);
            samples.push(Sample {
                id: format!("{}_{i}", spec.name),
                label,
                graph: Arc::new(graph),
                augmented: false,
            });
        }
    }
    Dataset {
        samples,
        family_names: specs.iter().map(|(s, _)| s.name.clone()).collect(),
    }
}

/// Flat constant-entropy dataset: class k's graphs sit at distinct levels
/// with small per-sample offsets. Linearly separable by construction.
pub fn separable_dataset(per_class: &[usize], levels: &[f64]) -> Dataset {
    let cfg = ExtractConfig {
        segment_len: 200,
        graph_h: TOY_GRAPH,
        graph_w: TOY_GRAPH,
        fill_policy: FillPolicy::Resample,
    };
    let mut samples = Vec::new();
    for (label, (&count, &level)) in per_class.iter().zip(levels).enumerate() {
        for i in 0..count {
            let v = level + 0.01 * (i % 7) as f64;
            let stream = EntropyStream {
                values: vec![v; 32],
                source_len: 6400,
                segment_len: 200,
            };
            samples.push(Sample {
                id: format!("c{label}_{i}"),
                label,
                graph: Arc::new(build_entropy_graph(&stream, &cfg)),
                augmented: false,
            });
        }
    }
    Dataset {
        samples,
        family_names: (0..per_class.len()).map(|i| format!("fam{i}")).collect(),
    }
}

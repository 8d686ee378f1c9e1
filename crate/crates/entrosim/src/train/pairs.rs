//! Positive-pair batching: every pair draws two distinct samples from one
//! class, and the pair's class is sampled uniformly over classes so minority
//! families are seen as often as majority ones.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::train::dataset::Dataset;

/// One training batch of same-class sample-index pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBatch {
    /// (index_a, index_b, class_label); index_a != index_b.
    pub pairs: Vec<(usize, usize, usize)>,
}

/// Per-class sample indices, validated for pairability.
#[derive(Clone, Debug)]
pub struct PairSampler {
    by_class: Vec<Vec<usize>>,
}

impl PairSampler {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let by_class = ds.indices_by_class();
        for (class, indices) in by_class.iter().enumerate() {
            if indices.len() < 2 {
                return Err(Error::Invalid(format!(
                    "class {} ({}) has {} sample(s); positive pairs need at least 2",
                    class,
                    ds.family_names[class],
                    indices.len()
                )));
            }
        }
        Ok(Self { by_class })
    }

    pub fn n_classes(&self) -> usize {
        self.by_class.len()
    }

    /// Draw `batch_size / 2` same-class pairs.
    pub fn next_batch(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<PairBatch> {
        if batch_size < 2 || batch_size % 2 != 0 {
            return Err(Error::Invalid(format!(
                "batch size {batch_size} must be even and >= 2"
            )));
        }
        let n_pairs = batch_size / 2;
        let mut pairs = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let class = rng.random_range(0..self.by_class.len());
            let members = &self.by_class[class];
            let a = rng.random_range(0..members.len());
            let mut b = rng.random_range(0..members.len() - 1);
            if b >= a {
                b += 1;
            }
            pairs.push((members[a], members[b], class));
        }
        Ok(PairBatch { pairs })
    }
}

/// Convenience wrapper building the sampler and one batch in one call.
pub fn select_positive_pairs(
    ds: &Dataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PairBatch> {
    PairSampler::new(ds)?.next_batch(batch_size, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::dataset::tests::toy_dataset;
    use rand::SeedableRng;

    #[test]
    fn pairs_are_same_class_and_distinct() {
        let ds = toy_dataset(&[5, 7, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sampler = PairSampler::new(&ds).unwrap();
        for _ in 0..200 {
            let batch = sampler.next_batch(8, &mut rng).unwrap();
            assert_eq!(batch.pairs.len(), 4);
            for (a, b, class) in batch.pairs {
                assert_ne!(a, b);
                assert_eq!(ds.samples[a].label, class);
                assert_eq!(ds.samples[b].label, class);
            }
        }
    }

    #[test]
    fn seeded_rng_reproduces_batches() {
        let ds = toy_dataset(&[4, 4, 4]);
        let sampler = PairSampler::new(&ds).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sampler.next_batch(6, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn singleton_class_errors() {
        let ds = toy_dataset(&[4, 1]);
        assert!(PairSampler::new(&ds).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(select_positive_pairs(&ds, 4, &mut rng).is_err());
    }

    #[test]
    fn class_frequency_uniform_chi_square() {
        // 1000 batches x 6 pairs over K=11 classes with wildly imbalanced
        // sample counts; pair classes must still be uniform.
        let ds = toy_dataset(&[99, 91, 9, 100, 96, 6, 91, 18, 162, 178, 198]);
        let sampler = PairSampler::new(&ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let k = ds.n_classes();
        let mut observed = vec![0usize; k];
        let batches = 1000;
        let pairs_per_batch = 6;
        for _ in 0..batches {
            for (_, _, class) in sampler.next_batch(2 * pairs_per_batch, &mut rng).unwrap().pairs {
                observed[class] += 1;
            }
        }
        let total = (batches * pairs_per_batch) as f64;
        let expected = total / k as f64;
        let chi2: f64 = observed
            .iter()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square critical value at significance 0.01, df = 10
        const CHI2_CRIT_DF10_P01: f64 = 23.209;
        assert!(
            chi2 < CHI2_CRIT_DF10_P01,
            "chi2 {chi2} exceeds critical {CHI2_CRIT_DF10_P01}; counts {observed:?}"
        );
    }
}

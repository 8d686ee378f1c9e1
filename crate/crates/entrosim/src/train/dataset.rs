//! Labeled entropy-graph datasets: manifest loading, stratified splits,
//! and per-class bootstrap resampling.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::read_manifest;
use crate::egr::read_egr;
use crate::entropy::GraphRef;
use crate::error::{Error, Result};
use crate::synth::splitmix64;

#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub graph: GraphRef,
    pub augmented: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub family_names: Vec<String>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.family_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Sample indices grouped by class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.n_classes()];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        by_class
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            family_names: self.family_names.clone(),
        }
    }

    /// Load graphs referenced by a manifest; labels come from the sorted set
    /// of family names present.
    pub fn from_manifest(manifest_path: &Path) -> Result<Dataset> {
        let mut names: Vec<String> = read_manifest(manifest_path)?
            .rows
            .iter()
            .map(|r| r.family.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        Self::from_manifest_with_names(manifest_path, &names)
    }

    /// Load a manifest against a fixed family-name list (e.g. a checkpoint's
    /// classes); rows naming unknown families are errors.
    pub fn from_manifest_with_names(manifest_path: &Path, names: &[String]) -> Result<Dataset> {
        let manifest = read_manifest(manifest_path)?;
        if manifest.rows.is_empty() {
            return Err(Error::Invalid(format!(
                "manifest {} has no samples",
                manifest_path.display()
            )));
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut samples = Vec::with_capacity(manifest.rows.len());
        for row in &manifest.rows {
            let label = *index.get(row.family.as_str()).ok_or_else(|| {
                Error::Invalid(format!(
                    "manifest row {}: family {} not in the expected set",
                    row.id, row.family
                ))
            })?;
            let mut graph = read_egr(&base.join(&row.egr_path))?;
            graph.sample_id = row.id.clone();
            samples.push(Sample {
                id: row.id.clone(),
                label,
                graph: Arc::new(graph),
                augmented: false,
            });
        }
        let ds = Dataset {
            samples,
            family_names: names.to_vec(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Invalid("empty dataset".into()));
        }
        let (h, w) = (self.samples[0].graph.h(), self.samples[0].graph.w());
        for s in &self.samples {
            if s.label >= self.n_classes() {
                return Err(Error::Invalid(format!("label {} out of range", s.label)));
            }
            if s.graph.h() != h || s.graph.w() != w {
                return Err(Error::Invalid(format!(
                    "sample {}: graph {}x{} differs from {}x{}",
                    s.id,
                    s.graph.h(),
                    s.graph.w(),
                    h,
                    w
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic per-class split preserving class proportions within
/// rounding. Every class contributes at least one sample to each side, which
/// requires at least two samples per class.
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5354_5241_5449_4659)); // "STRATIFY"
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, mut indices) in ds.indices_by_class().into_iter().enumerate() {
        let n = indices.len();
        if n < 2 {
            return Err(Error::Invalid(format!(
                "class {} ({}) has {} sample(s); augment it or merge it before splitting",
                class, ds.family_names[class], n
            )));
        }
        indices.shuffle(&mut rng);
        let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&indices[..n_train]);
        test_idx.extend_from_slice(&indices[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

/// Bootstrap resample to the original size, stratified per class so every
/// class survives with its original count.
pub fn bootstrap_resample(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x424f_4f54_5354_5250)); // "BOOTSTRP"
    let mut picked = Vec::with_capacity(ds.len());
    for indices in ds.indices_by_class() {
        if indices.is_empty() {
            continue;
        }
        for _ in 0..indices.len() {
            picked.push(indices[rng.random_range(0..indices.len())]);
        }
    }
    ds.subset(&picked)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::entropy::{build_entropy_graph, EntropyStream, ExtractConfig};

    pub(crate) fn toy_dataset(per_class: &[usize]) -> Dataset {
        let cfg = ExtractConfig {
            graph_h: 4,
            graph_w: 4,
            ..ExtractConfig::default()
        };
        let mut samples = Vec::new();
        for (label, &count) in per_class.iter().enumerate() {
            for i in 0..count {
                let v = (label as f64 + 1.0) + 0.001 * i as f64;
                let stream = EntropyStream {
                    values: vec![v; 4],
                    source_len: 800,
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

    #[test]
    fn split_is_exact_for_round_counts() {
        let ds = toy_dataset(&[100, 100]);
        let (train, test) = stratified_split(&ds, 0.8, 7).unwrap();
        assert_eq!(train.counts(), vec![80, 80]);
        assert_eq!(test.counts(), vec![20, 20]);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = toy_dataset(&[13, 9, 21]);
        let (tr1, te1) = stratified_split(&ds, 0.8, 5).unwrap();
        let (tr2, te2) = stratified_split(&ds, 0.8, 5).unwrap();
        let ids = |d: &Dataset| d.samples.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&tr1), ids(&tr2));
        assert_eq!(ids(&te1), ids(&te2));
        for t in &te1.samples {
            assert!(!tr1.samples.iter().any(|s| s.id == t.id));
        }
        assert_eq!(tr1.len() + te1.len(), ds.len());
        let (tr3, _) = stratified_split(&ds, 0.8, 6).unwrap();
        assert_ne!(ids(&tr1), ids(&tr3));
    }

    #[test]
    fn split_keeps_both_sides_nonempty_per_class() {
        let ds = toy_dataset(&[2, 2]);
        let (train, test) = stratified_split(&ds, 0.9, 1).unwrap();
        assert_eq!(train.counts(), vec![1, 1]);
        assert_eq!(test.counts(), vec![1, 1]);
    }

    #[test]
    fn split_rejects_singleton_class() {
        let ds = toy_dataset(&[5, 1]);
        let err = stratified_split(&ds, 0.8, 1).unwrap_err().to_string();
        assert!(err.contains("augment"), "{err}");
    }

    #[test]
    fn bootstrap_preserves_size_and_class_counts() {
        let ds = toy_dataset(&[10, 4]);
        let rs = bootstrap_resample(&ds, 3);
        assert_eq!(rs.len(), ds.len());
        assert_eq!(rs.counts(), ds.counts());
    }

    #[test]
    fn bootstrap_seeds_differ() {
        let ds = toy_dataset(&[30]);
        let ids = |d: &Dataset| d.samples.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..30 {
            seen.insert(ids(&bootstrap_resample(&ds, seed)));
        }
        assert!(seen.len() >= 29, "resamples should almost surely differ");
    }

    #[test]
    fn bootstrap_unique_fraction_near_one_minus_inv_e() {
        let ds = toy_dataset(&[400]);
        let mut total_unique = 0usize;
        let trials = 1000;
        for seed in 0..trials {
            let rs = bootstrap_resample(&ds, seed as u64);
            let unique: std::collections::BTreeSet<_> =
                rs.samples.iter().map(|s| s.id.as_str().to_string()).collect();
            total_unique += unique.len();
        }
        let frac = total_unique as f64 / (trials as f64 * ds.len() as f64);
        let expect = 1.0 - (-1.0f64).exp(); // 0.6321...
        assert!(
            (frac - expect).abs() < 0.02,
            "unique fraction {frac} should be near {expect}"
        );
    }
}

//! Evaluation: confusion matrix, per-class and support-weighted P/R/F1,
//! one-vs-rest ROC-AUC, and report/embedding export.

pub mod auc;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyGraph;
use crate::error::{Error, Result};
use crate::nn::loss::softmax;
use crate::nn::model::Model;
use crate::train::dataset::Dataset;

pub use auc::{binary_auc, roc_auc, AucSummary};

/// Row-major `K x K` counts; rows are actual classes, columns predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_predictions(preds: &[usize], truths: &[usize], k: usize) -> Result<Self> {
        if preds.len() != truths.len() {
            return Err(Error::Invalid("preds/truths length mismatch".into()));
        }
        let mut counts = vec![0u64; k * k];
        for (&p, &t) in preds.iter().zip(truths) {
            if p >= k || t >= k {
                return Err(Error::Invalid(format!("label out of range: pred {p}, truth {t}")));
            }
            counts[t * k + p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::Invalid("confusion matrix size mismatch".into()));
        }
        Ok(Self { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.k + predicted]
    }

    pub fn row(&self, actual: usize) -> &[u64] {
        &self.counts[actual * self.k..(actual + 1) * self.k]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Overall accuracy; equals micro-averaged recall for single-label data.
    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn support(&self, class: usize) -> u64 {
        self.row(class).iter().sum()
    }

    pub fn predicted_total(&self, class: usize) -> u64 {
        (0..self.k).map(|a| self.get(a, class)).sum()
    }
}

/// Per-class metrics; `0/0` cases are reported as 0 with the matching flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub support: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

pub fn prf_per_class(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.k())
        .map(|j| {
            let tp = cm.get(j, j) as f64;
            let support = cm.support(j);
            let predicted = cm.predicted_total(j);
            let mut flags = Vec::new();
            let recall = if support == 0 {
                flags.push("recall_zero_division".to_string());
                0.0
            } else {
                tp / support as f64
            };
            let precision = if predicted == 0 {
                flags.push("precision_zero_division".to_string());
                0.0
            } else {
                tp / predicted as f64
            };
            let f1 = if precision + recall == 0.0 {
                flags.push("f1_zero_division".to_string());
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                recall,
                precision,
                f1,
                support,
                flags,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Support-weighted means of the per-class metrics.
pub fn weighted_metrics(per_class: &[ClassMetrics]) -> Result<WeightedMetrics> {
    let total: u64 = per_class.iter().map(|m| m.support).sum();
    if total == 0 {
        return Err(Error::Invalid("weighted metrics over zero support".into()));
    }
    let mut out = WeightedMetrics {
        recall: 0.0,
        precision: 0.0,
        f1: 0.0,
    };
    for m in per_class {
        let w = m.support as f64 / total as f64;
        out.recall += w * m.recall;
        out.precision += w * m.precision;
        out.f1 += w * m.f1;
    }
    Ok(out)
}

/// Class probabilities for one graph: the sample is duplicated into both
/// branches (fusion is then the identity) and the head's logits softmaxed.
pub fn predict(model: &Model<f32>, graph: &EntropyGraph) -> Result<Vec<f64>> {
    let z = model.encoder_forward(graph)?;
    let logits = model.head_logits(&z)?;
    let logits64: Vec<f64> = logits.iter().map(|&l| l as f64).collect();
    Ok(softmax(&logits64))
}

/// Full evaluation of a dataset under a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub family_names: Vec<String>,
    pub cm: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub weighted: WeightedMetrics,
    pub auc: AucSummary,
}

pub fn evaluate(model: &Model<f32>, ds: &Dataset) -> Result<EvalReport> {
    ds.validate()?;
    if ds.n_classes() != model.config.n_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes, model {}",
            ds.n_classes(),
            model.config.n_classes
        )));
    }
    let scores: Vec<Vec<f64>> = ds
        .samples
        .par_iter()
        .map(|s| predict(model, &s.graph))
        .collect::<Result<Vec<_>>>()?;
    let truths: Vec<usize> = ds.samples.iter().map(|s| s.label).collect();
    let preds: Vec<usize> = scores
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("non-empty probability row")
        })
        .collect();
    let cm = ConfusionMatrix::from_predictions(&preds, &truths, ds.n_classes())?;
    let per_class = prf_per_class(&cm);
    let weighted = weighted_metrics(&per_class)?;
    let auc = roc_auc(&scores, &truths, ds.n_classes())?;
    Ok(EvalReport {
        family_names: ds.family_names.clone(),
        cm,
        per_class,
        weighted,
        auc,
    })
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct ReportJson {
    weighted: WeightedMetrics,
    auc: AucJson,
    per_class: BTreeMap<String, ClassMetrics>,
    cm_csv: String,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct AucJson {
    micro: f64,
    #[serde(rename = "macro")]
    macro_avg: f64,
    per_class: BTreeMap<String, f64>,
}

pub fn report_to_json(report: &EvalReport) -> String {
    let per_class: BTreeMap<String, ClassMetrics> = report
        .family_names
        .iter()
        .cloned()
        .zip(report.per_class.iter().cloned())
        .collect();
    let auc_per_class: BTreeMap<String, f64> = report
        .family_names
        .iter()
        .zip(&report.auc.per_class)
        .filter_map(|(name, auc)| auc.map(|a| (name.clone(), a)))
        .collect();
    let doc = ReportJson {
        weighted: report.weighted,
        auc: AucJson {
            micro: report.auc.micro,
            macro_avg: report.auc.macro_avg,
            per_class: auc_per_class,
        },
        per_class,
        cm_csv: "cm.csv".to_string(),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

fn cm_to_csv(report: &EvalReport) -> String {
    let mut text = String::from("actual\\predicted");
    for name in &report.family_names {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (a, name) in report.family_names.iter().enumerate() {
        text.push_str(name);
        for p in 0..report.family_names.len() {
            text.push_str(&format!(",{}", report.cm.get(a, p)));
        }
        text.push('\n');
    }
    text
}

/// Write `report.json` and `cm.csv` into `dir`.
pub fn export_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, report_to_json(report)).map_err(|e| Error::io(&json_path, e))?;
    let cm_path = dir.join("cm.csv");
    std::fs::write(&cm_path, cm_to_csv(report)).map_err(|e| Error::io(&cm_path, e))?;
    Ok(())
}

/// Per-sample embeddings CSV: `id,family,e_0..e_{d-1}`.
pub fn export_embeddings(model: &Model<f32>, ds: &Dataset, path: &Path) -> Result<()> {
    let embeddings: Vec<Vec<f32>> = ds
        .samples
        .par_iter()
        .map(|s| model.encoder_forward(&s.graph))
        .collect::<Result<Vec<_>>>()?;
    let d = model.config.embed_units;
    let mut text = String::from("id,family");
    for i in 0..d {
        text.push_str(&format!(",e_{i}"));
    }
    text.push('\n');
    for (s, z) in ds.samples.iter().zip(&embeddings) {
        text.push_str(&s.id);
        text.push(',');
        text.push_str(&ds.family_names[s.label]);
        for v in z {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

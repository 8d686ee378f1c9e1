//! The bootstrap experiment protocol: repeated stratified split + per-class
//! bootstrap resample + minority augmentation + train + held-out evaluation,
//! and the training-ratio sweep built on top of it.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::TrainConfig;
use crate::error::Result;
use crate::eval::{evaluate, EvalReport};
use crate::nn::model::ModelConfig;
use crate::train::augment::augment_minority;
use crate::train::dataset::{bootstrap_resample, stratified_split, Dataset};
use crate::train::trainer::{train, TrainOutput};

#[derive(Clone, Debug)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub repetitions: usize,
    pub f1_weighted: MeanStd,
    pub precision_weighted: MeanStd,
    pub recall_weighted: MeanStd,
    pub auc_macro: MeanStd,
    pub auc_micro: MeanStd,
}

pub fn summarize(outcomes: &[RepOutcome]) -> ExperimentSummary {
    let pick = |f: fn(&EvalReport) -> f64| -> MeanStd {
        mean_std(&outcomes.iter().map(|o| f(&o.report)).collect::<Vec<_>>())
    };
    ExperimentSummary {
        repetitions: outcomes.len(),
        f1_weighted: pick(|r| r.weighted.f1),
        precision_weighted: pick(|r| r.weighted.precision),
        recall_weighted: pick(|r| r.weighted.recall),
        auc_macro: pick(|r| r.auc.macro_avg),
        auc_micro: pick(|r| r.auc.micro),
    }
}

/// One repetition: split at `config.split_ratio` with the repetition seed,
/// bootstrap-resample the training side, augment minorities, train, then
/// evaluate on the untouched held-out split.
pub fn run_repetition(
    ds: &Dataset,
    config: &TrainConfig,
    model_config: &ModelConfig,
    rep: usize,
) -> Result<RepOutcome> {
    let seed = config.seed + rep as u64;
    let (train_set, test_set) = stratified_split(ds, config.split_ratio, seed)?;
    let resampled = bootstrap_resample(&train_set, seed);
    let augmented = augment_minority(
        &resampled,
        seed,
        config.augment_threshold,
        config.augment_target,
    )?;
    let rep_config = TrainConfig { seed, ..config.clone() };
    let TrainOutput { model, .. } = train(&augmented, None, &rep_config, model_config.clone())?;
    let report = evaluate(&model, &test_set)?;
    Ok(RepOutcome { rep, seed, report })
}

/// Run `repetitions` independent repetitions (in parallel; the rep index
/// fixes each seed, so results do not depend on scheduling).
pub fn run_bootstrap_experiment(
    ds: &Dataset,
    config: &TrainConfig,
    model_config: &ModelConfig,
    repetitions: usize,
) -> Result<(Vec<RepOutcome>, ExperimentSummary)> {
    let outcomes: Vec<RepOutcome> = (0..repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(ds, config, model_config, rep))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&outcomes);
    Ok((outcomes, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub ratio: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub repetitions: usize,
}

/// Sweep the training ratio, `repetitions` seeds per ratio; seeds are shared
/// across ratios so rows are paired.
pub fn run_ratio_sweep(
    ds: &Dataset,
    config: &TrainConfig,
    model_config: &ModelConfig,
    ratios: &[f64],
    repetitions: usize,
) -> Result<Vec<RatioRow>> {
    let jobs: Vec<(usize, usize)> = (0..ratios.len())
        .flat_map(|ri| (0..repetitions).map(move |rep| (ri, rep)))
        .collect();
    let f1s: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|&(ri, rep)| {
            let cfg = TrainConfig {
                split_ratio: ratios[ri],
                ..config.clone()
            };
            let outcome = run_repetition(ds, &cfg, model_config, rep)?;
            Ok((ri, outcome.report.weighted.f1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_ratio: Vec<Vec<f64>> = vec![Vec::new(); ratios.len()];
    for (ri, f1) in f1s {
        per_ratio[ri].push(f1);
    }
    Ok(ratios
        .iter()
        .zip(per_ratio)
        .map(|(&ratio, f1s)| {
            let ms = mean_std(&f1s);
            RatioRow {
                ratio,
                mean_f1: ms.mean,
                std_f1: ms.std,
                repetitions,
            }
        })
        .collect())
}

/// `ratio,mean_f1,std_f1,repetitions` CSV.
pub fn ratio_sweep_csv(rows: &[RatioRow]) -> String {
    let mut text = String::from("ratio,mean_f1,std_f1,repetitions\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.ratio, r.mean_f1, r.std_f1, r.repetitions
        ));
    }
    text
}

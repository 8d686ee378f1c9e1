//! Dataset handling, positive-pair batching, minority augmentation, the
//! training loop, and the bootstrap experiment protocol.

pub mod augment;
pub mod dataset;
pub mod experiment;
pub mod pairs;
pub mod trainer;

pub use augment::augment_minority;
pub use dataset::{bootstrap_resample, stratified_split, Dataset, Sample};
pub use experiment::{
    ratio_sweep_csv, run_bootstrap_experiment, run_ratio_sweep, summarize, ExperimentSummary,
    RatioRow, RepOutcome,
};
pub use pairs::{select_positive_pairs, PairBatch, PairSampler};
pub use trainer::{
    dataset_loss, pair_forward_backward, train, write_loss_history_csv, EpochStats, PairResult,
    TrainOutput,
};

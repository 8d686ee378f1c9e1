//! Subcommand implementations: thin, deterministic compositions of the
//! library operations.

use std::io::Write;
use std::path::Path;

use entrosim::checkpoint::{load_checkpoint, save_checkpoint};
use entrosim::config::{parse_ratio_spec, read_train_config, TrainConfig};
use entrosim::corpus::{read_manifest, write_manifest, CorpusManifest};
use entrosim::entropy::{extract_file, ExtractConfig, FillPolicy};
use entrosim::eval::{evaluate as eval_dataset, export_embeddings, export_report, predict};
use entrosim::nn::{Model, ModelConfig};
use entrosim::synth::{generate_corpus, mini_preset, paper_shape_preset};
use entrosim::train::{
    augment_minority, ratio_sweep_csv, run_bootstrap_experiment, run_ratio_sweep,
    stratified_split, train as train_model, write_loss_history_csv, Dataset,
};

use crate::{
    Cli, CliError, ClassifyArgs, CorpusPreset, EvaluateArgs, ExperimentArgs, ExtractArgs, FillArg,
    ModelPreset, SynthArgs, TrainArgs, TrainFlags,
};

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_graph_spec(spec: &str) -> Result<(usize, usize), CliError> {
    let (h, w) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| usage(format!("--graph {spec:?} is not HxW")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("--graph {spec:?} is not HxW")))
    };
    let (h, w) = (parse(h)?, parse(w)?);
    if h == 0 || w == 0 {
        return Err(usage("--graph dimensions must be >= 1"));
    }
    Ok((h, w))
}

pub fn synth(cli: &Cli, args: &SynthArgs) -> CliResult {
    let config = match args.preset {
        CorpusPreset::PaperShape => paper_shape_preset(cli.seed),
        CorpusPreset::Mini => mini_preset(cli.seed),
    };
    let labels = generate_corpus(&config, &args.out)?;
    let total: usize = config.counts.iter().sum();
    log::info!(
        "generated {} samples across {} families under {}",
        total,
        config.families.len(),
        args.out.display()
    );
    println!("{}", labels.display());
    Ok(())
}

fn extract_config(args: &ExtractArgs) -> Result<ExtractConfig, CliError> {
    let mut cfg = ExtractConfig::default();
    if let Some(l) = args.segment_len {
        cfg.segment_len = l;
    }
    if let Some(spec) = &args.graph {
        let (h, w) = parse_graph_spec(spec)?;
        cfg.graph_h = h;
        cfg.graph_w = w;
    }
    if let Some(fill) = args.fill {
        cfg.fill_policy = match fill {
            FillArg::Resample => FillPolicy::Resample,
            FillArg::Pad => FillPolicy::PadTruncate,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn extract(cli: &Cli, args: &ExtractArgs) -> CliResult {
    let cfg = extract_config(args)?;
    let manifest =
        entrosim::corpus::extract_corpus(&args.root, &args.labels, &cfg, &args.out, cli.workers)?;
    log::info!(
        "extracted {} graphs ({} skipped) into {}",
        manifest.rows.len(),
        manifest.skipped.len(),
        args.out.display()
    );
    println!("{}", args.out.join("manifest.jsonl").display());
    Ok(())
}

fn train_config_from_flags(seed: u64, flags: &TrainFlags) -> Result<TrainConfig, CliError> {
    let mut tc = match &flags.config {
        Some(path) => read_train_config(path)?,
        None => TrainConfig::default(),
    };
    tc.seed = seed;
    if let Some(v) = flags.epochs {
        tc.epochs = v;
    }
    if let Some(v) = flags.batch {
        tc.batch_size = v;
    }
    if let Some(v) = flags.lr {
        tc.lr = v;
    }
    if let Some(v) = flags.alpha {
        tc.alpha = v;
    }
    if let Some(v) = flags.gamma {
        tc.gamma_center = v;
    }
    if let Some(v) = flags.split {
        tc.split_ratio = v;
    }
    if let Some(v) = flags.augment_threshold {
        tc.augment_threshold = v;
    }
    if let Some(v) = flags.augment_target {
        tc.augment_target = v;
    }
    tc.validate()?;
    Ok(tc)
}

fn model_config_for(ds: &Dataset, preset: ModelPreset) -> ModelConfig {
    let mut mc = match preset {
        ModelPreset::Desk => ModelConfig::desk(ds.family_names.clone()),
        ModelPreset::Paper => ModelConfig::paper(ds.family_names.clone()),
    };
    // The dataset's graph geometry wins over the preset default.
    if let Some(s) = ds.samples.first() {
        mc.input_h = s.graph.h();
        mc.input_w = s.graph.w();
    }
    mc
}

/// Manifest restricted to the given sample ids, with egr paths rewritten to
/// absolute so the emitted manifest works from any directory.
fn manifest_subset_absolute(
    manifest_path: &Path,
    ids: &[String],
) -> Result<CorpusManifest, entrosim::Error> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let rows = manifest
        .rows
        .into_iter()
        .filter(|r| ids.contains(&r.id))
        .map(|mut r| {
            let abs = base.join(&r.egr_path);
            let abs = abs.canonicalize().unwrap_or(abs);
            r.egr_path = abs.to_string_lossy().into_owned();
            r
        })
        .collect();
    Ok(CorpusManifest {
        rows,
        skipped: Vec::new(),
    })
}

pub fn train(cli: &Cli, args: &TrainArgs) -> CliResult {
    let tc = train_config_from_flags(cli.seed, &args.flags)?;
    let ds = Dataset::from_manifest(&args.manifest)?;
    let mc = model_config_for(&ds, args.flags.preset);
    let (train_set, val_set) = stratified_split(&ds, tc.split_ratio, tc.seed)?;
    let augmented = augment_minority(&train_set, tc.seed, tc.augment_threshold, tc.augment_target)?;
    log::info!(
        "training on {} samples ({} augmented), validating on {}",
        augmented.len(),
        augmented.len() - train_set.len(),
        val_set.len()
    );
    let output = train_model(&augmented, Some(&val_set), &tc, mc)?;
    for h in &output.history {
        log::info!(
            "epoch {:>3}: train {:.4} val {:.4} (softmax {:.4}, center {:.4})",
            h.epoch,
            h.train_loss,
            h.val_loss.unwrap_or(f64::NAN),
            h.softmax_loss,
            h.center_loss
        );
    }
    std::fs::create_dir_all(&args.out).map_err(|e| entrosim::Error::io(&args.out, e))?;
    let ckpt_path = args.out.join("model.ntc");
    save_checkpoint(&ckpt_path, &output.model, tc.alpha)?;
    write_loss_history_csv(&args.out.join("loss_history.csv"), &output.history)?;
    let test_ids: Vec<String> = val_set.samples.iter().map(|s| s.id.clone()).collect();
    let test_manifest = manifest_subset_absolute(&args.manifest, &test_ids)?;
    write_manifest(&args.out.join("test_manifest.jsonl"), &test_manifest)?;
    println!("{}", ckpt_path.display());
    Ok(())
}

pub fn classify(_cli: &Cli, args: &ClassifyArgs) -> CliResult {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let model = &ckpt.model;
    let mut lines = Vec::new();
    if args
        .input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl"))
    {
        let ds = Dataset::from_manifest_with_names(&args.input, &model.config.family_names)?;
        for s in &ds.samples {
            lines.push(classification_line(model, &s.id, predict(model, &s.graph)?));
        }
    } else {
        let cfg = ExtractConfig {
            segment_len: model.config.segment_len,
            graph_h: model.config.input_h,
            graph_w: model.config.input_w,
            fill_policy: model.config.fill_policy,
        };
        let (graph, _) = extract_file(&args.input, &cfg)?;
        let id = args.input.to_string_lossy().into_owned();
        lines.push(classification_line(model, &id, predict(model, &graph)?));
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| entrosim::Error::io(path, e))?,
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| entrosim::Error::io("stdout", e))?;
        }
    }
    Ok(())
}

fn classification_line(model: &Model<f32>, id: &str, probs: Vec<f64>) -> String {
    let pred = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
        .map(|(i, _)| i)
        .expect("non-empty probabilities");
    let probs_map: serde_json::Map<String, serde_json::Value> = model
        .config
        .family_names
        .iter()
        .zip(&probs)
        .map(|(n, &p)| (n.clone(), serde_json::json!(p)))
        .collect();
    serde_json::json!({
        "id": id,
        "pred": model.config.family_names[pred],
        "probs": probs_map,
    })
    .to_string()
}

pub fn evaluate(_cli: &Cli, args: &EvaluateArgs) -> CliResult {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let ds = Dataset::from_manifest_with_names(&args.manifest, &ckpt.model.config.family_names)?;
    let report = eval_dataset(&ckpt.model, &ds)?;
    export_report(&report, &args.out)?;
    export_embeddings(&ckpt.model, &ds, &args.out.join("embeddings.csv"))?;
    log::info!(
        "weighted F1 {:.4}, macro AUC {:.4} over {} samples",
        report.weighted.f1,
        report.auc.macro_avg,
        ds.len()
    );
    println!("{}", args.out.join("report.json").display());
    Ok(())
}

pub fn experiment(cli: &Cli, args: &ExperimentArgs) -> CliResult {
    let tc = train_config_from_flags(cli.seed, &args.flags)?;
    if args.reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let ratios = args
        .ratios
        .as_deref()
        .map(parse_ratio_spec)
        .transpose()?;
    let ds = Dataset::from_manifest(&args.manifest)?;
    let mc = model_config_for(&ds, args.flags.preset);
    std::fs::create_dir_all(&args.out).map_err(|e| entrosim::Error::io(&args.out, e))?;

    let (outcomes, summary) = run_bootstrap_experiment(&ds, &tc, &mc, args.reps)?;
    for o in &outcomes {
        let dir = args.out.join(format!("rep_{:03}", o.rep));
        export_report(&o.report, &dir)?;
    }
    let summary_path = args.out.join("summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(|e| entrosim::Error::io(&summary_path, e))?;
    log::info!(
        "bootstrap x{}: weighted F1 {:.4} +/- {:.4}",
        summary.repetitions,
        summary.f1_weighted.mean,
        summary.f1_weighted.std
    );

    if let Some(ratios) = ratios {
        let rows = run_ratio_sweep(&ds, &tc, &mc, &ratios, args.reps)?;
        let path = args.out.join("ratio_sweep.csv");
        std::fs::write(&path, ratio_sweep_csv(&rows))
            .map_err(|e| entrosim::Error::io(&path, e))?;
    }
    println!("{}", summary_path.display());
    Ok(())
}

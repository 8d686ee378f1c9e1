//! Training hyper-parameters and the `key=value` config-file format.

use crate::error::{Error, Result};

/// Hyper-parameters of one training run. Defaults: 50 epochs, batch 24,
/// Adam at 1e-4, alpha 0.3, 80/20 split.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub alpha: f64,
    pub gamma_center: f64,
    pub seed: u64,
    pub split_ratio: f64,
    /// Classes below this count get augmented.
    pub augment_threshold: usize,
    /// Target count for augmented classes; 0 means "median class count".
    pub augment_target: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 24,
            lr: 1e-4,
            alpha: 0.3,
            gamma_center: 0.5,
            seed: 0,
            split_ratio: 0.8,
            augment_threshold: 20,
            augment_target: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(Error::Config(
                "batch_size must be even and >= 2 (pair batches)".into(),
            ));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config("split_ratio must be in (0, 1)".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be >= 0".into()));
        }
        if !(self.gamma_center > 0.0 && self.gamma_center <= 1.0) {
            return Err(Error::Config("gamma_center must be in (0, 1]".into()));
        }
        if self.augment_target != 0 && self.augment_target < self.augment_threshold {
            return Err(Error::Config(
                "augment_target must be 0 (median) or >= augment_threshold".into(),
            ));
        }
        Ok(())
    }

    /// Apply one `key = value` assignment; keys match field names exactly.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for key {key}")))
        }
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "gamma_center" => self.gamma_center = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "split_ratio" => self.split_ratio = parse(key, value)?,
            "augment_threshold" => self.augment_threshold = parse(key, value)?,
            "augment_target" => self.augment_target = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}

/// Parse an INI-style `key = value` file into a [`TrainConfig`] starting from
/// defaults. `#` and `;` start comments; unknown keys are errors.
pub fn parse_train_config_str(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected key=value", lineno + 1))
        })?;
        cfg.apply_kv(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_train_config(path: &std::path::Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_train_config_str(&text)
}

/// Parse a `start:end:step` ratio sweep specification into the inclusive
/// list of ratios, e.g. `0.1:0.9:0.1` -> nine values.
pub fn parse_ratio_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "ratio spec {spec:?} must be start:end:step"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in ratio spec")))
    };
    let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if !(start > 0.0 && start < 1.0 && end > 0.0 && end < 1.0) {
        return Err(Error::Config("ratios must lie in (0, 1)".into()));
    }
    if step <= 0.0 || end < start {
        return Err(Error::Config("ratio spec needs end >= start and step > 0".into()));
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let r = start + step * k as f64;
        if r > end + 1e-9 {
            break;
        }
        out.push((r * 1e9).round() / 1e9);
        k += 1;
        if k > 10_000 {
            return Err(Error::Config("ratio spec generates too many points".into()));
        }
    }
    Ok(out)
}

use std::collections::BTreeMap;

use super::TrainError;

/// Optimization settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Validation is evaluated at the start of each phase and every
    /// `eval_every` updates of that phase.
    pub eval_every: usize,
    /// Evaluations without improvement of the smoothed validation loss
    /// tolerated before stopping.
    pub patience: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Moving-average window over validation losses.
    pub smoothing_window: usize,
    /// When false, every phase runs exactly `max_steps` updates and returns
    /// the final parameters.
    pub early_stopping: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            batch_size: 8,
            eval_every: 20,
            patience: 5,
            max_steps: 1000,
            seed: 1,
            clip_norm: 2.0,
            smoothing_window: 3,
            early_stopping: true,
        }
    }
}

impl Hyperparams {
    pub const KEYS: [&'static str; 9] = [
        "learning_rate",
        "batch_size",
        "eval_every",
        "patience",
        "max_steps",
        "seed",
        "clip_norm",
        "smoothing_window",
        "early_stopping",
    ];

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let bad = || TrainError::BadHyperparam {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "learning_rate" => self.learning_rate = value.parse().map_err(|_| bad())?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad())?,
            "eval_every" => self.eval_every = value.parse().map_err(|_| bad())?,
            "patience" => self.patience = value.parse().map_err(|_| bad())?,
            "max_steps" => self.max_steps = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "clip_norm" => self.clip_norm = value.parse().map_err(|_| bad())?,
            "smoothing_window" => self.smoothing_window = value.parse().map_err(|_| bad())?,
            "early_stopping" => self.early_stopping = value.parse().map_err(|_| bad())?,
            _ => return Err(TrainError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies the recognized keys of `entries`, ignoring the others.
    pub fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<(), TrainError> {
        for (k, v) in entries {
            if Self::KEYS.contains(&k.as_str()) {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |key: &str, value: String| TrainError::BadHyperparam {
            key: key.to_string(),
            value,
        };
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(bad("learning_rate", self.learning_rate.to_string()));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "0".into()));
        }
        if self.eval_every == 0 {
            return Err(bad("eval_every", "0".into()));
        }
        if self.smoothing_window == 0 {
            return Err(bad("smoothing_window", "0".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(bad("clip_norm", self.clip_norm.to_string()));
        }
        Ok(())
    }

    pub fn to_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("learning_rate".into(), self.learning_rate.to_string());
        m.insert("batch_size".into(), self.batch_size.to_string());
        m.insert("eval_every".into(), self.eval_every.to_string());
        m.insert("patience".into(), self.patience.to_string());
        m.insert("max_steps".into(), self.max_steps.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("clip_norm".into(), self.clip_norm.to_string());
        m.insert("smoothing_window".into(), self.smoothing_window.to_string());
        m.insert("early_stopping".into(), self.early_stopping.to_string());
        m
    }
}

/// Parses flat `key = value` text. Blank lines and lines starting with `#`
/// are skipped; later duplicates win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, TrainError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(TrainError::ConfigSyntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(TrainError::ConfigSyntax { line: i + 1 });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

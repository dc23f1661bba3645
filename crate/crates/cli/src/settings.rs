use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::anyhow;
use pgsum::model::ModelConfig;
use pgsum::training::{parse_key_values, Hyperparams};

use crate::failure::{CmdResult, Failure, ResultExt};

/// Flat string settings. Later layers override earlier ones:
/// built-in defaults, config file, `--set` pairs, then explicit flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config: Option<&Path>, sets: &[String]) -> CmdResult<Self> {
        let mut s = Settings::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Data(anyhow!("{}: {e}", path.display())))?;
            for (k, v) in parse_key_values(&text).usage()? {
                s.entries.insert(k, v);
            }
        }
        for pair in sets {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Failure::Usage(anyhow!("--set expects KEY=VALUE, got {pair:?}")))?;
            s.entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(s)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Self {
        Self { entries }
    }

    pub fn set(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.entries.insert(key.to_string(), v.to_string());
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> CmdResult<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Failure::Usage(anyhow!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> CmdResult<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(anyhow!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(PathBuf::from)
    }

    /// A setting naming an existing file or directory.
    pub fn existing(&self, key: &str) -> CmdResult<PathBuf> {
        let p = self
            .path(key)
            .ok_or_else(|| Failure::Usage(anyhow!("missing required setting `{key}`")))?;
        if !p.exists() {
            return Err(Failure::Data(anyhow!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn existing_opt(&self, key: &str) -> CmdResult<Option<PathBuf>> {
        match self.path(key) {
            None => Ok(None),
            Some(_) => self.existing(key).map(Some),
        }
    }

    pub fn seed(&self) -> CmdResult<u64> {
        self.parse_or("seed", 1)
    }

    pub fn hyperparams(&self) -> CmdResult<Hyperparams> {
        let mut hp = Hyperparams::default();
        hp.apply(&self.entries).usage()?;
        hp.validate().usage()?;
        Ok(hp)
    }

    pub fn model_config(&self, vocab_size: usize) -> CmdResult<ModelConfig> {
        let d = ModelConfig::new(vocab_size);
        let cfg = ModelConfig {
            hidden_size: self.parse_or("hidden_size", d.hidden_size)?,
            embedding_size: self.parse_or("embedding_size", d.embedding_size)?,
            vocab_size,
            max_decode_len: self.parse_or("max_decode_len", d.max_decode_len)?,
            max_input_len: self.parse_or("max_input_len", d.max_input_len)?,
        };
        cfg.validate().usage()?;
        Ok(cfg)
    }
}

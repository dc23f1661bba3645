//! Training regimes (in-domain, out-of-domain, mixed-domain, extractive
//! pre-training) with SGD, validation early stopping and checkpoints.

mod checkpoint;
mod hyperparams;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::corpus::{Document, ExtractPair, Vocabulary};
use crate::model::{loss_and_gradients, sequence_loss, Example, ModelConfig, ModelError, ModelParams};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use hyperparams::{parse_key_values, Hyperparams};

/// Nominal extractive pre-training length; runs scale it down.
pub const PRETRAIN_REFERENCE_STEPS: usize = 20_000;

/// `PRETRAIN_REFERENCE_STEPS * scale`, rounded.
pub fn pretrain_budget(scale: f64) -> usize {
    (PRETRAIN_REFERENCE_STEPS as f64 * scale.max(0.0)).round() as usize
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} training set is empty")]
    EmptyTrainingSet(&'static str),
    #[error("{0} validation set is empty")]
    EmptyValidationSet(&'static str),
    #[error("regime {kind:?} {problem}")]
    BadRegime { kind: RegimeKind, problem: &'static str },
    #[error("loss diverged at step {step} of phase {phase}; last good state kept at step {}", .last_good.step)]
    Diverged {
        step: usize,
        phase: String,
        last_good: Box<TrainState>,
        history: Vec<HistoryRow>,
    },
    #[error("bad value {value:?} for {key}")]
    BadHyperparam { key: String, value: String },
    #[error("unknown configuration key {0}")]
    UnknownKey(String),
    #[error("config line {line} is not `key = value`")]
    ConfigSyntax { line: usize },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Training and validation examples for one domain.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
}

impl Dataset {
    pub fn from_documents(
        train: &[Document],
        valid: &[Document],
        vocab: &Vocabulary,
        config: &ModelConfig,
    ) -> Result<Self, TrainError> {
        let build = |docs: &[Document]| {
            docs.iter()
                .map(|d| Example::new(&d.text_tokens, &d.abstract_tokens, vocab, config))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Self {
            train: build(train)?,
            valid: build(valid)?,
        })
    }

    /// Lead paragraph as input, description as target.
    pub fn from_extract_pairs(
        train: &[ExtractPair],
        valid: &[ExtractPair],
        vocab: &Vocabulary,
        config: &ModelConfig,
    ) -> Result<Self, TrainError> {
        let build = |pairs: &[ExtractPair]| {
            pairs
                .iter()
                .map(|p| Example::new(&p.lead_tokens, &p.description_tokens, vocab, config))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Self {
            train: build(train)?,
            valid: build(valid)?,
        })
    }

    fn check(&self, role: &'static str) -> Result<(), TrainError> {
        if self.train.is_empty() {
            return Err(TrainError::EmptyTrainingSet(role));
        }
        if self.valid.is_empty() {
            return Err(TrainError::EmptyValidationSet(role));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    PretrainExtracts,
    InDomain,
    OutOfDomain,
    MixDomain,
}

impl RegimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::PretrainExtracts => "pretrain-extracts",
            RegimeKind::InDomain => "in-domain",
            RegimeKind::OutOfDomain => "out-of-domain",
            RegimeKind::MixDomain => "mix-domain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RegimeKind::PretrainExtracts,
            RegimeKind::InDomain,
            RegimeKind::OutOfDomain,
            RegimeKind::MixDomain,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

/// What to train on. In-domain uses the target set; out-of-domain and
/// extract pre-training use the source set; mixed-domain trains on the source
/// set to its own stopping point, then continues on the target set.
#[derive(Debug, Clone)]
pub struct Regime {
    kind: RegimeKind,
    source: Option<Dataset>,
    target: Option<Dataset>,
    init: Option<ModelParams>,
}

impl Regime {
    pub fn new(
        kind: RegimeKind,
        source: Option<Dataset>,
        target: Option<Dataset>,
        init: Option<ModelParams>,
    ) -> Result<Self, TrainError> {
        let problem = match kind {
            RegimeKind::InDomain if target.is_none() => Some("requires a target set"),
            RegimeKind::InDomain if source.is_some() => Some("takes no source set"),
            RegimeKind::OutOfDomain | RegimeKind::PretrainExtracts if source.is_none() => {
                Some("requires a source set")
            }
            RegimeKind::OutOfDomain | RegimeKind::PretrainExtracts if target.is_some() => {
                Some("takes no target set")
            }
            RegimeKind::MixDomain if source.is_none() || target.is_none() => Some("requires source and target sets"),
            _ => None,
        };
        if let Some(problem) = problem {
            return Err(TrainError::BadRegime { kind, problem });
        }
        Ok(Self {
            kind,
            source,
            target,
            init,
        })
    }

    pub fn in_domain(target: Dataset) -> Self {
        Self::new(RegimeKind::InDomain, None, Some(target), None).expect("valid regime")
    }

    pub fn out_of_domain(source: Dataset) -> Self {
        Self::new(RegimeKind::OutOfDomain, Some(source), None, None).expect("valid regime")
    }

    pub fn mix_domain(source: Dataset, target: Dataset) -> Self {
        Self::new(RegimeKind::MixDomain, Some(source), Some(target), None).expect("valid regime")
    }

    pub fn with_init(mut self, params: ModelParams) -> Self {
        self.init = Some(params);
        self
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    /// `(phase name, dataset)` in training order.
    fn phases(&self) -> Vec<(&'static str, &Dataset)> {
        let src = self.source.as_ref();
        let tgt = self.target.as_ref();
        match self.kind {
            RegimeKind::InDomain => vec![("target", tgt.unwrap())],
            RegimeKind::OutOfDomain => vec![("source", src.unwrap())],
            RegimeKind::PretrainExtracts => vec![("extracts", src.unwrap())],
            RegimeKind::MixDomain => vec![("source", src.unwrap()), ("target", tgt.unwrap())],
        }
    }
}

/// Parameters with their optimization bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    /// Updates applied so far, across phases.
    pub step: usize,
    /// Lowest raw validation loss observed in the current phase.
    pub best_valid_loss: f64,
    /// Evaluations since the smoothed validation loss last improved.
    pub steps_since_best: usize,
}

impl TrainState {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            step: 0,
            best_valid_loss: f64::INFINITY,
            steps_since_best: 0,
        }
    }
}

/// One row per update (`train_loss` of the batch used by that update) plus a
/// step-0 row per phase; `valid_loss` is filled on evaluation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub phase: String,
    pub train_loss: Option<f64>,
    pub valid_loss: Option<f64>,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = String::from("step,phase,train_loss,valid_loss\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.phase, fmt(r.train_loss), fmt(r.valid_loss));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation loss of the last phase.
    pub state: TrainState,
    /// Result of each phase, in order.
    pub phase_states: Vec<(String, TrainState)>,
    pub history: Vec<HistoryRow>,
}

/// Token-weighted mean loss over `examples`.
pub fn dataset_loss(examples: &[Example], params: &ModelParams) -> Result<f64, TrainError> {
    let parts = examples
        .par_iter()
        .map(|ex| sequence_loss(ex, params).map(|l| (l * ex.target.len() as f64, ex.target.len())))
        .collect::<Result<Vec<_>, _>>()?;
    let (sum, count) = parts.iter().fold((0.0, 0usize), |(s, c), &(l, n)| (s + l, c + n));
    Ok(sum / count.max(1) as f64)
}

/// Loss and gradient of a batch, equal to the token mean over all target
/// tokens of the batch (what padding with masking computes).
fn batch_gradient(batch: &[&Example], params: &ModelParams) -> Result<(f64, Vec<Tensor>), TrainError> {
    let parts = batch
        .par_iter()
        .map(|ex| loss_and_gradients(ex, params).map(|(l, g)| (l, g, ex.target.len())))
        .collect::<Result<Vec<_>, _>>()?;
    let total: usize = parts.iter().map(|p| p.2).sum();
    let mut loss = 0.0;
    let mut grads: Vec<Tensor> = params
        .tensors()
        .iter()
        .map(|t| Tensor::zeros(t.rows(), t.cols()))
        .collect();
    for (l, g, n) in parts {
        let w = n as f64 / total as f64;
        loss += l * w;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            for (a, &b) in acc.data_mut().iter_mut().zip(gi.data()) {
                *a += w * b;
            }
        }
    }
    Ok((loss, grads))
}

fn sgd_update(params: &mut ModelParams, grads: &[Tensor], lr: f64, clip: f64) {
    let norm = grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt();
    let factor = if norm > clip { clip / norm } else { 1.0 };
    for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
        for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * factor * gv;
        }
    }
}

fn diverged(phase: &str, step: usize, best: &TrainState, history: &[HistoryRow]) -> TrainError {
    TrainError::Diverged {
        step,
        phase: phase.to_string(),
        last_good: Box::new(best.clone()),
        history: history.to_vec(),
    }
}

/// Runs one phase from `start`. Returns the state at the best raw validation
/// loss (or the final state without early stopping).
fn run_phase(
    phase: &str,
    data: &Dataset,
    start: TrainState,
    hp: &Hyperparams,
    history: &mut Vec<HistoryRow>,
) -> Result<TrainState, TrainError> {
    let mut current = start;
    current.best_valid_loss = f64::INFINITY;
    current.steps_since_best = 0;

    let mut recent: Vec<f64> = Vec::new();
    let mut best_smoothed = f64::INFINITY;
    let mut best = current.clone();

    let mut evaluate = |state: &mut TrainState, best: &mut TrainState, train_loss: Option<f64>, history: &mut Vec<HistoryRow>| -> Result<bool, TrainError> {
        let valid = dataset_loss(&data.valid, &state.params)?;
        history.push(HistoryRow {
            step: state.step,
            phase: phase.to_string(),
            train_loss,
            valid_loss: Some(valid),
        });
        if !valid.is_finite() {
            return Ok(false);
        }
        recent.push(valid);
        let window = &recent[recent.len().saturating_sub(hp.smoothing_window)..];
        let smoothed = window.iter().sum::<f64>() / window.len() as f64;
        if smoothed < best_smoothed {
            best_smoothed = smoothed;
            state.steps_since_best = 0;
        } else {
            state.steps_since_best += 1;
        }
        if valid < state.best_valid_loss {
            state.best_valid_loss = valid;
            *best = state.clone();
        } else {
            best.steps_since_best = state.steps_since_best;
        }
        log::debug!("{phase} step {} valid {valid:.4} smoothed {smoothed:.4}", state.step);
        Ok(true)
    };

    evaluate(&mut current, &mut best, None, history)?;
    let phase_start = current.step;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    for _ in 0..hp.max_steps {
        if hp.early_stopping && current.steps_since_best > hp.patience {
            break;
        }
        let mut batch = Vec::with_capacity(hp.batch_size);
        while batch.len() < hp.batch_size.min(data.train.len()) {
            if cursor == order.len() {
                order = (0..data.train.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&data.train[order[cursor]]);
            cursor += 1;
        }
        let (loss, grads) = batch_gradient(&batch, &current.params)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(diverged(phase, current.step + 1, &best, history));
        }
        sgd_update(&mut current.params, &grads, hp.learning_rate, hp.clip_norm);
        current.step += 1;
        if !current.params.is_finite() {
            return Err(diverged(phase, current.step, &best, history));
        }
        if (current.step - phase_start) % hp.eval_every == 0 {
            if !evaluate(&mut current, &mut best, Some(loss), history)? {
                return Err(diverged(phase, current.step, &best, history));
            }
        } else {
            history.push(HistoryRow {
                step: current.step,
                phase: phase.to_string(),
                train_loss: Some(loss),
                valid_loss: None,
            });
        }
    }
    if hp.early_stopping {
        Ok(best)
    } else {
        Ok(current)
    }
}

/// Trains under `regime`. Parameters start from the regime's initial
/// checkpoint or a seeded initialization; each phase of a mixed-domain run
/// starts exactly from the previous phase's result.
pub fn train(regime: &Regime, config: &ModelConfig, hp: &Hyperparams) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    let phases = regime.phases();
    for (name, data) in &phases {
        data.check(name)?;
    }
    let params = match &regime.init {
        Some(p) => {
            if p.config() != config {
                return Err(TrainError::Model(ModelError::InvalidConfig(
                    "initial checkpoint has a different model config".into(),
                )));
            }
            p.clone()
        }
        None => ModelParams::init(config, hp.seed)?,
    };
    let mut state = TrainState::new(params);
    let mut history = Vec::new();
    let mut phase_states = Vec::new();
    for (name, data) in phases {
        state = run_phase(name, data, state, hp, &mut history)?;
        log::info!(
            "phase {name} done at step {} (best valid {:.4})",
            state.step,
            state.best_valid_loss
        );
        phase_states.push((name.to_string(), state.clone()));
    }
    Ok(TrainOutcome {
        state,
        phase_states,
        history,
    })
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    /// Parameters after the fixed pre-training budget.
    pub pretrained: TrainState,
    pub finetuned: TrainState,
    pub history: Vec<HistoryRow>,
}

/// Fixed-budget training on extract pairs, then early-stopped fine-tuning on
/// the annotated set starting from the pre-trained parameters.
pub fn pretrain_then_finetune(
    extracts: &Dataset,
    annotated: &Dataset,
    config: &ModelConfig,
    hp: &Hyperparams,
    pretrain_steps: usize,
) -> Result<PretrainOutcome, TrainError> {
    hp.validate()?;
    annotated.check("annotated")?;
    let mut state = TrainState::new(ModelParams::init(config, hp.seed)?);
    let mut history = Vec::new();
    if pretrain_steps > 0 {
        extracts.check("extract")?;
        let phase_hp = Hyperparams {
            max_steps: pretrain_steps,
            early_stopping: false,
            ..hp.clone()
        };
        state = run_phase("extracts", extracts, state, &phase_hp, &mut history)?;
    }
    let pretrained = state.clone();
    let finetuned = run_phase("target", annotated, state, hp, &mut history)?;
    Ok(PretrainOutcome {
        pretrained,
        finetuned,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;

    fn tiny_setup() -> (Vocabulary, ModelConfig, Dataset) {
        let doc = Document::new("a", Domain::News, "", "x y z w . q r", "x y z");
        let vocab = Vocabulary::build(std::slice::from_ref(&doc), 50).unwrap();
        let config = ModelConfig::tiny(vocab.len());
        let data = Dataset::from_documents(&[doc.clone()], &[doc], &vocab, &config).unwrap();
        (vocab, config, data)
    }

    #[test]
    fn regime_invariants() {
        let (_, _, data) = tiny_setup();
        assert!(Regime::new(RegimeKind::MixDomain, Some(data.clone()), None, None).is_err());
        assert!(Regime::new(RegimeKind::InDomain, None, None, None).is_err());
        assert!(Regime::new(RegimeKind::OutOfDomain, Some(data.clone()), None, None).is_ok());
        assert_eq!(RegimeKind::parse("mix-domain"), Some(RegimeKind::MixDomain));
    }

    #[test]
    fn empty_training_set_rejected() {
        let (_, config, data) = tiny_setup();
        let empty = Dataset {
            train: vec![],
            valid: data.valid,
        };
        let err = train(&Regime::in_domain(empty), &config, &Hyperparams::default()).unwrap_err();
        assert!(matches!(err, TrainError::EmptyTrainingSet(_)));
    }

    #[test]
    fn history_is_deterministic_and_step_monotone() {
        let (_, config, data) = tiny_setup();
        let hp = Hyperparams {
            max_steps: 12,
            eval_every: 4,
            ..Hyperparams::default()
        };
        let a = train(&Regime::in_domain(data.clone()), &config, &hp).unwrap();
        let b = train(&Regime::in_domain(data), &config, &hp).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a.history.windows(2).all(|w| w[1].step > w[0].step));
        let csv = history_csv(&a.history);
        assert!(csv.starts_with("step,phase,train_loss,valid_loss\n0,target,,"));
    }

    #[test]
    fn budget_scaling() {
        assert_eq!(pretrain_budget(0.01), 200);
        assert_eq!(pretrain_budget(0.0), 0);
    }
}

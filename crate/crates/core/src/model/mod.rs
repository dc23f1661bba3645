//! Pointer-generator encoder-decoder: bidirectional LSTM encoder, LSTM decoder
//! with additive attention, and a learned gate mixing vocabulary generation
//! with copying from the input.

mod network;
mod params;
mod search;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::corpus::{Vocabulary, STOP_ID, UNK_ID};

pub use network::{mix_distributions, EncoderStates, GateHook, Session, StepVars};
pub use params::{ModelParams, ParamKey, ParamVars, INIT_RANGE};
pub use search::{beam_search, greedy_search, Hypothesis, StepModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input is empty")]
    EmptyInput,
    #[error("input has {len} tokens, more than the configured maximum {max}")]
    InputTooLong { len: usize, max: usize },
    #[error("reference abstract is empty")]
    EmptyReference,
    #[error("input tokens ({tokens}) do not align with encoder states ({states})")]
    Misaligned { tokens: usize, states: usize },
    #[error("token id {id} is outside the vocabulary of {vocab} entries")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} parameter tensors, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("parameter {0} contains non-finite values")]
    NonFinite(&'static str),
    #[error("beam width must be at least 1")]
    ZeroBeamWidth,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Network dimensions. Every field must be at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub vocab_size: usize,
    /// Longest output, counting the end-of-sequence token.
    pub max_decode_len: usize,
    /// Inputs are truncated to this many tokens.
    pub max_input_len: usize,
}

impl ModelConfig {
    /// Desk-scale defaults for a given vocabulary size.
    pub fn new(vocab_size: usize) -> Self {
        Self {
            hidden_size: 32,
            embedding_size: 32,
            vocab_size,
            max_decode_len: 24,
            max_input_len: 64,
        }
    }

    /// Gradient-check scale: hidden 4, embedding 4.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            hidden_size: 4,
            embedding_size: 4,
            vocab_size,
            max_decode_len: 8,
            max_input_len: 16,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("hidden_size", self.hidden_size),
            ("embedding_size", self.embedding_size),
            ("vocab_size", self.vocab_size),
            ("max_decode_len", self.max_decode_len),
            ("max_input_len", self.max_input_len),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size <= STOP_ID {
            return Err(ModelError::InvalidConfig(format!(
                "vocab_size {} cannot hold the reserved tokens",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Input tokens with their vocabulary ids and extended-vocabulary ids.
///
/// Out-of-vocabulary words embed as UNK but stay copyable: each distinct one
/// gets an extended id `vocab_size + k` in order of first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceText {
    tokens: Vec<String>,
    ids: Vec<usize>,
    ext_ids: Vec<usize>,
    oovs: Vec<String>,
    vocab_size: usize,
}

impl SourceText {
    pub fn new<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<Self, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        let mut ids = Vec::with_capacity(tokens.len());
        let mut ext_ids = Vec::with_capacity(tokens.len());
        let mut oovs: Vec<String> = Vec::new();
        for tok in tokens {
            let tok = tok.as_ref();
            match vocab.id(tok) {
                Some(id) => {
                    ids.push(id);
                    ext_ids.push(id);
                }
                None => {
                    ids.push(UNK_ID);
                    let k = match oovs.iter().position(|w| w == tok) {
                        Some(k) => k,
                        None => {
                            oovs.push(tok.to_string());
                            oovs.len() - 1
                        }
                    };
                    ext_ids.push(vocab.len() + k);
                }
            }
        }
        Ok(Self {
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            ids,
            ext_ids,
            oovs,
            vocab_size: vocab.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Embedding ids (OOV words map to UNK).
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn ext_ids(&self) -> &[usize] {
        &self.ext_ids
    }

    pub fn oovs(&self) -> &[String] {
        &self.oovs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Size of the output support: vocabulary plus this input's OOV words.
    pub fn ext_size(&self) -> usize {
        self.vocab_size + self.oovs.len()
    }

    /// Extended id for `word`: its vocabulary id, else its OOV slot, else UNK.
    pub fn ext_id(&self, word: &str, vocab: &Vocabulary) -> usize {
        vocab.id(word).unwrap_or_else(|| {
            self.oovs
                .iter()
                .position(|w| w == word)
                .map_or(UNK_ID, |k| self.vocab_size + k)
        })
    }

    pub fn word<'a>(&'a self, ext_id: usize, vocab: &'a Vocabulary) -> &'a str {
        if ext_id < self.vocab_size {
            vocab.word(ext_id).unwrap_or(crate::corpus::UNK)
        } else {
            &self.oovs[ext_id - self.vocab_size]
        }
    }
}

/// A training pair in id space: the (truncated) input and the target ids,
/// which end with the end-of-sequence token.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub source: SourceText,
    pub target: Vec<usize>,
}

impl Example {
    /// Truncates the input to `max_input_len` and the reference to
    /// `max_decode_len - 1` tokens. Reference words outside both the
    /// vocabulary and the input become UNK.
    pub fn new<S: AsRef<str>>(
        input: &[S],
        reference: &[S],
        vocab: &Vocabulary,
        config: &ModelConfig,
    ) -> Result<Self, ModelError> {
        if reference.is_empty() {
            return Err(ModelError::EmptyReference);
        }
        let input = &input[..input.len().min(config.max_input_len)];
        let source = SourceText::new(input, vocab)?;
        let keep = reference.len().min(config.max_decode_len.saturating_sub(1));
        let mut target: Vec<usize> = reference[..keep]
            .iter()
            .map(|w| source.ext_id(w.as_ref(), vocab))
            .collect();
        target.push(STOP_ID);
        Ok(Self { source, target })
    }
}

/// One decoder step, as plain values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStepOutput {
    /// Generation distribution over the fixed vocabulary.
    pub p_vocab: Vec<f64>,
    /// Distribution over input positions.
    pub attention: Vec<f64>,
    /// Probability of generating rather than copying.
    pub p_gen: f64,
    /// Mixture over the extended vocabulary.
    pub p_final: Vec<f64>,
}

/// Teacher-forced token-mean negative log-likelihood of `example`.
pub fn sequence_loss(example: &Example, params: &ModelParams) -> Result<f64, ModelError> {
    let mut session = Session::new(params, false);
    let loss = session.sequence_loss(example)?;
    Ok(session.tape().value(loss).item())
}

/// Loss and its gradient for every parameter, in [`ParamKey::ALL`] order.
pub fn loss_and_gradients(
    example: &Example,
    params: &ModelParams,
) -> Result<(f64, Vec<crate::autodiff::Tensor>), ModelError> {
    let mut session = Session::new(params, true);
    let loss = session.sequence_loss(example)?;
    let grads = session.tape().gradient(loss)?;
    let value = session.tape().value(loss).item();
    let per_param = session
        .param_vars()
        .vars()
        .iter()
        .map(|&v| grads.get(v).expect("registered parameter").clone())
        .collect();
    Ok((value, per_param))
}

/// Output of a decoding run. `tokens` excludes the end-of-sequence marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub ext_ids: Vec<usize>,
    pub tokens: Vec<String>,
    /// Sum of log `p_final` over emitted ids (including end-of-sequence).
    pub score: f64,
    pub trace: Vec<DecoderStepOutput>,
}

fn finish_decoded(hyp: Hypothesis<DecoderStepOutput>, source: &SourceText, vocab: &Vocabulary) -> Decoded {
    let tokens = hyp
        .tokens
        .iter()
        .filter(|&&id| id != STOP_ID)
        .map(|&id| source.word(id, vocab).to_string())
        .collect();
    Decoded {
        ext_ids: hyp.tokens,
        tokens,
        score: hyp.score,
        trace: hyp.trace,
    }
}

/// Argmax decoding (lowest id wins ties) until end-of-sequence or
/// `max_decode_len` emitted ids.
pub fn greedy_decode<S: AsRef<str>>(
    input: &[S],
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<Decoded, ModelError> {
    let config = params.config().clone();
    let input = &input[..input.len().min(config.max_input_len)];
    let source = SourceText::new(input, vocab)?;
    let mut model = network::PointerGenerator::new(params, &source)?;
    let hyp = greedy_search(&mut model, STOP_ID, config.max_decode_len)?;
    Ok(finish_decoded(hyp, &source, vocab))
}

/// Beam search over accumulated log-probabilities. Width 1 is greedy decoding.
pub fn beam_decode<S: AsRef<str>>(
    input: &[S],
    params: &ModelParams,
    vocab: &Vocabulary,
    beam_width: usize,
) -> Result<Decoded, ModelError> {
    if beam_width == 0 {
        return Err(ModelError::ZeroBeamWidth);
    }
    let config = params.config().clone();
    let input = &input[..input.len().min(config.max_input_len)];
    let source = SourceText::new(input, vocab)?;
    let mut model = network::PointerGenerator::new(params, &source)?;
    let hyp = beam_search(&mut model, STOP_ID, config.max_decode_len, beam_width)?;
    Ok(finish_decoded(hyp, &source, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Domain};

    fn vocab() -> Vocabulary {
        let doc = Document::new("v", Domain::News, "", "a b c d", "");
        Vocabulary::build(&[doc], 100).unwrap()
    }

    #[test]
    fn oov_words_get_extended_ids_in_first_occurrence_order() {
        let v = vocab();
        let src = SourceText::new(&["a", "zeta", "b", "eta", "zeta"], &v).unwrap();
        assert_eq!(src.ids(), &[4, UNK_ID, 5, UNK_ID, UNK_ID]);
        assert_eq!(src.ext_ids(), &[4, 8, 5, 9, 8]);
        assert_eq!(src.ext_size(), 10);
        assert_eq!(src.word(9, &v), "eta");
        assert_eq!(src.ext_id("eta", &v), 9);
        assert_eq!(src.ext_id("omega", &v), UNK_ID);
    }

    #[test]
    fn example_targets_end_with_stop() {
        let v = vocab();
        let cfg = ModelConfig::tiny(v.len());
        let ex = Example::new(&["a", "zeta"], &["zeta", "b", "omega"], &v, &cfg).unwrap();
        assert_eq!(ex.target, vec![8, 5, UNK_ID, STOP_ID]);
        assert!(matches!(
            Example::new(&["a"], &[] as &[&str], &v, &cfg),
            Err(ModelError::EmptyReference)
        ));
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(10).validate().is_ok());
        let mut c = ModelConfig::new(10);
        c.hidden_size = 0;
        assert!(c.validate().is_err());
        assert!(ModelConfig::new(3).validate().is_err());
    }
}

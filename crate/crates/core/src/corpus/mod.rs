//! Documents, ingestion, filtering, vocabulary, splits and extract pairs.

mod annotate;
mod extract;
mod io;
mod synthetic;
mod tokenize;
mod vocab;

use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{parse_lexicon, FallbackAnnotator};
pub use extract::{build_extract_pairs, read_extract_records, ExtractPair, ExtractRecord};
pub use io::{ingest, ingest_str, to_jsonl, write_jsonl, Ingested, MalformedLine};
pub use synthetic::{generate_synthetic_corpus, generate_synthetic_extracts, REVIEW_VERB};
pub use tokenize::{first_sentence, is_terminator, tokenize, tokenize_preserving_case, TERMINATORS};
pub use vocab::{Vocabulary, PAD, PAD_ID, START, START_ID, STOP, STOP_ID, UNK, UNK_ID};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary size {0} leaves no room beyond the 4 reserved tokens")]
    VocabTooSmall(usize),
    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),
    #[error("invalid split fractions {train}/{valid}/{test}: {reason}")]
    BadSplit {
        train: f64,
        valid: f64,
        test: f64,
        reason: &'static str,
    },
    #[error("invalid lexicon line {line}: {content:?}")]
    BadLexicon { line: usize, content: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    News,
    Opinion,
    Other,
}

impl Domain {
    /// Maps a taxonomy tag: "News" is news; "Opinion", "Editorial" and
    /// "Features" are opinion; anything else is other.
    pub fn from_taxonomy_tag(tag: &str) -> Self {
        match tag.trim().to_ascii_lowercase().as_str() {
            "news" => Domain::News,
            "opinion" | "editorial" | "features" => Domain::Opinion,
            _ => Domain::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::News => "news",
            Domain::Opinion => "opinion",
            Domain::Other => "other",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "news" => Ok(Domain::News),
            "opinion" => Ok(Domain::Opinion),
            "other" => Ok(Domain::Other),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeTag {
    Person,
    Organization,
    Location,
    Other,
    None,
}

impl NeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            NeTag::Person => "PERSON",
            NeTag::Organization => "ORGANIZATION",
            NeTag::Location => "LOCATION",
            NeTag::Other => "OTHER",
            NeTag::None => "NONE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "PERSON" | "PER" => NeTag::Person,
            "ORGANIZATION" | "ORG" => NeTag::Organization,
            "LOCATION" | "LOC" => NeTag::Location,
            "OTHER" | "MISC" => NeTag::Other,
            "NONE" | "O" | "" => NeTag::None,
            _ => return None,
        })
    }

    pub fn is_entity(self) -> bool {
        self != NeTag::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subjectivity {
    StrongPositive,
    StrongNegative,
    None,
}

impl Subjectivity {
    pub fn as_str(self) -> &'static str {
        match self {
            Subjectivity::StrongPositive => "positive",
            Subjectivity::StrongNegative => "negative",
            Subjectivity::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "positive" | "strongpositive" => Subjectivity::StrongPositive,
            "negative" | "strongnegative" => Subjectivity::StrongNegative,
            "none" | "" => Subjectivity::None,
            _ => return None,
        })
    }
}

/// Per-token tags: part of speech (free-form tag string), named entity, and
/// strong subjectivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAnnotation {
    pub pos: String,
    pub ne: NeTag,
    pub subjectivity: Subjectivity,
}

impl TokenAnnotation {
    pub fn new(pos: impl Into<String>, ne: NeTag, subjectivity: Subjectivity) -> Self {
        Self {
            pos: pos.into(),
            ne,
            subjectivity,
        }
    }
}

/// Annotations aligned 1:1 with a document's text and abstract tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotations {
    pub text: Vec<TokenAnnotation>,
    pub abstract_: Vec<TokenAnnotation>,
}

/// One article with its reference abstract. Tokens are lowercase.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub domain: Domain,
    pub section: String,
    pub text_tokens: Vec<String>,
    pub abstract_tokens: Vec<String>,
    pub annotations: Option<Annotations>,
}

impl Document {
    /// Tokenizes and lowercases raw text and abstract.
    pub fn new(id: &str, domain: Domain, section: &str, text: &str, abstract_: &str) -> Self {
        Self {
            id: id.to_string(),
            domain,
            section: section.to_string(),
            text_tokens: tokenize(text),
            abstract_tokens: tokenize(abstract_),
            annotations: None,
        }
    }
}

/// Articles must have more than this many tokens.
pub const MIN_TEXT_TOKENS: usize = 15;
/// Abstracts must have more than this many tokens.
pub const MIN_ABSTRACT_TOKENS: usize = 10;

/// Keeps documents with more than 15 text tokens and more than 10 abstract
/// tokens (punctuation counts).
pub fn filter_pairs(docs: Vec<Document>) -> Vec<Document> {
    docs.into_iter()
        .filter(|d| d.text_tokens.len() > MIN_TEXT_TOKENS && d.abstract_tokens.len() > MIN_ABSTRACT_TOKENS)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.75,
            valid: 0.15,
            test: 0.10,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self, CorpusError> {
        let bad = |reason| CorpusError::BadSplit {
            train,
            valid,
            test,
            reason,
        };
        if [train, valid, test].iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(bad("each fraction must lie in [0, 1]"));
        }
        if (train + valid + test - 1.0).abs() > 1e-9 {
            return Err(bad("fractions must sum to 1"));
        }
        Ok(Self { train, valid, test })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Document>,
    pub valid: Vec<Document>,
    pub test: Vec<Document>,
}

/// Seeded random partition. Validation and test sizes are `floor(frac * n)`;
/// the remainder goes to training.
pub fn split(docs: Vec<Document>, spec: SplitSpec, seed: u64) -> Splits {
    let n = docs.len();
    let n_valid = ((spec.valid * n as f64) + 1e-9).floor() as usize;
    let n_test = ((spec.test * n as f64) + 1e-9).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut slots: Vec<Option<Document>> = docs.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<Document> {
        idx.iter().map(|&i| slots[i].take().expect("index used once")).collect()
    };
    let valid = take(&order[..n_valid]);
    let test = take(&order[n_valid..n_valid + n_test]);
    let train = take(&order[n_valid + n_test..]);
    Splits { train, valid, test }
}

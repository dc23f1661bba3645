//! ROUGE-2, ROUGE-L and bigram BLEU over token sequences, corpus averaging,
//! and the lead baselines.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{first_sentence, Domain};

/// Leading-token baseline length for news documents.
pub const FIRST_K_NEWS: usize = 22;
/// Leading-token baseline length for opinion documents.
pub const FIRST_K_OPINION: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{outputs} system outputs but {references} references")]
    CountMismatch { outputs: usize, references: usize },
    #[error("no default prefix length for domain {0}; supply k explicitly")]
    NoDefaultK(Domain),
}

/// Which side of the overlap ROUGE reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeMode {
    #[default]
    Recall,
    Precision,
    F1,
}

impl RougeMode {
    fn pick(self, overlap: f64, cand_total: usize, ref_total: usize) -> f64 {
        let p = if cand_total == 0 { 0.0 } else { overlap / cand_total as f64 };
        let r = if ref_total == 0 { 0.0 } else { overlap / ref_total as f64 };
        match self {
            RougeMode::Recall => r,
            RougeMode::Precision => p,
            RougeMode::F1 => {
                if p + r == 0.0 {
                    0.0
                } else {
                    2.0 * p * r / (p + r)
                }
            }
        }
    }
}

fn counts<T: Eq + Hash>(items: impl Iterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn bigrams<S: AsRef<str>>(tokens: &[S]) -> impl Iterator<Item = (&str, &str)> {
    tokens.windows(2).map(|w| (w[0].as_ref(), w[1].as_ref()))
}

/// Size of the multiset intersection.
fn clipped<T: Eq + Hash>(cand: &HashMap<T, usize>, reference: &HashMap<T, usize>) -> usize {
    cand.iter()
        .map(|(k, &c)| c.min(reference.get(k).copied().unwrap_or(0)))
        .sum()
}

pub fn rouge_2_with<S: AsRef<str>>(candidate: &[S], reference: &[S], mode: RougeMode) -> f64 {
    if reference.len() < 2 {
        return 0.0;
    }
    let overlap = clipped(&counts(bigrams(candidate)), &counts(bigrams(reference)));
    mode.pick(
        overlap as f64,
        candidate.len().saturating_sub(1),
        reference.len() - 1,
    )
}

/// Clipped bigram recall; 0 when the reference has fewer than two tokens.
pub fn rouge_2<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    rouge_2_with(candidate, reference, RougeMode::Recall)
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_with<S: AsRef<str>>(candidate: &[S], reference: &[S], mode: RougeMode) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    mode.pick(lcs_len(candidate, reference) as f64, candidate.len(), reference.len())
}

/// `LCS(candidate, reference) / len(reference)`.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    rouge_l_with(candidate, reference, RougeMode::Recall)
}

/// BLEU over unigrams and bigrams with brevity penalty.
///
/// Zero without unigram overlap. When the candidate has matching unigrams but
/// no matching bigram, the bigram numerator becomes `1 / (2 len(candidate))`.
/// A single-token candidate has no bigrams and is scored on unigrams alone.
pub fn bleu_2<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let c = candidate.len() as f64;
    let m1 = clipped(
        &counts(candidate.iter().map(AsRef::as_ref)),
        &counts(reference.iter().map(AsRef::as_ref)),
    );
    if m1 == 0 {
        return 0.0;
    }
    let p1 = m1 as f64 / c;
    let log_mean = if candidate.len() < 2 {
        p1.ln()
    } else {
        let m2 = clipped(&counts(bigrams(candidate)), &counts(bigrams(reference)));
        let num = if m2 == 0 { 1.0 / (2.0 * c) } else { m2 as f64 };
        let p2 = num / (c - 1.0);
        0.5 * (p1.ln() + p2.ln())
    };
    let bp = (1.0 - reference.len() as f64 / c).exp().min(1.0);
    bp * log_mean.exp()
}

/// Per-pair scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bleu: f64,
    pub len: usize,
}

/// Macro-averaged corpus scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bleu: f64,
    /// Mean candidate length in tokens.
    pub avg_len: f64,
}

pub fn score_pair<S: AsRef<str>>(candidate: &[S], reference: &[S], mode: RougeMode) -> PairScore {
    PairScore {
        rouge2: rouge_2_with(candidate, reference, mode),
        rouge_l: rouge_l_with(candidate, reference, mode),
        bleu: bleu_2(candidate, reference),
        len: candidate.len(),
    }
}

pub fn score_pairs<S: AsRef<str>>(
    outputs: &[Vec<S>],
    references: &[Vec<S>],
    mode: RougeMode,
) -> Result<Vec<PairScore>, MetricsError> {
    if outputs.len() != references.len() {
        return Err(MetricsError::CountMismatch {
            outputs: outputs.len(),
            references: references.len(),
        });
    }
    Ok(outputs
        .iter()
        .zip(references)
        .map(|(o, r)| score_pair(o, r, mode))
        .collect())
}

pub fn aggregate(pairs: &[PairScore]) -> Score {
    let n = pairs.len().max(1) as f64;
    Score {
        rouge2: pairs.iter().map(|p| p.rouge2).sum::<f64>() / n,
        rouge_l: pairs.iter().map(|p| p.rouge_l).sum::<f64>() / n,
        bleu: pairs.iter().map(|p| p.bleu).sum::<f64>() / n,
        avg_len: pairs.iter().map(|p| p.len as f64).sum::<f64>() / n,
    }
}

/// Uniform mean of per-pair recall scores.
pub fn evaluate_corpus<S: AsRef<str>>(outputs: &[Vec<S>], references: &[Vec<S>]) -> Result<Score, MetricsError> {
    evaluate_corpus_with(outputs, references, RougeMode::Recall)
}

pub fn evaluate_corpus_with<S: AsRef<str>>(
    outputs: &[Vec<S>],
    references: &[Vec<S>],
    mode: RougeMode,
) -> Result<Score, MetricsError> {
    Ok(aggregate(&score_pairs(outputs, references, mode)?))
}

pub fn pair_scores_csv(pairs: &[PairScore]) -> String {
    let mut out = String::from("index,rouge2,rougeL,bleu,len\n");
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{}", p.rouge2, p.rouge_l, p.bleu, p.len);
    }
    out
}

/// Tokens through the first sentence terminator, or the whole text.
pub fn baseline_first_sentence<S: AsRef<str> + Clone>(tokens: &[S]) -> Vec<S> {
    first_sentence(tokens).to_vec()
}

/// The first `k` tokens, with `k` defaulting by domain (news 22, opinion 15).
pub fn baseline_first_k<S: AsRef<str> + Clone>(
    tokens: &[S],
    domain: Domain,
    k: Option<usize>,
) -> Result<Vec<S>, MetricsError> {
    let k = match (k, domain) {
        (Some(k), _) => k,
        (None, Domain::News) => FIRST_K_NEWS,
        (None, Domain::Opinion) => FIRST_K_OPINION,
        (None, Domain::Other) => return Err(MetricsError::NoDefaultK(domain)),
    };
    Ok(tokens[..k.min(tokens.len())].to_vec())
}

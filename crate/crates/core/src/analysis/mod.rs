//! Corpus characterization and transfer analysis: abstract reuse rates,
//! category distributions, the gold-token breakdown, and argmax-attention
//! categorization.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Document, FallbackAnnotator, NeTag, Subjectivity, TokenAnnotation, STOP_ID};
use crate::model::Decoded;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("document {0} has no annotations and no fallback annotator was given")]
    MissingAnnotations(String),
    #[error("{what}: {left} vs {right} entries")]
    Misaligned {
        what: &'static str,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PosClass {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

impl PosClass {
    /// Maps universal (NOUN, PROPN, ...) and Penn (NN, VBD, JJ, RB, ...) tags.
    pub fn from_tag(tag: &str) -> Self {
        let t = tag.to_ascii_uppercase();
        if t == "NOUN" || t == "PROPN" || t.starts_with("NN") {
            PosClass::Noun
        } else if t == "VERB" || t.starts_with("VB") {
            PosClass::Verb
        } else if t == "ADJ" || t.starts_with("JJ") {
            PosClass::Adjective
        } else if t == "ADV" || t.starts_with("RB") {
            PosClass::Adverb
        } else {
            PosClass::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosClass::Noun => "Noun",
            PosClass::Verb => "Verb",
            PosClass::Adjective => "Adjective",
            PosClass::Adverb => "Adverb",
            PosClass::Other => "Other",
        }
    }
}

/// The three independent category axes of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenCategory {
    pub pos_class: PosClass,
    pub ne_class: NeTag,
    pub subjectivity: Subjectivity,
}

impl From<&TokenAnnotation> for TokenCategory {
    fn from(a: &TokenAnnotation) -> Self {
        Self {
            pos_class: PosClass::from_tag(&a.pos),
            ne_class: a.ne,
            subjectivity: a.subjectivity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Pos,
    Ne,
    Subjectivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Abstract,
    Text,
}

fn side_annotations(
    doc: &Document,
    side: Side,
    fallback: Option<&FallbackAnnotator>,
) -> Result<Vec<TokenAnnotation>, AnalysisError> {
    match (&doc.annotations, fallback) {
        (Some(a), _) => Ok(match side {
            Side::Abstract => a.abstract_.clone(),
            Side::Text => a.text.clone(),
        }),
        (None, Some(f)) => Ok(match side {
            Side::Abstract => f.annotate(&doc.abstract_tokens),
            Side::Text => f.annotate(&doc.text_tokens),
        }),
        (None, None) => Err(AnalysisError::MissingAnnotations(doc.id.clone())),
    }
}

/// Fraction of abstract tokens whose surface form occurs in the same
/// document's text. With `pos_filter`, only abstract tokens of that class
/// count (annotations are then required). 0 when nothing is counted.
pub fn reuse_rate(
    docs: &[Document],
    pos_filter: Option<PosClass>,
    fallback: Option<&FallbackAnnotator>,
) -> Result<f64, AnalysisError> {
    let mut reused = 0usize;
    let mut total = 0usize;
    for doc in docs {
        let text: HashSet<&str> = doc.text_tokens.iter().map(String::as_str).collect();
        let classes = match pos_filter {
            Some(_) => Some(side_annotations(doc, Side::Abstract, fallback)?),
            None => None,
        };
        for (i, tok) in doc.abstract_tokens.iter().enumerate() {
            if let (Some(want), Some(anns)) = (pos_filter, &classes) {
                if anns.get(i).map(|a| PosClass::from_tag(&a.pos)) != Some(want) {
                    continue;
                }
            }
            total += 1;
            if text.contains(tok.as_str()) {
                reused += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { reused as f64 / total as f64 })
}

fn field_label(a: &TokenAnnotation, field: Field) -> &'static str {
    match field {
        Field::Pos => PosClass::from_tag(&a.pos).as_str(),
        Field::Ne => a.ne.as_str(),
        Field::Subjectivity => a.subjectivity.as_str(),
    }
}

/// Percentage of tokens per observed category label.
pub fn distribution_by_category(
    docs: &[Document],
    field: Field,
    side: Side,
    fallback: Option<&FallbackAnnotator>,
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for doc in docs {
        for a in side_annotations(doc, side, fallback)? {
            *counts.entry(field_label(&a, field).to_string()).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, 100.0 * c as f64 / total as f64))
        .collect())
}

/// Every token type occurring in some abstract of `docs`.
pub fn abstract_vocabulary(docs: &[Document]) -> BTreeSet<String> {
    docs.iter()
        .flat_map(|d| d.abstract_tokens.iter().cloned())
        .collect()
}

/// Gold-token percentages. The six cells partition all gold tokens; `unseen`
/// is the sum of the two unseen cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct BreakdownReport {
    pub seen_in_input_generated: f64,
    pub seen_in_input_missed: f64,
    pub seen_not_in_input_generated: f64,
    pub seen_not_in_input_missed: f64,
    pub unseen_in_input: f64,
    pub unseen_not_in_input: f64,
    pub unseen: f64,
    pub gold_tokens: usize,
}

impl BreakdownReport {
    /// Sum of the partition cells (100 unless there are no gold tokens).
    pub fn total(&self) -> f64 {
        self.seen_in_input_generated
            + self.seen_in_input_missed
            + self.seen_not_in_input_generated
            + self.seen_not_in_input_missed
            + self.unseen_in_input
            + self.unseen_not_in_input
    }

    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("seen_in_input_generated", self.seen_in_input_generated),
            ("seen_in_input_missed", self.seen_in_input_missed),
            ("seen_not_in_input_generated", self.seen_not_in_input_generated),
            ("seen_not_in_input_missed", self.seen_not_in_input_missed),
            ("unseen_in_input", self.unseen_in_input),
            ("unseen_not_in_input", self.unseen_not_in_input),
            ("unseen", self.unseen),
        ]
    }
}

/// Classifies each gold token as seen/unseen in training abstracts and
/// in/not in the document input. A seen token is generated when the system
/// output still has an unclaimed occurrence of it; each output occurrence
/// certifies at most one gold occurrence, claimed in gold order.
pub fn gold_token_breakdown<S: AsRef<str>>(
    gold: &[Vec<S>],
    outputs: &[Vec<S>],
    inputs: &[Vec<S>],
    training_abstract_vocab: &BTreeSet<String>,
) -> Result<BreakdownReport, AnalysisError> {
    if gold.len() != outputs.len() {
        return Err(AnalysisError::Misaligned {
            what: "gold abstracts and system outputs",
            left: gold.len(),
            right: outputs.len(),
        });
    }
    if gold.len() != inputs.len() {
        return Err(AnalysisError::Misaligned {
            what: "gold abstracts and inputs",
            left: gold.len(),
            right: inputs.len(),
        });
    }
    let mut cells = [0usize; 6];
    let mut total = 0usize;
    for ((g, out), input) in gold.iter().zip(outputs).zip(inputs) {
        let input: HashSet<&str> = input.iter().map(AsRef::as_ref).collect();
        let mut available: HashMap<&str, usize> = HashMap::new();
        for w in out {
            *available.entry(w.as_ref()).or_insert(0) += 1;
        }
        for w in g {
            let w = w.as_ref();
            total += 1;
            let in_input = input.contains(w);
            if !training_abstract_vocab.contains(w) {
                cells[if in_input { 4 } else { 5 }] += 1;
                continue;
            }
            let generated = match available.get_mut(w) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    true
                }
                _ => false,
            };
            let idx = match (in_input, generated) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            cells[idx] += 1;
        }
    }
    let pct = |c: usize| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
    Ok(BreakdownReport {
        seen_in_input_generated: pct(cells[0]),
        seen_in_input_missed: pct(cells[1]),
        seen_not_in_input_generated: pct(cells[2]),
        seen_not_in_input_missed: pct(cells[3]),
        unseen_in_input: pct(cells[4]),
        unseen_not_in_input: pct(cells[5]),
        unseen: pct(cells[4] + cells[5]),
        gold_tokens: total,
    })
}

/// Attention rows for the emitted tokens of a decode, dropping the step that
/// produced the end-of-sequence marker.
pub fn attention_steps(decoded: &Decoded) -> Vec<Vec<f64>> {
    decoded
        .ext_ids
        .iter()
        .zip(&decoded.trace)
        .filter(|(&id, _)| id != STOP_ID)
        .map(|(_, step)| step.attention.clone())
        .collect()
}

/// Index of the largest weight; the lowest index wins ties.
pub fn argmax_position(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate().skip(1) {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// Share of output tokens (in percent) whose most-attended input token falls
/// in each category. Categories overlap, so the values need not sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct AttentionReport {
    pub person: f64,
    pub organization: f64,
    pub all_entities: f64,
    pub noun: f64,
    pub verb: f64,
    pub positive: f64,
    pub negative: f64,
    pub summary_worthy_rate: Option<f64>,
    pub steps: usize,
}

impl AttentionReport {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = vec![
            ("PERSON", self.person),
            ("ORGANIZATION", self.organization),
            ("all_NEs", self.all_entities),
            ("Noun", self.noun),
            ("Verb", self.verb),
            ("Positive", self.positive),
            ("Negative", self.negative),
        ];
        if let Some(r) = self.summary_worthy_rate {
            rows.push(("summary_worthy", 100.0 * r));
        }
        rows
    }
}

fn check_trace_alignment(traces: &[Vec<Vec<f64>>], input_lens: &[usize]) -> Result<(), AnalysisError> {
    if traces.len() != input_lens.len() {
        return Err(AnalysisError::Misaligned {
            what: "traces and inputs",
            left: traces.len(),
            right: input_lens.len(),
        });
    }
    for (trace, &len) in traces.iter().zip(input_lens) {
        for step in trace {
            if step.len() != len {
                return Err(AnalysisError::Misaligned {
                    what: "attention step and input length",
                    left: step.len(),
                    right: len,
                });
            }
        }
    }
    Ok(())
}

/// Tallies the category of the argmax-attention input token for every step
/// of every trace. `traces[d][t]` is the attention over document `d`'s input
/// at output step `t`.
pub fn attention_categorize(
    traces: &[Vec<Vec<f64>>],
    inputs: &[Vec<TokenAnnotation>],
) -> Result<AttentionReport, AnalysisError> {
    let lens: Vec<usize> = inputs.iter().map(Vec::len).collect();
    check_trace_alignment(traces, &lens)?;
    let mut counts = [0usize; 7];
    let mut steps = 0usize;
    for (trace, anns) in traces.iter().zip(inputs) {
        for step in trace {
            if step.is_empty() {
                continue;
            }
            steps += 1;
            let cat = TokenCategory::from(&anns[argmax_position(step)]);
            let hits = [
                cat.ne_class == NeTag::Person,
                cat.ne_class == NeTag::Organization,
                cat.ne_class.is_entity(),
                cat.pos_class == PosClass::Noun,
                cat.pos_class == PosClass::Verb,
                cat.subjectivity == Subjectivity::StrongPositive,
                cat.subjectivity == Subjectivity::StrongNegative,
            ];
            for (c, h) in counts.iter_mut().zip(hits) {
                *c += h as usize;
            }
        }
    }
    let pct = |c: usize| if steps == 0 { 0.0 } else { 100.0 * c as f64 / steps as f64 };
    Ok(AttentionReport {
        person: pct(counts[0]),
        organization: pct(counts[1]),
        all_entities: pct(counts[2]),
        noun: pct(counts[3]),
        verb: pct(counts[4]),
        positive: pct(counts[5]),
        negative: pct(counts[6]),
        summary_worthy_rate: None,
        steps,
    })
}

/// Fraction of output steps whose argmax-attention input token occurs in the
/// document's gold abstract.
pub fn summary_worthy_rate<S: AsRef<str>>(
    traces: &[Vec<Vec<f64>>],
    inputs: &[Vec<S>],
    gold: &[Vec<S>],
) -> Result<f64, AnalysisError> {
    let lens: Vec<usize> = inputs.iter().map(Vec::len).collect();
    check_trace_alignment(traces, &lens)?;
    if gold.len() != inputs.len() {
        return Err(AnalysisError::Misaligned {
            what: "gold abstracts and inputs",
            left: gold.len(),
            right: inputs.len(),
        });
    }
    let mut worthy = 0usize;
    let mut steps = 0usize;
    for ((trace, input), g) in traces.iter().zip(inputs).zip(gold) {
        let g: HashSet<&str> = g.iter().map(AsRef::as_ref).collect();
        for step in trace {
            if step.is_empty() {
                continue;
            }
            steps += 1;
            if g.contains(input[argmax_position(step)].as_ref()) {
                worthy += 1;
            }
        }
    }
    Ok(if steps == 0 { 0.0 } else { worthy as f64 / steps as f64 })
}

/// `category,percentage` rows.
pub fn category_csv<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("category,percentage\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pos_tag_mapping() {
        assert_eq!(PosClass::from_tag("NNP"), PosClass::Noun);
        assert_eq!(PosClass::from_tag("VBD"), PosClass::Verb);
        assert_eq!(PosClass::from_tag("adj"), PosClass::Adjective);
        assert_eq!(PosClass::from_tag("RB"), PosClass::Adverb);
        assert_eq!(PosClass::from_tag("NUM"), PosClass::Other);
    }

    #[test]
    fn argmax_tie_goes_to_first() {
        assert_eq!(argmax_position(&[0.25; 4]), 0);
        assert_eq!(argmax_position(&[0.1, 0.5, 0.5]), 1);
    }
}

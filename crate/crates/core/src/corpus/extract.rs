use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{first_sentence, tokenize, CorpusError};

/// One line of the extract-pair file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractRecord {
    pub lead: String,
    pub description: String,
}

/// A lead paragraph with its description, tokenized and lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractPair {
    pub lead_tokens: Vec<String>,
    pub description_tokens: Vec<String>,
    /// The description is exactly the lead's first sentence.
    pub is_extractive: bool,
}

/// Reads the extract-pair JSON Lines file; malformed lines are skipped with a
/// warning.
pub fn read_extract_records(path: &Path) -> Result<Vec<ExtractRecord>, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(e) => log::warn!("skipping malformed extract line {}: {e}", i + 1),
        }
    }
    Ok(out)
}

/// Tokenizes records into pairs, marking those whose description equals the
/// lead's first sentence. Returns the pairs with the extractive fraction
/// (0 when no pair survives). Records with an empty side are dropped.
pub fn build_extract_pairs(records: &[ExtractRecord]) -> (Vec<ExtractPair>, f64) {
    let mut pairs = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let lead_tokens = tokenize(&rec.lead);
        let description_tokens = tokenize(&rec.description);
        if lead_tokens.is_empty() || description_tokens.is_empty() {
            log::warn!("dropping extract record {} with empty lead or description", i + 1);
            continue;
        }
        let is_extractive = first_sentence(&lead_tokens) == description_tokens.as_slice();
        pairs.push(ExtractPair {
            lead_tokens,
            description_tokens,
            is_extractive,
        });
    }
    let fraction = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().filter(|p| p.is_extractive).count() as f64 / pairs.len() as f64
    };
    (pairs, fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(lead: &str, description: &str) -> ExtractRecord {
        ExtractRecord {
            lead: lead.into(),
            description: description.into(),
        }
    }

    #[test]
    fn first_sentence_match_is_extractive() {
        let (pairs, _) = build_extract_pairs(&[rec("the cat sat . it left .", "the cat sat .")]);
        assert!(pairs[0].is_extractive);
        let (pairs, _) = build_extract_pairs(&[rec("the cat sat . it left .", "a cat sat .")]);
        assert!(!pairs[0].is_extractive);
    }

    #[test]
    fn match_ignores_case() {
        let (pairs, _) = build_extract_pairs(&[rec("The Cat sat. It left.", "the cat SAT.")]);
        assert!(pairs[0].is_extractive);
    }

    #[test]
    fn fraction_over_pairs() {
        let (pairs, frac) = build_extract_pairs(&[
            rec("a b . c .", "a b ."),
            rec("x y . z .", "x y ."),
            rec("p q . r .", "r ."),
        ]);
        assert_eq!(pairs.len(), 3);
        assert!((frac - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{frac:.4}"), "0.6667");
    }

    #[test]
    fn empty_sides_are_dropped() {
        let (pairs, frac) = build_extract_pairs(&[rec("", "x"), rec("a .", "  ")]);
        assert!(pairs.is_empty());
        assert_eq!(frac, 0.0);
    }
}

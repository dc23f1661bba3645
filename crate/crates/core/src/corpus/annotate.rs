use std::collections::HashMap;

use super::{is_terminator, CorpusError, NeTag, Subjectivity, TokenAnnotation};

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "from", "and", "or", "but", "as", "is",
    "was", "are", "were", "be", "been", "it", "its", "he", "she", "they", "his", "her", "their", "that", "this",
    "these", "those", "who", "which", "not", "no", "i", "we", "you",
];

/// Parses a strong-subjectivity lexicon: one `word polarity` entry per line,
/// polarity `positive` or `negative`. Blank lines and `#` comments are skipped.
pub fn parse_lexicon(content: &str) -> Result<HashMap<String, Subjectivity>, CorpusError> {
    let mut out = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || CorpusError::BadLexicon {
            line: i + 1,
            content: line.to_string(),
        };
        let mut parts = line.split_whitespace();
        let (Some(word), Some(polarity), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let subj = match polarity {
            "positive" => Subjectivity::StrongPositive,
            "negative" => Subjectivity::StrongNegative,
            _ => return Err(bad()),
        };
        out.insert(word.to_lowercase(), subj);
    }
    Ok(out)
}

/// Rule-based stand-in for external taggers, so the analysis procedures can
/// run on corpora that ship without annotations.
///
/// * entity: lexicon lookup first; otherwise a capitalized token that does not
///   open a sentence is tagged PERSON.
/// * subjectivity: lexicon lookup.
/// * POS: function-word list, then suffix rules, defaulting to noun.
#[derive(Debug, Clone, Default)]
pub struct FallbackAnnotator {
    pub subjectivity: HashMap<String, Subjectivity>,
    pub entities: HashMap<String, NeTag>,
}

impl FallbackAnnotator {
    pub fn new(subjectivity: HashMap<String, Subjectivity>, entities: HashMap<String, NeTag>) -> Self {
        Self {
            subjectivity,
            entities,
        }
    }

    fn pos_tag(lower: &str) -> &'static str {
        if lower.chars().all(|c| !c.is_alphanumeric()) || FUNCTION_WORDS.contains(&lower) {
            "OTHER"
        } else if lower.chars().all(|c| c.is_ascii_digit() || c == '-' || c == ',') {
            "NUM"
        } else if lower.ends_with("ly") {
            "ADV"
        } else if lower.ends_with("ing") || lower.ends_with("ed") || lower.ends_with("ize") {
            "VERB"
        } else if ["ous", "ful", "ive", "able", "ible", "al", "ic"].iter().any(|s| lower.ends_with(s)) {
            "ADJ"
        } else {
            "NOUN"
        }
    }

    /// Annotates tokens in their original case; lowercase input simply loses
    /// the capitalization cue.
    pub fn annotate<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenAnnotation> {
        let mut sentence_start = true;
        tokens
            .iter()
            .map(|tok| {
                let tok = tok.as_ref();
                let lower = tok.to_lowercase();
                let capitalized = tok.chars().next().is_some_and(char::is_uppercase);
                let ne = match self.entities.get(&lower) {
                    Some(&tag) => tag,
                    None if capitalized && !sentence_start => NeTag::Person,
                    None => NeTag::None,
                };
                let subjectivity = self.subjectivity.get(&lower).copied().unwrap_or(Subjectivity::None);
                let pos = if ne.is_entity() { "NOUN" } else { Self::pos_tag(&lower) };
                sentence_start = is_terminator(tok);
                TokenAnnotation::new(pos, ne, subjectivity)
            })
            .collect()
    }
}

use std::collections::{BTreeMap, HashMap};

use super::{CorpusError, Document};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const START: &str = "<s>";
pub const STOP: &str = "</s>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const START_ID: usize = 2;
pub const STOP_ID: usize = 3;

const RESERVED: [&str; 4] = [PAD, UNK, START, STOP];

/// Closed word list. Ids 0-3 are the reserved tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Most frequent words over text and abstract tokens, at most `max_size`
    /// entries including the reserved ones. Ties go to the lexicographically
    /// smaller word.
    pub fn build(docs: &[Document], max_size: usize) -> Result<Self, CorpusError> {
        if docs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        if max_size <= RESERVED.len() {
            return Err(CorpusError::VocabTooSmall(max_size));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            for tok in doc.text_tokens.iter().chain(&doc.abstract_tokens) {
                if RESERVED.contains(&tok.as_str()) {
                    continue;
                }
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let words = RESERVED
            .iter()
            .map(|w| w.to_string())
            .chain(ranked.into_iter().map(|(w, _)| w.to_string()))
            .take(max_size)
            .collect();
        Self::from_words(words)
    }

    /// Rebuilds a vocabulary from its id-ordered word list.
    pub fn from_words(words: Vec<String>) -> Result<Self, CorpusError> {
        for (i, reserved) in RESERVED.iter().enumerate() {
            if words.get(i).map(String::as_str) != Some(*reserved) {
                return Err(CorpusError::BadVocabulary(format!(
                    "id {i} must be {reserved}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::BadVocabulary(format!("duplicate entry {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    /// Parses the one-word-per-line format written by [`Vocabulary::to_text`].
    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        Self::from_words(text.lines().map(str::to_string).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = self.words.join("\n");
        out.push('\n');
        out
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> usize {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;

    fn doc(text: &str) -> Document {
        Document::new("d", Domain::News, "", text, "")
    }

    #[test]
    fn frequency_order_with_reserved_prefix() {
        let v = Vocabulary::build(&[doc("a a b")], 6).unwrap();
        assert_eq!(v.words(), &[PAD, UNK, START, STOP, "a", "b"]);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
    }

    #[test]
    fn cap_admits_most_frequent_only() {
        let v = Vocabulary::build(&[doc("a a b")], 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), None);
        assert_eq!(v.id_or_unk("b"), UNK_ID);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocabulary::build(&[doc("c b a")], 10).unwrap();
        assert_eq!(&v.words()[4..], &["a", "b", "c"]);
    }

    #[test]
    fn rejects_empty_corpus_and_tiny_cap() {
        assert!(matches!(Vocabulary::build(&[], 10), Err(CorpusError::EmptyCorpus)));
        assert!(matches!(
            Vocabulary::build(&[doc("a")], 4),
            Err(CorpusError::VocabTooSmall(4))
        ));
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::build(&[doc("x y y z")], 10).unwrap();
        assert_eq!(Vocabulary::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocabulary::from_text("a\nb\n").is_err());
    }
}

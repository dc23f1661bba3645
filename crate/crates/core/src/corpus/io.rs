use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    tokenize, tokenize_preserving_case, Annotations, CorpusError, Document, Domain, FallbackAnnotator, NeTag,
    Subjectivity, TokenAnnotation,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotations {
    text: Vec<(String, String, String)>,
    #[serde(rename = "abstract")]
    abstract_: Vec<(String, String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    domain: Domain,
    #[serde(default)]
    section: String,
    text: String,
    #[serde(rename = "abstract")]
    abstract_: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<RawAnnotations>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub documents: Vec<Document>,
    pub malformed: Vec<MalformedLine>,
}

fn convert_annotations(raw: &[(String, String, String)], expected: usize, what: &str) -> Result<Vec<TokenAnnotation>, String> {
    if raw.len() != expected {
        return Err(format!(
            "{what} annotations have {} entries for {expected} tokens",
            raw.len()
        ));
    }
    raw.iter()
        .map(|(pos, ne, subj)| {
            let ne = NeTag::parse(ne).ok_or_else(|| format!("unknown entity tag {ne:?}"))?;
            let subj = Subjectivity::parse(subj).ok_or_else(|| format!("unknown subjectivity {subj:?}"))?;
            Ok(TokenAnnotation::new(pos.clone(), ne, subj))
        })
        .collect()
}

fn parse_line(line: &str, fallback: Option<&FallbackAnnotator>) -> Result<Document, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut doc = Document {
        id: raw.id,
        domain: raw.domain,
        section: raw.section,
        text_tokens: tokenize(&raw.text),
        abstract_tokens: tokenize(&raw.abstract_),
        annotations: None,
    };
    doc.annotations = match (&raw.annotations, fallback) {
        (Some(ann), _) => Some(Annotations {
            text: convert_annotations(&ann.text, doc.text_tokens.len(), "text")?,
            abstract_: convert_annotations(&ann.abstract_, doc.abstract_tokens.len(), "abstract")?,
        }),
        (None, Some(annotator)) => Some(Annotations {
            text: annotator.annotate(&tokenize_preserving_case(&raw.text)),
            abstract_: annotator.annotate(&tokenize_preserving_case(&raw.abstract_)),
        }),
        (None, None) => None,
    };
    Ok(doc)
}

/// Parses JSON Lines corpus content. Blank lines are ignored; malformed lines
/// are skipped and reported.
pub fn ingest_str(content: &str, fallback: Option<&FallbackAnnotator>) -> Ingested {
    let mut documents = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, fallback) {
            Ok(doc) => documents.push(doc),
            Err(reason) => {
                log::warn!("skipping malformed corpus line {}: {reason}", i + 1);
                malformed.push(MalformedLine { line: i + 1, reason });
            }
        }
    }
    if !malformed.is_empty() {
        log::warn!("{} malformed line(s) skipped", malformed.len());
    }
    Ingested { documents, malformed }
}

pub fn ingest(path: &Path, fallback: Option<&FallbackAnnotator>) -> Result<Ingested, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ingest_str(&content, fallback))
}

fn raw_annotations(anns: &[TokenAnnotation]) -> Vec<(String, String, String)> {
    anns.iter()
        .map(|a| (a.pos.clone(), a.ne.as_str().to_string(), a.subjectivity.as_str().to_string()))
        .collect()
}

/// Serializes documents in the corpus JSON Lines format, one per line.
pub fn to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        let rec = RawRecord {
            id: doc.id.clone(),
            domain: doc.domain,
            section: doc.section.clone(),
            text: doc.text_tokens.join(" "),
            abstract_: doc.abstract_tokens.join(" "),
            annotations: doc.annotations.as_ref().map(|a| RawAnnotations {
                text: raw_annotations(&a.text),
                abstract_: raw_annotations(&a.abstract_),
            }),
        };
        out.push_str(&serde_json::to_string(&rec).expect("corpus record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    fs::write(path, to_jsonl(docs)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

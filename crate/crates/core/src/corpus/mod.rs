//! Questions, documents and their preparation: ingestion, accent folding and
//! contraction expansion, sentence segmentation, and stratified sampling of
//! per-question document sets.

mod preprocess;
mod segment;
mod strata;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use preprocess::{fold_accents, is_accented, normalize_surface, preprocess_text, ContractionTable};
pub use segment::{RuleSegmenter, SentenceSegmenter};
pub use strata::{question_seed, sample_question, sample_strata, SeedMode, StrataSpec, BANDS};

use crate::error::{read_to_string, Error, Result};

/// Which question collection a question came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceSet {
    #[serde(rename = "CQ-W")]
    CqW,
    #[serde(rename = "CQ-T")]
    CqT,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceSet::CqW => "CQ-W",
            SourceSet::CqT => "CQ-T",
            SourceSet::Custom => "custom",
        })
    }
}

impl std::str::FromStr for SourceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cq-w" => Ok(SourceSet::CqW),
            "cq-t" => Ok(SourceSet::CqT),
            "custom" => Ok(SourceSet::Custom),
            _ => Err(Error::Config(format!("unknown question set `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub gold_answers: Vec<String>,
    #[serde(rename = "set")]
    pub source_set: SourceSet,
}

#[derive(Deserialize)]
struct QuestionRecord {
    id: String,
    text: String,
    gold_answers: Vec<String>,
    #[serde(default)]
    set: Option<SourceSet>,
}

/// Loads a questions JSONL file. Records without a `set` field take
/// `default_set`.
pub fn load_questions(path: &Path, default_set: SourceSet) -> Result<Vec<Question>> {
    parse_questions(&read_to_string(path)?, &path.display().to_string(), default_set)
}

pub fn parse_questions(text: &str, source_name: &str, default_set: SourceSet) -> Result<Vec<Question>> {
    let mut questions = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QuestionRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(source_name, line_no, e))?;
        if rec.id.is_empty() {
            return Err(Error::parse(source_name, line_no, "empty question id"));
        }
        if rec.text.trim().is_empty() {
            return Err(Error::parse(source_name, line_no, format!("question `{}` has empty text", rec.id)));
        }
        if rec.gold_answers.is_empty() || rec.gold_answers.iter().any(|g| normalize_surface(g).is_empty()) {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("question `{}` needs at least one non-empty gold answer", rec.id),
            ));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::parse(source_name, line_no, format!("duplicate question id `{}`", rec.id)));
        }
        questions.push(Question {
            id: rec.id,
            text: rec.text,
            gold_answers: rec.gold_answers,
            source_set: rec.set.unwrap_or(default_set),
        });
    }
    if questions.is_empty() {
        return Err(Error::EmptySet(format!("question file {source_name}")));
    }
    Ok(questions)
}

/// One segmented sentence. `start` is the byte offset of the sentence in its
/// document's (preprocessed) text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_rank: u32,
    pub index: usize,
    pub start: usize,
    pub text: String,
}

/// A retrieved document. Within one question, `original_rank` identifies it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub question_id: String,
    pub original_rank: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(question_id: impl Into<String>, original_rank: u32, text: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            original_rank,
            text: text.into(),
            sentences: Vec::new(),
        }
    }

    /// Preprocesses the text and fills `sentences`.
    pub fn prepared(mut self, contractions: &ContractionTable, segmenter: &dyn SentenceSegmenter) -> Self {
        self.text = preprocess_text(&self.text, contractions);
        segment_sentences(self, segmenter)
    }
}

/// Fills `doc.sentences` from `doc.text`.
pub fn segment_sentences(mut doc: Document, segmenter: &dyn SentenceSegmenter) -> Document {
    doc.sentences = segmenter
        .split(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(index, range)| Sentence {
            doc_rank: doc.original_rank,
            index,
            start: range.start,
            text: doc.text[range].to_string(),
        })
        .collect();
    doc
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub strata: String,
    pub seed: u64,
}

/// The documents retrieved for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSet {
    pub question_id: String,
    pub documents: Vec<Document>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingRecord>,
}

impl DocumentSet {
    /// Fails if the documents belong to another question or repeat a rank.
    pub fn new(question_id: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let question_id = question_id.into();
        let mut ranks = HashSet::new();
        for d in &documents {
            if d.question_id != question_id {
                return Err(Error::Contract(format!(
                    "document for `{}` placed in the set of `{question_id}`",
                    d.question_id
                )));
            }
            if d.original_rank == 0 || !ranks.insert(d.original_rank) {
                return Err(Error::Contract(format!(
                    "question `{question_id}`: invalid or repeated rank {}",
                    d.original_rank
                )));
            }
        }
        Ok(Self {
            question_id,
            documents,
            sampling: None,
        })
    }

    pub fn k(&self) -> usize {
        self.documents.len()
    }

    pub fn document(&self, rank: u32) -> Option<&Document> {
        self.documents.iter().find(|d| d.original_rank == rank)
    }

    pub fn prepared(mut self, contractions: &ContractionTable, segmenter: &dyn SentenceSegmenter) -> Self {
        self.documents = self
            .documents
            .into_iter()
            .map(|d| d.prepared(contractions, segmenter))
            .collect();
        self
    }
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    question_id: String,
    rank: u32,
    text: String,
}

/// Loads a documents JSONL file, grouped by question id and sorted by rank.
pub fn load_documents(path: &Path) -> Result<BTreeMap<String, Vec<Document>>> {
    parse_documents(&read_to_string(path)?, &path.display().to_string())
}

pub fn parse_documents(text: &str, source_name: &str) -> Result<BTreeMap<String, Vec<Document>>> {
    let mut by_question: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
        if rec.rank == 0 {
            return Err(Error::parse(source_name, i + 1, "document rank must be at least 1"));
        }
        if !seen.insert((rec.question_id.clone(), rec.rank)) {
            return Err(Error::parse(
                source_name,
                i + 1,
                format!("duplicate rank {} for question `{}`", rec.rank, rec.question_id),
            ));
        }
        by_question
            .entry(rec.question_id.clone())
            .or_default()
            .push(Document::new(rec.question_id, rec.rank, rec.text));
    }
    for docs in by_question.values_mut() {
        docs.sort_by_key(|d| d.original_rank);
    }
    Ok(by_question)
}

/// Serializes documents in the documents JSONL format, tagging each line
/// with the sampling record when one is given.
pub fn write_documents_jsonl(sets: &[DocumentSet]) -> String {
    let mut out = String::new();
    for set in sets {
        for d in &set.documents {
            let mut value = serde_json::json!({
                "question_id": d.question_id,
                "rank": d.original_rank,
                "text": d.text,
            });
            if let Some(s) = &set.sampling {
                value["strata"] = s.strata.clone().into();
                value["seed"] = s.seed.into();
            }
            out.push_str(&value.to_string());
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question_line(id: &str) -> String {
        format!(r#"{{"id":"{id}","text":"Who won?","gold_answers":["X"],"set":"CQ-W"}}"#)
    }

    #[test]
    fn loads_many_questions() {
        let text: Vec<String> = (0..150).map(|i| question_line(&format!("q{i}"))).collect();
        let qs = parse_questions(&text.join("\n"), "t", SourceSet::Custom).unwrap();
        assert_eq!(qs.len(), 150);
        assert_eq!(qs[0].source_set, SourceSet::CqW);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_questions("", "t", SourceSet::Custom), Err(Error::EmptySet(_))));
        assert!(matches!(parse_questions("\n  \n", "t", SourceSet::Custom), Err(Error::EmptySet(_))));
    }

    #[test]
    fn duplicate_id_cites_its_line() {
        let mut lines: Vec<String> = (0..6).map(|i| question_line(&format!("q{i}"))).collect();
        lines.push(question_line("q2"));
        match parse_questions(&lines.join("\n"), "qs.jsonl", SourceSet::Custom) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 7);
                assert!(message.contains("duplicate"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_names_line() {
        let text = format!("{}\n{{\"id\": 3}}\n", question_line("a"));
        match parse_questions(&text, "qs", SourceSet::Custom) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let blank_gold = r#"{"id":"a","text":"t","gold_answers":["  . "]}"#;
        assert!(parse_questions(blank_gold, "qs", SourceSet::Custom).is_err());
    }

    #[test]
    fn documents_group_by_question() {
        let text = r#"{"question_id":"q2","rank":2,"text":"b"}
{"question_id":"q1","rank":1,"text":"a"}
{"question_id":"q2","rank":1,"text":"c"}"#;
        let docs = parse_documents(text, "d").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs["q2"][0].text, "c");
        let dup = format!("{text}\n{}", r#"{"question_id":"q1","rank":1,"text":"x"}"#);
        assert!(matches!(parse_documents(&dup, "d"), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn document_set_rejects_repeated_ranks() {
        let docs = vec![Document::new("q", 1, "a"), Document::new("q", 1, "b")];
        assert!(DocumentSet::new("q", docs).is_err());
        assert!(DocumentSet::new("q", vec![Document::new("other", 1, "a")]).is_err());
    }

    #[test]
    fn preparation_fills_sentences() {
        let doc = Document::new("q", 3, "Beyoncé can't sing. She won't stop!")
            .prepared(&ContractionTable::builtin(), &RuleSegmenter::default());
        let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["Beyonce cannot sing.", "She will not stop!"]);
        assert_eq!(doc.sentences[1].index, 1);
        assert_eq!(doc.sentences[1].doc_rank, 3);
        let s = &doc.sentences[1];
        assert_eq!(&doc.text[s.start..s.start + s.text.len()], s.text);
    }
}

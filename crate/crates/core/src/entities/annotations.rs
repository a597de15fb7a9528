use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityMention, NerBackend, OntoTag};
use crate::corpus::{Document, DocumentSet};
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EntityRecord {
    surface: String,
    tag: OntoTag,
    sent_idx: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct AnnotationRecord {
    question_id: String,
    doc_rank: u32,
    entities: Vec<EntityRecord>,
}

/// Externally produced NER output, keyed by `(question_id, doc_rank)`.
///
/// Spans are character offsets into the sentence produced by this crate's
/// preprocessing and segmentation.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    docs: BTreeMap<(String, u32), Vec<EntityRecord>>,
}

impl AnnotationStore {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut docs: BTreeMap<(String, u32), Vec<EntityRecord>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
            if let Some(bad) = rec.entities.iter().find(|e| e.start >= e.end) {
                return Err(Error::parse(source_name, i + 1, format!("empty span for `{}`", bad.surface)));
            }
            docs.entry((rec.question_id, rec.doc_rank)).or_default().extend(rec.entities);
        }
        Ok(Self { docs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Checks that every annotated document exists in `corpus`.
    pub fn validate_against(&self, corpus: &BTreeMap<String, Vec<Document>>) -> Result<()> {
        for (qid, rank) in self.docs.keys() {
            let known = corpus
                .get(qid)
                .is_some_and(|docs| docs.iter().any(|d| d.original_rank == *rank));
            if !known {
                return Err(Error::UnknownDocument {
                    question_id: qid.clone(),
                    rank: *rank,
                });
            }
        }
        Ok(())
    }

    pub fn document_count(&self) -> usize {
        self.docs.len()
    }
}

impl NerBackend for AnnotationStore {
    fn extract(&self, docset: &DocumentSet) -> Result<Vec<EntityMention>> {
        let mut mentions = Vec::new();
        for doc in &docset.documents {
            let Some(records) = self.docs.get(&(docset.question_id.clone(), doc.original_rank)) else {
                continue;
            };
            for rec in records {
                let sentence = doc.sentences.get(rec.sent_idx).ok_or_else(|| {
                    Error::Contract(format!(
                        "annotation for question `{}` rank {} names sentence {} of {}",
                        docset.question_id,
                        doc.original_rank,
                        rec.sent_idx,
                        doc.sentences.len()
                    ))
                })?;
                if rec.end > sentence.text.chars().count() {
                    return Err(Error::Contract(format!(
                        "annotation span {}..{} of `{}` exceeds its sentence",
                        rec.start, rec.end, rec.surface
                    )));
                }
                mentions.push(EntityMention {
                    surface: rec.surface.clone(),
                    tag: rec.tag,
                    doc_rank: doc.original_rank,
                    sentence_index: rec.sent_idx,
                    start: rec.start,
                    end: rec.end,
                });
            }
        }
        Ok(mentions)
    }
}

/// Writes mentions in the annotations JSONL format, one line per document
/// in rank order.
pub fn annotations_jsonl(question_id: &str, mentions: &[EntityMention]) -> String {
    let mut by_doc: BTreeMap<u32, Vec<EntityRecord>> = BTreeMap::new();
    for m in mentions {
        by_doc.entry(m.doc_rank).or_default().push(EntityRecord {
            surface: m.surface.clone(),
            tag: m.tag,
            sent_idx: m.sentence_index,
            start: m.start,
            end: m.end,
        });
    }
    let mut out = String::new();
    for (doc_rank, entities) in by_doc {
        let rec = AnnotationRecord {
            question_id: question_id.to_string(),
            doc_rank,
            entities,
        };
        out.push_str(&serde_json::to_string(&rec).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContractionTable, RuleSegmenter};
    use crate::entities::Gazetteer;

    fn docset() -> DocumentSet {
        let texts = [
            "Brad Pitt played Achilles in Troy. Pitt was also in Seven.",
            "Morgan Freeman starred in Seven with Brad Pitt.",
            "Troy was filmed in Malta and Mexico.",
            "Nothing relevant here.",
            "Angelina Jolie and Brad Pitt met on set.",
            "The film Seven was released in 1995.",
            "Kevin Spacey played John Doe.",
            "Achilles is a Greek hero.",
            "Malta is an island nation.",
            "Wolfgang Petersen directed Troy.",
        ];
        let docs = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new("q7", i as u32 + 1, *t).prepared(&ContractionTable::builtin(), &RuleSegmenter::default()))
            .collect();
        DocumentSet::new("q7", docs).unwrap()
    }

    #[test]
    fn round_trips_through_jsonl() {
        let gaz = Gazetteer::parse(
            "brad pitt\tPERSON\nmorgan freeman\tPERSON\nmalta\tGPE\nmexico\tGPE\nangelina jolie\tPERSON\n\
             kevin spacey\tPERSON\njohn doe\tPERSON\nwolfgang petersen\tPERSON\n1995\tDATE\ntroy\tWORK_OF_ART\n",
            "g",
        )
        .unwrap();
        let ds = docset();
        let mentions = gaz.extract(&ds).unwrap();
        assert!(mentions.len() > 10);
        let store = AnnotationStore::parse(&annotations_jsonl("q7", &mentions), "a").unwrap();
        assert_eq!(store.extract(&ds).unwrap(), mentions);
    }

    #[test]
    fn unknown_document_is_rejected() {
        let store = AnnotationStore::parse(r#"{"question_id":"q7","doc_rank":40,"entities":[]}"#, "a").unwrap();
        let corpus = BTreeMap::from([("q7".to_string(), docset().documents)]);
        assert!(matches!(
            store.validate_against(&corpus),
            Err(Error::UnknownDocument { rank: 40, .. })
        ));
    }

    #[test]
    fn out_of_range_sentence_is_rejected() {
        let line = r#"{"question_id":"q7","doc_rank":1,"entities":[{"surface":"x","tag":"PERSON","sent_idx":9,"start":0,"end":1}]}"#;
        let store = AnnotationStore::parse(line, "a").unwrap();
        assert!(store.extract(&docset()).is_err());
        let bad_tag = line.replace("PERSON", "HUMAN");
        assert!(AnnotationStore::parse(&bad_tag, "a").is_err());
    }
}

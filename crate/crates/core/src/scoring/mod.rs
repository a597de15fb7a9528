//! Question-to-sentence similarity and the per-entity aggregations built on it.

mod embedding;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use embedding::{
    cache_jsonl, cosine, sha256_hex, EmbeddingCache, EmbeddingProvider, EmbeddingVector, WordAverageProvider,
};

use crate::corpus::DocumentSet;
use crate::entities::CandidatePool;
use crate::error::{Error, Result};

/// A sentence containing the entity, with its cosine similarity to the question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSentence {
    pub doc_rank: u32,
    pub sentence_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub canonical_surface: String,
    pub df: usize,
    pub sentences: Vec<EvidenceSentence>,
}

/// Scores every sentence that mentions a pooled candidate against the
/// question. Each distinct sentence is embedded once, however many
/// candidates share it.
pub fn build_evidence(
    pool: &CandidatePool,
    docset: &DocumentSet,
    question_text: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<EvidenceSet>> {
    let question = provider.embed(question_text)?;

    let needed: BTreeSet<(u32, usize)> = pool.candidates.iter().flat_map(|c| c.sentence_keys()).collect();
    let mut scores: BTreeMap<(u32, usize), f64> = BTreeMap::new();
    for key @ (rank, index) in needed {
        let Some(sentence) = docset.document(rank).and_then(|d| d.sentences.get(index)) else {
            log::warn!("question `{}`: no sentence {index} in document {rank}", pool.question_id);
            continue;
        };
        let v = provider.embed(&sentence.text)?;
        scores.insert(key, cosine(&question, &v)?);
    }

    let mut out = Vec::with_capacity(pool.candidates.len());
    for c in &pool.candidates {
        let sentences: Vec<EvidenceSentence> = c
            .sentence_keys()
            .into_iter()
            .filter_map(|key| {
                scores.get(&key).map(|&score| EvidenceSentence {
                    doc_rank: key.0,
                    sentence_index: key.1,
                    score,
                })
            })
            .collect();
        if sentences.is_empty() {
            log::warn!("candidate `{}` has no evidence sentences; dropped", c.canonical_surface);
            continue;
        }
        out.push(EvidenceSet {
            canonical_surface: c.canonical_surface.clone(),
            df: c.df,
            sentences,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over all evidence sentences.
    Avg,
    /// Mean over documents of the best sentence in each document.
    AvgMax,
    /// Best single sentence.
    Max,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::Avg, Aggregation::AvgMax, Aggregation::Max];
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Avg => "avg",
            Aggregation::AvgMax => "avg_max",
            Aggregation::Max => "max",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "avg" => Ok(Aggregation::Avg),
            "avg_max" => Ok(Aggregation::AvgMax),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::Config(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// What the per-document maxima are divided by under [`Aggregation::AvgMax`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvgMaxDenominator {
    /// Documents that contain the entity.
    #[default]
    ContainingDocs,
    /// Every document in the set.
    AllDocs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScore {
    pub canonical_surface: String,
    pub mode: Aggregation,
    pub value: f64,
}

/// Collapses an evidence set into one score. `n_docs` is only used by
/// [`AvgMaxDenominator::AllDocs`].
pub fn aggregate(
    evidence: &EvidenceSet,
    mode: Aggregation,
    denominator: AvgMaxDenominator,
    n_docs: usize,
) -> Result<SemanticScore> {
    let scores: Vec<f64> = evidence.sentences.iter().map(|s| s.score).collect();
    if scores.is_empty() {
        return Err(Error::Contract(format!("empty evidence for `{}`", evidence.canonical_surface)));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let value = match mode {
        Aggregation::Max => max,
        // a mean lies within [min, max]; the clamp absorbs rounding
        Aggregation::Avg => (scores.iter().sum::<f64>() / scores.len() as f64).clamp(min, max),
        Aggregation::AvgMax => {
            let mut best: BTreeMap<u32, f64> = BTreeMap::new();
            for s in &evidence.sentences {
                best.entry(s.doc_rank)
                    .and_modify(|b| *b = b.max(s.score))
                    .or_insert(s.score);
            }
            let total: f64 = best.values().sum();
            match denominator {
                AvgMaxDenominator::ContainingDocs => (total / best.len() as f64).clamp(min, max),
                AvgMaxDenominator::AllDocs => {
                    if n_docs < best.len() {
                        return Err(Error::Contract(format!(
                            "`{}` occurs in {} documents of a {n_docs}-document set",
                            evidence.canonical_surface,
                            best.len()
                        )));
                    }
                    (total / n_docs as f64).min(max)
                }
            }
        }
    };
    Ok(SemanticScore {
        canonical_surface: evidence.canonical_surface.clone(),
        mode,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContractionTable, Document, RuleSegmenter};
    use crate::entities::{build_pool, Gazetteer, NerBackend, PoolConfig};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn evidence(scores: &[(u32, f64)]) -> EvidenceSet {
        EvidenceSet {
            canonical_surface: "e".into(),
            df: 0,
            sentences: scores
                .iter()
                .enumerate()
                .map(|(i, &(doc_rank, score))| EvidenceSentence {
                    doc_rank,
                    sentence_index: i,
                    score,
                })
                .collect(),
        }
    }

    fn agg(e: &EvidenceSet, mode: Aggregation) -> f64 {
        aggregate(e, mode, AvgMaxDenominator::ContainingDocs, 10).unwrap().value
    }

    #[test]
    fn singleton_modes_coincide() {
        let e = evidence(&[(1, 0.7)]);
        for mode in Aggregation::ALL {
            assert_eq!(agg(&e, mode), 0.7);
        }
    }

    #[test]
    fn two_document_example() {
        // independently: max = 0.8; avg_max = (0.8 + 0.4) / 2; avg = 1.4 / 3
        let e = evidence(&[(1, 0.2), (1, 0.8), (2, 0.4)]);
        assert_eq!(agg(&e, Aggregation::Max), 0.8);
        assert!((agg(&e, Aggregation::AvgMax) - 0.6).abs() < 1e-12);
        assert!((agg(&e, Aggregation::Avg) - 0.466_666_666_666_666_7).abs() < 1e-12);
        let all_docs = aggregate(&e, Aggregation::AvgMax, AvgMaxDenominator::AllDocs, 10).unwrap();
        assert!((all_docs.value - 0.12).abs() < 1e-12);
    }

    #[test]
    fn constant_scores() {
        let e = evidence(&[(1, 0.1), (2, 0.1), (2, 0.1), (3, 0.1)]);
        for mode in Aggregation::ALL {
            assert_eq!(agg(&e, mode), 0.1);
        }
    }

    #[test]
    fn empty_evidence_is_a_contract_violation() {
        assert!(aggregate(&evidence(&[]), Aggregation::Max, AvgMaxDenominator::ContainingDocs, 1).is_err());
    }

    struct Counting<'a> {
        inner: &'a WordAverageProvider,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for Counting<'_> {
        fn id(&self) -> &str {
            self.inner.id()
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(text)
        }
    }

    #[test]
    fn shared_sentences_embedded_once() {
        let docs = vec![
            Document::new("q", 1, "Pitt and Freeman starred in Seven. Pitt played Achilles. Freeman narrated."),
            Document::new("q", 2, "Pitt was born in Oklahoma."),
        ]
        .into_iter()
        .map(|d| d.prepared(&ContractionTable::builtin(), &RuleSegmenter::default()))
        .collect();
        let docset = DocumentSet::new("q", docs).unwrap();
        let gaz = Gazetteer::parse("pitt\tPERSON\nfreeman\tPERSON\n", "g").unwrap();
        let mentions = gaz.extract(&docset).unwrap();
        let pool = build_pool(&mentions, &mentions, &docset, &PoolConfig::default());
        let words = WordAverageProvider::parse("pitt 1 0\nfreeman 0 1\nseven 1 1\nachilles 2 1\noklahoma 0 3\nwho 1 2\n", "v").unwrap();
        let counting = Counting {
            inner: &words,
            calls: AtomicUsize::new(0),
        };
        let ev = build_evidence(&pool, &docset, "Who starred in Seven?", &counting).unwrap();
        // question + 4 distinct sentences
        assert_eq!(counting.calls.load(Ordering::SeqCst), 5);
        let pitt = ev.iter().find(|e| e.canonical_surface == "pitt").unwrap();
        let freeman = ev.iter().find(|e| e.canonical_surface == "freeman").unwrap();
        assert_eq!(pitt.sentences.len(), 3);
        assert_eq!(freeman.sentences.len(), 2);
        assert_eq!(pitt.sentences[0], freeman.sentences[0]);
        assert!(ev.iter().flat_map(|e| &e.sentences).all(|s| (-1.0..=1.0).contains(&s.score)));
    }
}

//! Named-entity extraction over a document set, answer-type filtering, and
//! grouping of mentions into candidate answers with document frequencies.

mod annotations;
mod gazetteer;
mod tag;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

pub use annotations::{annotations_jsonl, AnnotationStore};
pub use gazetteer::Gazetteer;
pub(crate) use gazetteer::word_tokens;
pub use tag::OntoTag;

pub use crate::corpus::normalize_surface as canonical_surface;
use crate::corpus::DocumentSet;
use crate::error::Result;

/// One typed entity occurrence. `start..end` is a character span within the
/// sentence `sentence_index` of document `doc_rank`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub tag: OntoTag,
    pub doc_rank: u32,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
}

/// A named-entity recognizer over prepared (segmented) documents.
pub trait NerBackend: Send + Sync {
    fn extract(&self, docset: &DocumentSet) -> Result<Vec<EntityMention>>;
}

pub fn extract_entities(docset: &DocumentSet, backend: &dyn NerBackend) -> Result<Vec<EntityMention>> {
    backend.extract(docset)
}

/// Keeps the mentions whose tag is accepted.
pub fn filter_by_type(mentions: &[EntityMention], accepted: &BTreeSet<OntoTag>) -> Vec<EntityMention> {
    mentions.iter().filter(|m| accepted.contains(&m.tag)).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntity {
    pub canonical_surface: String,
    pub mentions: Vec<EntityMention>,
    pub df: usize,
    pub tags: BTreeMap<OntoTag, usize>,
}

impl CandidateEntity {
    /// Distinct `(doc_rank, sentence_index)` pairs holding a mention, in order.
    pub fn sentence_keys(&self) -> Vec<(u32, usize)> {
        let keys: BTreeSet<(u32, usize)> = self.mentions.iter().map(|m| (m.doc_rank, m.sentence_index)).collect();
        keys.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub question_id: String,
    pub n_docs: usize,
    /// Ordered by df descending, then surface ascending.
    pub candidates: Vec<CandidateEntity>,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    /// Maximum number of candidates kept; `None` keeps all.
    pub cap: Option<usize>,
    /// Merge mentions whose normalized surfaces agree.
    pub group_surface_variants: bool,
    /// Count documents where the entity occurs under any tag.
    pub df_any_tag: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            cap: Some(100),
            group_surface_variants: true,
            df_any_tag: false,
        }
    }
}

impl PoolConfig {
    pub fn key(&self, surface: &str) -> String {
        if self.group_surface_variants {
            canonical_surface(surface)
        } else {
            surface.split_whitespace().collect::<Vec<_>>().join(" ")
        }
    }
}

/// Groups accepted-type mentions into candidates, computes each candidate's
/// document frequency, and applies the cap.
///
/// `all_mentions` is only consulted when `config.df_any_tag` is set.
pub fn build_pool(
    filtered: &[EntityMention],
    all_mentions: &[EntityMention],
    docset: &DocumentSet,
    config: &PoolConfig,
) -> CandidatePool {
    let in_set: HashSet<u32> = docset.documents.iter().map(|d| d.original_rank).collect();
    let mut groups: BTreeMap<String, Vec<EntityMention>> = BTreeMap::new();
    for m in filtered {
        if !in_set.contains(&m.doc_rank) {
            log::warn!("mention `{}` refers to rank {} outside the document set", m.surface, m.doc_rank);
            continue;
        }
        let key = config.key(&m.surface);
        if key.is_empty() {
            continue;
        }
        groups.entry(key).or_default().push(m.clone());
    }

    let any_tag_docs: BTreeMap<String, BTreeSet<u32>> = if config.df_any_tag {
        let mut docs: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
        for m in all_mentions.iter().filter(|m| in_set.contains(&m.doc_rank)) {
            docs.entry(config.key(&m.surface)).or_default().insert(m.doc_rank);
        }
        docs
    } else {
        BTreeMap::new()
    };

    let mut candidates: Vec<CandidateEntity> = groups
        .into_iter()
        .map(|(surface, mentions)| {
            let mut docs: BTreeSet<u32> = mentions.iter().map(|m| m.doc_rank).collect();
            if let Some(extra) = any_tag_docs.get(&surface) {
                docs.extend(extra);
            }
            let mut tags = BTreeMap::new();
            for m in &mentions {
                *tags.entry(m.tag).or_insert(0) += 1;
            }
            CandidateEntity {
                canonical_surface: surface,
                df: docs.len(),
                mentions,
                tags,
            }
        })
        .collect();
    candidates.sort_by(|a, b| b.df.cmp(&a.df).then_with(|| a.canonical_surface.cmp(&b.canonical_surface)));

    let mut capped = false;
    if let Some(cap) = config.cap {
        if candidates.len() > cap {
            candidates.truncate(cap);
            capped = true;
        }
    }
    CandidatePool {
        question_id: docset.question_id.clone(),
        n_docs: docset.k(),
        candidates,
        capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mention(surface: &str, tag: OntoTag, doc_rank: u32) -> EntityMention {
        EntityMention {
            surface: surface.into(),
            tag,
            doc_rank,
            sentence_index: 0,
            start: 0,
            end: surface.chars().count(),
        }
    }

    fn ten_docs() -> DocumentSet {
        DocumentSet::new("q", (1..=10).map(|r| Document::new("q", r, "x")).collect()).unwrap()
    }

    #[test]
    fn keeps_accepted_tags() {
        let ms = vec![
            mention("France", OntoTag::Gpe, 1),
            mention("Bob", OntoTag::Person, 1),
            mention("UN", OntoTag::Org, 2),
        ];
        let location = BTreeSet::from([OntoTag::Gpe, OntoTag::Loc, OntoTag::Org]);
        let filtered = filter_by_type(&ms, &location);
        let kept: Vec<&str> = filtered.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(kept, vec!["France", "UN"]);
        assert_eq!(filter_by_type(&ms, &OntoTag::ALL.into_iter().collect()), ms);
        assert!(filter_by_type(&ms, &BTreeSet::from([OntoTag::Money])).is_empty());
    }

    #[test]
    fn df_counts_documents() {
        let ms: Vec<_> = (1..=10)
            .flat_map(|r| [mention("Paris", OntoTag::Gpe, r), mention("Paris", OntoTag::Gpe, r)])
            .collect();
        let pool = build_pool(&ms, &ms, &ten_docs(), &PoolConfig::default());
        assert_eq!(pool.candidates.len(), 1);
        assert_eq!(pool.candidates[0].df, 10);
        assert_eq!(pool.candidates[0].mentions.len(), 20);
    }

    #[test]
    fn surface_variants_merge() {
        let ms = vec![mention("Burkina Faso", OntoTag::Gpe, 1), mention("burkina faso", OntoTag::Gpe, 2)];
        let pool = build_pool(&ms, &ms, &ten_docs(), &PoolConfig::default());
        assert_eq!(pool.candidates.len(), 1);
        assert_eq!(pool.candidates[0].canonical_surface, "burkina faso");
        assert_eq!(pool.candidates[0].df, 2);

        let separate = PoolConfig {
            group_surface_variants: false,
            ..PoolConfig::default()
        };
        assert_eq!(build_pool(&ms, &ms, &ten_docs(), &separate).candidates.len(), 2);
    }

    #[test]
    fn any_tag_switch_widens_df() {
        let filtered = vec![mention("Jordan", OntoTag::Gpe, 1)];
        let all = vec![mention("Jordan", OntoTag::Gpe, 1), mention("Jordan", OntoTag::Person, 2)];
        let strict = build_pool(&filtered, &all, &ten_docs(), &PoolConfig::default());
        assert_eq!(strict.candidates[0].df, 1);
        let loose = PoolConfig {
            df_any_tag: true,
            ..PoolConfig::default()
        };
        assert_eq!(build_pool(&filtered, &all, &ten_docs(), &loose).candidates[0].df, 2);
    }

    #[test]
    fn cap_keeps_highest_df() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ms = Vec::new();
        for e in 0..120 {
            let df = rng.random_range(1..=10u32);
            for r in 1..=df {
                ms.push(mention(&format!("entity {e:03}"), OntoTag::Person, r));
            }
        }
        let pool = build_pool(&ms, &ms, &ten_docs(), &PoolConfig::default());
        assert!(pool.capped);
        assert_eq!(pool.candidates.len(), 100);

        let uncapped = PoolConfig { cap: None, ..PoolConfig::default() };
        let full = build_pool(&ms, &ms, &ten_docs(), &uncapped);
        assert_eq!(full.candidates.len(), 120);
        let kept: HashSet<&str> = pool.candidates.iter().map(|c| c.canonical_surface.as_str()).collect();
        let min_kept = pool.candidates.iter().map(|c| c.df).min().unwrap();
        let max_dropped = full
            .candidates
            .iter()
            .filter(|c| !kept.contains(c.canonical_surface.as_str()))
            .map(|c| c.df)
            .max()
            .unwrap();
        assert!(min_kept >= max_dropped);
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent_and_caseless(s in "\\PC{0,24}") {
            let c = canonical_surface(&s);
            prop_assert_eq!(canonical_surface(&c), c.clone());
            prop_assert_eq!(canonical_surface(&s.to_uppercase().to_lowercase()), canonical_surface(&s.to_lowercase()));
        }
    }
}

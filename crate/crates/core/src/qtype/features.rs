use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::annotate::QuestionAnnotation;

/// Active feature strings of one annotation, per namespace.
struct Items {
    ne: BTreeSet<String>,
    lemma: BTreeSet<String>,
    lemma_bigram: BTreeSet<String>,
    pos: BTreeSet<String>,
    pos_bigram: BTreeSet<String>,
}

fn bigrams(seq: &[String]) -> BTreeSet<String> {
    seq.windows(2).map(|w| format!("{}_{}", w[0], w[1])).collect()
}

fn items(a: &QuestionAnnotation) -> Items {
    let lemmas: Vec<String> = a.lemmas.iter().map(|l| l.to_lowercase()).collect();
    Items {
        ne: a.entities.iter().map(|e| e.tag.clone()).collect(),
        lemma: lemmas.iter().cloned().collect(),
        lemma_bigram: bigrams(&lemmas),
        pos: a.pos_tags.iter().cloned().collect(),
        pos_bigram: bigrams(&a.pos_tags),
    }
}

/// Binary feature space over five namespaces: named-entity tags, lemmas,
/// lemma bigrams, POS tags and POS bigrams. Indices are assigned in that
/// namespace order, sorted within each namespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    ne: BTreeMap<String, u32>,
    lemma: BTreeMap<String, u32>,
    lemma_bigram: BTreeMap<String, u32>,
    pos: BTreeMap<String, u32>,
    pos_bigram: BTreeMap<String, u32>,
}

impl FeatureSpace {
    pub fn build<'a>(annotations: impl IntoIterator<Item = &'a QuestionAnnotation>) -> Self {
        let mut all = Items {
            ne: BTreeSet::new(),
            lemma: BTreeSet::new(),
            lemma_bigram: BTreeSet::new(),
            pos: BTreeSet::new(),
            pos_bigram: BTreeSet::new(),
        };
        for a in annotations {
            let it = items(a);
            all.ne.extend(it.ne);
            all.lemma.extend(it.lemma);
            all.lemma_bigram.extend(it.lemma_bigram);
            all.pos.extend(it.pos);
            all.pos_bigram.extend(it.pos_bigram);
        }
        let mut next = 0u32;
        let mut assign = |set: BTreeSet<String>| -> BTreeMap<String, u32> {
            set.into_iter()
                .map(|s| {
                    let i = next;
                    next += 1;
                    (s, i)
                })
                .collect()
        };
        Self {
            ne: assign(all.ne),
            lemma: assign(all.lemma),
            lemma_bigram: assign(all.lemma_bigram),
            pos: assign(all.pos),
            pos_bigram: assign(all.pos_bigram),
        }
    }

    /// Namespace sizes in index order.
    pub fn sizes(&self) -> [usize; 5] {
        [
            self.ne.len(),
            self.lemma.len(),
            self.lemma_bigram.len(),
            self.pos.len(),
            self.pos_bigram.len(),
        ]
    }

    pub fn total_dim(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// Sorted, distinct active indices. Out-of-vocabulary items are dropped.
    pub fn extract(&self, annotation: &QuestionAnnotation) -> Vec<u32> {
        let it = items(annotation);
        let mut out: Vec<u32> = Vec::new();
        for (set, vocab) in [
            (&it.ne, &self.ne),
            (&it.lemma, &self.lemma),
            (&it.lemma_bigram, &self.lemma_bigram),
            (&it.pos, &self.pos),
            (&it.pos_bigram, &self.pos_bigram),
        ] {
            out.extend(set.iter().filter_map(|s| vocab.get(s)));
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn extract_features(annotation: &QuestionAnnotation, space: &FeatureSpace) -> Vec<u32> {
    space.extract(annotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtype::annotate::{Annotator, NamedEntity, RuleAnnotator};
    use proptest::prelude::*;

    fn who_won() -> QuestionAnnotation {
        QuestionAnnotation {
            tokens: vec!["Who".into(), "won".into()],
            lemmas: vec!["who".into(), "win".into()],
            pos_tags: vec!["WP".into(), "VBD".into()],
            entities: vec![],
        }
    }

    #[test]
    fn who_won_has_six_features() {
        let other = QuestionAnnotation {
            tokens: vec!["Paris".into()],
            lemmas: vec!["paris".into()],
            pos_tags: vec!["NNP".into()],
            entities: vec![NamedEntity { surface: "Paris".into(), tag: "GPE".into() }],
        };
        let space = FeatureSpace::build([&who_won(), &other]);
        assert_eq!(space.sizes(), [1, 3, 1, 3, 1]);
        assert_eq!(space.total_dim(), 9);
        let f = space.extract(&who_won());
        assert_eq!(f.len(), 6);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
        assert!(f.iter().all(|&i| (i as usize) < space.total_dim()));
    }

    #[test]
    fn empty_annotation_is_zero_vector() {
        let space = FeatureSpace::build([&who_won()]);
        assert!(space.extract(&QuestionAnnotation::default()).is_empty());
    }

    #[test]
    fn unseen_items_dropped() {
        let space = FeatureSpace::build([&who_won()]);
        let a = RuleAnnotator::new().annotate("Who lost the war?");
        // `who`, `VBD`, `WP` and `WP_VBD` are known; `lose`, `war` and their bigrams are not
        assert_eq!(space.extract(&a), vec![0, 3, 4, 5]);
    }

    proptest! {
        #[test]
        fn indices_in_range_and_distinct(train in "[A-Za-z ?]{0,40}", q in "[A-Za-z ?]{0,40}") {
            let ann = RuleAnnotator::new();
            let space = FeatureSpace::build([&ann.annotate(&train)]);
            let f = space.extract(&ann.annotate(&q));
            prop_assert!(f.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(f.iter().all(|&i| (i as usize) < space.total_dim()));
        }
    }
}

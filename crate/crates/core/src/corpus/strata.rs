use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Document, DocumentSet, SamplingRecord};
use crate::error::{read_to_string, Error, Result};

/// Inclusive rank bands the percentages `x1`, `x2`, `x3` draw from.
pub const BANDS: [(u32, u32); 3] = [(1, 10), (11, 25), (26, 50)];

/// A stratified document-collection recipe: `x1`% of the documents come from
/// ranks 1-10, `x2`% from 11-25 and `x3`% from 26-50.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrataSpec {
    pub name: String,
    pub x1: u32,
    pub x2: u32,
    pub x3: u32,
    #[serde(default = "default_size")]
    pub size: usize,
    pub seed: u64,
}

fn default_size() -> usize {
    10
}

impl StrataSpec {
    pub fn new(name: impl Into<String>, x: [u32; 3], size: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            x1: x[0],
            x2: x[1],
            x3: x[2],
            size,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The six standard collections: `Top10` and `Strata-1` through `Strata-5`.
    pub fn standard(seed: u64) -> Vec<StrataSpec> {
        const TABLE: [(&str, [u32; 3]); 6] = [
            ("Top10", [100, 0, 0]),
            ("Strata-1", [60, 30, 10]),
            ("Strata-2", [50, 40, 10]),
            ("Strata-3", [50, 30, 20]),
            ("Strata-4", [40, 40, 20]),
            ("Strata-5", [40, 30, 30]),
        ];
        TABLE
            .iter()
            .map(|(name, x)| StrataSpec::new(*name, *x, 10, seed).expect("standard strata are valid"))
            .collect()
    }

    /// Looks up a standard collection by name (case-insensitive).
    pub fn named(name: &str, seed: u64) -> Option<StrataSpec> {
        Self::standard(seed)
            .into_iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: StrataSpec = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x1 + self.x2 + self.x3 != 100 {
            return Err(Error::InvalidStrata(format!(
                "{}: percentages sum to {}, not 100",
                self.name,
                self.x1 + self.x2 + self.x3
            )));
        }
        if self.size == 0 {
            return Err(Error::InvalidStrata(format!("{}: sample size is zero", self.name)));
        }
        Ok(())
    }

    /// Documents drawn from each band. Each share is rounded half away from
    /// zero, then the largest band absorbs any rounding surplus or deficit.
    pub fn band_counts(&self) -> [usize; 3] {
        let x = [self.x1, self.x2, self.x3];
        let mut counts = x.map(|xi| (xi as f64 * self.size as f64 / 100.0).round() as i64);
        let diff = self.size as i64 - counts.iter().sum::<i64>();
        if diff != 0 {
            let largest = (0..3).fold(0, |best, i| if counts[i] > counts[best] { i } else { best });
            counts[largest] += diff;
        }
        counts.map(|c| c.max(0) as usize)
    }
}

/// How per-question sampling seeds are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Each question gets a seed derived from the strata seed and its id.
    #[default]
    PerQuestion,
    /// Every question uses the strata seed directly.
    Global,
}

/// Derives a question-specific seed from a global seed.
pub fn question_seed(global: u64, question_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(question_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Draws `spec.size` documents without replacement, uniformly within each
/// rank band, using `spec.seed` as given. Output is ordered by original rank.
pub fn sample_strata(ranked_docs: &[Document], spec: &StrataSpec) -> Result<DocumentSet> {
    spec.validate()?;
    let question_id = match ranked_docs.first() {
        Some(d) => d.question_id.clone(),
        None => String::new(),
    };
    if ranked_docs.iter().any(|d| d.question_id != question_id) {
        return Err(Error::Contract("documents from several questions passed to one draw".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = Vec::with_capacity(spec.size);
    for (&(lo, hi), count) in BANDS.iter().zip(spec.band_counts()) {
        let mut band: Vec<&Document> = ranked_docs
            .iter()
            .filter(|d| (lo..=hi).contains(&d.original_rank))
            .collect();
        band.sort_by_key(|d| d.original_rank);
        if band.len() < count {
            return Err(Error::UnderfullBand {
                band: format!("{lo}-{hi}"),
                needed: count,
                available: band.len(),
            });
        }
        if count == 0 {
            continue;
        }
        for i in index::sample(&mut rng, band.len(), count) {
            chosen.push(band[i].clone());
        }
    }
    chosen.sort_by_key(|d| d.original_rank);

    let mut set = DocumentSet::new(question_id, chosen)?;
    set.sampling = Some(SamplingRecord {
        strata: spec.name.clone(),
        seed: spec.seed,
    });
    Ok(set)
}

/// Samples one question's documents, deriving the seed per `mode`.
pub fn sample_question(ranked_docs: &[Document], spec: &StrataSpec, mode: SeedMode) -> Result<DocumentSet> {
    match mode {
        SeedMode::Global => sample_strata(ranked_docs, spec),
        SeedMode::PerQuestion => {
            let qid = ranked_docs.first().map(|d| d.question_id.as_str()).unwrap_or("");
            let derived = StrataSpec {
                seed: question_seed(spec.seed, qid),
                ..spec.clone()
            };
            sample_strata(ranked_docs, &derived)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(n: u32) -> Vec<Document> {
        (1..=n).map(|r| Document::new("q1", r, format!("doc {r}"))).collect()
    }

    fn band_histogram(set: &DocumentSet) -> [usize; 3] {
        let mut h = [0; 3];
        for d in &set.documents {
            let b = BANDS.iter().position(|&(lo, hi)| (lo..=hi).contains(&d.original_rank)).unwrap();
            h[b] += 1;
        }
        h
    }

    #[test]
    fn standard_band_counts() {
        let counts: Vec<[usize; 3]> = StrataSpec::standard(0).iter().map(|s| s.band_counts()).collect();
        assert_eq!(
            counts,
            vec![[10, 0, 0], [6, 3, 1], [5, 4, 1], [5, 3, 2], [4, 4, 2], [4, 3, 3]]
        );
    }

    #[test]
    fn strata3_draws_per_band() {
        let spec = StrataSpec::named("strata-3", 7).unwrap();
        let set = sample_strata(&ranked(50), &spec).unwrap();
        assert_eq!(set.k(), 10);
        assert_eq!(band_histogram(&set), [5, 3, 2]);
        assert_eq!(set.sampling.as_ref().unwrap().seed, 7);
    }

    #[test]
    fn top10_is_the_first_ten() {
        let spec = StrataSpec::named("Top10", 99).unwrap();
        let set = sample_strata(&ranked(50), &spec).unwrap();
        let ranks: Vec<u32> = set.documents.iter().map(|d| d.original_rank).collect();
        assert_eq!(ranks, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_draw() {
        let spec = StrataSpec::named("Strata-5", 1234).unwrap();
        let a = sample_strata(&ranked(50), &spec).unwrap();
        let b = sample_strata(&ranked(50), &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn underfull_band_is_named() {
        let spec = StrataSpec::named("Strata-5", 1).unwrap();
        match sample_strata(&ranked(27), &spec) {
            Err(Error::UnderfullBand { band, needed, available }) => {
                assert_eq!(band, "26-50");
                assert_eq!((needed, available), (3, 2));
            }
            other => panic!("expected underfull band, got {other:?}"),
        }
        let err = sample_strata(&ranked(20), &spec).unwrap_err();
        assert!(err.to_string().contains("26-50"));
    }

    #[test]
    fn custom_rounding_sums_to_size() {
        let spec = StrataSpec::new("odd", [34, 33, 33], 3, 0).unwrap();
        assert_eq!(spec.band_counts(), [1, 1, 1]);
        let spec = StrataSpec::new("odd", [45, 45, 10], 7, 0).unwrap();
        // 3.15 -> 3, 3.15 -> 3, 0.7 -> 1; sum 7
        assert_eq!(spec.band_counts(), [3, 3, 1]);
        let spec = StrataSpec::new("odd", [50, 50, 0], 5, 0).unwrap();
        // 2.5 -> 3, 2.5 -> 3; largest (first) absorbs -1
        assert_eq!(spec.band_counts(), [2, 3, 0]);
        assert!(StrataSpec::new("bad", [50, 30, 10], 10, 0).is_err());
    }

    #[test]
    fn per_question_seeds_differ() {
        assert_ne!(question_seed(1, "q1"), question_seed(1, "q2"));
        assert_eq!(question_seed(1, "q1"), question_seed(1, "q1"));
        let spec = StrataSpec::named("Strata-1", 5).unwrap();
        let set = sample_question(&ranked(50), &spec, SeedMode::PerQuestion).unwrap();
        assert_eq!(set.sampling.unwrap().seed, question_seed(5, "q1"));
    }
}

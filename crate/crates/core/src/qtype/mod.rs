//! Answer-type classification: question annotation, binary lexical and
//! syntactic features, linear one-vs-rest classifiers and the mapping from
//! answer types to entity tags.

mod annotate;
mod features;
mod linear;
mod taxonomy;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use annotate::{lemmatize, Annotator, ExternalAnnotations, NamedEntity, QuestionAnnotation, RuleAnnotator};
pub use features::{extract_features, FeatureSpace};
pub use linear::{binary, train_linear, HyperParams, LinearModel, SparseVec};
pub use taxonomy::{map_answer_types, AnswerTypeMap, CoarseClass, Taxonomy};

use crate::entities::OntoTag;
use crate::error::{Error, Result};
use crate::scoring::EmbeddingProvider;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerTypePrediction {
    /// Coarse code, e.g. `LOC`.
    pub coarse: String,
    /// Fine label `COARSE:fine`. `None` when the fine classifier disagreed
    /// with the coarse family and fine predictions are not constrained.
    pub fine: Option<String>,
    pub accepted_tags: BTreeSet<OntoTag>,
}

pub trait AnswerTypeClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<AnswerTypePrediction>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuestion {
    /// `COARSE:fine`
    pub label: String,
    pub text: String,
}

impl LabeledQuestion {
    pub fn coarse(&self) -> &str {
        self.label.split_once(':').map_or(self.label.as_str(), |(c, _)| c)
    }
}

/// Parses `COARSE:fine question text` lines (label separated by a tab or
/// space). Bytes that are not valid UTF-8 are replaced.
pub fn parse_labeled(bytes: &[u8], source_name: &str, taxonomy: &Taxonomy) -> Result<Vec<LabeledQuestion>> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, question) = line
            .split_once(|c: char| c.is_whitespace())
            .ok_or_else(|| Error::parse(source_name, i + 1, "expected `LABEL question`"))?;
        taxonomy.split_label(label)?;
        out.push(LabeledQuestion {
            label: label.to_string(),
            text: question.trim().to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptySet(format!("no labeled questions in {source_name}")));
    }
    Ok(out)
}

pub fn load_labeled(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<LabeledQuestion>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labeled(&bytes, &path.display().to_string(), taxonomy)
}

/// Seeded split: the first `round(train_fraction * n)` of a shuffled copy
/// form the training part.
pub fn split_train_test(data: &[LabeledQuestion], train_fraction: f64, seed: u64) -> (Vec<LabeledQuestion>, Vec<LabeledQuestion>) {
    let mut shuffled = data.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((train_fraction * data.len() as f64).round() as usize).min(data.len());
    let test = shuffled.split_off(cut);
    (shuffled, test)
}

/// Accuracy on `test` of always answering the most frequent coarse class of
/// `train` (ties go to the class that sorts first).
pub fn majority_baseline(train: &[LabeledQuestion], test: &[LabeledQuestion]) -> (String, f64) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for q in train {
        *counts.entry(q.coarse()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (&c, &n) in &counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((c, n));
        }
    }
    let class = best.map(|(c, _)| c.to_string()).unwrap_or_default();
    let hits = test.iter().filter(|q| q.coarse() == class).count();
    (class, ratio(hits, test.len()))
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Fraction of `test` whose predicted coarse class matches the gold one.
pub fn coarse_accuracy(classifier: &dyn AnswerTypeClassifier, test: &[LabeledQuestion]) -> Result<f64> {
    let mut hits = 0;
    for q in test {
        if classifier.classify(&q.text)?.coarse == q.coarse() {
            hits += 1;
        }
    }
    Ok(ratio(hits, test.len()))
}

/// Coarse and fine predictions resolved to a taxonomy-consistent answer type.
fn resolve(
    taxonomy: &Taxonomy,
    map: &AnswerTypeMap,
    coarse: &str,
    fine_scores: &[(String, f64)],
    constrain_fine: bool,
) -> Result<AnswerTypePrediction> {
    let in_family = |label: &str| label.split_once(':').is_some_and(|(c, _)| c == coarse);
    let mut best: Option<(&str, f64)> = None;
    for (label, score) in fine_scores {
        if constrain_fine && !in_family(label) {
            continue;
        }
        if best.is_none_or(|(_, s)| *score > s) {
            best = Some((label, *score));
        }
    }
    let fine = best.map(|(l, _)| l.to_string()).filter(|l| in_family(l));
    let accepted_tags = map_answer_types(taxonomy, map, coarse, fine.as_deref())?;
    Ok(AnswerTypePrediction {
        coarse: coarse.to_string(),
        fine,
        accepted_tags,
    })
}

fn labeled_scores(model: &LinearModel, x: &[(u32, f64)]) -> Vec<(String, f64)> {
    model.classes.iter().cloned().zip(model.scores(x)).collect()
}

/// Serialized linear classifier over the binary question feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub space: FeatureSpace,
    pub coarse: LinearModel,
    pub fine: LinearModel,
}

impl SvmModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// Trains independent coarse and fine classifiers. Labels are validated
/// against `taxonomy`.
pub fn train_svm(
    data: &[LabeledQuestion],
    annotator: &dyn Annotator,
    taxonomy: &Taxonomy,
    params: HyperParams,
) -> Result<SvmModel> {
    for q in data {
        taxonomy.split_label(&q.label)?;
    }
    let annotations: Vec<QuestionAnnotation> = data.iter().map(|q| annotator.annotate(&q.text)).collect();
    let space = FeatureSpace::build(&annotations);
    let xs: Vec<SparseVec> = annotations.iter().map(|a| binary(&space.extract(a))).collect();
    let coarse: Vec<(SparseVec, String)> = xs.iter().cloned().zip(data.iter().map(|q| q.coarse().to_string())).collect();
    let fine: Vec<(SparseVec, String)> = xs.into_iter().zip(data.iter().map(|q| q.label.clone())).collect();
    let dim = space.total_dim();
    Ok(SvmModel {
        coarse: train_linear(&coarse, dim, params)?,
        fine: train_linear(&fine, dim, params)?,
        space,
    })
}

pub struct SvmClassifier {
    pub model: SvmModel,
    pub annotator: Arc<dyn Annotator>,
    pub taxonomy: Taxonomy,
    pub type_map: AnswerTypeMap,
    /// Restrict the fine argmax to the predicted coarse family.
    pub constrain_fine: bool,
}

impl SvmClassifier {
    pub fn new(model: SvmModel, annotator: Arc<dyn Annotator>) -> Self {
        Self {
            model,
            annotator,
            taxonomy: Taxonomy::builtin(),
            type_map: AnswerTypeMap::builtin(),
            constrain_fine: false,
        }
    }
}

impl AnswerTypeClassifier for SvmClassifier {
    fn classify(&self, text: &str) -> Result<AnswerTypePrediction> {
        let x = binary(&self.model.space.extract(&self.annotator.annotate(text)));
        let coarse = self.model.coarse.predict(&x);
        resolve(&self.taxonomy, &self.type_map, coarse, &labeled_scores(&self.model.fine, &x), self.constrain_fine)
    }
}

/// Linear classifier over dense question embeddings from an external encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub provider_id: String,
    pub coarse: LinearModel,
    pub fine: LinearModel,
}

impl EmbeddingModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

fn dense(values: &[f64]) -> SparseVec {
    values.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect()
}

pub fn train_embedding(
    data: &[LabeledQuestion],
    provider: &dyn EmbeddingProvider,
    taxonomy: &Taxonomy,
    params: HyperParams,
) -> Result<EmbeddingModel> {
    let mut coarse = Vec::with_capacity(data.len());
    let mut fine = Vec::with_capacity(data.len());
    for q in data {
        taxonomy.split_label(&q.label)?;
        let x = dense(&provider.embed(&q.text)?.values);
        coarse.push((x.clone(), q.coarse().to_string()));
        fine.push((x, q.label.clone()));
    }
    Ok(EmbeddingModel {
        provider_id: provider.id().to_string(),
        coarse: train_linear(&coarse, provider.dim(), params)?,
        fine: train_linear(&fine, provider.dim(), params)?,
    })
}

pub struct EmbeddingClassifier {
    pub model: EmbeddingModel,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub taxonomy: Taxonomy,
    pub type_map: AnswerTypeMap,
    pub constrain_fine: bool,
}

impl EmbeddingClassifier {
    pub fn new(model: EmbeddingModel, provider: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        if model.provider_id != provider.id() {
            return Err(Error::Config(format!(
                "classifier trained on `{}` embeddings but provider is `{}`",
                model.provider_id,
                provider.id()
            )));
        }
        Ok(Self {
            model,
            provider,
            taxonomy: Taxonomy::builtin(),
            type_map: AnswerTypeMap::builtin(),
            constrain_fine: false,
        })
    }
}

impl AnswerTypeClassifier for EmbeddingClassifier {
    fn classify(&self, text: &str) -> Result<AnswerTypePrediction> {
        let x = dense(&self.provider.embed(text)?.values);
        let coarse = self.model.coarse.predict(&x);
        resolve(&self.taxonomy, &self.type_map, coarse, &labeled_scores(&self.model.fine, &x), self.constrain_fine)
    }
}

/// Classifier that always answers one fixed type.
#[derive(Debug, Clone)]
pub struct FixedClassifier(pub AnswerTypePrediction);

impl AnswerTypeClassifier for FixedClassifier {
    fn classify(&self, _text: &str) -> Result<AnswerTypePrediction> {
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRAIN: &str = "\
HUM:ind Who wrote Hamlet ?
HUM:ind Who painted the Mona Lisa ?
HUM:ind Which actor played in Troy and Seven ?
HUM:ind Who was the first president of the United States ?
HUM:ind Which singer recorded Thriller ?
HUM:gr What company makes the iPhone ?
LOC:city What city hosted the 1992 Olympics ?
LOC:other Where is the Eiffel Tower ?
LOC:other Where in France is Lyon located ?
LOC:country What country borders Spain ?
LOC:other Where is Mount Everest located ?
NUM:date When did World War II end ?
NUM:date When was the telephone invented ?
NUM:count How many moons does Mars have ?
NUM:money How much does a Tesla cost ?
ENTY:animal What animal is the largest mammal ?
ENTY:sport What sport does Messi play ?
";

    fn data() -> Vec<LabeledQuestion> {
        parse_labeled(TRAIN.as_bytes(), "train", &Taxonomy::builtin()).unwrap()
    }

    fn classifier() -> SvmClassifier {
        let annotator: Arc<dyn Annotator> = Arc::new(RuleAnnotator::new());
        let model = train_svm(&data(), annotator.as_ref(), &Taxonomy::builtin(), HyperParams { lambda: 0.01, epochs: 50, seed: 1 }).unwrap();
        SvmClassifier::new(model, annotator)
    }

    #[test]
    fn parses_space_and_tab_separated_labels() {
        let t = Taxonomy::builtin();
        let qs = parse_labeled(b"LOC:city\tWhat city ?\nHUM:ind Who \xe9 ?\n", "x", &t).unwrap();
        assert_eq!(qs[0].label, "LOC:city");
        assert_eq!(qs[0].text, "What city ?");
        assert_eq!(qs[1].coarse(), "HUM");
        assert!(matches!(parse_labeled(b"LOC:moon Which ?", "x", &t), Err(Error::UnknownLabel(l)) if l == "LOC:moon"));
    }

    #[test]
    fn classifies_examples() {
        let c = classifier();
        let p = c.classify("Which actor played in Troy and Seven?").unwrap();
        assert!(p.accepted_tags.contains(&OntoTag::Person));
        let p = c.classify("Where in New Zealand is the Tomb of the Unknown Warrior located?").unwrap();
        assert_eq!(p.coarse, "LOC");
        assert!(p.accepted_tags.contains(&OntoTag::Gpe));
    }

    #[test]
    fn fine_label_stays_in_family() {
        let mut c = classifier();
        for constrain in [false, true] {
            c.constrain_fine = constrain;
            for q in data() {
                let p = c.classify(&q.text).unwrap();
                if let Some(f) = &p.fine {
                    assert!(f.starts_with(&format!("{}:", p.coarse)));
                }
                if constrain {
                    assert!(p.fine.is_some());
                }
                assert!(!p.accepted_tags.is_empty());
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let a = classifier();
        let b = classifier();
        assert_eq!(a.model, b.model);
        let json = a.model.to_json();
        assert_eq!(serde_json::from_str::<SvmModel>(&json).unwrap(), a.model);
    }

    #[test]
    fn split_and_baseline() {
        let d = data();
        let (train, test) = split_train_test(&d, 0.9, 7);
        assert_eq!(train.len() + test.len(), d.len());
        assert_eq!(train.len(), 15);
        assert_eq!(split_train_test(&d, 0.9, 7), (train.clone(), test.clone()));
        let (class, _) = majority_baseline(&d, &d);
        assert_eq!(class, "HUM");
        let (_, acc) = majority_baseline(&d, &d);
        assert!((acc - 6.0 / 17.0).abs() < 1e-12);
    }
}

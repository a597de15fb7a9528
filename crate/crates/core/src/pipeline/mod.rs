//! End-to-end driver: resource loading, per-question processing, run files,
//! multi-run evaluation, the component ablation grid and latency timing.

mod ablation;
mod config;
mod latency;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation, AblationGrid, AblationReport, AblationRow};
pub use config::{ClassifierKind, DataPaths, NerKind, PipelineConfig, ProviderKind};
pub use latency::{run_latency_bench, Comparison, LatencyColumn, LatencyReport};

use crate::corpus::{load_documents, load_questions, sample_question, ContractionTable, DocumentSet, Question, RuleSegmenter, SourceSet, StrataSpec};
use crate::entities::{build_pool, filter_by_type, AnnotationStore, CandidatePool, Gazetteer, NerBackend};
use crate::error::{Error, Result};
use crate::evaluation::{compare_reports, evaluate_run, judgments_from_questions, load_qrels, EvalOptions, Judgment, Metric, MetricReport, SignificanceResult};
use crate::qtype::{
    load_labeled, train_embedding, train_svm, Annotator, AnswerTypeClassifier, AnswerTypeMap, AnswerTypePrediction, EmbeddingClassifier,
    EmbeddingModel, ExternalAnnotations, HyperParams, RuleAnnotator, SvmClassifier, SvmModel, Taxonomy,
};
use crate::ranking::{rank_answers, runs_jsonl, ScoredCandidate, TiedRun};
use crate::scoring::{aggregate, build_evidence, EmbeddingCache, EmbeddingProvider, EvidenceSet, WordAverageProvider};

/// Everything loaded once before questions are processed.
#[derive(Clone)]
pub struct Resources {
    pub classifier: Arc<dyn AnswerTypeClassifier>,
    pub ner: Arc<dyn NerBackend>,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub contractions: Arc<ContractionTable>,
    pub segmenter: Arc<RuleSegmenter>,
    /// Wall-clock seconds spent loading (and training) the above.
    pub load_seconds: f64,
}

pub fn load_provider(cfg: &PipelineConfig, kind: ProviderKind) -> Result<Arc<dyn EmbeddingProvider>> {
    Ok(match kind {
        ProviderKind::WordAvg => Arc::new(WordAverageProvider::load(&cfg.require("vectors", &cfg.paths.vectors)?)?),
        ProviderKind::Cache => Arc::new(EmbeddingCache::load(&cfg.require("embedding_cache", &cfg.paths.embedding_cache)?)?),
    })
}

pub fn load_ner(cfg: &PipelineConfig) -> Result<Arc<dyn NerBackend>> {
    Ok(match cfg.ner_backend {
        NerKind::Gazetteer => Arc::new(Gazetteer::load(&cfg.require("gazetteer", &cfg.paths.gazetteer)?)?),
        NerKind::Annotations => Arc::new(AnnotationStore::load(&cfg.require("entity_annotations", &cfg.paths.entity_annotations)?)?),
    })
}

pub fn load_taxonomy(cfg: &PipelineConfig) -> Result<(Taxonomy, AnswerTypeMap)> {
    let taxonomy = match cfg.optional("taxonomy", &cfg.paths.taxonomy)? {
        Some(p) => Taxonomy::load(&p)?,
        None => Taxonomy::builtin(),
    };
    let map = match cfg.optional("answer_types", &cfg.paths.answer_types)? {
        Some(p) => AnswerTypeMap::load(&p)?,
        None => AnswerTypeMap::builtin(),
    };
    Ok((taxonomy, map))
}

/// The question annotator: external annotations when configured, otherwise
/// the rule annotator (typing entities with the gazetteer if one is set).
pub fn load_annotator(cfg: &PipelineConfig) -> Result<Arc<dyn Annotator>> {
    if let Some(p) = cfg.optional("question_annotations", &cfg.paths.question_annotations)? {
        return Ok(Arc::new(ExternalAnnotations::load(&p)?));
    }
    Ok(match cfg.optional("gazetteer", &cfg.paths.gazetteer)? {
        Some(p) => Arc::new(RuleAnnotator::with_gazetteer(Gazetteer::load(&p)?)),
        None => Arc::new(RuleAnnotator::new()),
    })
}

pub fn qc_hyperparams(cfg: &PipelineConfig) -> HyperParams {
    HyperParams {
        lambda: cfg.qc_lambda,
        epochs: cfg.qc_epochs,
        seed: cfg.seed,
    }
}

/// Loads or trains the answer-type classifier of the given kind. The
/// embedding classifier embeds questions with `paths.question_embeddings`
/// when set, else with `provider`.
pub fn load_classifier(
    cfg: &PipelineConfig,
    kind: ClassifierKind,
    provider: &Arc<dyn EmbeddingProvider>,
) -> Result<Arc<dyn AnswerTypeClassifier>> {
    let (taxonomy, type_map) = load_taxonomy(cfg)?;
    match kind {
        ClassifierKind::Svm => {
            let annotator = load_annotator(cfg)?;
            let model = match cfg.optional("qc_model", &cfg.paths.qc_model)? {
                Some(p) => SvmModel::load(&p)?,
                None => {
                    let data = load_labeled(&cfg.require("qc_training", &cfg.paths.qc_training)?, &taxonomy)?;
                    train_svm(&data, annotator.as_ref(), &taxonomy, qc_hyperparams(cfg))?
                }
            };
            let mut c = SvmClassifier::new(model, annotator);
            c.taxonomy = taxonomy;
            c.type_map = type_map;
            c.constrain_fine = cfg.constrain_fine;
            Ok(Arc::new(c))
        }
        ClassifierKind::ExternalEmbedding => {
            let qprovider: Arc<dyn EmbeddingProvider> = match cfg.optional("question_embeddings", &cfg.paths.question_embeddings)? {
                Some(p) => Arc::new(EmbeddingCache::load(&p)?),
                None => provider.clone(),
            };
            let model = match cfg.optional("qc_embedding_model", &cfg.paths.qc_embedding_model)? {
                Some(p) => EmbeddingModel::load(&p)?,
                None => {
                    let data = load_labeled(&cfg.require("qc_training", &cfg.paths.qc_training)?, &taxonomy)?;
                    train_embedding(&data, qprovider.as_ref(), &taxonomy, qc_hyperparams(cfg))?
                }
            };
            let mut c = EmbeddingClassifier::new(model, qprovider)?;
            c.taxonomy = taxonomy;
            c.type_map = type_map;
            c.constrain_fine = cfg.constrain_fine;
            Ok(Arc::new(c))
        }
    }
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let started = Instant::now();
        let provider = load_provider(cfg, cfg.embedding_provider)?;
        let classifier = load_classifier(cfg, cfg.classifier, &provider)?;
        let ner = load_ner(cfg)?;
        let contractions = match cfg.optional("contractions", &cfg.paths.contractions)? {
            Some(p) => ContractionTable::load(&p)?,
            None => ContractionTable::builtin(),
        };
        let segmenter = match cfg.optional("abbreviations", &cfg.paths.abbreviations)? {
            Some(p) => RuleSegmenter::load(&p)?,
            None => RuleSegmenter::default(),
        };
        Ok(Self {
            classifier,
            ner,
            provider,
            contractions: Arc::new(contractions),
            segmenter: Arc::new(segmenter),
            load_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// Questions, their (unprepared) document sets and judgments.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub questions: Vec<Question>,
    pub docsets: BTreeMap<String, DocumentSet>,
    /// Questions whose document set could not be built, with the reason.
    pub docset_errors: BTreeMap<String, String>,
    pub judgments: BTreeMap<String, Judgment>,
}

impl Dataset {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let questions = load_questions(&cfg.require("questions", &cfg.paths.questions)?, SourceSet::Custom)?;
        let documents = load_documents(&cfg.require("documents", &cfg.paths.documents)?)?;
        let judgments = match cfg.optional("qrels", &cfg.paths.qrels)? {
            Some(p) => load_qrels(&p, cfg.match_policy)?,
            None => judgments_from_questions(&questions, cfg.match_policy)?,
        };
        Self::from_parts(cfg, questions, documents, judgments)
    }

    pub fn from_parts(
        cfg: &PipelineConfig,
        questions: Vec<Question>,
        documents: BTreeMap<String, Vec<crate::corpus::Document>>,
        judgments: BTreeMap<String, Judgment>,
    ) -> Result<Self> {
        let spec = match &cfg.collection {
            Some(name) => Some(
                StrataSpec::named(name, cfg.seed).ok_or_else(|| Error::Config(format!("unknown collection `{name}`")))?,
            ),
            None => None,
        };
        let mut docsets = BTreeMap::new();
        let mut docset_errors = BTreeMap::new();
        for (qid, docs) in documents {
            let built = match &spec {
                Some(spec) => sample_question(&docs, spec, cfg.seed_mode),
                None => DocumentSet::new(qid.clone(), docs),
            };
            match built {
                Ok(set) => {
                    docsets.insert(qid, set);
                }
                Err(e) => {
                    docset_errors.insert(qid, e.to_string());
                }
            }
        }
        Ok(Self {
            questions,
            docsets,
            docset_errors,
            judgments,
        })
    }
}

/// Outputs of the stages before scoring is collapsed, reusable across
/// aggregation and combination settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAnalysis {
    pub question_id: String,
    pub prediction: AnswerTypePrediction,
    pub pool: CandidatePool,
    pub evidence: Vec<EvidenceSet>,
}

/// Classifies the question, extracts and filters entities, builds the
/// candidate pool and scores evidence sentences.
pub fn analyze_question(q: &Question, docset: &DocumentSet, res: &Resources, cfg: &PipelineConfig) -> Result<QuestionAnalysis> {
    let docset = docset.clone().prepared(&res.contractions, res.segmenter.as_ref());
    let prediction = res.classifier.classify(&q.text)?;
    let mentions = res.ner.extract(&docset)?;
    let filtered = filter_by_type(&mentions, &prediction.accepted_tags);
    let pool = build_pool(&filtered, &mentions, &docset, &cfg.pool());
    let evidence = build_evidence(&pool, &docset, &q.text, res.provider.as_ref())?;
    Ok(QuestionAnalysis {
        question_id: q.id.clone(),
        prediction,
        pool,
        evidence,
    })
}

/// Aggregates, combines and ranks an analysed question.
pub fn rank_analysis(analysis: &QuestionAnalysis, cfg: &PipelineConfig, config_id: &str) -> Result<TiedRun> {
    let ranking = cfg.ranking();
    let n_docs = analysis.pool.n_docs;
    let mut scored = Vec::with_capacity(analysis.evidence.len());
    for ev in &analysis.evidence {
        let semantic = aggregate(ev, cfg.aggregation, cfg.avgmax_denominator, n_docs)?;
        scored.push(ScoredCandidate::new(&ev.canonical_surface, semantic.value, ev.df, n_docs, &ranking)?);
    }
    Ok(rank_answers(&analysis.question_id, &mut scored, &ranking, config_id))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionError {
    pub question_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config_id: String,
    /// In question-file order; failed questions are absent.
    pub runs: Vec<TiedRun>,
    pub errors: Vec<QuestionError>,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Applies `f` to every question that has a document set, in parallel but
/// with results in question order.
pub(crate) fn per_question<T: Send>(
    dataset: &Dataset,
    workers: usize,
    f: impl Fn(&Question, &DocumentSet) -> Result<T> + Sync,
) -> Result<Vec<(String, std::result::Result<T, String>)>> {
    let work = |q: &Question| {
        let outcome = match dataset.docsets.get(&q.id) {
            Some(set) => f(q, set).map_err(|e| e.to_string()),
            None => Err(dataset
                .docset_errors
                .get(&q.id)
                .cloned()
                .unwrap_or_else(|| Error::MissingDocset(q.id.clone()).to_string())),
        };
        (q.id.clone(), outcome)
    };
    Ok(thread_pool(workers)?.install(|| dataset.questions.par_iter().map(work).collect()))
}

pub fn run_pipeline(cfg: &PipelineConfig, res: &Resources, dataset: &Dataset) -> Result<RunOutput> {
    let config_id = cfg.config_id();
    let results = per_question(dataset, cfg.workers, |q, set| {
        let analysis = analyze_question(q, set, res, cfg)?;
        rank_analysis(&analysis, cfg, &config_id)
    })?;
    let mut out = RunOutput {
        config_id,
        runs: Vec::new(),
        errors: Vec::new(),
    };
    for (question_id, r) in results {
        match r {
            Ok(run) => out.runs.push(run),
            Err(message) => {
                log::error!("question `{question_id}`: {message}");
                out.errors.push(QuestionError { question_id, message });
            }
        }
    }
    Ok(out)
}

/// Every text the configured embedding provider may be asked to embed:
/// questions, prepared document sentences and classifier training questions.
pub fn embedding_texts(cfg: &PipelineConfig, dataset: &Dataset) -> Result<std::collections::BTreeSet<String>> {
    let contractions = match cfg.optional("contractions", &cfg.paths.contractions)? {
        Some(p) => ContractionTable::load(&p)?,
        None => ContractionTable::builtin(),
    };
    let segmenter = match cfg.optional("abbreviations", &cfg.paths.abbreviations)? {
        Some(p) => RuleSegmenter::load(&p)?,
        None => RuleSegmenter::default(),
    };
    let mut texts: std::collections::BTreeSet<String> = dataset.questions.iter().map(|q| q.text.clone()).collect();
    for set in dataset.docsets.values() {
        let set = set.clone().prepared(&contractions, &segmenter);
        texts.extend(set.documents.iter().flat_map(|d| d.sentences.iter().map(|s| s.text.clone())));
    }
    if let Some(p) = cfg.optional("qc_training", &cfg.paths.qc_training)? {
        let (taxonomy, _) = load_taxonomy(cfg)?;
        texts.extend(load_labeled(&p, &taxonomy)?.into_iter().map(|q| q.text));
    }
    Ok(texts)
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Path of the effective-config record written next to an output file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

pub fn config_record(cfg: &PipelineConfig) -> serde_json::Value {
    serde_json::json!({
        "config_id": cfg.config_id(),
        "config": serde_json::from_str::<serde_json::Value>(&cfg.canonical_json()).expect("canonical json parses"),
    })
}

/// Writes the run file and its config sidecar.
pub fn write_run(path: &Path, output: &RunOutput, cfg: &PipelineConfig) -> Result<()> {
    write_atomic(path, &runs_jsonl(&output.runs))?;
    let mut record = config_record(cfg);
    record["errors"] = serde_json::to_value(&output.errors).expect("errors serialize");
    write_atomic(&sidecar_path(path), &format!("{}\n", serde_json::to_string_pretty(&record).expect("record serializes")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub run_a: String,
    pub run_b: String,
    pub result: SignificanceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<MetricReport>,
    pub tests: Vec<PairwiseTest>,
}

impl Evaluation {
    /// Mean-metric table; with two or more runs, the first is the baseline
    /// for significance markers.
    pub fn summary_csv(&self) -> Result<String> {
        crate::evaluation::summary_csv(&self.reports, (self.reports.len() > 1).then_some(0))
    }

    pub fn significance_csv(&self) -> String {
        let rows: Vec<(String, String, SignificanceResult)> = self
            .tests
            .iter()
            .map(|t| (t.run_a.clone(), t.run_b.clone(), t.result.clone()))
            .collect();
        crate::evaluation::significance_csv(&rows)
    }
}

/// Evaluates each named run and t-tests every pair on every metric.
pub fn evaluate_runs(runs: &[(String, Vec<TiedRun>)], judgments: &BTreeMap<String, Judgment>, options: EvalOptions) -> Result<Evaluation> {
    let reports = runs
        .iter()
        .map(|(name, r)| evaluate_run(name, r, judgments, options))
        .collect::<Result<Vec<_>>>()?;
    let mut tests = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            if reports[i].per_question.len() < 2 {
                continue;
            }
            for metric in Metric::ALL {
                tests.push(PairwiseTest {
                    run_a: reports[i].run_id.clone(),
                    run_b: reports[j].run_id.clone(),
                    result: compare_reports(&reports[i], &reports[j], metric)?,
                });
            }
        }
    }
    Ok(Evaluation { reports, tests })
}

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    analyze_question, load_classifier, load_provider, per_question, rank_analysis, Dataset, PipelineConfig, QuestionAnalysis,
    QuestionError, Resources,
};
use super::config::{ClassifierKind, ProviderKind};
use crate::error::Result;
use crate::evaluation::{evaluate_run, EvalOptions, Metric};
use crate::ranking::{alpha_beta_grid, CombineMode};
use crate::scoring::Aggregation;

/// Component values to cross.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub classifiers: Vec<ClassifierKind>,
    pub providers: Vec<ProviderKind>,
    pub aggregations: Vec<Aggregation>,
    pub combines: Vec<CombineMode>,
}

impl Default for AblationGrid {
    /// 2 classifiers x 2 providers x 3 aggregations x 2 combinations.
    fn default() -> Self {
        Self {
            classifiers: ClassifierKind::ALL.to_vec(),
            providers: ProviderKind::ALL.to_vec(),
            aggregations: Aggregation::ALL.to_vec(),
            combines: CombineMode::ALL.to_vec(),
        }
    }
}

impl AblationGrid {
    /// The grid holding only the base configuration's own settings.
    pub fn single(cfg: &PipelineConfig) -> Self {
        Self {
            classifiers: vec![cfg.classifier],
            providers: vec![cfg.embedding_provider],
            aggregations: vec![cfg.aggregation],
            combines: vec![cfg.combine],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub classifier: ClassifierKind,
    pub embedding_provider: ProviderKind,
    pub aggregation: Aggregation,
    pub combine: CombineMode,
    /// For additive rows, the best pair of the sweep; otherwise the base values.
    pub alpha: f64,
    pub beta: f64,
    pub config_id: String,
    pub tmrr: f64,
    pub tp_at_1: f64,
    pub thit_at_5: f64,
    pub mrr: f64,
    pub p_at_1: f64,
    pub hit_at_5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub base_config_id: String,
    pub rows: Vec<AblationRow>,
    /// Per-question failures, by `classifier/provider` variant.
    pub errors: BTreeMap<String, Vec<QuestionError>>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("classifier,embedding,aggregation,combine,alpha,beta,tMRR,tP@1,tHit@5,MRR,P@1,Hit@5,config_id\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.1},{:.1},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
                r.classifier, r.embedding_provider, r.aggregation, r.combine, r.alpha, r.beta, r.tmrr, r.tp_at_1, r.thit_at_5, r.mrr,
                r.p_at_1, r.hit_at_5, r.config_id
            ));
        }
        out
    }
}

/// Evaluates every grid cell on `dataset`. Classification, extraction and
/// evidence scoring run once per classifier/provider pair; aggregation and
/// combination reuse them. Additive cells sweep the 49-point alpha/beta
/// grid and keep the pair with the best mean tMRR (first pair on ties).
/// Each row's `config_id` is that of `base` with the row's settings, so
/// `run_pipeline` under that config reproduces the row.
pub fn run_ablation(base: &PipelineConfig, dataset: &Dataset, grid: &AblationGrid) -> Result<AblationReport> {
    let options = EvalOptions { tmrr_mode: base.tmrr_mode };
    let mut report = AblationReport {
        base_config_id: base.config_id(),
        rows: Vec::new(),
        errors: BTreeMap::new(),
    };
    let contractions = Arc::new(match base.optional("contractions", &base.paths.contractions)? {
        Some(p) => crate::corpus::ContractionTable::load(&p)?,
        None => crate::corpus::ContractionTable::builtin(),
    });
    let segmenter = Arc::new(match base.optional("abbreviations", &base.paths.abbreviations)? {
        Some(p) => crate::corpus::RuleSegmenter::load(&p)?,
        None => crate::corpus::RuleSegmenter::default(),
    });
    let ner = super::load_ner(base)?;

    let providers = grid
        .providers
        .iter()
        .map(|&k| Ok((k, load_provider(base, k)?)))
        .collect::<Result<Vec<_>>>()?;
    for &classifier_kind in &grid.classifiers {
        for (provider_kind, provider) in &providers {
            let provider_kind = *provider_kind;
            let classifier = load_classifier(base, classifier_kind, provider)?;
            let res = Resources {
                classifier,
                ner: ner.clone(),
                provider: provider.clone(),
                contractions: contractions.clone(),
                segmenter: segmenter.clone(),
                load_seconds: 0.0,
            };
            let mut variant = base.clone();
            variant.classifier = classifier_kind;
            variant.embedding_provider = provider_kind;

            let mut analyses: Vec<QuestionAnalysis> = Vec::new();
            let mut errors = Vec::new();
            for (question_id, r) in per_question(dataset, base.workers, |q, set| analyze_question(q, set, &res, &variant))? {
                match r {
                    Ok(a) => analyses.push(a),
                    Err(message) => errors.push(QuestionError { question_id, message }),
                }
            }
            if !errors.is_empty() {
                report.errors.insert(format!("{classifier_kind}/{provider_kind}"), errors);
            }

            for &aggregation in &grid.aggregations {
                for &combine in &grid.combines {
                    let mut cell = variant.clone();
                    cell.aggregation = aggregation;
                    cell.combine = combine;
                    let candidates: Vec<(f64, f64)> = match combine {
                        CombineMode::Additive => alpha_beta_grid(),
                        CombineMode::Multiplicative => vec![(base.alpha, base.beta)],
                    };
                    let mut best: Option<AblationRow> = None;
                    for (alpha, beta) in candidates {
                        cell.alpha = alpha;
                        cell.beta = beta;
                        let config_id = cell.config_id();
                        let runs = analyses
                            .iter()
                            .map(|a| rank_analysis(a, &cell, &config_id))
                            .collect::<Result<Vec<_>>>()?;
                        let m = evaluate_run(&config_id, &runs, &dataset.judgments, options)?;
                        if best.as_ref().is_none_or(|b| m.mean(Metric::TMrr) > b.tmrr) {
                            best = Some(AblationRow {
                                classifier: classifier_kind,
                                embedding_provider: provider_kind,
                                aggregation,
                                combine,
                                alpha,
                                beta,
                                config_id,
                                tmrr: m.mean(Metric::TMrr),
                                tp_at_1: m.mean(Metric::TPAt1),
                                thit_at_5: m.mean(Metric::THitAt5),
                                mrr: m.mean(Metric::Mrr),
                                p_at_1: m.mean(Metric::PAt1),
                                hit_at_5: m.mean(Metric::HitAt5),
                            });
                        }
                    }
                    report.rows.extend(best);
                }
            }
        }
    }
    Ok(report)
}

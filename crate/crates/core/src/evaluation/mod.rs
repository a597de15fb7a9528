//! Scoring of tie-grouped runs against gold answers: classical and tie-aware
//! MRR, P@1 and Hit@5, paired significance tests, and per-query differences.

mod metrics;
mod significance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{
    classical_from_groups, classical_metrics, group_relevance, tie_aware_from_groups, tie_aware_metrics,
    ClassicalMetrics, TieAwareMetrics, TmrrMode, HIT_CUTOFF,
};
pub use significance::{paired_t_test, two_sided_p, SignificanceResult, ALPHA};

use crate::corpus::{normalize_surface, Question};
use crate::entities::word_tokens;
use crate::error::{read_to_string, Error, Result};
use crate::ranking::TiedRun;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPolicy {
    /// Normalized strings must be equal.
    Exact,
    /// Equal, or one side's word sequence occurs contiguously in the other's.
    #[default]
    Containment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub question_id: String,
    /// Normalized, deduplicated gold answers.
    pub gold_answers: Vec<String>,
    pub match_policy: MatchPolicy,
}

impl Judgment {
    pub fn new(question_id: impl Into<String>, gold: &[String], match_policy: MatchPolicy) -> Result<Self> {
        let question_id = question_id.into();
        let gold_answers: BTreeSet<String> = gold
            .iter()
            .map(|g| normalize_surface(g))
            .filter(|g| !g.is_empty())
            .collect();
        if gold_answers.is_empty() {
            return Err(Error::EmptySet(format!("gold answer set of `{question_id}`")));
        }
        Ok(Self {
            question_id,
            gold_answers: gold_answers.into_iter().collect(),
            match_policy,
        })
    }

    pub fn from_question(q: &Question, policy: MatchPolicy) -> Result<Self> {
        Self::new(q.id.clone(), &q.gold_answers, policy)
    }
}

fn contains_words(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn match_answer(candidate: &str, judgment: &Judgment) -> bool {
    let candidate = normalize_surface(candidate);
    if candidate.is_empty() {
        return false;
    }
    let words = |s: &str| word_tokens(s).into_iter().map(|t| t.2).collect::<Vec<_>>();
    let candidate_words = words(&candidate);
    judgment.gold_answers.iter().any(|gold| {
        if *gold == candidate {
            return true;
        }
        match judgment.match_policy {
            MatchPolicy::Exact => false,
            MatchPolicy::Containment => {
                let gold_words = words(gold);
                contains_words(&gold_words, &candidate_words) || contains_words(&candidate_words, &gold_words)
            }
        }
    })
}

#[derive(Deserialize)]
struct QrelRecord {
    question_id: String,
    gold_answers: Vec<String>,
}

/// Loads qrels JSONL into judgments keyed by question id.
pub fn parse_qrels(text: &str, source_name: &str, policy: MatchPolicy) -> Result<BTreeMap<String, Judgment>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: QrelRecord = serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
        let judgment =
            Judgment::new(rec.question_id.clone(), &rec.gold_answers, policy).map_err(|e| Error::parse(source_name, i + 1, e))?;
        if out.insert(rec.question_id.clone(), judgment).is_some() {
            return Err(Error::parse(source_name, i + 1, format!("duplicate question `{}`", rec.question_id)));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySet(format!("qrels {source_name}")));
    }
    Ok(out)
}

pub fn load_qrels(path: &Path, policy: MatchPolicy) -> Result<BTreeMap<String, Judgment>> {
    parse_qrels(&read_to_string(path)?, &path.display().to_string(), policy)
}

pub fn judgments_from_questions(questions: &[Question], policy: MatchPolicy) -> Result<BTreeMap<String, Judgment>> {
    questions
        .iter()
        .map(|q| Ok((q.id.clone(), Judgment::from_question(q, policy)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MRR")]
    Mrr,
    #[serde(rename = "P@1")]
    PAt1,
    #[serde(rename = "Hit@5")]
    HitAt5,
    #[serde(rename = "tMRR")]
    TMrr,
    #[serde(rename = "tP@1")]
    TPAt1,
    #[serde(rename = "tHit@5")]
    THitAt5,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Mrr,
        Metric::PAt1,
        Metric::HitAt5,
        Metric::TMrr,
        Metric::TPAt1,
        Metric::THitAt5,
    ];
    pub const TIE_AWARE: [Metric; 3] = [Metric::TMrr, Metric::TPAt1, Metric::THitAt5];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mrr => "MRR",
            Metric::PAt1 => "P@1",
            Metric::HitAt5 => "Hit@5",
            Metric::TMrr => "tMRR",
            Metric::TPAt1 => "tP@1",
            Metric::THitAt5 => "tHit@5",
        }
    }

    pub fn of(self, m: &QuestionMetrics) -> f64 {
        match self {
            Metric::Mrr => m.classical.mrr,
            Metric::PAt1 => m.classical.p_at_1,
            Metric::HitAt5 => m.classical.hit_at_5,
            Metric::TMrr => m.tie_aware.tmrr,
            Metric::TPAt1 => m.tie_aware.tp_at_1,
            Metric::THitAt5 => m.tie_aware.thit_at_5,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMetrics {
    pub question_id: String,
    pub classical: ClassicalMetrics,
    pub tie_aware: TieAwareMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run_id: String,
    pub config_id: String,
    /// Sorted by question id.
    pub per_question: Vec<QuestionMetrics>,
    pub means: BTreeMap<Metric, f64>,
}

impl MetricReport {
    pub fn mean(&self, metric: Metric) -> f64 {
        self.means.get(&metric).copied().unwrap_or(0.0)
    }

    pub fn values(&self, metric: Metric) -> BTreeMap<&str, f64> {
        self.per_question
            .iter()
            .map(|q| (q.question_id.as_str(), metric.of(q)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub tmrr_mode: TmrrMode,
}

/// Scores `runs` over every judged question. Judged questions without a run
/// score zero; runs for unjudged questions are an error.
pub fn evaluate_run(
    run_id: &str,
    runs: &[TiedRun],
    judgments: &BTreeMap<String, Judgment>,
    options: EvalOptions,
) -> Result<MetricReport> {
    let unknown: Vec<String> = runs
        .iter()
        .filter(|r| !judgments.contains_key(&r.question_id))
        .map(|r| r.question_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownQuestions(unknown));
    }
    let by_id: BTreeMap<&str, &TiedRun> = runs.iter().map(|r| (r.question_id.as_str(), r)).collect();
    let config_id = runs.first().map(|r| r.config_id.clone()).unwrap_or_default();

    let per_question: Vec<QuestionMetrics> = judgments
        .iter()
        .map(|(qid, judgment)| {
            let groups = by_id
                .get(qid.as_str())
                .map(|run| group_relevance(run, judgment))
                .unwrap_or_default();
            QuestionMetrics {
                question_id: qid.clone(),
                classical: classical_from_groups(&groups),
                tie_aware: tie_aware_from_groups(&groups, options.tmrr_mode),
            }
        })
        .collect();

    let means = Metric::ALL
        .into_iter()
        .map(|m| {
            let total: f64 = per_question.iter().map(|q| m.of(q)).sum();
            (m, if per_question.is_empty() { 0.0 } else { total / per_question.len() as f64 })
        })
        .collect();
    Ok(MetricReport {
        run_id: run_id.to_string(),
        config_id,
        per_question,
        means,
    })
}

/// Paired t-test of `a - b` on one metric over the shared question set.
pub fn compare_reports(a: &MetricReport, b: &MetricReport, metric: Metric) -> Result<SignificanceResult> {
    let (va, vb) = aligned(a, b, metric)?;
    paired_t_test(metric.name(), &va, &vb)
}

fn aligned(a: &MetricReport, b: &MetricReport, metric: Metric) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ma, mb) = (a.values(metric), b.values(metric));
    let mismatch: Vec<String> = ma
        .keys()
        .filter(|k| !mb.contains_key(*k))
        .chain(mb.keys().filter(|k| !ma.contains_key(*k)))
        .map(|k| k.to_string())
        .collect();
    if !mismatch.is_empty() {
        return Err(Error::UnknownQuestions(mismatch));
    }
    Ok((ma.values().copied().collect(), mb.values().copied().collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDiff {
    pub metric: Metric,
    /// `(question id, a - b)`, largest difference first.
    pub entries: Vec<(String, f64)>,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl QueryDiff {
    pub fn to_csv(&self) -> String {
        let mut out = format!("question_id,{}_diff\n", self.metric.name());
        for (qid, d) in &self.entries {
            out.push_str(&format!("{qid},{d}\n"));
        }
        out
    }
}

pub fn per_query_diff(a: &MetricReport, b: &MetricReport, metric: Metric) -> Result<QueryDiff> {
    aligned(a, b, metric)?;
    let vb = b.values(metric);
    let mut entries: Vec<(String, f64)> = a
        .values(metric)
        .into_iter()
        .map(|(qid, va)| (qid.to_string(), va - vb[qid]))
        .collect();
    entries.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let count = |f: fn(f64) -> bool| entries.iter().filter(|e| f(e.1)).count();
    Ok(QueryDiff {
        metric,
        positive: count(|d| d > 0.0),
        negative: count(|d| d < 0.0),
        zero: count(|d| d == 0.0),
        entries,
    })
}

/// One row per report, one column per metric. With `baseline` set, values
/// significantly different from that report (paired t-test) carry a `*`.
pub fn summary_csv(reports: &[MetricReport], baseline: Option<usize>) -> Result<String> {
    let mut out = String::from("run_id,config_id,questions");
    for m in Metric::ALL {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for (i, r) in reports.iter().enumerate() {
        out.push_str(&format!("{},{},{}", r.run_id, r.config_id, r.per_question.len()));
        for m in Metric::ALL {
            let marker = match baseline {
                Some(b) if b != i && r.per_question.len() >= 2 => {
                    if compare_reports(r, &reports[b], m)?.significant {
                        "*"
                    } else {
                        ""
                    }
                }
                _ => "",
            };
            out.push_str(&format!(",{:.4}{marker}", r.mean(m)));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn significance_csv(rows: &[(String, String, SignificanceResult)]) -> String {
    let mut out = String::from("run_a,run_b,metric,n,mean_difference,t,df,p_value,significant\n");
    for (a, b, s) in rows {
        out.push_str(&format!(
            "{a},{b},{},{},{},{},{},{},{}\n",
            s.metric, s.n, s.mean_difference, s.t, s.df, s.p_value, s.significant
        ));
    }
    out
}

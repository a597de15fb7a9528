//! Combination of semantic score with normalized document frequency, and the
//! tie-grouped top-five answer list.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// Number of tie groups kept in an answer list.
pub const MAX_GROUPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// `alpha * score + beta * df / n_docs`
    Additive,
    /// `score * df / n_docs`
    Multiplicative,
}

impl CombineMode {
    pub const ALL: [CombineMode; 2] = [CombineMode::Additive, CombineMode::Multiplicative];
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMode::Additive => "additive",
            CombineMode::Multiplicative => "multiplicative",
        })
    }
}

impl std::str::FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" | "add" => Ok(CombineMode::Additive),
            "multiplicative" | "mul" => Ok(CombineMode::Multiplicative),
            _ => Err(Error::Config(format!("unknown combine mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub combine: CombineMode,
    pub alpha: f64,
    pub beta: f64,
    /// Combined scores are rounded to this many decimal digits before ties
    /// are detected.
    pub tie_decimals: u32,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            combine: CombineMode::Multiplicative,
            alpha: 0.5,
            beta: 0.5,
            tie_decimals: 9,
        }
    }
}

/// The 49 `(alpha, beta)` pairs over `{0.1, 0.2, ..., 0.7}`, alpha-major.
pub fn alpha_beta_grid() -> Vec<(f64, f64)> {
    let steps: Vec<f64> = (1..=7).map(|i| i as f64 / 10.0).collect();
    steps
        .iter()
        .flat_map(|&a| steps.iter().map(move |&b| (a, b)))
        .collect()
}

pub fn combine(semantic: f64, df: usize, n_docs: usize, config: &RankingConfig) -> Result<f64> {
    if n_docs == 0 {
        return Err(Error::Contract("combining over an empty document set".into()));
    }
    if df > n_docs {
        return Err(Error::Contract(format!("df {df} exceeds document count {n_docs}")));
    }
    let df_norm = df as f64 / n_docs as f64;
    Ok(match config.combine {
        CombineMode::Additive => config.alpha * semantic + config.beta * df_norm,
        CombineMode::Multiplicative => semantic * df_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub canonical_surface: String,
    pub semantic: f64,
    pub df: usize,
    pub df_norm: f64,
    pub combined: f64,
    pub tie_rank: Option<u32>,
}

impl ScoredCandidate {
    pub fn new(canonical_surface: impl Into<String>, semantic: f64, df: usize, n_docs: usize, config: &RankingConfig) -> Result<Self> {
        let combined = combine(semantic, df, n_docs, config)?;
        Ok(Self {
            canonical_surface: canonical_surface.into(),
            semantic,
            df,
            df_norm: df as f64 / n_docs as f64,
            combined,
            tie_rank: None,
        })
    }
}

/// A partially ordered answer list: groups of equally scored answers in
/// descending score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiedRun {
    pub question_id: String,
    pub groups: Vec<Vec<String>>,
    #[serde(default)]
    pub scores: Vec<f64>,
    #[serde(default)]
    pub config_id: String,
}

impl TiedRun {
    pub fn empty(question_id: impl Into<String>, config_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            groups: Vec::new(),
            scores: Vec::new(),
            config_id: config_id.into(),
        }
    }

    /// Checks the structural invariants: at most five non-empty, pairwise
    /// disjoint groups, and strictly decreasing scores when scores are given.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Contract(format!("run for `{}`: {msg}", self.question_id)));
        if self.groups.len() > MAX_GROUPS {
            return fail(format!("{} groups, at most {MAX_GROUPS} allowed", self.groups.len()));
        }
        if !self.scores.is_empty() && self.scores.len() != self.groups.len() {
            return fail(format!("{} scores for {} groups", self.scores.len(), self.groups.len()));
        }
        if self.scores.windows(2).any(|w| w[0] <= w[1]) {
            return fail("group scores are not strictly decreasing".into());
        }
        let mut seen = HashSet::new();
        for group in &self.groups {
            if group.is_empty() {
                return fail("empty group".into());
            }
            for member in group {
                if !seen.insert(member.as_str()) {
                    return fail(format!("`{member}` appears in more than one group"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

fn tie_key(score: f64, decimals: u32) -> i64 {
    (score * 10f64.powi(decimals as i32)).round() as i64
}

/// Groups candidates by rounded combined score, orders groups by score, and
/// keeps the first five. Every candidate in a kept group gets that group's
/// 1-based rank; the rest get none.
pub fn rank_answers(
    question_id: &str,
    scored: &mut [ScoredCandidate],
    config: &RankingConfig,
    config_id: &str,
) -> TiedRun {
    let scale = 10f64.powi(config.tie_decimals as i32);
    let mut groups: BTreeMap<std::cmp::Reverse<i64>, Vec<usize>> = BTreeMap::new();
    for (i, c) in scored.iter().enumerate() {
        if c.combined.is_nan() {
            log::warn!("`{}` has a NaN score; skipped", c.canonical_surface);
            continue;
        }
        groups.entry(std::cmp::Reverse(tie_key(c.combined, config.tie_decimals))).or_default().push(i);
    }
    for c in scored.iter_mut() {
        c.tie_rank = None;
    }
    let mut run = TiedRun::empty(question_id, config_id);
    for (rank, (std::cmp::Reverse(key), members)) in groups.into_iter().take(MAX_GROUPS).enumerate() {
        let mut names: Vec<String> = members
            .iter()
            .map(|&i| {
                scored[i].tie_rank = Some(rank as u32 + 1);
                scored[i].canonical_surface.clone()
            })
            .collect();
        names.sort();
        run.groups.push(names);
        run.scores.push(key as f64 / scale);
    }
    run
}

pub fn runs_jsonl(runs: &[TiedRun]) -> String {
    let mut out = String::new();
    for run in runs {
        out.push_str(&serde_json::to_string(run).expect("run serializes"));
        out.push('\n');
    }
    out
}

/// Parses a run JSONL file. Every run is validated; a question may appear
/// only once.
pub fn parse_runs(text: &str, source_name: &str) -> Result<Vec<TiedRun>> {
    let mut runs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let run: TiedRun = serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
        run.validate().map_err(|e| Error::parse(source_name, i + 1, e))?;
        if !seen.insert(run.question_id.clone()) {
            return Err(Error::parse(
                source_name,
                i + 1,
                format!("second run for question `{}`", run.question_id),
            ));
        }
        runs.push(run);
    }
    Ok(runs)
}

pub fn load_runs(path: &Path) -> Result<Vec<TiedRun>> {
    parse_runs(&read_to_string(path)?, &path.display().to_string())
}

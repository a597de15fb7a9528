use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{analyze_question, rank_analysis, Dataset, PipelineConfig, Resources};
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyColumn {
    /// Question collection (the questions' source set).
    pub name: String,
    pub questions: usize,
    /// Mean wall-clock seconds per question over all iterations.
    pub mean_seconds: f64,
}

/// Per-collection timings of another system, e.g.
/// `{"system": "QUEST", "columns": {"CQ-W": 2.4, "CQ-T": 2.1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub system: String,
    pub columns: BTreeMap<String, f64>,
}

impl Comparison {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::parse(path.display().to_string(), 0, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub config_id: String,
    pub iterations: usize,
    /// A single pass gives no repeated measurements.
    pub low_confidence: bool,
    /// One-time resource loading, excluded from the per-question means.
    pub load_seconds: f64,
    pub columns: Vec<LatencyColumn>,
    pub comparison: Option<Comparison>,
    /// `comparison / ours` for every column present in both.
    pub speedup: BTreeMap<String, f64>,
}

impl LatencyReport {
    pub fn with_comparison(mut self, comparison: Comparison) -> Self {
        self.speedup = self
            .columns
            .iter()
            .filter_map(|c| {
                let other = comparison.columns.get(&c.name)?;
                (c.mean_seconds > 0.0).then(|| (c.name.clone(), other / c.mean_seconds))
            })
            .collect();
        self.comparison = Some(comparison);
        self
    }

    /// Seconds per query, one column per collection.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push_str("\nours");
        for c in &self.columns {
            out.push_str(&format!(",{:.4}", c.mean_seconds));
        }
        out.push('\n');
        if let Some(cmp) = &self.comparison {
            out.push_str(&cmp.system);
            for c in &self.columns {
                match cmp.columns.get(&c.name) {
                    Some(v) => out.push_str(&format!(",{v:.4}")),
                    None => out.push(','),
                }
            }
            out.push_str("\nspeedup");
            for c in &self.columns {
                match self.speedup.get(&c.name) {
                    Some(v) => out.push_str(&format!(",{v:.2}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Times the full per-question pipeline, one question at a time, for
/// `iterations` passes over the dataset. Questions that fail are skipped
/// and do not count toward the means.
pub fn run_latency_bench(cfg: &PipelineConfig, res: &Resources, dataset: &Dataset, iterations: usize) -> Result<LatencyReport> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    let config_id = cfg.config_id();
    let mut totals: BTreeMap<String, (f64, usize, usize)> = BTreeMap::new();
    for _ in 0..iterations {
        for q in &dataset.questions {
            let Some(set) = dataset.docsets.get(&q.id) else {
                continue;
            };
            let started = Instant::now();
            let outcome = analyze_question(q, set, res, cfg).and_then(|a| rank_analysis(&a, cfg, &config_id));
            let secs = started.elapsed().as_secs_f64();
            if let Err(e) = outcome {
                log::warn!("question `{}` failed during timing: {e}", q.id);
                continue;
            }
            let entry = totals.entry(q.source_set.to_string()).or_default();
            entry.0 += secs;
            entry.1 += 1;
        }
    }
    for (name, entry) in totals.iter_mut() {
        entry.2 = dataset
            .questions
            .iter()
            .filter(|q| q.source_set.to_string() == *name && dataset.docsets.contains_key(&q.id))
            .count();
    }
    Ok(LatencyReport {
        config_id,
        iterations,
        low_confidence: iterations == 1,
        load_seconds: res.load_seconds,
        columns: totals
            .into_iter()
            .map(|(name, (secs, n, questions))| LatencyColumn {
                name,
                questions,
                mean_seconds: if n == 0 { 0.0 } else { secs / n as f64 },
            })
            .collect(),
        comparison: None,
        speedup: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> LatencyReport {
        LatencyReport {
            config_id: "c".into(),
            iterations: 5,
            low_confidence: false,
            load_seconds: 0.5,
            columns: vec![
                LatencyColumn { name: "CQ-T".into(), questions: 2, mean_seconds: 0.5 },
                LatencyColumn { name: "CQ-W".into(), questions: 2, mean_seconds: 0.25 },
            ],
            comparison: None,
            speedup: BTreeMap::new(),
        }
    }

    #[test]
    fn speedup_is_other_over_ours() {
        let cmp = Comparison {
            system: "other".into(),
            columns: BTreeMap::from([("CQ-W".to_string(), 2.0), ("CQ-T".to_string(), 1.0)]),
        };
        let r = report().with_comparison(cmp);
        assert_eq!(r.speedup["CQ-W"], 8.0);
        assert_eq!(r.speedup["CQ-T"], 2.0);
        assert_eq!(r.to_csv(), "system,CQ-T,CQ-W\nours,0.5000,0.2500\nother,1.0000,2.0000\nspeedup,2.00,8.00\n");
    }
}

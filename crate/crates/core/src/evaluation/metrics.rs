use serde::{Deserialize, Serialize};

use super::{match_answer, Judgment};
use crate::ranking::TiedRun;

/// Cutoff, in list positions, for Hit@k.
pub const HIT_CUTOFF: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMetrics {
    pub mrr: f64,
    pub p_at_1: f64,
    pub hit_at_5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieAwareMetrics {
    pub tmrr: f64,
    pub tp_at_1: f64,
    pub thit_at_5: f64,
}

/// How tMRR summarizes the random position of the first relevant answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmrrMode {
    /// `E[1 / rank]`
    #[default]
    ExpectedReciprocal,
    /// `1 / E[rank]`
    ReciprocalOfExpected,
}

/// `(group size, relevant members)` for each group of the run.
pub fn group_relevance(run: &TiedRun, judgment: &Judgment) -> Vec<(usize, usize)> {
    run.groups
        .iter()
        .map(|g| (g.len(), g.iter().filter(|a| match_answer(a, judgment)).count()))
        .collect()
}

/// Metrics that treat each group as a single rank position.
pub fn classical_metrics(run: &TiedRun, judgment: &Judgment) -> ClassicalMetrics {
    classical_from_groups(&group_relevance(run, judgment))
}

pub fn classical_from_groups(groups: &[(usize, usize)]) -> ClassicalMetrics {
    let first = groups.iter().take(HIT_CUTOFF).position(|&(_, r)| r > 0);
    match first {
        Some(g) => ClassicalMetrics {
            mrr: 1.0 / (g + 1) as f64,
            p_at_1: if g == 0 { 1.0 } else { 0.0 },
            hit_at_5: 1.0,
        },
        None => ClassicalMetrics {
            mrr: 0.0,
            p_at_1: 0.0,
            hit_at_5: 0.0,
        },
    }
}

/// Expected metrics when each group is put in uniformly random order.
pub fn tie_aware_metrics(run: &TiedRun, judgment: &Judgment, mode: TmrrMode) -> TieAwareMetrics {
    tie_aware_from_groups(&group_relevance(run, judgment), mode)
}

/// Closed form over `(size, relevant)` groups.
///
/// Only the first group with a relevant member matters. Within a group of
/// `n` items holding `r` relevant ones, the first relevant item sits at
/// offset `j` with probability `C(n-j, r-1) / C(n, r)`.
pub fn tie_aware_from_groups(groups: &[(usize, usize)], mode: TmrrMode) -> TieAwareMetrics {
    let tp_at_1 = match groups.first() {
        Some(&(n, r)) if n > 0 => r as f64 / n as f64,
        _ => 0.0,
    };
    let mut offset = 0usize;
    for &(n, r) in groups {
        if r == 0 {
            offset += n;
            continue;
        }
        let mut tmrr = 0.0;
        let mut thit = 0.0;
        let mut p = r as f64 / n as f64;
        for j in 1..=n - r + 1 {
            let position = offset + j;
            tmrr += p / position as f64;
            if position <= HIT_CUTOFF {
                thit += p;
            }
            if j < n - r + 1 {
                p *= (n - j + 1 - r) as f64 / (n - j) as f64;
            }
        }
        if mode == TmrrMode::ReciprocalOfExpected {
            let expected_position = offset as f64 + (n + 1) as f64 / (r + 1) as f64;
            tmrr = 1.0 / expected_position;
        }
        return TieAwareMetrics {
            tmrr,
            tp_at_1,
            thit_at_5: thit.min(1.0),
        };
    }
    TieAwareMetrics {
        tmrr: 0.0,
        tp_at_1,
        thit_at_5: 0.0,
    }
}

//! Filtered link-prediction evaluation: ranks, mean reciprocal rank, and
//! Hits@K.
//!
//! Ranking is filtered: every other tail known true for the same
//! `(head, relation)` — in any split — is removed from the candidate pool
//! before counting. Ties contribute half a position each (mid-tie), which
//! keeps degenerate constant-score models from ranking well.

use crate::error::{Error, Result};
use crate::kg::{FilterIndex, TripleSet};
use crate::model::{score_all_heads, score_all_tails, EntityTable, RelationTable};
use rayon::prelude::*;
use std::collections::HashSet;

/// Which prediction directions to evaluate. Tail prediction is the primary
/// protocol; the head side is an extra pass over inverse queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSides {
    TailOnly,
    Both,
}

/// Aggregated ranking quality over one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mrr: f64,
    /// Hits@K for K ∈ {1, 3, 10}.
    pub hits_at: [(usize, f64); 3],
    /// Number of ranked queries.
    pub count: usize,
}

impl Metrics {
    pub fn hits(&self, k: usize) -> Option<f64> {
        self.hits_at.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    /// Builds metrics from raw ranks (each ≥ 1; mid-tie ranks may be
    /// half-integers).
    pub fn from_ranks(ranks: &[f64]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Protocol("no ranks to aggregate".into()));
        }
        let n = ranks.len() as f64;
        let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
        let hit = |k: usize| ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n;
        let m = Self {
            mrr,
            hits_at: [(1, hit(1)), (3, hit(3)), (10, hit(10))],
            count: ranks.len(),
        };
        debug_assert!(m.hits_at[0].1 <= m.hits_at[1].1 && m.hits_at[1].1 <= m.hits_at[2].1);
        debug_assert!(m.mrr >= m.hits_at[0].1 - 1e-15, "1/rank ≥ 1 exactly when rank = 1");
        Ok(m)
    }
}

/// Rank of `target` among all candidates after removing `known_true` (minus
/// the target itself). Candidates strictly above the target count one
/// position; ties count half: `rank = 1 + |better| + |ties|/2`.
pub fn filtered_rank(scores: &[f64], target: u32, known_true: &HashSet<u32>) -> Result<f64> {
    let t = target as usize;
    if t >= scores.len() {
        return Err(Error::Protocol(format!(
            "target {target} outside the candidate pool of {} — filter index built wrong",
            scores.len()
        )));
    }
    let s_t = scores[t];
    let mut better = 0usize;
    let mut ties = 0usize;
    for (e, &s) in scores.iter().enumerate() {
        if e == t {
            continue;
        }
        if known_true.contains(&(e as u32)) {
            continue;
        }
        if s > s_t {
            better += 1;
        } else if s == s_t {
            ties += 1;
        }
    }
    Ok(1.0 + better as f64 + ties as f64 / 2.0)
}

fn rank_one_tail_query(
    entities: &EntityTable,
    relations: &RelationTable,
    h: u32,
    r: u32,
    t: u32,
    filter: &FilterIndex,
) -> Result<f64> {
    let scores = score_all_tails(entities, relations, h, r)?;
    let empty = HashSet::new();
    let known = filter.known_tails(h, r).unwrap_or(&empty);
    filtered_rank(&scores, t, known)
}

fn rank_one_head_query(
    entities: &EntityTable,
    relations: &RelationTable,
    h: u32,
    r: u32,
    t: u32,
    head_filter: &FilterIndex,
) -> Result<f64> {
    let scores = score_all_heads(entities, relations, r, t)?;
    let empty = HashSet::new();
    let known = head_filter.known_tails(t, r).unwrap_or(&empty);
    filtered_rank(&scores, h, known)
}

/// Filtered tail-prediction metrics over a split. Queries are independent
/// and evaluated in parallel; ranks are collected in triple order, so the
/// result does not depend on the worker count.
pub fn evaluate(
    entities: &EntityTable,
    relations: &RelationTable,
    split: &TripleSet,
    filter: &FilterIndex,
) -> Result<Metrics> {
    if split.triples.is_empty() {
        return Err(Error::Protocol(format!("empty {} split", split.split.as_str())));
    }
    let ranks: Result<Vec<f64>> = split
        .triples
        .par_iter()
        .map(|t| rank_one_tail_query(entities, relations, t.head, t.rel, t.tail, filter))
        .collect();
    Metrics::from_ranks(&ranks?)
}

/// Metrics over tail queries, or over tail and head queries pooled, when the
/// inverse pass is requested. Head prediction is not part of the primary
/// protocol; `head_filter` must be keyed `(tail, relation) → heads`.
pub fn evaluate_sides(
    entities: &EntityTable,
    relations: &RelationTable,
    split: &TripleSet,
    filter: &FilterIndex,
    head_filter: &FilterIndex,
    sides: EvalSides,
) -> Result<Metrics> {
    match sides {
        EvalSides::TailOnly => evaluate(entities, relations, split, filter),
        EvalSides::Both => {
            if split.triples.is_empty() {
                return Err(Error::Protocol(format!("empty {} split", split.split.as_str())));
            }
            let tail_ranks: Result<Vec<f64>> = split
                .triples
                .par_iter()
                .map(|t| rank_one_tail_query(entities, relations, t.head, t.rel, t.tail, filter))
                .collect();
            let head_ranks: Result<Vec<f64>> = split
                .triples
                .par_iter()
                .map(|t| rank_one_head_query(entities, relations, t.head, t.rel, t.tail, head_filter))
                .collect();
            let mut ranks = tail_ranks?;
            ranks.extend(head_ranks?);
            Metrics::from_ranks(&ranks)
        }
    }
}

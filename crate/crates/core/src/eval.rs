//! Leave-last-out evaluation with the simplified DCG and hit metrics.
//!
//! Each session of length m >= 2 is split into a history of the first
//! m - 1 events and the final item as the prediction target. Enhanced
//! algorithms re-detect interest on the history only, so the target never
//! leaks into the estimate.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::catalog::{Catalog, GlobalModel};
use crate::detect::{detect_interest, InterestReport, ThresholdTable};
use crate::error::Error;
use crate::math;
use crate::rerank::{recommend_with_candidates, BaseScorer, RankedList};
use crate::session::Session;

/// Splits a session into (history, target); `None` when too short to
/// evaluate.
pub fn leave_last_out(session: &Session) -> Option<(Session, String)> {
    if session.len() < 2 {
        return None;
    }
    let m = session.len();
    let history = Session {
        user_id: session.user_id.clone(),
        items: session.items[..m - 1].to_vec(),
        timestamps: session.timestamps[..m - 1].to_vec(),
        ended_by: session.ended_by,
    };
    Some((history, session.items[m - 1].clone()))
}

/// Simplified DCG: `1 / log2(l + 1)` if the target sits at 1-based rank
/// `l <= N`, else 0. Relevance is exact item-id match, so at most one term
/// survives.
pub fn dcg_at(recommendations: &RankedList, target: &str, n: usize) -> f64 {
    match recommendations.rank_of(target) {
        Some(l) if l <= n => 1.0 / math::log2((l + 1) as f64),
        _ => 0.0,
    }
}

/// 1 iff the target is within the top N.
pub fn hit_at(recommendations: &RankedList, target: &str, n: usize) -> bool {
    matches!(recommendations.rank_of(target), Some(l) if l <= n)
}

/// One evaluated (session, algorithm, N) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub session_index: usize,
    pub algorithm: String,
    pub n: usize,
    pub dcg: f64,
    pub hit: bool,
}

/// An algorithm under evaluation: a base scorer, optionally enhanced by
/// interest detection.
#[derive(Debug, Clone)]
pub struct AlgorithmSpec {
    pub name: String,
    pub scorer: BaseScorer,
    pub enhanced: bool,
}

impl AlgorithmSpec {
    pub fn base(scorer: BaseScorer) -> Self {
        Self {
            name: scorer.as_str().into(),
            scorer,
            enhanced: false,
        }
    }

    pub fn enhanced(scorer: BaseScorer) -> Self {
        Self {
            name: alloc::format!("kl-{}", scorer.as_str()),
            scorer,
            enhanced: true,
        }
    }
}

/// Mean metrics for one (algorithm, N) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub algorithm: String,
    pub n: usize,
    pub sessions: usize,
    pub mean_dcg: f64,
    pub mean_hit: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub summaries: Vec<EvalSummary>,
    pub evaluated_sessions: usize,
    pub skipped_short: usize,
}

/// Evaluation parameters shared across algorithms.
#[derive(Debug, Clone)]
pub struct EvalParams<'a> {
    /// Cutoffs to report, e.g. [5, 10, 20].
    pub n_values: &'a [usize],
    pub alphas: &'a [f64],
    /// Optional truncated re-ranking pool, forwarded to the recommender.
    pub candidates: Option<usize>,
}

/// Kahan-compensated accumulator so means do not depend on float
/// summation luck across large datasets.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

fn session_records(
    index: usize,
    session: &Session,
    algorithms: &[AlgorithmSpec],
    params: &EvalParams<'_>,
    table: &ThresholdTable,
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<Vec<EvalRecord>, Error> {
    let (history, target) = match leave_last_out(session) {
        Some(split) => split,
        None => return Ok(Vec::new()),
    };
    let max_n = params.n_values.iter().copied().max().unwrap_or(10);
    let needs_report = algorithms.iter().any(|a| a.enhanced);
    let report = if needs_report {
        detect_interest(&history, table, params.alphas, global, catalog)?
    } else {
        InterestReport::empty(history.len(), catalog.schema().len())
    };
    let empty = InterestReport::empty(history.len(), catalog.schema().len());

    let mut records = Vec::with_capacity(algorithms.len() * params.n_values.len());
    for algo in algorithms {
        let ranked = recommend_with_candidates(
            &history,
            algo.scorer,
            if algo.enhanced { &report } else { &empty },
            max_n,
            params.candidates,
            params.alphas,
            global,
            catalog,
        )?;
        for &n in params.n_values {
            records.push(EvalRecord {
                session_index: index,
                algorithm: algo.name.clone(),
                n,
                dcg: dcg_at(&ranked, &target, n),
                hit: hit_at(&ranked, &target, n),
            });
        }
    }
    Ok(records)
}

/// Runs leave-last-out evaluation of every algorithm over the dataset and
/// aggregates mean DCG and hit rate per (algorithm, N).
pub fn evaluate(
    sessions: &[Session],
    algorithms: &[AlgorithmSpec],
    params: &EvalParams<'_>,
    table: &ThresholdTable,
    global: &GlobalModel,
    catalog: &Catalog,
) -> Result<EvalOutcome, Error> {
    let indexed: Vec<(usize, &Session)> = sessions.iter().enumerate().collect();

    #[cfg(feature = "parallel")]
    let per_session: Result<Vec<Vec<EvalRecord>>, Error> = indexed
        .par_iter()
        .map(|&(i, s)| session_records(i, s, algorithms, params, table, global, catalog))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let per_session: Result<Vec<Vec<EvalRecord>>, Error> = indexed
        .iter()
        .map(|&(i, s)| session_records(i, s, algorithms, params, table, global, catalog))
        .collect();
    let per_session = per_session?;

    let evaluated = per_session.iter().filter(|r| !r.is_empty()).count();
    let skipped = sessions.len() - evaluated;
    if evaluated == 0 {
        return Err(Error::NoEvaluableSessions);
    }

    // (algorithm, n) cells in declaration order; session order is fixed, so
    // the compensated sums are reproducible bit for bit.
    let mut summaries = Vec::with_capacity(algorithms.len() * params.n_values.len());
    for algo in algorithms {
        for &n in params.n_values {
            let mut dcg = KahanSum::default();
            let mut hit = KahanSum::default();
            let mut count = 0usize;
            for records in &per_session {
                for r in records {
                    if r.algorithm == algo.name && r.n == n {
                        dcg.add(r.dcg);
                        hit.add(if r.hit { 1.0 } else { 0.0 });
                        count += 1;
                    }
                }
            }
            summaries.push(EvalSummary {
                algorithm: algo.name.clone(),
                n,
                sessions: count,
                mean_dcg: dcg.sum / count as f64,
                mean_hit: hit.sum / count as f64,
            });
        }
    }
    Ok(EvalOutcome {
        summaries,
        evaluated_sessions: evaluated,
        skipped_short: skipped,
    })
}

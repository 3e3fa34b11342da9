//! The two index-backed approximate query processors.
//!
//! `mtts` keeps a geometric family of threshold candidates and feeds them
//! elements straight off the ranked lists, stopping as soon as the
//! head-based upper bound drops below the smallest live acceptance
//! threshold; it is (1/2 - ε)-approximate and evaluates each active element
//! at most once. `mttd` runs rounds with geometrically descending
//! thresholds over a buffer of retrieved elements, re-evaluating buffered
//! elements lazily; it is (1 - 1/e - ε)-approximate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use thiserror::Error;

use crate::ranked_lists::{RankedLists, TraversalCursor};
use crate::scoring::{CoverageState, ScoreCtx};
use crate::types::{ElementId, QueryVector, ScoringConfig, TopicModel};
use crate::window::Snapshot;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("instance too large for exhaustive search: n_t = {n}, k = {k}")]
    TooLarge { n: usize, k: usize },
}

/// A k-representative query: result-size bound, topic preferences,
/// approximation parameter, and the snapshot time it targets.
#[derive(Debug, Clone)]
pub struct Query {
    pub k: usize,
    pub x: QueryVector,
    pub epsilon: f64,
    pub t: i64,
}

impl Query {
    pub fn new(k: usize, x: QueryVector, epsilon: f64, t: i64) -> Self {
        Self { k, x, epsilon, t }
    }

    /// ε must lie strictly inside (0, 1); it is never clamped.
    pub fn check_epsilon(&self) -> Result<(), EngineError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(EngineError::InvalidQuery(format!(
                "epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn check_k(&self) -> Result<(), EngineError> {
        if self.k == 0 {
            return Err(EngineError::InvalidQuery("k must be positive".into()));
        }
        Ok(())
    }

    pub fn check_time(&self, snap: Snapshot<'_>) -> Result<(), EngineError> {
        if self.t != snap.now() {
            return Err(EngineError::InvalidQuery(format!(
                "query time {} does not match snapshot time {}",
                self.t,
                snap.now()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Mtts,
    Mttd,
    Celf,
    Sieve,
    TopK,
    Brute,
}

impl Engine {
    pub const ALL: [Engine; 6] = [
        Engine::Mtts,
        Engine::Mttd,
        Engine::Celf,
        Engine::Sieve,
        Engine::TopK,
        Engine::Brute,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Mtts => "mtts",
            Engine::Mttd => "mttd",
            Engine::Celf => "celf",
            Engine::Sieve => "sieve",
            Engine::TopK => "topk",
            Engine::Brute => "brute",
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mtts" => Ok(Engine::Mtts),
            "mttd" => Ok(Engine::Mttd),
            "celf" => Ok(Engine::Celf),
            "sieve" => Ok(Engine::Sieve),
            "topk" => Ok(Engine::TopK),
            "brute" => Ok(Engine::Brute),
            other => Err(format!(
                "unknown engine `{other}` (expected mtts|mttd|celf|sieve|topk|brute)"
            )),
        }
    }
}

/// Outcome of one query execution.
#[derive(Debug, Clone)]
pub struct QueryResult {
    pub engine: Engine,
    /// Selected element ids in acceptance order, at most `k`.
    pub members: Vec<ElementId>,
    /// `f(members, x)`; matches a from-scratch evaluation within 1e-9.
    pub score: f64,
    /// Distinct elements whose `δ(e, x)` or `Δ(e | S)` was computed.
    pub evaluated: usize,
    pub elapsed_us: u64,
}

impl QueryResult {
    fn empty(engine: Engine, started: Instant) -> Self {
        Self {
            engine,
            members: Vec::new(),
            score: 0.0,
            evaluated: 0,
            elapsed_us: started.elapsed().as_micros() as u64,
        }
    }
}

/// Walkthrough diagnostics for `mtts`.
#[derive(Debug, Default, Clone)]
pub struct MttsTrace {
    pub initial_ub: f64,
    /// Candidate exponent range right after the first evaluated element.
    pub exponent_range_after_first: Option<(i32, i32)>,
    pub evaluated_order: Vec<ElementId>,
    /// The acceptance threshold in force when the scan stopped; skipped
    /// elements all score strictly below it.
    pub final_threshold: f64,
}

/// Walkthrough diagnostics for `mttd`.
#[derive(Debug, Default, Clone)]
pub struct MttdTrace {
    /// Threshold τ at the start of each round.
    pub taus: Vec<f64>,
    pub retrieved_per_round: Vec<Vec<ElementId>>,
    /// `(round index, element, realized gain)` in acceptance order.
    pub accepted: Vec<(usize, ElementId, f64)>,
}

/// Largest exponent range `[lo, hi]` with `base^j ∈ [min, max]`.
fn exponent_range(base: f64, min: f64, max: f64) -> (i32, i32) {
    debug_assert!(min > 0.0 && max >= min && base > 1.0);
    let mut lo = (min.ln() / base.ln()).ceil() as i32;
    while base.powi(lo) < min {
        lo += 1;
    }
    while base.powi(lo - 1) >= min {
        lo -= 1;
    }
    let mut hi = (max.ln() / base.ln()).floor() as i32;
    while base.powi(hi) > max {
        hi -= 1;
    }
    while base.powi(hi + 1) <= max {
        hi += 1;
    }
    (lo, hi)
}

pub fn query_mtts(
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    query_mtts_traced(q, snap, lists, model, cfg).map(|(result, _)| result)
}

/// `mtts` with its walkthrough trace.
pub fn query_mtts_traced(
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<(QueryResult, MttsTrace), EngineError> {
    let started = Instant::now();
    q.check_epsilon()?;
    q.check_k()?;
    q.check_time(snap)?;
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    let mut trace = MttsTrace::default();
    let mut cursor = TraversalCursor::new(lists, &q.x);
    trace.initial_ub = cursor.upper_bound();
    if cursor.is_exhausted() {
        return Ok((QueryResult::empty(Engine::Mtts, started), trace));
    }

    let base = 1.0 + q.epsilon;
    let two_k = 2.0 * q.k as f64;
    let mut candidates: BTreeMap<i32, CoverageState> = BTreeMap::new();
    let mut delta_max = 0.0_f64;
    let mut min_threshold = 0.0_f64;

    while cursor.upper_bound() >= min_threshold {
        let Some((id, _)) = cursor.next_best() else {
            break;
        };
        let delta_e = lists.element_score(&q.x, id);
        trace.evaluated_order.push(id);

        if delta_e > delta_max {
            delta_max = delta_e;
            let (lo, hi) = exponent_range(base, delta_max, two_k * delta_max);
            candidates.retain(|j, _| (lo..=hi).contains(j));
            for j in lo..=hi {
                candidates
                    .entry(j)
                    .or_insert_with(|| CoverageState::new(&q.x));
            }
        }
        if trace.exponent_range_after_first.is_none() && !candidates.is_empty() {
            let lo = *candidates.keys().next().unwrap();
            let hi = *candidates.keys().next_back().unwrap();
            trace.exponent_range_after_first = Some((lo, hi));
        }

        let e = snap.element(id).expect("yielded element is active");
        for (&j, cand) in candidates.iter_mut() {
            let threshold = base.powi(j) / two_k;
            if delta_e >= threshold
                && cand.len() < q.k
                && cand.marginal_gain(e, &ctx) >= threshold
            {
                cand.commit(e, &ctx);
            }
        }

        min_threshold = if delta_max == 0.0 {
            0.0
        } else {
            candidates
                .iter()
                .filter(|(_, cand)| cand.len() < q.k)
                .map(|(&j, _)| base.powi(j) / two_k)
                .fold(f64::INFINITY, f64::min)
        };
    }
    trace.final_threshold = min_threshold;

    let mut best: Option<&CoverageState> = None;
    for cand in candidates.values() {
        if best.map_or(true, |b| cand.score() > b.score()) {
            best = Some(cand);
        }
    }
    let evaluated = trace.evaluated_order.len();
    let result = match best {
        Some(cand) => QueryResult {
            engine: Engine::Mtts,
            members: cand.members().to_vec(),
            score: cand.score(),
            evaluated,
            elapsed_us: started.elapsed().as_micros() as u64,
        },
        None => {
            let mut r = QueryResult::empty(Engine::Mtts, started);
            r.evaluated = evaluated;
            r
        }
    };
    Ok((result, trace))
}

/// One retrieval pass: yield every not-yet-retrieved element whose
/// head-derived upper bound still permits `δ(e, x) >= tau`, with its score
/// assembled from the stored per-topic values. Stops when `UB(x) < tau` or
/// the lists are exhausted.
pub fn retrieve_above_threshold(
    cursor: &mut TraversalCursor<'_>,
    lists: &RankedLists,
    x: &QueryVector,
    tau: f64,
) -> Vec<(ElementId, f64)> {
    let mut batch = Vec::new();
    while cursor.upper_bound() >= tau {
        let Some((id, _)) = cursor.next_best() else {
            break;
        };
        batch.push((id, lists.element_score(x, id)));
    }
    batch
}

/// Buffer entry ordered so the max-heap pops the highest cached gain,
/// lowest id first on ties.
#[derive(Debug)]
struct Buffered {
    gain: f64,
    id: ElementId,
}

impl PartialEq for Buffered {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Buffered {}
impl Ord for Buffered {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Buffered {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn query_mttd(
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    query_mttd_traced(q, snap, lists, model, cfg).map(|(result, _)| result)
}

/// `mttd` with its walkthrough trace.
pub fn query_mttd_traced(
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<(QueryResult, MttdTrace), EngineError> {
    let started = Instant::now();
    q.check_epsilon()?;
    q.check_k()?;
    q.check_time(snap)?;
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    let mut trace = MttdTrace::default();
    let mut cursor = TraversalCursor::new(lists, &q.x);

    let initial = cursor.upper_bound();
    if initial <= 0.0 {
        return Ok((QueryResult::empty(Engine::Mttd, started), trace));
    }

    let mut tau = initial;
    let mut tau_term = 0.0_f64;
    let mut state = CoverageState::new(&q.x);
    let mut buffer: BinaryHeap<Buffered> = BinaryHeap::new();
    let mut retrieved = 0usize;

    let finish = |state: CoverageState, retrieved: usize, started: Instant| QueryResult {
        engine: Engine::Mttd,
        members: state.members().to_vec(),
        score: state.score(),
        evaluated: retrieved,
        elapsed_us: started.elapsed().as_micros() as u64,
    };

    while tau >= tau_term {
        let round = trace.taus.len();
        trace.taus.push(tau);
        let batch = retrieve_above_threshold(&mut cursor, lists, &q.x, tau);
        retrieved += batch.len();
        trace
            .retrieved_per_round
            .push(batch.iter().map(|&(id, _)| id).collect());
        for (id, delta) in batch {
            buffer.push(Buffered { gain: delta, id });
        }

        while buffer.peek().map_or(false, |top| top.gain >= tau) {
            let top = buffer.pop().expect("peeked entry pops");
            let e = snap.element(top.id).expect("buffered element is active");
            let gain = state.marginal_gain(e, &ctx);
            if gain >= tau {
                state.commit(e, &ctx);
                trace.accepted.push((round, top.id, gain));
                if state.len() == q.k {
                    return Ok((finish(state, retrieved, started), trace));
                }
            } else {
                // cached gains only ever shrink; keep as a stale priority
                buffer.push(Buffered { gain, id: top.id });
            }
        }

        tau_term = state.score() * q.epsilon / q.k as f64;
        tau *= 1.0 - q.epsilon;

        // once the lists are drained and no buffered element can ever gain,
        // further rounds are no-ops
        if cursor.is_exhausted() && buffer.peek().map_or(true, |top| top.gain <= 0.0) {
            break;
        }
    }

    Ok((finish(state, retrieved, started), trace))
}

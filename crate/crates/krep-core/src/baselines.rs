//! Reference query processors for quality and efficiency comparison. All of
//! them evaluate every active element at least once except the plain top-k,
//! which reuses the ranked lists.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use itertools::Itertools;

use crate::engines::{Engine, EngineError, Query, QueryResult};
use crate::ranked_lists::{RankedLists, TraversalCursor};
use crate::scoring::{self, CoverageState, ScoreCtx};
use crate::types::{Element, ElementId, ScoringConfig, TopicModel};
use crate::window::Snapshot;

#[derive(Debug)]
struct GainEntry {
    gain: f64,
    id: ElementId,
    /// Set size the gain was computed against; fresh iff equal to |S|.
    round: usize,
}

impl PartialEq for GainEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for GainEntry {}
impl Ord for GainEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for GainEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy: stale gains as heap priorities, re-evaluated on pop;
/// set-for-set identical to plain greedy with the same lowest-id tie-break.
pub fn query_celf(
    q: &Query,
    snap: Snapshot<'_>,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    let started = Instant::now();
    q.check_k()?;
    q.check_time(snap)?;
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    let mut heap = BinaryHeap::with_capacity(snap.len());
    for id in snap.active_ids() {
        let e = snap.element(id).expect("active id resolves");
        heap.push(GainEntry {
            gain: scoring::element_score(e, &ctx),
            id,
            round: 0,
        });
    }
    let evaluated = snap.len();
    let mut state = CoverageState::new(&q.x);
    while state.len() < q.k {
        let Some(top) = heap.pop() else { break };
        let e = snap.element(top.id).expect("active id resolves");
        if top.round == state.len() {
            state.commit(e, &ctx);
        } else {
            heap.push(GainEntry {
                gain: state.marginal_gain(e, &ctx),
                id: top.id,
                round: state.len(),
            });
        }
    }
    Ok(QueryResult {
        engine: Engine::Celf,
        members: state.members().to_vec(),
        score: state.score(),
        evaluated,
        elapsed_us: started.elapsed().as_micros() as u64,
    })
}

/// Single-pass sieve over the active elements in id order, with the
/// geometric threshold family on `[δ_max, 2k·δ_max]` and the acceptance
/// rule `Δ(e|S_φ) >= (φ/2 - f(S_φ)) / (k - |S_φ|)`.
pub fn query_sieve(
    q: &Query,
    snap: Snapshot<'_>,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    let started = Instant::now();
    q.check_epsilon()?;
    q.check_k()?;
    q.check_time(snap)?;
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    let base = 1.0 + q.epsilon;
    let two_k = 2.0 * q.k as f64;
    let mut delta_max = 0.0_f64;
    let mut candidates: BTreeMap<i32, CoverageState> = BTreeMap::new();
    for id in snap.active_ids() {
        let e = snap.element(id).expect("active id resolves");
        let delta_e = scoring::element_score(e, &ctx);
        if delta_e > delta_max {
            delta_max = delta_e;
            let lo = exponent_at_least(base, delta_max);
            let hi = exponent_at_most(base, two_k * delta_max);
            candidates.retain(|j, _| (lo..=hi).contains(j));
            for j in lo..=hi {
                candidates
                    .entry(j)
                    .or_insert_with(|| CoverageState::new(&q.x));
            }
        }
        for (&j, cand) in candidates.iter_mut() {
            if cand.len() >= q.k {
                continue;
            }
            let phi = base.powi(j);
            let needed = (phi / 2.0 - cand.score()) / (q.k - cand.len()) as f64;
            if cand.marginal_gain(e, &ctx) >= needed {
                cand.commit(e, &ctx);
            }
        }
    }
    let mut best: Option<&CoverageState> = None;
    for cand in candidates.values() {
        if best.map_or(true, |b| cand.score() > b.score()) {
            best = Some(cand);
        }
    }
    Ok(QueryResult {
        engine: Engine::Sieve,
        members: best.map_or_else(Vec::new, |c| c.members().to_vec()),
        score: best.map_or(0.0, |c| c.score()),
        evaluated: snap.len(),
        elapsed_us: started.elapsed().as_micros() as u64,
    })
}

fn exponent_at_least(base: f64, min: f64) -> i32 {
    let mut j = (min.ln() / base.ln()).ceil() as i32;
    while base.powi(j) < min {
        j += 1;
    }
    while base.powi(j - 1) >= min {
        j -= 1;
    }
    j
}

fn exponent_at_most(base: f64, max: f64) -> i32 {
    let mut j = (max.ln() / base.ln()).floor() as i32;
    while base.powi(j) > max {
        j -= 1;
    }
    while base.powi(j + 1) <= max {
        j += 1;
    }
    j
}

/// Plain top-k by single-element score via ranked-list traversal, stopping
/// once no unseen element can reach the current k-th best score. Ignores
/// word and influence overlaps entirely.
pub fn query_topk_rep(
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    let started = Instant::now();
    q.check_k()?;
    q.check_time(snap)?;
    let mut cursor = TraversalCursor::new(lists, &q.x);
    let mut popped: Vec<(f64, ElementId)> = Vec::new();
    loop {
        if popped.len() >= q.k {
            let mut top: Vec<&(f64, ElementId)> = popped.iter().collect();
            top.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let kth = top[q.k - 1].0;
            if cursor.upper_bound() < kth {
                break;
            }
        }
        let Some((id, _)) = cursor.next_best() else {
            break;
        };
        popped.push((lists.element_score(&q.x, id), id));
    }
    let evaluated = popped.len();
    popped.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    popped.truncate(q.k);
    let members: Vec<ElementId> = popped.iter().map(|&(_, id)| id).collect();
    let elements: Vec<&Element> = members
        .iter()
        .map(|&id| snap.element(id).expect("listed element is active"))
        .collect();
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    Ok(QueryResult {
        engine: Engine::TopK,
        score: scoring::total_score(&elements, &ctx),
        members,
        evaluated,
        elapsed_us: started.elapsed().as_micros() as u64,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

/// Guard for exhaustive search: at most 20 active elements and 2·10^5
/// subsets of the largest size.
pub const BRUTE_MAX_ACTIVE: usize = 20;
pub const BRUTE_MAX_SUBSETS: u128 = 200_000;

/// Exhaustive optimum over all subsets of size at most `k`. Ties prefer the
/// first subset in size-then-lexicographic order.
pub fn query_bruteforce(
    q: &Query,
    snap: Snapshot<'_>,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    let started = Instant::now();
    q.check_time(snap)?;
    let n = snap.len();
    let k = q.k.min(n);
    if n > BRUTE_MAX_ACTIVE || binomial(n, k) > BRUTE_MAX_SUBSETS {
        return Err(EngineError::TooLarge { n, k: q.k });
    }
    let ctx = ScoreCtx { model, cfg, snap, x: &q.x };
    let ids: Vec<ElementId> = snap.active_ids().collect();
    let mut best_score = 0.0_f64;
    let mut best: Vec<ElementId> = Vec::new();
    for size in 1..=k {
        for combo in ids.iter().copied().combinations(size) {
            let elements: Vec<&Element> = combo
                .iter()
                .map(|&id| snap.element(id).expect("active id resolves"))
                .collect();
            let score = scoring::total_score(&elements, &ctx);
            if score > best_score {
                best_score = score;
                best = combo;
            }
        }
    }
    Ok(QueryResult {
        engine: Engine::Brute,
        members: best,
        score: best_score,
        evaluated: n,
        elapsed_us: started.elapsed().as_micros() as u64,
    })
}

/// Dispatch by engine label; `lists` is only touched by the index-backed
/// processors.
pub fn run_engine(
    engine: Engine,
    q: &Query,
    snap: Snapshot<'_>,
    lists: &RankedLists,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> Result<QueryResult, EngineError> {
    match engine {
        Engine::Mtts => crate::engines::query_mtts(q, snap, lists, model, cfg),
        Engine::Mttd => crate::engines::query_mttd(q, snap, lists, model, cfg),
        Engine::Celf => query_celf(q, snap, model, cfg),
        Engine::Sieve => query_sieve(q, snap, model, cfg),
        Engine::TopK => query_topk_rep(q, snap, lists, model, cfg),
        Engine::Brute => query_bruteforce(q, snap, model, cfg),
    }
}

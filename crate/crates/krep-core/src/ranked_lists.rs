//! Per-topic ranked indexes.
//!
//! Each list holds one tuple per active element with positive mass on its
//! topic, keyed by the current single-element score `δ_i(e)` (descending,
//! ties by ascending id). Lists are kept exact: inserts, new references, and
//! reference expiries all trigger a recompute + reposition, so query-time
//! reads of `δ` and the head-based upper bound are never stale.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Bound;

use crate::scoring;
use crate::types::{Element, ElementId, QueryVector, ScoringConfig, TopicId, TopicModel};
use crate::window::{Snapshot, UpdateReport};

/// Sort key of a ranked-list tuple: score descending, id ascending.
#[derive(Debug, Clone, Copy)]
pub struct RankKey {
    pub score: f64,
    pub id: ElementId,
}

impl PartialEq for RankKey {
    fn eq(&self, other: &Self) -> bool {
        self.score.to_bits() == other.score.to_bits() && self.id == other.id
    }
}
impl Eq for RankKey {}

impl Ord for RankKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // scores are finite and nonnegative by construction
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered index of `⟨δ_i(e), t_e⟩` tuples for one topic.
#[derive(Debug, Default)]
pub struct RankedList {
    /// Tuple order; the value is `t_e`, the time the element was last
    /// referred to (diagnostics only, never part of the ordering).
    entries: BTreeMap<RankKey, i64>,
    lookup: HashMap<ElementId, f64>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored score of an element, `None` when absent from this list.
    pub fn score(&self, id: ElementId) -> Option<f64> {
        self.lookup.get(&id).copied()
    }

    /// Highest-score tuple.
    pub fn first(&self) -> Option<RankKey> {
        self.entries.keys().next().copied()
    }

    /// Next tuple strictly after `key` in list order.
    pub fn next_after(&self, key: RankKey) -> Option<RankKey> {
        self.entries
            .range((Bound::Excluded(key), Bound::Unbounded))
            .next()
            .map(|(k, _)| *k)
    }

    /// Tuples in descending score order as `(id, score, t_e)`.
    pub fn iter(&self) -> impl Iterator<Item = (ElementId, f64, i64)> + '_ {
        self.entries.iter().map(|(k, &t)| (k.id, k.score, t))
    }

    fn upsert(&mut self, id: ElementId, score: f64, t_e: i64) {
        if let Some(old) = self.lookup.insert(id, score) {
            self.entries.remove(&RankKey { score: old, id });
        }
        self.entries.insert(RankKey { score, id }, t_e);
    }

    fn remove(&mut self, id: ElementId) {
        if let Some(old) = self.lookup.remove(&id) {
            self.entries.remove(&RankKey { score: old, id });
        }
    }
}

/// All per-topic lists plus the maintenance entry point.
#[derive(Debug)]
pub struct RankedLists {
    lists: Vec<RankedList>,
}

impl RankedLists {
    pub fn new(num_topics: usize) -> Self {
        Self {
            lists: (0..num_topics).map(|_| RankedList::default()).collect(),
        }
    }

    pub fn num_topics(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, topic: TopicId) -> &RankedList {
        &self.lists[topic]
    }

    /// `δ(e, x)` assembled from stored per-topic scores.
    pub fn element_score(&self, x: &QueryVector, id: ElementId) -> f64 {
        x.entries()
            .iter()
            .map(|&(topic, xi)| xi * self.lists[topic].score(id).unwrap_or(0.0))
            .sum()
    }

    /// Apply one ingest's changes: insert tuples for new elements, recompute
    /// and reposition every element whose influence set changed (grown or
    /// shrunk, including re-activated parents), and drop evicted elements.
    pub fn apply_update(
        &mut self,
        report: &UpdateReport,
        snap: Snapshot<'_>,
        model: &TopicModel,
        cfg: &ScoringConfig,
    ) {
        for &id in &report.evicted {
            for list in &mut self.lists {
                list.remove(id);
            }
        }
        let inserted: HashSet<ElementId> = report.inserted.iter().copied().collect();
        for &id in &report.inserted {
            if let Some(e) = snap.element(id) {
                self.upsert_element(e, snap, model, cfg);
            }
        }
        for &id in &report.changed {
            if inserted.contains(&id) {
                continue; // fresh tuples already reflect same-bucket references
            }
            if let Some(e) = snap.element(id) {
                self.upsert_element(e, snap, model, cfg);
            }
        }
    }

    fn upsert_element(
        &mut self,
        e: &Element,
        snap: Snapshot<'_>,
        model: &TopicModel,
        cfg: &ScoringConfig,
    ) {
        let t_e = snap.last_ref(e.id).unwrap_or(e.ts);
        for &(topic, _) in &e.topics {
            let delta = scoring::single_score(e, topic, model, cfg, snap);
            self.lists[topic].upsert(e.id, delta, t_e);
        }
    }

    /// Recompute every tuple from scratch and compare with stored state.
    pub fn integrity_check(
        &self,
        snap: Snapshot<'_>,
        model: &TopicModel,
        cfg: &ScoringConfig,
    ) -> IntegrityReport {
        let mut report = IntegrityReport::default();
        for (topic, list) in self.lists.iter().enumerate() {
            let mut expected = 0usize;
            for id in snap.active_ids() {
                let e = snap.element(id).expect("active id resolves");
                if e.topic_prob(topic) == 0.0 {
                    continue;
                }
                expected += 1;
                match list.score(id) {
                    None => report
                        .violations
                        .push(format!("topic {topic}: active element {id} missing")),
                    Some(stored) => {
                        let fresh = scoring::single_score(e, topic, model, cfg, snap);
                        let drift = (stored - fresh).abs();
                        if drift > report.max_drift {
                            report.max_drift = drift;
                        }
                    }
                }
            }
            if expected != list.len() {
                report.violations.push(format!(
                    "topic {topic}: {} tuples stored, {expected} active elements with mass",
                    list.len()
                ));
            }
            let mut prev = f64::INFINITY;
            for (id, score, _) in list.iter() {
                if score > prev {
                    report
                        .violations
                        .push(format!("topic {topic}: ordering violated at element {id}"));
                }
                prev = score;
            }
        }
        report
    }
}

#[derive(Debug, Default)]
pub struct IntegrityReport {
    /// Largest |stored - recomputed| score difference.
    pub max_drift: f64,
    pub violations: Vec<String>,
}

impl IntegrityReport {
    pub fn is_clean(&self, tolerance: f64) -> bool {
        self.violations.is_empty() && self.max_drift <= tolerance
    }
}

/// Query-local traversal over the queried topics' lists.
///
/// Yields elements in descending order of `x_i · δ_i` across list heads,
/// each active element at most once per query; a yielded element's tuples in
/// the other lists are treated as visited.
pub struct TraversalCursor<'a> {
    lists: &'a RankedLists,
    x: &'a QueryVector,
    heads: Vec<Option<RankKey>>,
    visited: HashSet<ElementId>,
}

impl<'a> TraversalCursor<'a> {
    pub fn new(lists: &'a RankedLists, x: &'a QueryVector) -> Self {
        let heads = x
            .entries()
            .iter()
            .map(|&(topic, _)| lists.list(topic).first())
            .collect();
        Self {
            lists,
            x,
            heads,
            visited: HashSet::new(),
        }
    }

    /// `UB(x) = Σ_i x_i · δ_i(e^(i))` over the current heads: an upper bound
    /// on `δ(e, x)` of every not-yet-yielded element.
    pub fn upper_bound(&self) -> f64 {
        self.x
            .entries()
            .iter()
            .zip(&self.heads)
            .map(|(&(_, xi), head)| head.map_or(0.0, |k| xi * k.score))
            .sum()
    }

    pub fn is_exhausted(&self) -> bool {
        self.heads.iter().all(Option::is_none)
    }

    pub fn visited(&self) -> usize {
        self.visited.len()
    }

    /// Yield the unvisited element maximizing `x_i · δ_i(e^(i))` over the
    /// current heads, mark it visited everywhere, and advance. Ties prefer
    /// the earliest queried topic.
    pub fn next_best(&mut self) -> Option<(ElementId, TopicId)> {
        let mut best: Option<(f64, usize)> = None;
        for (idx, head) in self.heads.iter().enumerate() {
            if let Some(key) = head {
                let value = self.x.entries()[idx].1 * key.score;
                if best.map_or(true, |(b, _)| value > b) {
                    best = Some((value, idx));
                }
            }
        }
        let (_, idx) = best?;
        let key = self.heads[idx].expect("winning head present");
        self.visited.insert(key.id);
        for (j, &(topic, _)) in self.x.entries().iter().enumerate() {
            while let Some(k) = self.heads[j] {
                if !self.visited.contains(&k.id) {
                    break;
                }
                self.heads[j] = self.lists.list(topic).next_after(k);
            }
        }
        Some((key.id, self.x.entries()[idx].0))
    }
}

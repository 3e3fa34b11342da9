//! Shared test support: the worked-example fixture, independent reference
//! scorers (deliberately structured differently from the library paths),
//! plain greedy, and randomized instance generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use krep_core::harness::StreamDriver;
use krep_core::ranked_lists::RankedLists;
use krep_core::scoring;
use krep_core::types::{
    validate_element, Element, ElementId, QueryVector, RawElement, ScoringConfig, TopicId,
    TopicModel, WordId,
};
use krep_core::window::{ActiveStore, Snapshot};
use krep_core::ScoreCtx;

/// Topic-word distribution of the two-topic worked example.
pub fn table1_model() -> TopicModel {
    let t1 = [
        (2, 0.06),
        (3, 0.09),
        (4, 0.10),
        (5, 0.05),
        (6, 0.11),
        (7, 0.12),
        (10, 0.11),
        (12, 0.15),
        (13, 0.08),
        (15, 0.13),
    ];
    let t2 = [
        (1, 0.03),
        (2, 0.04),
        (4, 0.09),
        (5, 0.04),
        (6, 0.12),
        (8, 0.06),
        (9, 0.07),
        (11, 0.11),
        (12, 0.14),
        (14, 0.07),
        (15, 0.12),
        (16, 0.11),
    ];
    TopicModel::new(16, vec![t1.to_vec(), t2.to_vec()]).unwrap()
}

/// The eight elements of the worked example, in arrival order.
pub fn table1_elements() -> Vec<Element> {
    let model = table1_model();
    let rows: [(u64, i64, &[WordId], &[u64], [f64; 2]); 8] = [
        (1, 1, &[1, 6, 8, 14, 16], &[], [0.2, 0.8]),
        (2, 2, &[4, 9, 11], &[], [0.26, 0.74]),
        (3, 3, &[3, 5, 10, 13], &[], [0.89, 0.11]),
        (4, 4, &[7, 10], &[3], [1.0, 0.0]),
        (5, 5, &[6, 8, 16], &[1], [0.29, 0.71]),
        (6, 6, &[2, 7, 10, 12], &[3], [0.7, 0.3]),
        (7, 7, &[4, 11], &[2], [0.33, 0.67]),
        (8, 8, &[10, 11, 15], &[2, 3, 6], [0.51, 0.49]),
    ];
    rows.iter()
        .map(|&(id, ts, words, refs, probs)| {
            let topics = (0..2)
                .filter(|&i| probs[i] > 0.0)
                .map(|i| (i, probs[i]))
                .collect();
            validate_element(
                RawElement {
                    id,
                    ts,
                    words: words.iter().map(|&w| (w, 1)).collect(),
                    refs: refs.to_vec(),
                    topics: Some(topics),
                },
                &model,
            )
            .unwrap()
        })
        .collect()
}

pub fn toy_config() -> ScoringConfig {
    ScoringConfig::new(0.5, 2.0, 4, 1).unwrap()
}

/// Replay a stream one bucket at a time, keeping lists in sync.
pub fn replay(elements: Vec<Element>, model: &TopicModel, cfg: &ScoringConfig) -> StreamDriver {
    let mut driver = StreamDriver::new(model, cfg);
    driver.replay(elements, model, cfg).unwrap();
    driver
}

pub fn by_id<'a>(elements: &'a [Element], id: ElementId) -> &'a Element {
    elements.iter().find(|e| e.id == id).unwrap()
}

pub fn sorted(mut ids: Vec<ElementId>) -> Vec<ElementId> {
    ids.sort_unstable();
    ids
}

// ---------------------------------------------------------------------------
// Independent reference scorers. These recompute the definitions with a
// different loop structure than the library: the influence oracle scans the
// window elements and their references instead of the reverse index, and the
// semantic oracle maximizes per word over the member list directly.
// ---------------------------------------------------------------------------

pub fn oracle_word_weight(w: WordId, freq: u32, e: &Element, topic: TopicId, model: &TopicModel) -> f64 {
    let p = model.word_prob(topic, w) * e.topic_prob(topic);
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(freq as f64) * p * p.ln()
}

pub fn oracle_semantic(members: &[&Element], topic: TopicId, model: &TopicModel) -> f64 {
    let words: BTreeSet<WordId> = members
        .iter()
        .flat_map(|e| e.words.iter().map(|&(w, _)| w))
        .collect();
    let mut total = 0.0;
    for w in words {
        let mut best = 0.0_f64;
        for e in members {
            let freq = e.word_freq(w);
            if freq > 0 {
                best = best.max(oracle_word_weight(w, freq, e, topic, model));
            }
        }
        total += best;
    }
    total
}

pub fn oracle_influence(members: &[&Element], topic: TopicId, snap: Snapshot<'_>) -> f64 {
    let member_ids: BTreeSet<ElementId> = members.iter().map(|e| e.id).collect();
    let mut total = 0.0;
    for id in snap.active_ids() {
        if !snap.in_window(id) {
            continue;
        }
        let e = snap.element(id).unwrap();
        let mut survival = 1.0;
        let mut touched = false;
        for &r in &e.refs {
            if member_ids.contains(&r) {
                let parent = members.iter().find(|m| m.id == r).unwrap();
                survival *= 1.0 - parent.topic_prob(topic) * e.topic_prob(topic);
                touched = true;
            }
        }
        if touched {
            total += 1.0 - survival;
        }
    }
    total
}

pub fn oracle_total(
    members: &[&Element],
    x: &QueryVector,
    cfg: &ScoringConfig,
    model: &TopicModel,
    snap: Snapshot<'_>,
) -> f64 {
    x.entries()
        .iter()
        .map(|&(topic, xi)| {
            xi * (cfg.lambda * oracle_semantic(members, topic, model)
                + cfg.influence_weight() * oracle_influence(members, topic, snap))
        })
        .sum()
}

/// Plain (non-lazy) greedy with lowest-id tie-break, scored from scratch.
pub fn plain_greedy(
    k: usize,
    x: &QueryVector,
    snap: Snapshot<'_>,
    model: &TopicModel,
    cfg: &ScoringConfig,
) -> (Vec<ElementId>, f64) {
    let ctx = ScoreCtx { model, cfg, snap, x };
    let mut chosen: Vec<ElementId> = Vec::new();
    let mut current = 0.0;
    for _ in 0..k {
        let mut best: Option<(f64, ElementId)> = None;
        for id in snap.active_ids() {
            if chosen.contains(&id) {
                continue;
            }
            let mut members: Vec<&Element> =
                chosen.iter().map(|&c| snap.element(c).unwrap()).collect();
            members.push(snap.element(id).unwrap());
            let gain = scoring::total_score(&members, &ctx) - current;
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, id));
            }
        }
        let Some((gain, id)) = best else { break };
        chosen.push(id);
        current += gain;
    }
    (chosen, current)
}

// ---------------------------------------------------------------------------
// Randomized small instances
// ---------------------------------------------------------------------------

pub struct Instance {
    pub elements: Vec<Element>,
    pub model: TopicModel,
    pub cfg: ScoringConfig,
    pub driver: StreamDriver,
}

impl Instance {
    pub fn snapshot(&self) -> Snapshot<'_> {
        self.driver.store.snapshot()
    }

    pub fn lists(&self) -> &RankedLists {
        &self.driver.lists
    }

    pub fn store(&self) -> &ActiveStore {
        &self.driver.store
    }

    pub fn active_elements(&self) -> Vec<&Element> {
        self.snapshot()
            .active_ids()
            .map(|id| self.snapshot().element(id).unwrap())
            .collect()
    }
}

/// Random instance with at most `max_n` elements over at most `max_z`
/// topics, replayed into a store + lists with some elements expired.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_z: usize) -> Instance {
    let z = rng.gen_range(1..=max_z);
    let m = rng.gen_range(6..=30usize);
    let mut rows = Vec::with_capacity(z);
    for _ in 0..z {
        let support = rng.gen_range(3..=m);
        let mut words: Vec<WordId> = (1..=m as WordId).collect();
        for i in (1..words.len()).rev() {
            words.swap(i, rng.gen_range(0..=i));
        }
        words.truncate(support);
        let weights: Vec<f64> = (0..support).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        rows.push(
            words
                .into_iter()
                .zip(weights)
                .map(|(w, wt)| (w, wt / total))
                .collect::<Vec<_>>(),
        );
    }
    let model = TopicModel::new(m, rows).unwrap();

    let n = rng.gen_range(3..=max_n);
    let window = rng.gen_range(3..=8i64);
    let horizon = window + rng.gen_range(1..=4i64);
    let cfg = ScoringConfig::new(
        rng.gen_range(0.2..0.8),
        rng.gen_range(0.5..4.0),
        window,
        1,
    )
    .unwrap();

    let mut elements: Vec<Element> = Vec::with_capacity(n);
    for i in 0..n {
        let id = (i + 1) as ElementId;
        let ts = 1 + (i as i64 * (horizon - 1)) / n as i64;
        let n_words = rng.gen_range(1..=4);
        let mut words: BTreeMap<WordId, u32> = BTreeMap::new();
        for _ in 0..n_words {
            *words.entry(rng.gen_range(1..=m as WordId)).or_insert(0) += rng.gen_range(1..=2);
        }
        let mut topics: Vec<(TopicId, f64)> = Vec::new();
        let n_topics = rng.gen_range(1..=2.min(z));
        let mut picked: BTreeSet<TopicId> = BTreeSet::new();
        while picked.len() < n_topics {
            picked.insert(rng.gen_range(0..z));
        }
        let mut remaining = 1.0;
        let picked: Vec<TopicId> = picked.into_iter().collect();
        for (j, &t) in picked.iter().enumerate() {
            let p = if j == picked.len() - 1 {
                remaining
            } else {
                let p = rng.gen_range(0.1..remaining - 0.05);
                remaining -= p;
                p
            };
            topics.push((t, p));
        }
        let mut refs: Vec<ElementId> = Vec::new();
        for prior in elements.iter() {
            if prior.ts < ts && rng.gen_bool(0.25) {
                refs.push(prior.id);
            }
        }
        refs.truncate(3);
        elements.push(Element {
            id,
            ts,
            words: words.into_iter().collect(),
            refs,
            topics,
        });
    }

    let mut driver = StreamDriver::new(&model, &cfg);
    driver.replay(elements.clone(), &model, &cfg).unwrap();
    Instance {
        elements,
        model,
        cfg,
        driver,
    }
}

/// Random sparse query vector over the instance's topics.
pub fn random_query_vector(rng: &mut ChaCha8Rng, z: usize) -> QueryVector {
    let d = rng.gen_range(1..=z.min(3));
    let mut picked: BTreeSet<TopicId> = BTreeSet::new();
    while picked.len() < d {
        picked.insert(rng.gen_range(0..z));
    }
    QueryVector::normalized(
        picked
            .into_iter()
            .map(|t| (t, rng.gen_range(0.1..1.0)))
            .collect(),
    )
    .unwrap()
}

/// Random subset chain `S ⊆ T ⊆ active`, plus an element outside `T`.
/// `None` when the active set is a singleton.
pub fn random_chain<'a>(
    rng: &mut ChaCha8Rng,
    active: &[&'a Element],
) -> Option<(Vec<&'a Element>, Vec<&'a Element>, &'a Element)> {
    if active.len() < 2 {
        return None;
    }
    let extra_idx = rng.gen_range(0..active.len());
    let extra = active[extra_idx];
    let mut t_set: Vec<&Element> = Vec::new();
    for (i, e) in active.iter().enumerate() {
        if i != extra_idx && rng.gen_bool(0.5) {
            t_set.push(e);
        }
    }
    let s_set: Vec<&Element> = t_set.iter().filter(|_| rng.gen_bool(0.6)).copied().collect();
    Some((s_set, t_set, extra))
}

// ---------------------------------------------------------------------------
// The duplicate-heavy constructed suite: thirty clones of one long "hot"
// document dominate the single-element ranking, so plain top-k saturates
// while coverage-aware processors keep gaining.
// ---------------------------------------------------------------------------

pub struct DuplicateHeavy {
    pub model: TopicModel,
    pub cfg: ScoringConfig,
    pub driver: StreamDriver,
}

pub fn duplicate_heavy_instance() -> DuplicateHeavy {
    let clones = 30usize;
    let diverse = 70usize;
    let hot_words = 12usize;
    let diverse_words = 4usize;
    let m = hot_words + diverse * diverse_words;
    let p = 1.0 / m as f64;
    let row: Vec<(WordId, f64)> = (1..=m as WordId).map(|w| (w, p)).collect();
    let model = TopicModel::new(m, vec![row]).unwrap();
    let cfg = ScoringConfig::new(0.5, 2.0, 1000, 100).unwrap();

    let mut elements = Vec::with_capacity(clones + diverse);
    for i in 0..clones {
        elements.push(Element {
            id: (i + 1) as ElementId,
            ts: (i + 1) as i64,
            words: (1..=hot_words as WordId).map(|w| (w, 1)).collect(),
            refs: vec![],
            topics: vec![(0, 1.0)],
        });
    }
    for i in 0..diverse {
        let base = (hot_words + i * diverse_words) as WordId;
        elements.push(Element {
            id: (clones + i + 1) as ElementId,
            ts: (clones + i + 1) as i64,
            words: (1..=diverse_words as WordId).map(|w| (base + w, 1)).collect(),
            refs: vec![],
            topics: vec![(0, 1.0)],
        });
    }

    let mut driver = StreamDriver::new(&model, &cfg);
    driver.replay(elements, &model, &cfg).unwrap();
    DuplicateHeavy { model, cfg, driver }
}

//! Deterministic synthetic stream and topic-model generation.
//!
//! Popularity follows Zipf laws on three axes: word frequency within a
//! topic, topic frequency across elements, and document length. References
//! point backward with a recency bias plus a "celebrity pool" of already
//! heavily referenced elements, which concentrates influence mass the way
//! single-element scores are skewed on real streams.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{Element, ElementId, TopicId, TopicModel, WordId};

use super::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StreamParams {
    /// Number of elements to generate.
    pub elements: usize,
    /// Number of topics `z`.
    pub topics: usize,
    /// Vocabulary size `m` (word ids 1..=m).
    pub vocab: usize,
    /// Stream time span in seconds; timestamps cover `[1, duration]`.
    pub duration: i64,
    /// Zipf exponent for word popularity within a topic.
    pub word_zipf: f64,
    /// Zipf exponent for topic popularity across elements.
    pub topic_zipf: f64,
    /// Zipf exponent for document length.
    pub len_zipf: f64,
    /// Longest document (shortest is 3 words).
    pub max_len: usize,
    /// Expected outgoing references per element.
    pub avg_refs: f64,
    /// Geometric parameter of the backward recency bias.
    pub recency: f64,
    /// Probability that a reference goes to the celebrity pool.
    pub hot_ref_prob: f64,
    /// Probability of a second topic on an element (average topics per
    /// element stays below 2).
    pub second_topic_prob: f64,
    pub seed: u64,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self {
            elements: 100_000,
            topics: 50,
            vocab: 5_000,
            duration: 10_000,
            word_zipf: 1.2,
            topic_zipf: 1.1,
            len_zipf: 1.4,
            max_len: 120,
            avg_refs: 1.2,
            recency: 0.002,
            hot_ref_prob: 0.75,
            second_topic_prob: 0.45,
            seed: 42,
        }
    }
}

pub struct Synthetic {
    pub params: StreamParams,
    pub model: TopicModel,
    pub elements: Vec<Element>,
}

/// Zipf sampler over ranks `1..=n` via inverse CDF on precomputed
/// cumulative weights.
struct ZipfRanks {
    cumulative: Vec<f64>,
}

impl ZipfRanks {
    fn new(n: usize, s: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for r in 1..=n {
            acc += (r as f64).powf(-s);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty ranks");
        let u = rng.gen::<f64>() * total;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).expect("finite"))
        {
            Ok(i) | Err(i) => (i + 1).min(self.cumulative.len()),
        }
    }

    fn weight_share(&self, top: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        self.cumulative[top.min(self.cumulative.len()) - 1] / total
    }
}

fn gen_model(p: &StreamParams, rng: &mut ChaCha8Rng) -> (TopicModel, Vec<Vec<WordId>>) {
    let weights: Vec<f64> = (1..=p.vocab).map(|r| (r as f64).powf(-p.word_zipf)).collect();
    let total: f64 = weights.iter().sum();
    let mut perms: Vec<Vec<WordId>> = Vec::with_capacity(p.topics);
    let mut rows = Vec::with_capacity(p.topics);
    for _ in 0..p.topics {
        let mut perm: Vec<WordId> = (1..=p.vocab as WordId).collect();
        shuffle(&mut perm, rng);
        let mut row: Vec<(WordId, f64)> = Vec::with_capacity(p.vocab);
        let mut dropped = 0.0;
        for (rank, &w) in perm.iter().enumerate() {
            let prob = weights[rank] / total;
            if prob < 1e-8 && dropped + prob < 5e-5 {
                dropped += prob;
                continue;
            }
            row.push((w, prob));
        }
        rows.push(row);
        perms.push(perm);
    }
    let model = TopicModel::new(p.vocab, rows).expect("generated rows are valid");
    (model, perms)
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        items.swap(i, rng.gen_range(0..=i));
    }
}

/// Generate a deterministic synthetic stream plus its topic model.
pub fn gen_stream(p: &StreamParams) -> Synthetic {
    assert!(p.elements > 0 && p.topics > 0 && p.vocab > 2 && p.duration > 0);
    assert!(p.word_zipf >= 0.0 && p.topic_zipf >= 0.0 && p.len_zipf >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (model, perms) = gen_model(p, &mut rng);

    let topic_ranks = ZipfRanks::new(p.topics, p.topic_zipf);
    let word_ranks = ZipfRanks::new(p.vocab, p.word_zipf);
    let len_ranks = ZipfRanks::new(p.max_len.saturating_sub(2).max(1), p.len_zipf);

    let mut elements: Vec<Element> = Vec::with_capacity(p.elements);
    let mut in_degree: BTreeMap<ElementId, u32> = BTreeMap::new();
    let mut celebrities: Vec<ElementId> = Vec::new();

    for i in 0..p.elements {
        let id = (i + 1) as ElementId;
        let ts = 1 + (i as i64 * (p.duration - 1)) / p.elements.max(1) as i64;

        let primary = topic_ranks.sample(&mut rng) - 1;
        let mut topics: Vec<(TopicId, f64)> = Vec::with_capacity(2);
        if p.topics > 1 && rng.gen::<f64>() < p.second_topic_prob {
            let mut secondary = rng.gen_range(0..p.topics);
            while secondary == primary {
                secondary = rng.gen_range(0..p.topics);
            }
            let share = rng.gen_range(0.6..0.95);
            topics.push((primary, share));
            topics.push((secondary, 1.0 - share));
            topics.sort_unstable_by_key(|(t, _)| *t);
        } else {
            topics.push((primary, 1.0));
        }

        let len = 2 + len_ranks.sample(&mut rng);
        let mut counts: BTreeMap<WordId, u32> = BTreeMap::new();
        for _ in 0..len {
            let rank = word_ranks.sample(&mut rng) - 1;
            let word = if rng.gen::<f64>() < 0.8 {
                perms[primary][rank]
            } else {
                rank as WordId + 1
            };
            *counts.entry(word).or_insert(0) += 1;
        }

        let mut n_refs = p.avg_refs.floor() as usize;
        if rng.gen::<f64>() < p.avg_refs.fract() {
            n_refs += 1;
        }
        let mut refs: Vec<ElementId> = Vec::new();
        for _ in 0..n_refs {
            if i == 0 {
                break;
            }
            let target = if !celebrities.is_empty() && rng.gen::<f64>() < p.hot_ref_prob {
                celebrities[rng.gen_range(0..celebrities.len())]
            } else {
                // geometric hop back from the current position
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let hop = (u.ln() / (1.0 - p.recency).ln()).floor() as usize;
                let idx = i.saturating_sub(1 + hop.min(i - 1));
                elements[idx].id
            };
            let target_ts = elements[(target - 1) as usize].ts;
            if target_ts >= ts || refs.contains(&target) {
                continue;
            }
            refs.push(target);
            let deg = in_degree.entry(target).or_insert(0);
            *deg += 1;
            if *deg == 4 {
                celebrities.push(target);
                if celebrities.len() > 400 {
                    celebrities.remove(0);
                }
            }
        }
        refs.sort_unstable();

        elements.push(Element {
            id,
            ts,
            words: counts.into_iter().collect(),
            refs,
            topics,
        });
    }

    Synthetic {
        params: p.clone(),
        model,
        elements,
    }
}

/// Share of total rank mass held by the top `percent` of a Zipf law; used
/// in fixture metadata to document the configured skew.
pub(crate) fn zipf_top_share(n: usize, s: f64, percent: f64) -> f64 {
    let ranks = ZipfRanks::new(n, s);
    ranks.weight_share(((n as f64 * percent).ceil() as usize).max(1))
}

/// Write `stream.jsonl`, `topics.txt`, `dict.txt`, and `meta.json` into a
/// directory.
pub fn write_synthetic(dir: impl AsRef<Path>, synthetic: &Synthetic) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let stream = std::fs::File::create(dir.join("stream.jsonl"))?;
    crate::io::write_stream(std::io::BufWriter::new(stream), &synthetic.elements)?;
    let topics = std::fs::File::create(dir.join("topics.txt"))?;
    crate::io::write_topic_model(std::io::BufWriter::new(topics), &synthetic.model)?;
    let dict = std::fs::File::create(dir.join("dict.txt"))?;
    crate::io::write_dictionary(
        std::io::BufWriter::new(dict),
        (1..=synthetic.params.vocab as WordId).map(|w| (w, format!("w{w}"))),
    )?;
    let mut meta = std::fs::File::create(dir.join("meta.json"))?;
    let doc = serde_json::json!({
        "params": synthetic.params,
        "elements": synthetic.elements.len(),
        "word_zipf_top1pct_share": zipf_top_share(synthetic.params.vocab, synthetic.params.word_zipf, 0.01),
    });
    writeln!(meta, "{}", serde_json::to_string_pretty(&doc).expect("meta serializes"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> StreamParams {
        StreamParams {
            elements: 2_000,
            topics: 10,
            vocab: 500,
            duration: 1_000,
            ..StreamParams::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = small_params();
        let a = gen_stream(&p);
        let b = gen_stream(&p);
        assert_eq!(a.elements, b.elements);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        crate::io::write_stream(&mut buf_a, &a.elements).unwrap();
        crate::io::write_stream(&mut buf_b, &b.elements).unwrap();
        assert_eq!(buf_a, buf_b, "same seed must produce identical bytes");
    }

    #[test]
    fn generates_exact_count_and_valid_elements() {
        let p = small_params();
        let synth = gen_stream(&p);
        assert_eq!(synth.elements.len(), 2_000);
        for e in &synth.elements {
            assert!(e.ts >= 1 && e.ts <= p.duration);
            let sum: f64 = e.topics.iter().map(|(_, v)| v).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for &r in &e.refs {
                assert!(synth.elements[(r - 1) as usize].ts < e.ts);
            }
        }
        // average topics per element stays below 2
        let avg: f64 = synth.elements.iter().map(|e| e.topics.len() as f64).sum::<f64>()
            / synth.elements.len() as f64;
        assert!(avg < 2.0, "avg topics = {avg}");
    }

    #[test]
    fn different_seeds_differ() {
        let a = gen_stream(&small_params());
        let b = gen_stream(&StreamParams {
            seed: 7,
            ..small_params()
        });
        assert_ne!(a.elements, b.elements);
    }
}

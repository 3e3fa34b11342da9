//! Domain types and validation: elements, the topic-model oracle, query
//! vectors, and the scoring configuration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a stream element. Dense integers assigned upstream.
pub type ElementId = u64;
/// Identifier of a vocabulary word, per the dictionary sidecar.
pub type WordId = u32;
/// Topic index in `[0, z)`.
pub type TopicId = usize;

/// Maximum drift of an element's topic-probability sum from 1 that is
/// silently renormalized; larger drift is rejected.
pub const TOPIC_SUM_DRIFT: f64 = 1e-3;
/// Query-vector entries below this weight are dropped after normalization.
pub const QUERY_ENTRY_FLOOR: f64 = 1e-6;
/// Allowed drift of a topic-model row sum from 1 (sparse rows may drop
/// tail mass below 1e-8).
pub const MODEL_ROW_DRIFT: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error("bad reference: {0}")]
    BadReference(String),
    #[error("no topic mass: none of the keywords has probability on any topic")]
    NoTopicMass,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Wire form of one stream record, as decoded from the line format.
///
/// `topics` is optional; when absent the topic distribution is inferred from
/// the element's words by the same additive folding used for query vectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RawElement {
    pub id: ElementId,
    pub ts: i64,
    pub words: Vec<(WordId, u32)>,
    pub refs: Vec<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics: Option<Vec<(TopicId, f64)>>,
}

/// A validated stream element: timestamped bag of words with outgoing
/// references and a sparse topic distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: ElementId,
    pub ts: i64,
    /// Distinct words with frequency >= 1, sorted by word id.
    pub words: Vec<(WordId, u32)>,
    /// Referenced (strictly older) element ids, sorted, no self-reference.
    pub refs: Vec<ElementId>,
    /// Sparse topic distribution, positive entries only, sorted by topic,
    /// summing to 1.
    pub topics: Vec<(TopicId, f64)>,
}

impl Element {
    /// Probability that the element is about `topic`; 0 when unlisted.
    pub fn topic_prob(&self, topic: TopicId) -> f64 {
        self.topics
            .iter()
            .find(|(t, _)| *t == topic)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Frequency of `word` in the element, 0 when absent.
    pub fn word_freq(&self, word: WordId) -> u32 {
        self.words
            .binary_search_by_key(&word, |(w, _)| *w)
            .map(|i| self.words[i].1)
            .unwrap_or(0)
    }

    pub fn to_raw(&self) -> RawElement {
        RawElement {
            id: self.id,
            ts: self.ts,
            words: self.words.clone(),
            refs: self.refs.clone(),
            topics: Some(self.topics.clone()),
        }
    }
}

/// Validate one decoded record into an [`Element`].
///
/// Inline topic vectors are checked for range and sum drift (renormalized up
/// to [`TOPIC_SUM_DRIFT`]); absent vectors are inferred from the words via
/// `model`. References must not point at the element itself.
pub fn validate_element(raw: RawElement, model: &TopicModel) -> Result<Element, CoreError> {
    if raw.words.is_empty() {
        return Err(CoreError::MalformedRecord(format!(
            "element {}: empty word list",
            raw.id
        )));
    }
    let mut words = raw.words;
    words.sort_unstable_by_key(|(w, _)| *w);
    for pair in words.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(CoreError::MalformedRecord(format!(
                "element {}: duplicate word id {}",
                raw.id, pair[0].0
            )));
        }
    }
    if let Some((w, f)) = words.iter().find(|(_, f)| *f == 0) {
        return Err(CoreError::MalformedRecord(format!(
            "element {}: word {} has frequency {}",
            raw.id, w, f
        )));
    }

    let mut refs = raw.refs;
    refs.sort_unstable();
    refs.dedup();
    if refs.contains(&raw.id) {
        return Err(CoreError::BadReference(format!(
            "element {} references itself",
            raw.id
        )));
    }

    let topics = match raw.topics {
        Some(entries) => {
            let mut topics: Vec<(TopicId, f64)> = Vec::with_capacity(entries.len());
            let mut sum = 0.0;
            for (t, p) in entries {
                if t >= model.num_topics() {
                    return Err(CoreError::MalformedRecord(format!(
                        "element {}: topic id {} out of range (z = {})",
                        raw.id,
                        t,
                        model.num_topics()
                    )));
                }
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(CoreError::InvalidProbability(format!(
                        "element {}: p_{}(e) = {}",
                        raw.id, t, p
                    )));
                }
                if p > 0.0 {
                    topics.push((t, p));
                    sum += p;
                }
            }
            topics.sort_unstable_by_key(|(t, _)| *t);
            for pair in topics.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(CoreError::MalformedRecord(format!(
                        "element {}: duplicate topic id {}",
                        raw.id, pair[0].0
                    )));
                }
            }
            if (sum - 1.0).abs() > TOPIC_SUM_DRIFT {
                return Err(CoreError::InvalidProbability(format!(
                    "element {}: topic probabilities sum to {}",
                    raw.id, sum
                )));
            }
            if sum != 1.0 {
                for (_, p) in topics.iter_mut() {
                    *p /= sum;
                }
            }
            topics
        }
        None => fold_topics(words.iter().map(|&(w, f)| (w, f as f64)), model)
            .map_err(|_| {
                CoreError::MalformedRecord(format!(
                    "element {}: no inline topics and no word has topic mass",
                    raw.id
                ))
            })?
            .entries,
    };

    Ok(Element {
        id: raw.id,
        ts: raw.ts,
        words,
        refs,
        topics,
    })
}

/// Read-only topic model oracle: `z` sparse word distributions over a
/// vocabulary of `m` words.
#[derive(Debug, Clone)]
pub struct TopicModel {
    num_topics: usize,
    vocab_size: usize,
    rows: Vec<HashMap<WordId, f64>>,
}

impl TopicModel {
    /// Build a model from sparse rows, checking ranges and row sums
    /// (1 ± [`MODEL_ROW_DRIFT`]).
    pub fn new(
        vocab_size: usize,
        rows: Vec<Vec<(WordId, f64)>>,
    ) -> Result<Self, CoreError> {
        let mut built = Vec::with_capacity(rows.len());
        for (topic, row) in rows.into_iter().enumerate() {
            let mut map = HashMap::with_capacity(row.len());
            let mut sum = 0.0;
            for (w, p) in row {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(CoreError::InvalidProbability(format!(
                        "topic {topic}: p(w{w}) = {p}"
                    )));
                }
                if map.insert(w, p).is_some() {
                    return Err(CoreError::MalformedRecord(format!(
                        "topic {topic}: duplicate word id {w}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > MODEL_ROW_DRIFT {
                return Err(CoreError::InvalidProbability(format!(
                    "topic {topic}: row sums to {sum}"
                )));
            }
            built.push(map);
        }
        Ok(Self {
            num_topics: built.len(),
            vocab_size,
            rows: built,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// `p_i(w)`: probability of `word` under `topic`; 0 when unlisted.
    pub fn word_prob(&self, topic: TopicId, word: WordId) -> f64 {
        self.rows[topic].get(&word).copied().unwrap_or(0.0)
    }

    /// Words with positive probability on `topic`, in unspecified order.
    pub fn row(&self, topic: TopicId) -> impl Iterator<Item = (WordId, f64)> + '_ {
        self.rows[topic].iter().map(|(&w, &p)| (w, p))
    }
}

/// Sparse topic-preference vector with positive entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVector {
    entries: Vec<(TopicId, f64)>,
}

impl QueryVector {
    /// Build from raw weights: entries must be in `(0, 1]` and sum to
    /// 1 ± 1e-9.
    pub fn new(mut entries: Vec<(TopicId, f64)>) -> Result<Self, CoreError> {
        entries.sort_unstable_by_key(|(t, _)| *t);
        if entries.is_empty() {
            return Err(CoreError::InvalidConfig(
                "query vector has no entries".into(),
            ));
        }
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(CoreError::InvalidConfig(format!(
                    "query vector: duplicate topic {}",
                    pair[0].0
                )));
            }
        }
        let mut sum = 0.0;
        for &(t, x) in &entries {
            if x <= 0.0 || x > 1.0 || !x.is_finite() {
                return Err(CoreError::InvalidProbability(format!(
                    "query vector: x_{t} = {x}"
                )));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidProbability(format!(
                "query vector sums to {sum}"
            )));
        }
        Ok(Self { entries })
    }

    /// Normalize arbitrary nonnegative weights into a vector, dropping
    /// zero entries.
    pub fn normalized(weights: Vec<(TopicId, f64)>) -> Result<Self, CoreError> {
        let total: f64 = weights.iter().map(|(_, w)| w.max(0.0)).sum();
        if total <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "query vector weights are all zero".into(),
            ));
        }
        Self::new(
            weights
                .into_iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(t, w)| (t, w / total))
                .collect(),
        )
    }

    /// Positive entries, sorted by topic.
    pub fn entries(&self) -> &[(TopicId, f64)] {
        &self.entries
    }

    /// Number of non-zero entries (`d`).
    pub fn dims(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, topic: TopicId) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| *t == topic)
            .map(|(_, x)| *x)
            .unwrap_or(0.0)
    }
}

struct Folded {
    entries: Vec<(TopicId, f64)>,
}

/// Additive folding of per-word topic probabilities: weight of topic `i` is
/// the sum of `p_i(w)` over the (weighted) words, then normalized.
fn fold_topics(
    words: impl Iterator<Item = (WordId, f64)>,
    model: &TopicModel,
) -> Result<Folded, CoreError> {
    let mut weights = vec![0.0; model.num_topics()];
    for (w, count) in words {
        for topic in 0..model.num_topics() {
            weights[topic] += count * model.word_prob(topic, w);
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(CoreError::NoTopicMass);
    }
    let mut entries: Vec<(TopicId, f64)> = weights
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(t, w)| (t, w / total))
        .collect();
    // drop negligible entries, then renormalize the survivors
    entries.retain(|(_, x)| *x >= QUERY_ENTRY_FLOOR);
    let kept: f64 = entries.iter().map(|(_, x)| x).sum();
    for (_, x) in entries.iter_mut() {
        *x /= kept;
    }
    Ok(Folded { entries })
}

/// Infer a query vector from keywords treated as a pseudo-document:
/// `x_i ∝ Σ_w p_i(w)`, duplicates counting multiply.
///
/// Errors with [`CoreError::NoTopicMass`] when every keyword has zero
/// probability on every topic (keywords absent from the vocabulary included).
pub fn infer_query_vector(
    keywords: &[WordId],
    model: &TopicModel,
) -> Result<QueryVector, CoreError> {
    if keywords.is_empty() {
        return Err(CoreError::InvalidConfig("no keywords given".into()));
    }
    let folded = fold_topics(keywords.iter().map(|&w| (w, 1.0)), model)?;
    QueryVector::new(folded.entries)
}

/// Scoring and window parameters shared by index maintenance and queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Trade-off between semantic and influence terms, in `[0, 1]`.
    pub lambda: f64,
    /// Scale factor bringing the influence term to the semantic term's
    /// range; must be positive.
    pub eta: f64,
    /// Window length `T` in seconds.
    pub window_len: i64,
    /// Bucket length `L` in seconds; must divide `T`.
    pub bucket_len: i64,
}

impl ScoringConfig {
    pub fn new(lambda: f64, eta: f64, window_len: i64, bucket_len: i64) -> Result<Self, CoreError> {
        let cfg = Self {
            lambda,
            eta,
            window_len,
            bucket_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(0.0..=1.0).contains(&self.lambda) || !self.lambda.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "lambda = {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "eta = {} must be positive",
                self.eta
            )));
        }
        if self.bucket_len < 1 || self.window_len < self.bucket_len {
            return Err(CoreError::InvalidConfig(format!(
                "window/bucket lengths T = {}, L = {} violate T >= L >= 1",
                self.window_len, self.bucket_len
            )));
        }
        if self.window_len % self.bucket_len != 0 {
            return Err(CoreError::InvalidConfig(format!(
                "bucket length {} does not divide window length {}",
                self.bucket_len, self.window_len
            )));
        }
        Ok(())
    }

    /// Weight of the influence term: `(1 - λ) / η`.
    pub fn influence_weight(&self) -> f64 {
        (1.0 - self.lambda) / self.eta
    }
}

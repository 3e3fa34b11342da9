//! Stream replay and the benchmark runner.
//!
//! The driver owns the active store and the ranked lists and keeps them in
//! sync bucket by bucket; queries always run between ingests, so every
//! engine in one step sees the identical snapshot.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::run_engine;
use crate::engines::{Engine, Query};
use crate::ranked_lists::RankedLists;
use crate::scoring;
use crate::types::{infer_query_vector, CoreError, Element, QueryVector, ScoringConfig, TopicModel, WordId};
use crate::window::{ActiveStore, UpdateReport};

use super::config::BenchConfig;
use super::metrics::{MetricsReport, QueryRecord, UpdateRecord};
use super::HarnessError;

/// Partition a stream into consecutive buckets `(end, elements)` with
/// `ts ∈ (end - L, end]`, covering `L, 2L, ...` up to at least `until`.
pub fn bucketize(mut elements: Vec<Element>, bucket_len: i64, until: i64) -> Vec<(i64, Vec<Element>)> {
    elements.sort_by_key(|e| e.ts);
    let max_ts = elements.iter().map(|e| e.ts).max().unwrap_or(0).max(until);
    let n_buckets = (max_ts + bucket_len - 1) / bucket_len;
    let mut buckets: Vec<(i64, Vec<Element>)> =
        (1..=n_buckets).map(|i| (i * bucket_len, Vec::new())).collect();
    for e in elements {
        let idx = ((e.ts + bucket_len - 1) / bucket_len - 1) as usize;
        buckets[idx].1.push(e);
    }
    buckets
}

/// Active store plus ranked lists, advanced in lock step.
pub struct StreamDriver {
    pub store: ActiveStore,
    pub lists: RankedLists,
}

impl StreamDriver {
    pub fn new(model: &TopicModel, cfg: &ScoringConfig) -> Self {
        Self {
            store: ActiveStore::new(cfg.window_len, cfg.bucket_len),
            lists: RankedLists::new(model.num_topics()),
        }
    }

    /// Ingest one bucket and update the lists; returns the report and the
    /// combined update time.
    pub fn step(
        &mut self,
        bucket: Vec<Element>,
        model: &TopicModel,
        cfg: &ScoringConfig,
    ) -> Result<(UpdateReport, Duration), HarnessError> {
        let started = Instant::now();
        let report = self.store.ingest_bucket(bucket)?;
        self.lists
            .apply_update(&report, self.store.snapshot(), model, cfg);
        Ok((report, started.elapsed()))
    }

    /// Replay a whole stream without queries; returns per-bucket updates.
    pub fn replay(
        &mut self,
        elements: Vec<Element>,
        model: &TopicModel,
        cfg: &ScoringConfig,
    ) -> Result<Vec<UpdateRecord>, HarnessError> {
        let mut updates = Vec::new();
        for (end, bucket) in bucketize(elements, cfg.bucket_len, 0) {
            let n = bucket.len();
            let (_, took) = self.step(bucket, model, cfg)?;
            updates.push(UpdateRecord {
                bucket_end: end,
                elements: n,
                elapsed_us: took.as_micros() as u64,
            });
        }
        Ok(updates)
    }
}

/// One generated workload query.
#[derive(Debug, Clone)]
pub struct WorkloadQuery {
    pub id: usize,
    /// Assigned stream time; executed at the first bucket boundary >= it.
    pub at: i64,
    pub k: usize,
    pub epsilon: f64,
    pub keywords: Vec<WordId>,
    pub x: QueryVector,
}

fn generate_workload(
    model: &TopicModel,
    t_n: i64,
    w: &super::config::WorkloadSection,
) -> Result<Vec<WorkloadQuery>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
    let mut queries = Vec::with_capacity(w.count);
    for id in 0..w.count {
        let at = rng.gen_range(1..=t_n.max(1));
        let k = rng.gen_range(w.k_min..=w.k_max);
        let mut attempt = 0;
        let (keywords, x) = loop {
            let n_kw = rng.gen_range(w.keywords_min..=w.keywords_max);
            let keywords: Vec<WordId> = (0..n_kw)
                .map(|_| rng.gen_range(1..=model.vocab_size() as WordId))
                .collect();
            match infer_query_vector(&keywords, model) {
                Ok(x) => break (keywords, x),
                Err(CoreError::NoTopicMass) if attempt < 100 => attempt += 1,
                Err(e) => return Err(e.into()),
            }
        };
        queries.push(WorkloadQuery {
            id,
            at,
            k,
            epsilon: w.epsilon,
            keywords,
            x,
        });
    }
    queries.sort_by_key(|q| q.at);
    Ok(queries)
}

/// Load inputs from a config and run the benchmark.
pub fn run_bench(cfg: &BenchConfig) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    let model = crate::io::read_topic_model_path(&cfg.topics)?;
    let elements = crate::io::read_stream_path(&cfg.stream, &model)?;
    let scoring_cfg = cfg.scoring_config()?;
    let engines = cfg.parse_engines()?;
    let params = serde_json::to_value(cfg).expect("config serializes");
    let report = run_bench_core(
        elements,
        &model,
        &scoring_cfg,
        &cfg.workload,
        &engines,
        params,
    )?;
    report.write_files(&cfg.output)?;
    Ok(report)
}

/// Replay the stream bucket by bucket, running every configured engine on
/// the identical snapshot at each query's assigned time.
pub fn run_bench_core(
    elements: Vec<Element>,
    model: &TopicModel,
    cfg: &ScoringConfig,
    workload: &super::config::WorkloadSection,
    engines: &[Engine],
    params: serde_json::Value,
) -> Result<MetricsReport, HarnessError> {
    let t_n = elements.iter().map(|e| e.ts).max().unwrap_or(1);
    let queries = generate_workload(model, t_n, workload)?;
    let mut driver = StreamDriver::new(model, cfg);
    let mut updates = Vec::new();
    let mut records = Vec::new();
    let mut sem_inf = Vec::new();
    let mut next_query = 0usize;

    for (end, bucket) in bucketize(elements, cfg.bucket_len, t_n) {
        let n = bucket.len();
        let (_, took) = driver.step(bucket, model, cfg)?;
        updates.push(UpdateRecord {
            bucket_end: end,
            elements: n,
            elapsed_us: took.as_micros() as u64,
        });

        while next_query < queries.len() && queries[next_query].at <= end {
            let wq = &queries[next_query];
            next_query += 1;
            let snap = driver.store.snapshot();
            let q = Query::new(wq.k, wq.x.clone(), wq.epsilon, snap.now());
            let mut sampled = false;
            for &engine in engines {
                let result = run_engine(engine, &q, snap, &driver.lists, model, cfg)?;
                if !sampled {
                    let members: Vec<&Element> = result
                        .members
                        .iter()
                        .filter_map(|&id| snap.element(id))
                        .collect();
                    let (mut sem, mut inf) = (0.0, 0.0);
                    for &(topic, xi) in q.x.entries() {
                        sem += xi * scoring::semantic_score(&members, topic, model);
                        inf += xi * scoring::influence_score(&members, topic, snap);
                    }
                    sem_inf.push((sem, inf));
                    sampled = true;
                }
                records.push(QueryRecord {
                    query_id: wq.id,
                    t: snap.now(),
                    k: wq.k,
                    epsilon: wq.epsilon,
                    n_t: snap.len(),
                    engine: engine.name().to_string(),
                    elapsed_us: result.elapsed_us,
                    evaluated: result.evaluated,
                    score: result.score,
                    members: result.members,
                });
            }
        }
    }

    let engine_names: Vec<String> = engines.iter().map(|e| e.name().to_string()).collect();
    Ok(MetricsReport::assemble(
        params,
        records,
        updates,
        &sem_inf,
        &engine_names,
    ))
}

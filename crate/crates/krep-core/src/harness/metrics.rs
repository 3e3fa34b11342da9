//! Benchmark metrics: per-query records, per-bucket update records, and
//! derived aggregates, with line-delimited, summary, and TSV writers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::ElementId;

use super::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: usize,
    /// Snapshot time the query ran at.
    pub t: i64,
    pub k: usize,
    pub epsilon: f64,
    pub n_t: usize,
    pub engine: String,
    pub elapsed_us: u64,
    pub evaluated: usize,
    pub score: f64,
    pub members: Vec<ElementId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub bucket_end: i64,
    pub elements: usize,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineSummary {
    pub engine: String,
    pub queries: usize,
    pub mean_latency_us: f64,
    pub median_latency_us: f64,
    pub mean_evaluated_ratio: f64,
    pub mean_score: f64,
    /// Mean of per-query `score / celf score`, when celf ran.
    pub mean_score_ratio_vs_celf: Option<f64>,
    /// Ratios outside `(0, 1.05]` observed against celf.
    pub ratio_range_violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub queries: usize,
    pub buckets: usize,
    pub total_elements: usize,
    pub mean_update_us_per_element: f64,
    pub median_update_us_per_bucket: f64,
    /// Raw semantic vs influence components of result sets; their ratio
    /// guides the choice of eta.
    pub mean_semantic_component: f64,
    pub mean_influence_component: f64,
    pub engines: Vec<EngineSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Full parameter echo for reproducibility.
    pub params: serde_json::Value,
    pub queries: Vec<QueryRecord>,
    pub updates: Vec<UpdateRecord>,
    pub summary: Summary,
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub(crate) fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

impl MetricsReport {
    /// Aggregate a finished run. `sem_inf` carries the raw semantic and
    /// influence components sampled per query.
    pub(crate) fn assemble(
        params: serde_json::Value,
        queries: Vec<QueryRecord>,
        updates: Vec<UpdateRecord>,
        sem_inf: &[(f64, f64)],
        engine_order: &[String],
    ) -> Self {
        let mut engines = Vec::new();
        for name in engine_order {
            let rows: Vec<&QueryRecord> =
                queries.iter().filter(|r| &r.engine == name).collect();
            if rows.is_empty() {
                continue;
            }
            let mut ratios = Vec::new();
            let mut violations = 0usize;
            for r in &rows {
                if let Some(celf) = queries
                    .iter()
                    .find(|c| c.engine == "celf" && c.query_id == r.query_id)
                {
                    if celf.score > 0.0 {
                        let ratio = r.score / celf.score;
                        if ratio <= 0.0 || ratio > 1.05 {
                            violations += 1;
                        }
                        ratios.push(ratio);
                    }
                }
            }
            engines.push(EngineSummary {
                engine: name.clone(),
                queries: rows.len(),
                mean_latency_us: mean(rows.iter().map(|r| r.elapsed_us as f64)),
                median_latency_us: median(rows.iter().map(|r| r.elapsed_us as f64)),
                mean_evaluated_ratio: mean(
                    rows.iter()
                        .filter(|r| r.n_t > 0)
                        .map(|r| r.evaluated as f64 / r.n_t as f64),
                ),
                mean_score: mean(rows.iter().map(|r| r.score)),
                mean_score_ratio_vs_celf: if ratios.is_empty() || name == "celf" {
                    None
                } else {
                    Some(mean(ratios.iter().copied()))
                },
                ratio_range_violations: violations,
            });
        }
        let total_elements: usize = updates.iter().map(|u| u.elements).sum();
        let total_update_us: u64 = updates.iter().map(|u| u.elapsed_us).sum();
        let summary = Summary {
            queries: queries
                .iter()
                .map(|q| q.query_id)
                .collect::<std::collections::BTreeSet<_>>()
                .len(),
            buckets: updates.len(),
            total_elements,
            mean_update_us_per_element: if total_elements == 0 {
                0.0
            } else {
                total_update_us as f64 / total_elements as f64
            },
            median_update_us_per_bucket: median(updates.iter().map(|u| u.elapsed_us as f64)),
            mean_semantic_component: mean(sem_inf.iter().map(|&(s, _)| s)),
            mean_influence_component: mean(sem_inf.iter().map(|&(_, i)| i)),
            engines,
        };
        Self {
            params,
            queries,
            updates,
            summary,
        }
    }

    pub fn engine_summary(&self, engine: &str) -> Option<&EngineSummary> {
        self.summary.engines.iter().find(|e| e.engine == engine)
    }

    /// Write `<prefix>.records.jsonl`, `<prefix>.summary.json`, and
    /// `<prefix>.tsv`.
    pub fn write_files(&self, prefix: impl AsRef<Path>) -> Result<(), HarnessError> {
        let prefix = prefix.as_ref();
        if let Some(parent) = prefix.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let with_ext = |ext: &str| {
            let mut name = prefix.file_name().unwrap_or_default().to_os_string();
            name.push(ext);
            prefix.with_file_name(name)
        };

        let mut records = std::io::BufWriter::new(std::fs::File::create(with_ext(".records.jsonl"))?);
        for u in &self.updates {
            writeln!(
                records,
                "{}",
                serde_json::json!({ "type": "update", "record": u })
            )?;
        }
        for q in &self.queries {
            writeln!(
                records,
                "{}",
                serde_json::json!({ "type": "query", "record": q })
            )?;
        }

        let summary = serde_json::json!({ "params": self.params, "summary": self.summary });
        std::fs::write(
            with_ext(".summary.json"),
            serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;

        let mut tsv = std::io::BufWriter::new(std::fs::File::create(with_ext(".tsv"))?);
        writeln!(
            tsv,
            "query_id\tt\tk\tepsilon\tengine\tn_t\tevaluated\tevaluated_ratio\tscore\telapsed_us"
        )?;
        for q in &self.queries {
            let ratio = if q.n_t > 0 {
                q.evaluated as f64 / q.n_t as f64
            } else {
                0.0
            };
            writeln!(
                tsv,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.9}\t{}",
                q.query_id, q.t, q.k, q.epsilon, q.engine, q.n_t, q.evaluated, ratio, q.score, q.elapsed_us
            )?;
        }
        Ok(())
    }
}

//! Line-oriented ingestion formats.
//!
//! * Element stream: one JSON record per line with fields `id`, `ts`,
//!   `words` (array of `[word_id, freq]` pairs), `refs`, and optional
//!   `topics` (array of `[topic_id, prob]` pairs).
//! * Topic model: header line `z m`, then sparse `topic_id word_id prob`
//!   lines.
//! * Dictionary sidecar: `word_id surface_form` lines.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::types::{CoreError, Element, RawElement, TopicModel, WordId};

/// Decode one stream line into a raw record.
pub fn parse_record(line: &str) -> Result<RawElement, CoreError> {
    serde_json::from_str(line).map_err(|e| CoreError::MalformedRecord(e.to_string()))
}

/// Canonical line encoding of a record: fixed field order, words/refs/topics
/// in sorted order as produced by validation.
pub fn encode_record(raw: &RawElement) -> String {
    serde_json::to_string(raw).expect("record serialization cannot fail")
}

/// Read and validate a whole element stream.
pub fn read_stream(reader: impl Read, model: &TopicModel) -> Result<Vec<Element>, CoreError> {
    let mut elements = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw = parse_record(&line)
            .map_err(|e| CoreError::MalformedRecord(format!("line {}: {e}", lineno + 1)))?;
        elements.push(crate::types::validate_element(raw, model).map_err(|e| match e {
            CoreError::MalformedRecord(m) => {
                CoreError::MalformedRecord(format!("line {}: {m}", lineno + 1))
            }
            other => other,
        })?);
    }
    Ok(elements)
}

pub fn read_stream_path(path: impl AsRef<Path>, model: &TopicModel) -> Result<Vec<Element>, CoreError> {
    read_stream(std::fs::File::open(path)?, model)
}

pub fn write_stream(mut writer: impl Write, elements: &[Element]) -> Result<(), CoreError> {
    for e in elements {
        writeln!(writer, "{}", encode_record(&e.to_raw()))?;
    }
    Ok(())
}

/// Parse a topic model from its text form.
pub fn read_topic_model(reader: impl Read) -> Result<TopicModel, CoreError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::MalformedRecord("topic model: empty file".into()))??;
    let mut it = header.split_whitespace();
    let z: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CoreError::MalformedRecord("topic model: bad header".into()))?;
    let m: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CoreError::MalformedRecord("topic model: bad header".into()))?;
    let mut rows: Vec<Vec<(WordId, f64)>> = vec![Vec::new(); z];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let topic: usize = it.next()?.parse().ok()?;
            let word: WordId = it.next()?.parse().ok()?;
            let prob: f64 = it.next()?.parse().ok()?;
            Some((topic, word, prob))
        })();
        let (topic, word, prob) = parsed.ok_or_else(|| {
            CoreError::MalformedRecord(format!("topic model line {}: `{line}`", lineno + 2))
        })?;
        if topic >= z {
            return Err(CoreError::MalformedRecord(format!(
                "topic model line {}: topic {topic} out of range",
                lineno + 2
            )));
        }
        rows[topic].push((word, prob));
    }
    TopicModel::new(m, rows)
}

pub fn read_topic_model_path(path: impl AsRef<Path>) -> Result<TopicModel, CoreError> {
    read_topic_model(std::fs::File::open(path)?)
}

pub fn write_topic_model(mut writer: impl Write, model: &TopicModel) -> Result<(), CoreError> {
    writeln!(writer, "{} {}", model.num_topics(), model.vocab_size())?;
    for topic in 0..model.num_topics() {
        let mut row: Vec<(WordId, f64)> = model.row(topic).collect();
        row.sort_unstable_by_key(|(w, _)| *w);
        for (w, p) in row {
            writeln!(writer, "{topic} {w} {p}")?;
        }
    }
    Ok(())
}

/// Load the `word_id surface_form` dictionary sidecar.
pub fn read_dictionary(reader: impl Read) -> Result<HashMap<String, WordId>, CoreError> {
    let mut dict = HashMap::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.splitn(2, char::is_whitespace);
        let parsed = (|| {
            let id: WordId = it.next()?.parse().ok()?;
            let surface = it.next()?.trim();
            if surface.is_empty() {
                return None;
            }
            Some((id, surface.to_string()))
        })();
        let (id, surface) = parsed.ok_or_else(|| {
            CoreError::MalformedRecord(format!("dictionary line {}: `{line}`", lineno + 1))
        })?;
        dict.insert(surface, id);
    }
    Ok(dict)
}

pub fn read_dictionary_path(path: impl AsRef<Path>) -> Result<HashMap<String, WordId>, CoreError> {
    read_dictionary(std::fs::File::open(path)?)
}

pub fn write_dictionary(
    mut writer: impl Write,
    entries: impl Iterator<Item = (WordId, String)>,
) -> Result<(), CoreError> {
    for (id, surface) in entries {
        writeln!(writer, "{id} {surface}")?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::types::validate_element;

    /// Topic-word distribution of the two-topic worked example.
    pub(crate) fn table1_model() -> TopicModel {
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
    pub(crate) fn table1_elements() -> Vec<Element> {
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
                let topics = (0..2).filter(|&i| probs[i] > 0.0).map(|i| (i, probs[i])).collect();
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

    #[test]
    fn record_round_trips_bit_identically() {
        for e in table1_elements() {
            let line = encode_record(&e.to_raw());
            let back = validate_element(parse_record(&line).unwrap(), &table1_model()).unwrap();
            assert_eq!(back, e);
            assert_eq!(encode_record(&back.to_raw()), line);
        }
    }

    #[test]
    fn stream_read_write() {
        let elements = table1_elements();
        let mut buf = Vec::new();
        write_stream(&mut buf, &elements).unwrap();
        let back = read_stream(&buf[..], &table1_model()).unwrap();
        assert_eq!(back, elements);
    }

    #[test]
    fn topic_model_round_trips() {
        let model = table1_model();
        let mut buf = Vec::new();
        write_topic_model(&mut buf, &model).unwrap();
        let back = read_topic_model(&buf[..]).unwrap();
        assert_eq!(back.num_topics(), 2);
        assert_eq!(back.vocab_size(), 16);
        for t in 0..2 {
            for w in 1..=16 {
                assert_eq!(back.word_prob(t, w), model.word_prob(t, w));
            }
        }
    }

    #[test]
    fn malformed_lines_are_reported_with_position() {
        let err = read_stream("not json\n".as_bytes(), &table1_model()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = read_topic_model("2 16\n0 nope\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn bad_row_sum_is_rejected() {
        let err = read_topic_model("1 2\n0 1 0.5\n0 2 0.6\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CoreError::InvalidProbability(_)));
    }

    #[test]
    fn dictionary_round_trip() {
        let mut buf = Vec::new();
        write_dictionary(&mut buf, vec![(1, "asroma".to_string()), (7, "lebron".to_string())].into_iter())
            .unwrap();
        let dict = read_dictionary(&buf[..]).unwrap();
        assert_eq!(dict["lebron"], 7);
        assert_eq!(dict.len(), 2);
    }
}

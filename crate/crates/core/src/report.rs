//! Tabular reports: top words, topic shares, period summaries and the CSV
//! files the pipeline emits.

use std::io::{self, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use tempfile::NamedTempFile;

use crate::corpus::{Schedule, DATE_FORMAT};
use crate::detect::DetectionSeries;
use crate::error::{Error, Result};
use crate::impact::WordImpact;
use crate::rolling::RollingState;
use crate::vocab::Vocabulary;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a half-written file.
pub fn write_atomically<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io_err = |e| Error::io("report::write", path, e);
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// The `n` highest-weighted words, ties broken lexicographically.
pub fn top_words<T: Copy + Into<f64>>(
    weights: &[T],
    vocab: &Vocabulary,
    n: usize,
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(&str, f64)> = weights
        .iter()
        .enumerate()
        .filter_map(|(v, &w)| vocab.word(v as u32).map(|word| (word, w.into())))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(n)
        .map(|(w, c)| (w.to_string(), c))
        .collect()
}

/// Share of each chunk's tokens assigned to each topic. Chunks without
/// tokens yield `None`.
pub fn topic_shares(state: &RollingState) -> Vec<(usize, Option<Vec<f64>>)> {
    let k = state.num_topics();
    state
        .chunks()
        .iter()
        .map(|chunk| {
            let mut counts = vec![0u64; k];
            for &z in chunk.topics.iter().flatten() {
                counts[z as usize] += 1;
            }
            let total: u64 = counts.iter().sum();
            let row =
                (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect());
            (chunk.index, row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodRow {
    /// 1-based period number.
    pub period: usize,
    pub start: NaiveDate,
    pub documents: usize,
    /// `None` for periods that lie entirely inside the initialization.
    pub changes: Option<usize>,
}

/// Documents and detected changes per period. A change is attributed to
/// the period containing the start of its chunk.
pub fn period_summary(
    doc_dates: impl IntoIterator<Item = NaiveDate>,
    change_dates: impl IntoIterator<Item = NaiveDate>,
    periods: &Schedule,
    init_end: NaiveDate,
) -> Vec<PeriodRow> {
    let mut rows: Vec<PeriodRow> = periods
        .ranges()
        .enumerate()
        .map(|(i, (start, end))| PeriodRow {
            period: i + 1,
            start,
            documents: 0,
            changes: (end > init_end).then_some(0),
        })
        .collect();
    for date in doc_dates {
        if let Some(i) = periods.locate(date) {
            rows[i].documents += 1;
        }
    }
    for date in change_dates {
        if let Some(c) = periods.locate(date).and_then(|i| rows[i].changes.as_mut()) {
            *c += 1;
        }
    }
    rows
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn change_id(topic: usize, t: usize) -> String {
    format!("k{topic}-t{t}")
}

fn date_range(state: &RollingState, t: usize) -> (String, String) {
    state
        .chunk(t)
        .map(|c| {
            (
                c.start.format(DATE_FORMAT).to_string(),
                c.end.format(DATE_FORMAT).to_string(),
            )
        })
        .unwrap_or_default()
}

pub fn write_changes(
    out: &mut dyn Write,
    series: &DetectionSeries,
    state: &RollingState,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "topic",
        "t",
        "date_range",
        "observed_similarity",
        "q",
        "z",
        "detected",
    ])?;
    for r in series.changes() {
        let (start, end) = date_range(state, r.t);
        w.write_record([
            r.topic.to_string(),
            r.t.to_string(),
            format!("{start}/{end}"),
            fmt_opt(r.observed_similarity),
            fmt_opt(r.threshold),
            r.run_length.to_string(),
            r.detected.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_similarities(
    out: &mut dyn Write,
    series: &DetectionSeries,
    state: &RollingState,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "topic",
        "t",
        "chunk_start",
        "chunk_end",
        "tokens",
        "observed_similarity",
        "q",
        "z",
        "detected",
    ])?;
    let mut records: Vec<_> = series.records.iter().collect();
    records.sort_by_key(|r| (r.topic, r.t));
    for r in records {
        let (start, end) = date_range(state, r.t);
        w.write_record([
            r.topic.to_string(),
            r.t.to_string(),
            start,
            end,
            r.tokens.to_string(),
            fmt_opt(r.observed_similarity),
            fmt_opt(r.threshold),
            r.run_length.to_string(),
            r.detected.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_impacts(out: &mut dyn Write, impacts: &[(String, Vec<WordImpact>)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "change_id",
        "rank",
        "word",
        "impact",
        "direction",
        "freq_t",
        "freq_ref",
    ])?;
    for (id, list) in impacts {
        for (rank, wi) in list.iter().enumerate() {
            w.write_record([
                id.clone(),
                (rank + 1).to_string(),
                wi.word.clone(),
                wi.impact.to_string(),
                wi.direction.as_str().to_string(),
                wi.freq_t.to_string(),
                wi.freq_ref.to_string(),
            ])?;
        }
    }
    w.flush()
}

/// Top `n` words of every topic in every chunk.
pub fn write_top_words(out: &mut dyn Write, state: &RollingState, n: usize) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["topic", "t", "rank", "word", "count"])?;
    let k = state.num_topics();
    for chunk in state.chunks() {
        let counts = chunk.topic_counts(k, chunk.vocab_size);
        for topic in 0..k {
            for (rank, (word, count)) in top_words(counts.row(topic), state.vocab(), n)
                .into_iter()
                .filter(|(_, c)| *c > 0.0)
                .enumerate()
            {
                w.write_record([
                    topic.to_string(),
                    chunk.index.to_string(),
                    (rank + 1).to_string(),
                    word,
                    count.to_string(),
                ])?;
            }
        }
    }
    w.flush()
}

pub fn write_shares(out: &mut dyn Write, state: &RollingState) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "t".to_string(),
        "chunk_start".into(),
        "chunk_end".into(),
        "tokens".into(),
    ];
    header.extend((0..state.num_topics()).map(|k| format!("topic_{k}")));
    w.write_record(&header)?;
    for ((t, row), chunk) in topic_shares(state).into_iter().zip(state.chunks()) {
        let (start, end) = date_range(state, t);
        let mut record = vec![t.to_string(), start, end, chunk.num_tokens().to_string()];
        match row {
            Some(shares) => record.extend(shares.iter().map(f64::to_string)),
            None => record.extend(std::iter::repeat_n(String::new(), state.num_topics())),
        }
        w.write_record(&record)?;
    }
    w.flush()
}

pub fn write_summary(out: &mut dyn Write, rows: &[PeriodRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "start_date", "documents", "changes"])?;
    for r in rows {
        w.write_record([
            r.period.to_string(),
            r.start.format(DATE_FORMAT).to_string(),
            r.documents.to_string(),
            r.changes
                .map_or_else(|| "NA".to_string(), |c| c.to_string()),
        ])?;
    }
    w.flush()
}

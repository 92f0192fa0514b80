//! Time-stamped documents, tokenization, and partitioning into time chunks.
//!
//! Corpus files are JSON Lines, one record per line:
//!
//! ```text
//! {"id": "01001#1", "date": "1949-09-07", "text": "Meine Damen und Herren! ..."}
//! ```
//!
//! Schedule files hold one ISO-8601 boundary date per line, strictly
//! increasing. Boundaries `b0 < b1 < ... < bT+1` define the half-open chunks
//! `[b0, b1), [b1, b2), ...`.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// One speech (or any other unit of text) with its date and normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
}

/// Documents whose dates fall into `[start, end)`. Chunk 0 is the
/// initialization batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeChunk {
    pub index: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub documents: Vec<Document>,
}

impl TimeChunk {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn date_range(&self) -> String {
        format!(
            "{}/{}",
            self.start.format(DATE_FORMAT),
            self.end.format(DATE_FORMAT)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizeRules {
    pub min_len: usize,
    pub stopwords: HashSet<String>,
}

impl Default for TokenizeRules {
    fn default() -> Self {
        TokenizeRules {
            min_len: 2,
            stopwords: HashSet::new(),
        }
    }
}

impl TokenizeRules {
    /// Reads a stopword list, one word per line; `#` starts a comment.
    pub fn with_stopword_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io("corpus::stopwords", path, e))?;
        self.stopwords.extend(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase),
        );
        Ok(self)
    }
}

/// Lowercases, splits on every non-letter character (so digits and
/// punctuation vanish), drops tokens shorter than `min_len` characters and
/// stopwords.
pub fn tokenize(raw_text: &str, rules: &TokenizeRules) -> Vec<String> {
    raw_text
        .split(|c: char| !c.is_alphabetic())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .filter(|tok| tok.chars().count() >= rules.min_len && !rules.stopwords.contains(tok))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CorpusRecord {
    pub id: String,
    pub date: String,
    pub text: String,
}

pub fn parse_date(value: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(value.trim(), DATE_FORMAT).ok()
}

pub fn load_corpus(path: &Path, rules: &TokenizeRules) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io("corpus::load_corpus", path, e))?;
    parse_corpus(&text, rules)
}

/// Parses JSON Lines corpus text. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_corpus(text: &str, rules: &TokenizeRules) -> Result<Vec<Document>> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    lines
        .par_iter()
        .map(|&(line, raw)| {
            let record: CorpusRecord =
                serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
                    line,
                    reason: e.to_string(),
                })?;
            let date = parse_date(&record.date).ok_or_else(|| Error::RecordDate {
                line,
                id: record.id.clone(),
                value: record.date.clone(),
            })?;
            Ok(Document {
                tokens: tokenize(&record.text, rules),
                id: record.id,
                date,
            })
        })
        .collect()
}

/// Writes records as JSON Lines.
pub fn write_corpus<W: Write>(mut out: W, records: &[CorpusRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Strictly increasing chunk boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    boundaries: Vec<NaiveDate>,
}

impl Schedule {
    pub fn new(boundaries: Vec<NaiveDate>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidSchedule(format!(
                "need at least two boundaries, got {}",
                boundaries.len()
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule(format!(
                "boundaries not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Schedule { boundaries })
    }

    pub fn boundaries(&self) -> &[NaiveDate] {
        &self.boundaries
    }

    pub fn num_chunks(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn ranges(&self) -> impl Iterator<Item = (NaiveDate, NaiveDate)> + '_ {
        self.boundaries.windows(2).map(|w| (w[0], w[1]))
    }

    /// Index of the chunk containing `date`, if any.
    pub fn locate(&self, date: NaiveDate) -> Option<usize> {
        if date < self.boundaries[0] || date >= *self.boundaries.last()? {
            return None;
        }
        Some(self.boundaries.partition_point(|b| *b <= date) - 1)
    }

    /// Splits every range into `parts` spans of (nearly) equal length in days.
    pub fn split_equal_spans(&self, parts: usize) -> Result<Schedule> {
        if parts == 0 {
            return Err(Error::InvalidSchedule("parts must be >= 1".into()));
        }
        let mut out = vec![self.boundaries[0]];
        for (start, end) in self.ranges() {
            let days = (end - start).num_days();
            if days < parts as i64 {
                return Err(Error::InvalidSchedule(format!(
                    "range {start}..{end} has {days} days, cannot split into {parts}"
                )));
            }
            for i in 1..=parts as i64 {
                out.push(start + chrono::Duration::days(i * days / parts as i64));
            }
        }
        Schedule::new(out)
    }

    /// Splits every range into `parts` spans holding (nearly) equal numbers
    /// of distinct session dates. Ranges with fewer sessions than `parts`
    /// fall back to equal date spans.
    pub fn split_by_sessions(&self, parts: usize, docs: &[Document]) -> Result<Schedule> {
        if parts == 0 {
            return Err(Error::InvalidSchedule("parts must be >= 1".into()));
        }
        let sessions: BTreeSet<NaiveDate> = docs.iter().map(|d| d.date).collect();
        let mut out = vec![self.boundaries[0]];
        for (start, end) in self.ranges() {
            let in_range: Vec<NaiveDate> = sessions.range(start..end).copied().collect();
            if in_range.len() < parts {
                let sub = Schedule::new(vec![start, end])?.split_equal_spans(parts)?;
                out.extend_from_slice(&sub.boundaries[1..]);
                continue;
            }
            for i in 1..parts {
                out.push(in_range[i * in_range.len() / parts]);
            }
            out.push(end);
        }
        Schedule::new(out)
    }
}

pub fn load_schedule(path: &Path) -> Result<Schedule> {
    let text = fs::read_to_string(path).map_err(|e| Error::io("corpus::load_schedule", path, e))?;
    parse_schedule(&text)
}

/// One ISO date per line; blank lines and `#` comments are ignored.
pub fn parse_schedule(text: &str) -> Result<Schedule> {
    let mut boundaries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let date = parse_date(line).ok_or_else(|| Error::Schedule {
            line: i + 1,
            reason: format!("unparseable date {line:?}"),
        })?;
        if let Some(prev) = boundaries.last() {
            if *prev >= date {
                return Err(Error::Schedule {
                    line: i + 1,
                    reason: format!("{date} does not follow {prev}"),
                });
            }
        }
        boundaries.push(date);
    }
    Schedule::new(boundaries)
}

#[derive(Debug, Clone)]
pub struct ChunkedCorpus {
    pub chunks: Vec<TimeChunk>,
    /// Non-fatal findings, e.g. chunks that received no documents.
    pub warnings: Vec<String>,
}

/// Places every document in the chunk whose range holds its date. Input
/// order is preserved within each chunk.
pub fn chunk_by_schedule(docs: Vec<Document>, schedule: &Schedule) -> Result<ChunkedCorpus> {
    let outside: Vec<String> = docs
        .iter()
        .filter(|d| schedule.locate(d.date).is_none())
        .map(|d| d.id.clone())
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutsideSchedule { ids: outside });
    }

    let mut chunks: Vec<TimeChunk> = schedule
        .ranges()
        .enumerate()
        .map(|(index, (start, end))| TimeChunk {
            index,
            start,
            end,
            documents: Vec::new(),
        })
        .collect();
    for doc in docs {
        let idx = schedule.locate(doc.date).expect("checked above");
        chunks[idx].documents.push(doc);
    }

    let warnings = chunks
        .iter()
        .filter(|c| c.documents.is_empty())
        .map(|c| format!("chunk {} ({}) is empty", c.index, c.date_range()))
        .collect::<Vec<_>>();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ChunkedCorpus { chunks, warnings })
}

//! Leave-one-out word impacts.
//!
//! The impact of word `v` is the change in cosine similarity between the
//! current and reference counts when coordinate `v` is removed from both:
//! `cos(n_t \ v, ref \ v) − cos(n_t, ref)`. A positive impact means the word
//! pulled the similarity down, i.e. it drove the change.

use std::cmp::Ordering;

use crate::detect::{reference_counts, CountHistory, DetectionRecord};
use crate::error::{Error, Result};
use crate::rolling::RollingState;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    MoreFrequent,
    LessFrequent,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::MoreFrequent => "more_frequent",
            Direction::LessFrequent => "less_frequent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordImpact {
    pub word: String,
    pub impact: f64,
    pub direction: Direction,
    pub freq_t: f64,
    pub freq_ref: f64,
}

/// Impacts for every word present in either vector, sorted by absolute
/// impact (ties by word) and truncated to `top_m`. Words whose removal
/// leaves a zero vector have no defined impact and are skipped.
pub fn loo_impacts(
    current: &[u32],
    reference: &[u32],
    words: &Vocabulary,
    top_m: usize,
) -> Result<Vec<WordImpact>> {
    let len = current.len().max(reference.len());
    let at = |xs: &[u32], v: usize| xs.get(v).copied().unwrap_or(0) as f64;
    let (mut dot, mut nc, mut nr, mut sum_c, mut sum_r) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for v in 0..len {
        let (c, r) = (at(current, v), at(reference, v));
        dot += c * r;
        nc += c * c;
        nr += r * r;
        sum_c += c;
        sum_r += r;
    }
    if nc == 0.0 || nr == 0.0 {
        return Err(Error::ZeroVector { op: "loo_impacts" });
    }
    let full = dot / (nc.sqrt() * nr.sqrt());

    let mut out = Vec::new();
    for v in 0..len {
        let (c, r) = (at(current, v), at(reference, v));
        if c + r == 0.0 {
            continue;
        }
        let (rest_c, rest_r) = (nc - c * c, nr - r * r);
        if rest_c <= 0.0 || rest_r <= 0.0 {
            continue;
        }
        let without = (dot - c * r) / (rest_c.sqrt() * rest_r.sqrt());
        let (freq_t, freq_ref) = (c / sum_c, r / sum_r);
        out.push(WordImpact {
            word: words
                .word(v as u32)
                .map_or_else(|| format!("#{v}"), str::to_string),
            impact: without - full,
            direction: if freq_t > freq_ref {
                Direction::MoreFrequent
            } else {
                Direction::LessFrequent
            },
            freq_t,
            freq_ref,
        });
    }
    out.sort_by(|a, b| {
        b.impact
            .abs()
            .partial_cmp(&a.impact.abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    out.truncate(top_m);
    Ok(out)
}

/// Word impacts behind one detected change.
pub fn impact_report(
    record: &DetectionRecord,
    state: &RollingState,
    top_m: usize,
) -> Result<Vec<WordImpact>> {
    if !record.detected {
        return Err(Error::NotDetected {
            topic: record.topic,
            t: record.t,
        });
    }
    let k = state.num_topics();
    let z = record.run_length;
    let chunk = state.chunk(record.t).ok_or(Error::ChunkOutOfRange {
        op: "impact::impact_report",
        t: record.t,
        first: state.first_index(),
        last: state.last_index(),
    })?;
    let mut history = CountHistory::new(z + 1);
    for s in record.t.saturating_sub(z)..=record.t {
        let c = state.chunk(s).ok_or(Error::RunLength { z, t: record.t })?;
        history.push(s, c.topic_counts(k, c.vocab_size));
    }
    let reference = reference_counts(&history, record.topic, record.t, z, chunk.vocab_size)?;
    let current = history
        .get(record.t)
        .expect("pushed above")
        .row(record.topic)
        .to_vec();
    loo_impacts(&current, &reference, state.vocab(), top_m)
}

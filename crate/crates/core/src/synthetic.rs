//! Seeded synthetic corpora with known topic structure, used by the
//! examples, the bundled fixture and the statistical test suites.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{CorpusRecord, Document, TimeChunk, DATE_FORMAT};
use crate::seed;

/// Letter-only word name for index `i`: `waaa`, `waab`, ...
pub fn word_name(i: usize) -> String {
    let mut letters = [b'a'; 3];
    let mut n = i;
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (n % 26) as u8;
        n /= 26;
    }
    let mut name = String::from("w");
    if n > 0 {
        name.push_str(&word_name(n - 1)[1..]);
    }
    name.push_str(std::str::from_utf8(&letters).expect("ascii"));
    name
}

/// `k` topics over `k * words_per_topic` words; topic `j` puts Zipf-like
/// weights on words `j*w .. (j+1)*w` and nothing elsewhere.
pub fn disjoint_topics(k: usize, words_per_topic: usize) -> Vec<Vec<f64>> {
    let v = k * words_per_topic;
    (0..k)
        .map(|j| {
            let mut row = vec![0.0; v];
            let norm: f64 = (1..=words_per_topic).map(|r| 1.0 / r as f64).sum();
            for r in 0..words_per_topic {
                row[j * words_per_topic + r] = 1.0 / (r + 1) as f64 / norm;
            }
            row
        })
        .collect()
}

/// Draws from a discrete distribution by inversion.
fn draw_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Topic proportions for one document. `doc_alpha <= 0` puts the whole
/// document in one uniformly chosen topic.
fn doc_mixture<R: Rng>(k: usize, doc_alpha: f64, rng: &mut R) -> Vec<f64> {
    if doc_alpha <= 0.0 {
        let mut theta = vec![0.0; k];
        theta[rng.random_range(0..k)] = 1.0;
        return theta;
    }
    let gamma = Gamma::new(doc_alpha, 1.0).expect("positive shape");
    let mut theta: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = theta.iter().sum();
    if total <= 0.0 {
        theta = vec![0.0; k];
        theta[rng.random_range(0..k)] = 1.0;
    } else {
        theta.iter_mut().for_each(|x| *x /= total);
    }
    theta
}

/// A document batch: word ids plus the generating topic of every token.
#[derive(Debug, Clone)]
pub struct Sample {
    pub docs: Vec<Vec<u32>>,
    pub topics: Vec<Vec<usize>>,
}

/// Samples `num_docs` documents of `doc_len` tokens from the generators
/// `phi` (rows over a shared vocabulary).
pub fn sample_docs<R: Rng>(
    phi: &[Vec<f64>],
    num_docs: usize,
    doc_len: usize,
    doc_alpha: f64,
    rng: &mut R,
) -> Sample {
    let mut sample = Sample {
        docs: Vec::with_capacity(num_docs),
        topics: Vec::with_capacity(num_docs),
    };
    for _ in 0..num_docs {
        let theta = doc_mixture(phi.len(), doc_alpha, rng);
        let mut words = Vec::with_capacity(doc_len);
        let mut topics = Vec::with_capacity(doc_len);
        for _ in 0..doc_len {
            let k = draw_index(&theta, rng);
            words.push(draw_index(&phi[k], rng) as u32);
            topics.push(k);
        }
        sample.docs.push(words);
        sample.topics.push(topics);
    }
    sample
}

/// A dated stream whose generating topics may differ per chunk.
#[derive(Debug, Clone)]
pub struct StreamSpec {
    /// `phi[t][k]`: distribution of topic `k` in chunk `t` over word ids.
    pub phi: Vec<Vec<Vec<f64>>>,
    pub docs_per_chunk: usize,
    pub doc_len: usize,
    /// Dirichlet concentration of document mixtures; `<= 0` for
    /// single-topic documents.
    pub doc_alpha: f64,
    pub start: NaiveDate,
    pub chunk_days: i64,
}

impl StreamSpec {
    /// Same generators in every chunk.
    pub fn stationary(phi: Vec<Vec<f64>>, chunks: usize) -> Self {
        StreamSpec {
            phi: vec![phi; chunks],
            docs_per_chunk: 200,
            doc_len: 50,
            doc_alpha: 0.0,
            start: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
            chunk_days: 182,
        }
    }

    pub fn num_chunks(&self) -> usize {
        self.phi.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }

    /// Chunk boundaries, `num_chunks + 1` dates.
    pub fn boundaries(&self) -> Vec<NaiveDate> {
        (0..=self.num_chunks() as i64)
            .map(|t| self.start + Duration::days(t * self.chunk_days))
            .collect()
    }

    /// Generates the chunks. Chunk `t` draws from its own substream of
    /// `seed`, so changing one chunk's generators leaves the others intact.
    pub fn generate(&self, seed: u64) -> Vec<TimeChunk> {
        let bounds = self.boundaries();
        (0..self.num_chunks())
            .map(|t| {
                let mut rng = seed::rng(seed, &[t as u64]);
                let sample = sample_docs(
                    &self.phi[t],
                    self.docs_per_chunk,
                    self.doc_len,
                    self.doc_alpha,
                    &mut rng,
                );
                let (start, end) = (bounds[t], bounds[t + 1]);
                let span = (end - start).num_days().max(1);
                let documents = sample
                    .docs
                    .into_iter()
                    .enumerate()
                    .map(|(d, words)| Document {
                        id: format!("c{t}d{d}"),
                        date: start
                            + Duration::days(d as i64 * span / self.docs_per_chunk.max(1) as i64),
                        tokens: words.into_iter().map(|w| word_name(w as usize)).collect(),
                    })
                    .collect();
                TimeChunk {
                    index: t,
                    start,
                    end,
                    documents,
                }
            })
            .collect()
    }
}

/// Corpus records for generated chunks; the text is the tokens joined by
/// spaces, so tokenizing it gives the tokens back.
pub fn records(chunks: &[TimeChunk]) -> Vec<CorpusRecord> {
    chunks
        .iter()
        .flat_map(|c| &c.documents)
        .map(|d| CorpusRecord {
            id: d.id.clone(),
            date: d.date.format(DATE_FORMAT).to_string(),
            text: d.tokens.join(" "),
        })
        .collect()
}

/// Schedule file text (one boundary per line) for a stream.
pub fn schedule_text(spec: &StreamSpec) -> String {
    spec.boundaries()
        .iter()
        .map(|b| format!("{}\n", b.format(DATE_FORMAT)))
        .collect()
}

/// `k` disjoint topics; from chunk `change_at` on, topic `shifted` uses a
/// fresh block of words disjoint from every earlier support.
pub fn planted_change(
    k: usize,
    words_per_topic: usize,
    chunks: usize,
    change_at: usize,
    shifted: usize,
) -> StreamSpec {
    let base = disjoint_topics(k, words_per_topic);
    let v = (k + 1) * words_per_topic;
    let widen = |row: &Vec<f64>| {
        let mut r = row.clone();
        r.resize(v, 0.0);
        r
    };
    let before: Vec<Vec<f64>> = base.iter().map(widen).collect();
    let mut after = before.clone();
    let fresh = &mut after[shifted];
    let old = fresh[shifted * words_per_topic..(shifted + 1) * words_per_topic].to_vec();
    fresh.iter_mut().for_each(|x| *x = 0.0);
    fresh[k * words_per_topic..].copy_from_slice(&old);
    let mut spec = StreamSpec::stationary(before.clone(), chunks);
    for t in change_at..chunks {
        spec.phi[t] = after.clone();
    }
    spec
}

/// Word ids introduced by [`planted_change`].
pub fn planted_words(k: usize, words_per_topic: usize) -> std::ops::Range<usize> {
    k * words_per_topic..(k + 1) * words_per_topic
}

/// `k` disjoint topics where topic 0 moves its mass linearly, chunk by
/// chunk, from its own block towards a fresh block at `rate` per chunk.
pub fn graded_drift(k: usize, words_per_topic: usize, chunks: usize, rate: f64) -> StreamSpec {
    let base = disjoint_topics(k, words_per_topic);
    let v = (k + 1) * words_per_topic;
    let mut spec = StreamSpec::stationary(Vec::new(), chunks);
    for t in 0..chunks {
        let w = (rate * t as f64).clamp(0.0, 1.0);
        let rows: Vec<Vec<f64>> = base
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let mut r = row.clone();
                r.resize(v, 0.0);
                if j == 0 {
                    for i in 0..words_per_topic {
                        let mass = r[i];
                        r[i] = (1.0 - w) * mass;
                        r[k * words_per_topic + i] = w * mass;
                    }
                }
                r
            })
            .collect();
        spec.phi[t] = rows;
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, TokenizeRules};

    #[test]
    fn word_names_are_distinct_letters() {
        let names: Vec<String> = (0..2000).map(word_name).collect();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        for n in &names {
            assert_eq!(tokenize(n, &TokenizeRules::default()), vec![n.clone()]);
        }
    }

    #[test]
    fn disjoint_rows_are_distributions() {
        let phi = disjoint_topics(3, 10);
        for (j, row) in phi.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (v, &p) in row.iter().enumerate() {
                assert_eq!(p > 0.0, v / 10 == j);
            }
        }
    }

    #[test]
    fn planted_change_switches_support() {
        let spec = planted_change(3, 10, 10, 6, 1);
        let fresh = planted_words(3, 10);
        for t in 0..10 {
            let row = &spec.phi[t][1];
            let on_fresh: f64 = row[fresh.clone()].iter().sum();
            assert!((on_fresh - if t >= 6 { 1.0 } else { 0.0 }).abs() < 1e-12);
            assert_eq!(spec.phi[t][0], spec.phi[0][0]);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = planted_change(2, 5, 3, 2, 0);
        assert_eq!(spec.generate(7), spec.generate(7));
        assert_ne!(spec.generate(7), spec.generate(8));
        let chunks = spec.generate(7);
        assert!(chunks.iter().all(|c| c
            .documents
            .iter()
            .all(|d| d.date >= c.start && d.date < c.end)));
    }

    #[test]
    fn records_tokenize_back() {
        let spec = planted_change(2, 5, 2, 1, 0);
        let chunks = spec.generate(3);
        let text = {
            let mut buf = Vec::new();
            crate::corpus::write_corpus(&mut buf, &records(&chunks)).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let docs = crate::corpus::parse_corpus(&text, &TokenizeRules::default()).unwrap();
        let schedule = crate::corpus::parse_schedule(&schedule_text(&spec)).unwrap();
        let back = crate::corpus::chunk_by_schedule(docs, &schedule).unwrap();
        assert_eq!(back.chunks, chunks);
    }

    #[test]
    fn drift_rows_stay_normalized() {
        let spec = graded_drift(3, 5, 8, 0.1);
        for rows in &spec.phi {
            for row in rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

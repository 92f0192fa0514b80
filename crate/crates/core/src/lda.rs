//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
//!
//! The sampler keeps three count tables in step with the token assignments:
//! document-topic counts, topic-word counts and topic totals. The
//! full conditional for token `i` of document `d` with word `v` is
//!
//! ```text
//! P(z = k | rest) ∝ (n_dk + α) · (n_kv + b_kv + η) / (n_k + b_k + V·η)
//! ```
//!
//! where all `n` exclude the token being resampled and `b` is an optional
//! fixed background table (the memory window of the rolling model; zero for
//! a plain fit).

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    pub num_topics: usize,
    pub alpha: f64,
    pub eta: f64,
    pub sweeps: usize,
    pub seed: u64,
    /// Independent initial fits; the best by collapsed log joint is kept.
    pub n_init: usize,
}

impl LdaParams {
    /// Symmetric priors `alpha = eta = 1/K`, 200 sweeps, best of 5.
    pub fn new(num_topics: usize) -> Self {
        let prior = 1.0 / num_topics.max(1) as f64;
        LdaParams {
            num_topics,
            alpha: prior,
            eta: prior,
            sweeps: 200,
            seed: 0,
            n_init: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let op = "lda::params";
        if self.num_topics < 1 {
            return Err(Error::params(op, "number of topics must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::params(
                op,
                format!("alpha must be > 0, got {}", self.alpha),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::params(
                op,
                format!("eta must be > 0, got {}", self.eta),
            ));
        }
        if self.sweeps < 1 {
            return Err(Error::params(op, "sweeps must be >= 1"));
        }
        if self.n_init < 1 {
            return Err(Error::params(op, "n_init must be >= 1"));
        }
        Ok(())
    }
}

/// Dense K×V topic-word count table with cached row totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicWordCounts {
    num_topics: usize,
    vocab_size: usize,
    counts: Vec<u32>,
    totals: Vec<u64>,
}

impl TopicWordCounts {
    pub fn zeros(num_topics: usize, vocab_size: usize) -> Self {
        TopicWordCounts {
            num_topics,
            vocab_size,
            counts: vec![0; num_topics * vocab_size],
            totals: vec![0; num_topics],
        }
    }

    /// Tallies `(word, topic)` pairs.
    pub fn from_assignments<'a>(
        num_topics: usize,
        vocab_size: usize,
        docs: impl IntoIterator<Item = (&'a [u32], &'a [u32])>,
    ) -> Self {
        let mut out = Self::zeros(num_topics, vocab_size);
        for (words, topics) in docs {
            for (&w, &k) in words.iter().zip(topics) {
                out.increment(k as usize, w as usize);
            }
        }
        out
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, k: usize) -> &[u32] {
        &self.counts[k * self.vocab_size..(k + 1) * self.vocab_size]
    }

    pub fn get(&self, k: usize, v: usize) -> u32 {
        self.counts[k * self.vocab_size + v]
    }

    pub fn total(&self, k: usize) -> u64 {
        self.totals[k]
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn grand_total(&self) -> u64 {
        self.totals.iter().sum()
    }

    #[inline]
    pub fn increment(&mut self, k: usize, v: usize) {
        self.counts[k * self.vocab_size + v] += 1;
        self.totals[k] += 1;
    }

    #[inline]
    pub fn decrement(&mut self, k: usize, v: usize) {
        self.counts[k * self.vocab_size + v] -= 1;
        self.totals[k] -= 1;
    }

    /// Zero-pads every row to `vocab_size` columns. Shrinking is not allowed.
    pub fn resized(&self, vocab_size: usize) -> Self {
        assert!(vocab_size >= self.vocab_size, "vocabulary never shrinks");
        let mut out = Self::zeros(self.num_topics, vocab_size);
        for k in 0..self.num_topics {
            out.counts[k * vocab_size..k * vocab_size + self.vocab_size]
                .copy_from_slice(self.row(k));
        }
        out.totals.copy_from_slice(&self.totals);
        out
    }

    pub fn add_assign(&mut self, other: &TopicWordCounts) {
        assert_eq!(self.num_topics, other.num_topics);
        assert_eq!(self.vocab_size, other.vocab_size);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
    }
}

/// Token assignments plus the count tables derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaState {
    num_topics: usize,
    vocab_size: usize,
    words: Vec<Vec<u32>>,
    topics: Vec<Vec<u32>>,
    doc_topic: Vec<u32>,
    topic_word: TopicWordCounts,
}

impl LdaState {
    fn check_words(docs: &[Vec<u32>], vocab_size: usize, op: &'static str) -> Result<()> {
        if let Some(&word) = docs.iter().flatten().find(|&&w| w as usize >= vocab_size) {
            return Err(Error::WordOutOfRange {
                op,
                word,
                vocab_size,
            });
        }
        Ok(())
    }

    /// Builds a state from explicit assignments, recounting all tables.
    pub fn from_assignments(
        num_topics: usize,
        vocab_size: usize,
        words: Vec<Vec<u32>>,
        topics: Vec<Vec<u32>>,
    ) -> Result<Self> {
        Self::check_words(&words, vocab_size, "from_assignments")?;
        if words.len() != topics.len() || words.iter().zip(&topics).any(|(w, z)| w.len() != z.len())
        {
            return Err(Error::params(
                "lda::from_assignments",
                "assignment shape differs from documents",
            ));
        }
        if let Some(&k) = topics.iter().flatten().find(|&&k| k as usize >= num_topics) {
            return Err(Error::params(
                "lda::from_assignments",
                format!("topic {k} out of range"),
            ));
        }
        let mut doc_topic = vec![0u32; words.len() * num_topics];
        for (d, zs) in topics.iter().enumerate() {
            for &k in zs {
                doc_topic[d * num_topics + k as usize] += 1;
            }
        }
        let topic_word = TopicWordCounts::from_assignments(
            num_topics,
            vocab_size,
            words
                .iter()
                .map(Vec::as_slice)
                .zip(topics.iter().map(Vec::as_slice)),
        );
        Ok(LdaState {
            num_topics,
            vocab_size,
            words,
            topics,
            doc_topic,
            topic_word,
        })
    }

    /// Assigns every token a topic drawn uniformly from `0..K`.
    pub fn init_assignments<R: Rng>(
        docs: Vec<Vec<u32>>,
        vocab_size: usize,
        num_topics: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_words(&docs, vocab_size, "init_assignments")?;
        let topics = docs
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|_| rng.random_range(0..num_topics as u32))
                    .collect()
            })
            .collect();
        Self::from_assignments(num_topics, vocab_size, docs, topics)
    }

    /// Assigns tokens one at a time in (document, position) order, each drawn
    /// from the full conditional given the background counts and the tokens
    /// assigned before it.
    pub fn init_sequential<R: Rng>(
        docs: Vec<Vec<u32>>,
        vocab_size: usize,
        num_topics: usize,
        alpha: f64,
        eta: f64,
        background: Option<&TopicWordCounts>,
        rng: &mut R,
    ) -> Result<Self> {
        Self::check_words(&docs, vocab_size, "init_sequential")?;
        check_background(background, num_topics, vocab_size);
        let topics = docs.iter().map(|d| vec![0; d.len()]).collect();
        let mut state = LdaState {
            num_topics,
            vocab_size,
            doc_topic: vec![0; docs.len() * num_topics],
            topic_word: TopicWordCounts::zeros(num_topics, vocab_size),
            words: docs,
            topics,
        };
        let mut weights = vec![0.0; num_topics];
        for d in 0..state.words.len() {
            for i in 0..state.words[d].len() {
                let v = state.words[d][i] as usize;
                state.conditional(d, v, alpha, eta, background, &mut weights);
                let k = draw(&weights, rng);
                state.assign(d, i, k);
            }
        }
        Ok(state)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.words.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    pub fn words(&self) -> &[Vec<u32>] {
        &self.words
    }

    pub fn topics(&self) -> &[Vec<u32>] {
        &self.topics
    }

    pub fn doc_topic(&self, d: usize) -> &[u32] {
        &self.doc_topic[d * self.num_topics..(d + 1) * self.num_topics]
    }

    pub fn topic_word(&self) -> &TopicWordCounts {
        &self.topic_word
    }

    pub fn into_parts(self) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        (self.words, self.topics)
    }

    #[inline]
    fn assign(&mut self, d: usize, i: usize, k: usize) {
        let v = self.words[d][i] as usize;
        self.topics[d][i] = k as u32;
        self.doc_topic[d * self.num_topics + k] += 1;
        self.topic_word.increment(k, v);
    }

    #[inline]
    fn unassign(&mut self, d: usize, i: usize) {
        let v = self.words[d][i] as usize;
        let k = self.topics[d][i] as usize;
        self.doc_topic[d * self.num_topics + k] -= 1;
        self.topic_word.decrement(k, v);
    }

    /// Unnormalized full conditional for a token of word `v` in document
    /// `d`, given the current tables.
    #[inline]
    fn conditional(
        &self,
        d: usize,
        v: usize,
        alpha: f64,
        eta: f64,
        background: Option<&TopicWordCounts>,
        out: &mut [f64],
    ) {
        let v_eta = self.vocab_size as f64 * eta;
        let ndk = self.doc_topic(d);
        for (k, w) in out.iter_mut().enumerate() {
            let (mut nkv, mut nk) = (
                self.topic_word.get(k, v) as f64,
                self.topic_word.total(k) as f64,
            );
            if let Some(bg) = background {
                nkv += bg.get(k, v) as f64;
                nk += bg.total(k) as f64;
            }
            *w = (ndk[k] as f64 + alpha) * (nkv + eta) / (nk + v_eta);
        }
    }

    /// Resamples every token once in (document, position) order.
    pub fn gibbs_sweep<R: Rng>(&mut self, params: &LdaParams, rng: &mut R) {
        self.sweep_with(params.alpha, params.eta, None, rng, |_| {});
    }

    /// One sweep against fixed background counts; only this state's tokens
    /// move. `observe` sees every sampling step before the draw, with the
    /// token already removed from the tables.
    pub fn sweep_with<R: Rng, F: FnMut(SamplingStep<'_>)>(
        &mut self,
        alpha: f64,
        eta: f64,
        background: Option<&TopicWordCounts>,
        rng: &mut R,
        mut observe: F,
    ) {
        check_background(background, self.num_topics, self.vocab_size);
        if self.num_topics == 1 {
            return;
        }
        let mut weights = vec![0.0; self.num_topics];
        for d in 0..self.words.len() {
            for i in 0..self.words[d].len() {
                let v = self.words[d][i] as usize;
                self.unassign(d, i);
                self.conditional(d, v, alpha, eta, background, &mut weights);
                observe(SamplingStep {
                    state: self,
                    doc: d,
                    position: i,
                    weights: &weights,
                });
                let k = draw(&weights, rng);
                self.assign(d, i, k);
            }
        }
    }

    /// Collapsed log joint `log p(w, z | α, η)`, the score used to pick the
    /// best of several independent fits.
    pub fn log_joint(&self, alpha: f64, eta: f64) -> f64 {
        let k = self.num_topics as f64;
        let v = self.vocab_size as f64;
        let mut score = 0.0;
        let lg_eta = ln_gamma(eta);
        for t in 0..self.num_topics {
            score += ln_gamma(v * eta) - ln_gamma(self.topic_word.total(t) as f64 + v * eta);
            score += self
                .topic_word
                .row(t)
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| ln_gamma(c as f64 + eta) - lg_eta)
                .sum::<f64>();
        }
        let lg_alpha = ln_gamma(alpha);
        for d in 0..self.words.len() {
            score += ln_gamma(k * alpha) - ln_gamma(self.words[d].len() as f64 + k * alpha);
            score += self
                .doc_topic(d)
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| ln_gamma(c as f64 + alpha) - lg_alpha)
                .sum::<f64>();
        }
        score
    }

    /// Whether the cached tables equal a full recount of the assignments.
    pub fn counts_consistent(&self) -> bool {
        match Self::from_assignments(
            self.num_topics,
            self.vocab_size,
            self.words.clone(),
            self.topics.clone(),
        ) {
            Ok(fresh) => fresh.doc_topic == self.doc_topic && fresh.topic_word == self.topic_word,
            Err(_) => false,
        }
    }

    /// Line-based dump: header, parameters, then one line per document of
    /// `word:topic` pairs. Topic totals are stored and checked on load.
    pub fn write_checkpoint<W: Write>(
        &self,
        params: &LdaParams,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        writeln!(out, "num_topics {}", self.num_topics)?;
        writeln!(out, "vocab_size {}", self.vocab_size)?;
        writeln!(out, "alpha {:?}", params.alpha)?;
        writeln!(out, "eta {:?}", params.eta)?;
        writeln!(out, "sweeps {}", params.sweeps)?;
        writeln!(out, "seed {}", params.seed)?;
        writeln!(out, "n_init {}", params.n_init)?;
        let totals: Vec<String> = self.topic_word.totals.iter().map(u64::to_string).collect();
        writeln!(out, "topic_totals {}", totals.join(" "))?;
        writeln!(out, "docs {}", self.words.len())?;
        for (words, topics) in self.words.iter().zip(&self.topics) {
            writeln!(out, "{}", encode_pairs(words, topics))?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<(Self, LdaParams)> {
        let mut lines = LineReader::new(input);
        let magic = lines.next_line()?;
        if magic != CHECKPOINT_MAGIC {
            return Err(lines.error(format!("expected {CHECKPOINT_MAGIC:?}, found {magic:?}")));
        }
        let num_topics: usize = lines.field("num_topics")?;
        let vocab_size: usize = lines.field("vocab_size")?;
        let params = LdaParams {
            num_topics,
            alpha: lines.field("alpha")?,
            eta: lines.field("eta")?,
            sweeps: lines.field("sweeps")?,
            seed: lines.field("seed")?,
            n_init: lines.field("n_init")?,
        };
        let totals: Vec<u64> = lines.list_field("topic_totals")?;
        let num_docs: usize = lines.field("docs")?;
        let mut words = Vec::with_capacity(num_docs);
        let mut topics = Vec::with_capacity(num_docs);
        for _ in 0..num_docs {
            let line = lines.next_line()?;
            let (w, z) = decode_pairs(&line).map_err(|r| lines.error(r))?;
            words.push(w);
            topics.push(z);
        }
        let state = Self::from_assignments(num_topics, vocab_size, words, topics)?;
        if state.topic_word.totals != totals {
            return Err(lines.error("recounted topic totals differ from the stored totals".into()));
        }
        Ok((state, params))
    }
}

const CHECKPOINT_MAGIC: &str = "topicshift-lda v1";

fn check_background(background: Option<&TopicWordCounts>, num_topics: usize, vocab_size: usize) {
    if let Some(bg) = background {
        assert_eq!(bg.num_topics(), num_topics, "background topic count");
        assert_eq!(bg.vocab_size(), vocab_size, "background vocabulary size");
    }
}

/// One sampling step as seen by [`LdaState::sweep_with`] observers.
pub struct SamplingStep<'a> {
    /// State with the token removed from the count tables; the token's
    /// previous topic is still recorded in `state.topics()`.
    pub state: &'a LdaState,
    pub doc: usize,
    pub position: usize,
    /// Unnormalized conditional weights over topics.
    pub weights: &'a [f64],
}

#[inline]
fn draw<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Runs `params.n_init` independent fits (init + `params.sweeps` sweeps) with
/// seeds derived from `params.seed` and keeps the one with the highest
/// collapsed log joint.
pub fn fit(docs: Vec<Vec<u32>>, vocab_size: usize, params: &LdaParams) -> Result<LdaState> {
    params.validate()?;
    LdaState::check_words(&docs, vocab_size, "fit")?;
    let runs: Vec<(f64, LdaState)> = (0..params.n_init)
        .into_par_iter()
        .map(|run| {
            let mut rng = seed::rng(params.seed, &[seed::STREAM_FIT, run as u64]);
            let mut state =
                LdaState::init_assignments(docs.clone(), vocab_size, params.num_topics, &mut rng)?;
            for _ in 0..params.sweeps {
                state.gibbs_sweep(params, &mut rng);
            }
            Ok((state.log_joint(params.alpha, params.eta), state))
        })
        .collect::<Result<_>>()?;
    for (i, (score, _)) in runs.iter().enumerate() {
        log::debug!("lda::fit run {i}: log joint {score:.3}");
    }
    Ok(select_best(runs).expect("n_init >= 1"))
}

/// Highest score wins; ties go to the earliest run.
pub fn select_best<T>(runs: Vec<(f64, T)>) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for (score, item) in runs {
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, item));
        }
    }
    best.map(|(_, item)| item)
}

/// Smoothed topic-word distribution `(n_v + η) / (N + V·η)`. Counts shorter
/// than `vocab_size` are zero-padded. With `η = 0` this is the relative
/// frequency (uniform if all counts are zero).
pub fn estimate_phi(counts: &[u32], eta: f64, vocab_size: usize) -> Vec<f64> {
    assert!(
        vocab_size >= counts.len() && vocab_size >= 1,
        "vocab_size covers counts"
    );
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let denom = total + vocab_size as f64 * eta;
    if denom <= 0.0 {
        return vec![1.0 / vocab_size as f64; vocab_size];
    }
    (0..vocab_size)
        .map(|v| (counts.get(v).copied().unwrap_or(0) as f64 + eta) / denom)
        .collect()
}

pub(crate) fn encode_pairs(words: &[u32], topics: &[u32]) -> String {
    words
        .iter()
        .zip(topics)
        .map(|(w, z)| format!("{w}:{z}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn decode_pairs(line: &str) -> std::result::Result<(Vec<u32>, Vec<u32>), String> {
    let mut words = Vec::new();
    let mut topics = Vec::new();
    for pair in line.split_whitespace() {
        let (w, z) = pair
            .split_once(':')
            .ok_or_else(|| format!("bad pair {pair:?}"))?;
        words.push(w.parse().map_err(|_| format!("bad word id in {pair:?}"))?);
        topics.push(z.parse().map_err(|_| format!("bad topic in {pair:?}"))?);
    }
    Ok((words, topics))
}

/// Small line cursor shared by the checkpoint readers.
pub(crate) struct LineReader<R> {
    input: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    pub(crate) fn new(input: R) -> Self {
        LineReader {
            input: input.lines(),
            line: 0,
        }
    }

    pub(crate) fn error(&self, reason: String) -> Error {
        Error::Checkpoint {
            line: self.line,
            reason,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.input.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.error(e.to_string())),
            None => Err(self.error("unexpected end of checkpoint".into())),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            None if line == key => Ok(String::new()),
            _ => Err(self.error(format!("expected field {key:?}, found {line:?}"))),
        }
    }

    pub(crate) fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.keyed(key)?;
        raw.trim()
            .parse()
            .map_err(|_| self.error(format!("bad value {raw:?} for {key}")))
    }

    pub(crate) fn list_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let raw = self.keyed(key)?;
        raw.split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| self.error(format!("bad value {s:?} in {key}")))
            })
            .collect()
    }
}

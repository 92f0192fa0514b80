//! Resampling-based change detection per topic.
//!
//! For topic `k` at chunk `t` the observed word counts `n_{k|t}` are compared
//! by cosine similarity with the summed counts of the `z` preceding chunks.
//! The threshold `q` is a low quantile of similarities obtained when the
//! observed counts are replaced by multinomial draws from the mixture
//!
//! ```text
//! φ̃ = (1 − p) · φ̂_ref + p · φ̂_t
//! ```
//!
//! i.e. from the word distribution one would see if only the fraction `p` of
//! the observed shift had happened. An observed similarity strictly below
//! `q` flags a change, after which the reference window restarts at length
//! one; otherwise it grows by one up to `z_max`.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lda::{estimate_phi, TopicWordCounts};
use crate::rolling::RollingState;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Mixture weight of the current chunk in the null distribution.
    pub p: f64,
    pub z_max: usize,
    pub quantile_level: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            p: 0.94,
            z_max: 4,
            quantile_level: 0.01,
            replicates: 500,
            seed: 0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let op = "detect::params";
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::params(
                op,
                format!("p must lie in [0, 1], got {}", self.p),
            ));
        }
        if self.z_max < 1 {
            return Err(Error::params(op, "z_max must be >= 1"));
        }
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(Error::params(
                op,
                format!(
                    "quantile level must lie in (0, 1), got {}",
                    self.quantile_level
                ),
            ));
        }
        if self.replicates < 1 {
            return Err(Error::params(op, "replicates must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub topic: usize,
    pub t: usize,
    /// `None` when either compared vector is all-zero.
    pub observed_similarity: Option<f64>,
    pub threshold: Option<f64>,
    pub run_length: usize,
    pub detected: bool,
    /// Token count of `n_{k|t}`.
    pub tokens: u64,
}

/// Cosine similarity of two nonnegative vectors; the shorter one is
/// zero-padded. Clamped to `[0, 1]` against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|b| b * b).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector { op: "cosine" });
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 1.0))
}

pub fn cosine_counts(u: &[u32], v: &[u32]) -> Result<f64> {
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum();
    let nu: f64 = u.iter().map(|&a| a as f64 * a as f64).sum();
    let nv: f64 = v.iter().map(|&b| b as f64 * b as f64).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector { op: "cosine" });
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 1.0))
}

/// Per-chunk topic-word tables, keeping only the most recent `capacity`.
#[derive(Debug, Clone)]
pub struct CountHistory {
    first: usize,
    tables: VecDeque<TopicWordCounts>,
    capacity: usize,
}

impl CountHistory {
    pub fn new(capacity: usize) -> Self {
        CountHistory {
            first: 0,
            tables: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    /// Builds an unbounded history from tables for chunks `0..tables.len()`.
    pub fn from_tables(tables: Vec<TopicWordCounts>) -> Self {
        CountHistory {
            first: 0,
            capacity: tables.len().max(1),
            tables: tables.into(),
        }
    }

    /// Appends the table of chunk `t`, which must follow the last one.
    pub fn push(&mut self, t: usize, table: TopicWordCounts) {
        if self.tables.is_empty() {
            self.first = t;
        } else {
            assert_eq!(t, self.first + self.tables.len(), "history is consecutive");
        }
        self.tables.push_back(table);
        while self.tables.len() > self.capacity {
            self.tables.pop_front();
            self.first += 1;
        }
    }

    pub fn get(&self, t: usize) -> Option<&TopicWordCounts> {
        t.checked_sub(self.first).and_then(|i| self.tables.get(i))
    }

    fn row(&self, k: usize, t: usize, op: &'static str) -> Result<&[u32]> {
        self.get(t)
            .map(|tab| tab.row(k))
            .ok_or(Error::ChunkOutOfRange {
                op,
                t,
                first: self.first,
                last: (self.first + self.tables.len()).saturating_sub(1),
            })
    }
}

/// Elementwise sum of `n_{k|s}` over `s = t−z .. t−1`, zero-padded to
/// `vocab_size`.
pub fn reference_counts(
    history: &CountHistory,
    k: usize,
    t: usize,
    z: usize,
    vocab_size: usize,
) -> Result<Vec<u32>> {
    if z == 0 || z > t {
        return Err(Error::RunLength { z, t });
    }
    let mut out = vec![0u32; vocab_size];
    for s in t - z..t {
        for (o, &c) in out
            .iter_mut()
            .zip(history.row(k, s, "detect::reference_counts")?)
        {
            *o += c;
        }
    }
    Ok(out)
}

/// `(1 − p)·phi_ref + p·phi_t`, clamped componentwise into the inputs' range.
pub fn mixture_phi(phi_ref: &[f64], phi_t: &[f64], p: f64) -> Result<Vec<f64>> {
    if phi_ref.len() != phi_t.len() {
        return Err(Error::LengthMismatch {
            op: "mixture_phi",
            left: phi_ref.len(),
            right: phi_t.len(),
        });
    }
    Ok(phi_ref
        .iter()
        .zip(phi_t)
        .map(|(&a, &b)| ((1.0 - p) * a + p * b).clamp(a.min(b), a.max(b)))
        .collect())
}

/// Multinomial sampler for one probability vector, shared by replicates.
///
/// Words are visited in descending probability with conditional binomial
/// draws; once the remaining tokens are few compared with the remaining
/// words, they are drawn one by one from the tail by binary search on its
/// cumulative mass.
struct MultinomialSampler<'a> {
    order: Vec<usize>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    reference: &'a [u32],
}

impl<'a> MultinomialSampler<'a> {
    fn new(phi: &[f64], reference: &'a [u32]) -> Self {
        let mut order: Vec<usize> = (0..phi.len()).collect();
        order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
        let probs: Vec<f64> = order.iter().map(|&v| phi[v]).collect();
        let mut cumulative = Vec::with_capacity(probs.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        MultinomialSampler {
            order,
            probs,
            cumulative,
            reference,
        }
    }

    /// Draws one count vector of `n` tokens and returns its cosine with the
    /// reference.
    fn similarity<R: Rng>(
        &self,
        n: u64,
        rng: &mut R,
        scratch: &mut [u32],
        touched: &mut Vec<usize>,
    ) -> f64 {
        let reference = |v: usize| self.reference.get(v).copied().unwrap_or(0) as f64;
        let ref_norm: f64 = self
            .reference
            .iter()
            .map(|&c| c as f64 * c as f64)
            .sum::<f64>()
            .sqrt();
        let (mut dot, mut norm2) = (0.0f64, 0.0f64);
        let mut remaining = n;
        let mut mass_left = 1.0f64;
        let len = self.probs.len();
        let mut i = 0;
        while i < len && remaining > 0 {
            let tail_words = (len - i) as f64;
            if (remaining as f64) * tail_words.log2().max(1.0) < tail_words {
                break;
            }
            let x = if i == len - 1 {
                remaining
            } else {
                let q = if mass_left > 0.0 {
                    (self.probs[i] / mass_left).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                Binomial::new(remaining, q)
                    .expect("q in [0, 1]")
                    .sample(rng)
            };
            if x > 0 {
                let v = self.order[i];
                dot += x as f64 * reference(v);
                norm2 += x as f64 * x as f64;
                remaining -= x;
            }
            mass_left -= self.probs[i];
            i += 1;
        }
        if remaining > 0 && i < len {
            let (lo, hi) = (self.cumulative[i], self.cumulative[len]);
            for _ in 0..remaining {
                let u = lo + rng.random::<f64>() * (hi - lo);
                let j =
                    (self.cumulative[i + 1..=len].partition_point(|&c| c <= u) + i).min(len - 1);
                let v = self.order[j];
                if scratch[v] == 0 {
                    touched.push(v);
                }
                norm2 += 2.0 * scratch[v] as f64 + 1.0;
                scratch[v] += 1;
                dot += reference(v);
            }
            for &v in touched.iter() {
                scratch[v] = 0;
            }
            touched.clear();
        }
        if norm2 == 0.0 || ref_norm == 0.0 {
            return 0.0;
        }
        (dot / (norm2.sqrt() * ref_norm)).clamp(0.0, 1.0)
    }
}

/// Cosine similarities between `replicates` multinomial draws of `n_tokens`
/// tokens from `phi_tilde` and the reference counts. Replicate `r` uses its
/// own generator derived from `(seed, topic, t, r)`.
pub fn resample_similarities(
    phi_tilde: &[f64],
    n_tokens: u64,
    reference: &[u32],
    replicates: usize,
    seed: u64,
    topic: usize,
    t: usize,
) -> Result<Vec<f64>> {
    if reference.iter().all(|&c| c == 0) {
        return Err(Error::ZeroVector {
            op: "resample_similarities",
        });
    }
    if n_tokens == 0 {
        return Err(Error::ZeroVector {
            op: "resample_similarities",
        });
    }
    let sampler = MultinomialSampler::new(phi_tilde, reference);
    Ok((0..replicates)
        .into_par_iter()
        .map_init(
            || (vec![0u32; phi_tilde.len()], Vec::new()),
            |(scratch, touched), r| {
                let mut rng = seed::rng(
                    seed,
                    &[seed::STREAM_DETECT, topic as u64, t as u64, r as u64],
                );
                sampler.similarity(n_tokens, &mut rng, scratch, touched)
            },
        )
        .collect())
}

/// Lower empirical quantile: the `⌈level·R⌉`-th smallest value.
pub fn threshold(similarities: &[f64], level: f64) -> Result<f64> {
    if similarities.is_empty() {
        return Err(Error::EmptySimilarities);
    }
    let mut sorted = similarities.to_vec();
    sorted.sort_by(f64::total_cmp);
    // The epsilon keeps e.g. 0.01 * 500 from rounding up to rank 6.
    let rank = ((level * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

/// Run length for the next chunk.
pub fn next_run_length(detected: bool, z: usize, z_max: usize) -> usize {
    if detected {
        1
    } else {
        (z + 1).min(z_max)
    }
}

/// One detection step for topic `k` at chunk `t` with reference length `z`.
/// `vocab_size` is the vocabulary size at chunk `t`; `eta` the topic-word
/// prior used for smoothing.
pub fn detect_step(
    k: usize,
    t: usize,
    history: &CountHistory,
    z: usize,
    vocab_size: usize,
    eta: f64,
    params: &DetectorParams,
) -> Result<(DetectionRecord, usize)> {
    let z = z.min(t).min(params.z_max).max(1);
    let current = history.row(k, t, "detect::detect_step")?;
    let tokens: u64 = current.iter().map(|&c| c as u64).sum();
    let reference = reference_counts(history, k, t, z, vocab_size)?;
    let mut record = DetectionRecord {
        topic: k,
        t,
        observed_similarity: None,
        threshold: None,
        run_length: z,
        detected: false,
        tokens,
    };
    if tokens == 0 || reference.iter().all(|&c| c == 0) {
        return Ok((record, next_run_length(false, z, params.z_max)));
    }
    let phi_ref = estimate_phi(&reference, eta, vocab_size);
    let phi_t = estimate_phi(current, eta, vocab_size);
    let phi_tilde = mixture_phi(&phi_ref, &phi_t, params.p)?;
    let sims = resample_similarities(
        &phi_tilde,
        tokens,
        &reference,
        params.replicates,
        params.seed,
        k,
        t,
    )?;
    let q = threshold(&sims, params.quantile_level)?;
    let observed = cosine_counts(current, &reference)?;
    record.observed_similarity = Some(observed);
    record.threshold = Some(q);
    record.detected = observed < q;
    let next = next_run_length(record.detected, z, params.z_max);
    Ok((record, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSeries {
    /// Ordered by chunk, then topic.
    pub records: Vec<DetectionRecord>,
    /// `C_k`: chunks with a detected change, per topic.
    pub change_sets: Vec<Vec<usize>>,
}

impl DetectionSeries {
    pub fn changes(&self) -> impl Iterator<Item = &DetectionRecord> {
        self.records.iter().filter(|r| r.detected)
    }

    pub fn num_changes(&self) -> usize {
        self.change_sets.iter().map(Vec::len).sum()
    }
}

/// Runs [`detect_step`] for every topic over chunks `first+1 ..= last`
/// starting from run length 1. Topics are processed in parallel; output
/// order does not depend on scheduling.
pub fn run_detection(state: &RollingState, params: &DetectorParams) -> Result<DetectionSeries> {
    params.validate()?;
    let num_topics = state.num_topics();
    let eta = state.params().lda.eta;
    let first = state.first_index();
    let mut history = CountHistory::new(params.z_max + 1);
    let mut run_lengths = vec![1usize; num_topics];
    let mut records = Vec::new();
    let mut change_sets = vec![Vec::new(); num_topics];

    for chunk in state.chunks() {
        history.push(
            chunk.index,
            chunk.topic_counts(num_topics, chunk.vocab_size),
        );
        if chunk.index == first {
            continue;
        }
        let t = chunk.index;
        let steps: Vec<(DetectionRecord, usize)> = (0..num_topics)
            .into_par_iter()
            .map(|k| {
                let z = run_lengths[k].min(t - first);
                detect_step(k, t, &history, z, chunk.vocab_size, eta, params)
            })
            .collect::<Result<_>>()?;
        for (record, next) in steps {
            run_lengths[record.topic] = next;
            if record.detected {
                change_sets[record.topic].push(t);
            }
            records.push(record);
        }
    }
    Ok(DetectionSeries {
        records,
        change_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector { .. })
        ));
        // zero padding
        assert!((cosine(&[1.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    fn table(rows: &[&[u32]]) -> TopicWordCounts {
        let v = rows[0].len();
        let mut t = TopicWordCounts::zeros(rows.len(), v);
        for (k, row) in rows.iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    t.increment(k, w);
                }
            }
        }
        t
    }

    #[test]
    fn reference_examples() {
        let h = CountHistory::from_tables(vec![
            table(&[&[1, 0]]),
            table(&[&[0, 2]]),
            table(&[&[0, 0]]),
        ]);
        assert_eq!(reference_counts(&h, 0, 2, 1, 2).unwrap(), vec![0, 2]);
        assert_eq!(reference_counts(&h, 0, 2, 2, 2).unwrap(), vec![1, 2]);
        assert_eq!(reference_counts(&h, 0, 3, 1, 3).unwrap(), vec![0, 0, 0]);
        assert!(matches!(
            reference_counts(&h, 0, 2, 3, 2),
            Err(Error::RunLength { z: 3, t: 2 })
        ));
    }

    #[test]
    fn history_window_evicts_old_tables() {
        let mut h = CountHistory::new(2);
        for t in 0..4 {
            h.push(t, table(&[&[t as u32]]));
        }
        assert!(h.get(1).is_none());
        assert_eq!(h.get(3).unwrap().get(0, 0), 3);
        assert!(matches!(
            reference_counts(&h, 0, 3, 2, 1),
            Err(Error::ChunkOutOfRange { .. })
        ));
    }

    #[test]
    fn mixture_examples() {
        let a = [0.2, 0.8];
        let b = [0.6, 0.4];
        assert_eq!(mixture_phi(&a, &b, 0.0).unwrap(), a);
        assert_eq!(mixture_phi(&a, &b, 1.0).unwrap(), b);
        let m = mixture_phi(&a, &b, 0.5).unwrap();
        assert!((m[0] - 0.4).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
        assert!(matches!(
            mixture_phi(&a, &[1.0], 0.5),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_resampling() {
        let sims = resample_similarities(&[1.0, 0.0], 37, &[5, 0], 20, 1, 0, 1).unwrap();
        assert!(sims.iter().all(|&s| s == 1.0));
        let sims = resample_similarities(&[1.0, 0.0], 37, &[0, 5], 20, 1, 0, 1).unwrap();
        assert!(sims.iter().all(|&s| s == 0.0));
        assert!(resample_similarities(&[0.5, 0.5], 10, &[0, 0], 5, 1, 0, 1).is_err());
    }

    #[test]
    fn resampling_is_seeded() {
        let phi = [0.5, 0.3, 0.2];
        let a = resample_similarities(&phi, 50, &[3, 1, 1], 64, 9, 2, 3).unwrap();
        let b = resample_similarities(&phi, 50, &[3, 1, 1], 64, 9, 2, 3).unwrap();
        let c = resample_similarities(&phi, 50, &[3, 1, 1], 64, 9, 2, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn threshold_examples() {
        let values: Vec<f64> = (1..=500).map(|i| 0.001 * i as f64).collect();
        assert_eq!(threshold(&values, 0.01).unwrap(), 0.001 * 5.0);
        let mut shuffled = values.clone();
        shuffled.reverse();
        assert_eq!(threshold(&shuffled, 0.01).unwrap(), 0.001 * 5.0);
        assert_eq!(threshold(&[0.3; 17], 0.01).unwrap(), 0.3);
        assert_eq!(threshold(&[0.42], 0.01).unwrap(), 0.42);
        assert!(matches!(
            threshold(&[], 0.01),
            Err(Error::EmptySimilarities)
        ));
    }

    #[test]
    fn run_length_rule() {
        assert_eq!(next_run_length(true, 4, 4), 1);
        assert_eq!(next_run_length(false, 2, 4), 3);
        assert_eq!(next_run_length(false, 4, 4), 4);
        assert_eq!(next_run_length(true, 1, 4), 1);
        assert_eq!(next_run_length(false, 1, 1), 1);
    }

    #[test]
    fn dormant_topic_is_not_a_change() {
        let h = CountHistory::from_tables(vec![table(&[&[3, 1]]), table(&[&[0, 0]])]);
        let (rec, next) = detect_step(0, 1, &h, 1, 2, 0.5, &DetectorParams::default()).unwrap();
        assert!(!rec.detected);
        assert_eq!(rec.observed_similarity, None);
        assert_eq!(next, 2);
    }

    #[test]
    fn params_validation() {
        assert!(DetectorParams::default().validate().is_ok());
        assert!(DetectorParams {
            p: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DetectorParams {
            quantile_level: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DetectorParams {
            replicates: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DetectorParams {
            z_max: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn mixture_is_convex(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30),
            p in 0.0f64..=1.0,
        ) {
            let sa: f64 = raw.iter().map(|x| x.0).sum::<f64>() + 1e-9;
            let sb: f64 = raw.iter().map(|x| x.1).sum::<f64>() + 1e-9;
            let a: Vec<f64> = raw.iter().map(|x| (x.0 + 1e-9 / raw.len() as f64) / sa).collect();
            let b: Vec<f64> = raw.iter().map(|x| (x.1 + 1e-9 / raw.len() as f64) / sb).collect();
            let m = mixture_phi(&a, &b, p).unwrap();
            for i in 0..m.len() {
                prop_assert!(m[i] >= a[i].min(b[i]) && m[i] <= a[i].max(b[i]));
            }
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cosine_scale_invariant(
            u in proptest::collection::vec(0u32..50, 1..20),
            c in 0.001f64..1000.0,
        ) {
            prop_assume!(u.iter().any(|&x| x > 0));
            let v: Vec<f64> = u.iter().rev().map(|&x| x as f64 + 1.0).collect();
            let uf: Vec<f64> = u.iter().map(|&x| x as f64).collect();
            let scaled: Vec<f64> = uf.iter().map(|x| x * c).collect();
            let base = cosine(&uf, &v).unwrap();
            prop_assert!((cosine(&scaled, &v).unwrap() - base).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn resampled_similarities_are_in_unit_range(
            weights in proptest::collection::vec(0.01f64..1.0, 2..40),
            n in 1u64..500,
            r in proptest::collection::vec(0u32..5, 2..40),
        ) {
            prop_assume!(r.iter().any(|&x| x > 0));
            let s: f64 = weights.iter().sum();
            let phi: Vec<f64> = weights.iter().map(|w| w / s).collect();
            let sims = resample_similarities(&phi, n, &r, 8, 1, 0, 1).unwrap();
            prop_assert!(sims.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

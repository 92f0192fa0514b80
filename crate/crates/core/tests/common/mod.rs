#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicshift::corpus::TimeChunk;
use topicshift::lda::{LdaState, TopicWordCounts};
use topicshift::{LdaParams, RollingParams, RollingState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixture")
}

/// Random corpus: up to `max_docs` documents, at most `max_tokens` tokens in
/// total, words drawn from `0..vocab_size`.
pub fn random_corpus(
    rng: &mut impl Rng,
    max_docs: usize,
    max_tokens: usize,
    vocab_size: usize,
) -> Vec<Vec<u32>> {
    let docs = rng.random_range(1..=max_docs);
    let mut budget = rng.random_range(docs..=max_tokens.max(docs));
    let mut out = Vec::with_capacity(docs);
    for d in 0..docs {
        let left = docs - d - 1;
        let len = if left == 0 {
            budget
        } else {
            rng.random_range(0..=(budget - left).min(2 * max_tokens / docs + 1))
        };
        budget -= len;
        out.push(
            (0..len)
                .map(|_| rng.random_range(0..vocab_size as u32))
                .collect(),
        );
    }
    out
}

/// Full conditional for token `(d, i)` recomputed from the raw assignments,
/// leaving that token out. Returned unnormalized in the same form the
/// sampler uses: `(n_dk + α)(n_kv + b_kv + η) / (n_k + b_k + Vη)`.
pub fn oracle_conditional(
    state: &LdaState,
    d: usize,
    i: usize,
    alpha: f64,
    eta: f64,
    background: Option<&TopicWordCounts>,
) -> Vec<f64> {
    let k = state.num_topics();
    let v_size = state.vocab_size();
    let word = state.words()[d][i] as usize;
    let mut n_dk = vec![0.0; k];
    let mut n_kv = vec![0.0; k];
    let mut n_k = vec![0.0; k];
    for (dd, (ws, zs)) in state.words().iter().zip(state.topics()).enumerate() {
        for (ii, (&w, &z)) in ws.iter().zip(zs).enumerate() {
            if dd == d && ii == i {
                continue;
            }
            let z = z as usize;
            n_k[z] += 1.0;
            if w as usize == word {
                n_kv[z] += 1.0;
            }
            if dd == d {
                n_dk[z] += 1.0;
            }
        }
    }
    (0..k)
        .map(|t| {
            let (bkv, bk) =
                background.map_or((0.0, 0.0), |b| (b.get(t, word) as f64, b.total(t) as f64));
            (n_dk[t] + alpha) * (n_kv[t] + bkv + eta) / (n_k[t] + bk + v_size as f64 * eta)
        })
        .collect()
}

/// Max relative deviation between two weight vectors.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Fits a rolling model over `chunks`, the first `init` of them jointly.
pub fn roll(chunks: &[TimeChunk], k: usize, init: usize, seed: u64) -> RollingState {
    let mut lda = LdaParams::new(k);
    lda.seed = seed;
    let params = RollingParams {
        init_chunks: init,
        ..RollingParams::new(lda)
    };
    let mut state = RollingState::init(&chunks[..init], params).expect("init");
    for c in &chunks[init..] {
        state.advance(c).expect("advance");
    }
    state
}

/// The model topic holding most tokens of `words` in chunk `t`.
pub fn topic_absorbing(state: &RollingState, t: usize, words: &[String]) -> usize {
    let ids: Vec<u32> = words.iter().filter_map(|w| state.vocab().id(w)).collect();
    let chunk = state.chunk(t).expect("chunk");
    let mut counts = vec![0usize; state.num_topics()];
    for (ws, zs) in chunk.words.iter().zip(&chunk.topics) {
        for (w, z) in ws.iter().zip(zs) {
            if ids.contains(w) {
                counts[*z as usize] += 1;
            }
        }
    }
    (0..counts.len())
        .max_by_key(|&k| (counts[k], std::cmp::Reverse(k)))
        .unwrap_or(0)
}

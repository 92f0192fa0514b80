mod common;

use common::roll;
use topicshift::synthetic::{disjoint_topics, planted_change, StreamSpec};
use topicshift::{LdaParams, RollingParams, RollingState};

fn small_stream(chunks: usize) -> StreamSpec {
    let mut spec = StreamSpec::stationary(disjoint_topics(3, 6), chunks);
    spec.docs_per_chunk = 30;
    spec.doc_len = 20;
    spec
}

fn params(seed: u64) -> RollingParams {
    let mut lda = LdaParams::new(3);
    lda.seed = seed;
    lda.sweeps = 30;
    lda.n_init = 2;
    RollingParams {
        chunk_sweeps: 20,
        memory_chunks: 2,
        ..RollingParams::new(lda)
    }
}

#[test]
fn earlier_chunks_never_change() {
    let chunks = small_stream(6).generate(4);
    let mut state = RollingState::init(&chunks[..1], params(4)).unwrap();
    for c in &chunks[1..] {
        let before = state.chunks().to_vec();
        state.advance(c).unwrap();
        assert_eq!(&state.chunks()[..before.len()], before.as_slice());
    }
}

#[test]
fn only_the_memory_window_matters() {
    // Dropping chunks older than the memory window changes nothing about
    // later advances.
    let chunks = small_stream(6).generate(8);
    let mut full = RollingState::init(&chunks[..2], params(8)).unwrap();
    full.advance(&chunks[2]).unwrap();
    full.advance(&chunks[3]).unwrap();
    let mut trimmed = full.drop_history_before(2);
    for c in &chunks[4..] {
        full.advance(c).unwrap();
        trimmed.advance(c).unwrap();
    }
    assert_eq!(full.chunks()[2..], trimmed.chunks()[..]);
}

#[test]
fn vocabulary_only_grows() {
    let spec = {
        let mut s = planted_change(2, 5, 4, 2, 1);
        s.docs_per_chunk = 30;
        s.doc_len = 20;
        s
    };
    let chunks = spec.generate(2);
    let mut state = RollingState::init(&chunks[..1], params(2)).unwrap();
    let mut sizes = vec![state.vocab().len()];
    let mut words = state.vocab().words().to_vec();
    for c in &chunks[1..] {
        state.advance(c).unwrap();
        assert!(state.vocab().words().starts_with(&words));
        words = state.vocab().words().to_vec();
        sizes.push(words.len());
    }
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert!(
        sizes[2] > sizes[1],
        "planted words are admitted at the change: {sizes:?}"
    );
}

#[test]
fn per_chunk_tables_account_for_every_token() {
    let chunks = small_stream(4).generate(1);
    let state = roll(&chunks, 3, 2, 1);
    for (c, m) in chunks.iter().zip(state.chunks()) {
        let table = state.topic_counts(c.index).unwrap();
        assert_eq!(table.grand_total() as usize, m.num_tokens());
        assert_eq!(m.doc_ids.len(), c.documents.len());
    }
}

#[test]
fn checkpoint_round_trip_then_advance() {
    let chunks = small_stream(4).generate(6);
    let mut a = RollingState::init(&chunks[..1], params(6)).unwrap();
    a.advance(&chunks[1]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    a.write_checkpoint(dir.path()).unwrap();
    let mut b = RollingState::read_checkpoint(dir.path()).unwrap();
    assert_eq!(a, b);
    for c in &chunks[2..] {
        a.advance(c).unwrap();
        b.advance(c).unwrap();
    }
    assert_eq!(a, b);
}

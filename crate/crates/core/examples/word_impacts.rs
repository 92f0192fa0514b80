//! Leave-one-out word impacts: which words drove a detected change.
//!
//!     cargo run --release --example word_impacts

use topicshift::synthetic::graded_drift;
use topicshift::Vocabulary;
use topicshift::{
    impact_report, loo_impacts, run_detection, DetectorParams, LdaParams, RollingParams,
    RollingState,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Toy counts: the current chunk uses "tax" far more than before.
    let mut vocab = Vocabulary::new();
    let counts = ["budget", "debt", "tax"]
        .iter()
        .map(|w| (w.to_string(), 1))
        .collect();
    vocab.admit_minibatch(&counts, 0);
    for imp in loo_impacts(&[10, 5, 40], &[12, 6, 3], &vocab, 3)? {
        println!(
            "{:<8} {:+.4} {}",
            imp.word,
            imp.impact,
            imp.direction.as_str()
        );
    }

    // The same on a stream where topic 0 drifts towards new words.
    let mut spec = graded_drift(3, 10, 8, 0.15);
    spec.docs_per_chunk = 150;
    let chunks = spec.generate(2);
    let mut lda = LdaParams::new(3);
    lda.seed = 2;
    let mut state = RollingState::init(&chunks[..1], RollingParams::new(lda))?;
    for chunk in &chunks[1..] {
        state.advance(chunk)?;
    }
    let series = run_detection(&state, &DetectorParams::default())?;
    for record in series.changes() {
        println!("topic {} at chunk {}:", record.topic, record.t);
        for imp in impact_report(record, &state, 5)? {
            println!(
                "  {:<6} {:+.4} {:<14} {:.3} -> {:.3}",
                imp.word,
                imp.impact,
                imp.direction.as_str(),
                imp.freq_ref,
                imp.freq_t
            );
        }
    }
    Ok(())
}

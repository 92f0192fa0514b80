//! Models a synthetic stream chunk by chunk and shows how the vocabulary
//! grows when new words appear and how topic shares move.
//!
//!     cargo run --release --example rolling_stream

use topicshift::report::topic_shares;
use topicshift::synthetic::planted_change;
use topicshift::{LdaParams, RollingParams, RollingState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = planted_change(3, 10, 6, 3, 2);
    spec.docs_per_chunk = 100;
    spec.doc_len = 40;
    let chunks = spec.generate(7);

    let mut lda = LdaParams::new(3);
    lda.seed = 7;
    let params = RollingParams {
        memory_chunks: 2,
        ..RollingParams::new(lda)
    };
    let mut state = RollingState::init(&chunks[..1], params)?;
    for chunk in &chunks[1..] {
        state.advance(chunk)?;
        println!("chunk {}: vocabulary {}", chunk.index, state.vocab().len());
    }
    for (t, shares) in topic_shares(&state) {
        let shares = shares.map_or("-".to_string(), |s| {
            s.iter()
                .map(|x| format!("{x:.2}"))
                .collect::<Vec<_>>()
                .join(" ")
        });
        println!("chunk {t} shares: {shares}");
    }
    Ok(())
}

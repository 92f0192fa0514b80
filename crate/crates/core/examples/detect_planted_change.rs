//! Plants a vocabulary switch in one topic at chunk 6 of a ten-chunk
//! stream and runs the detector over every topic.
//!
//!     cargo run --release --example detect_planted_change -- [seed]

use topicshift::synthetic::planted_change;
use topicshift::{run_detection, DetectorParams, LdaParams, RollingParams, RollingState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(3);
    let chunks = planted_change(3, 10, 10, 6, 1).generate(seed);

    let mut lda = LdaParams::new(3);
    lda.seed = seed;
    let mut state = RollingState::init(&chunks[..1], RollingParams::new(lda))?;
    for chunk in &chunks[1..] {
        state.advance(chunk)?;
    }

    let series = run_detection(&state, &DetectorParams::default())?;
    println!("topic  t  observed  threshold  z");
    for r in &series.records {
        let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:>5} {:>2}  {:>8}  {:>9} {:>2}{}",
            r.topic,
            r.t,
            fmt(r.observed_similarity),
            fmt(r.threshold),
            r.run_length,
            if r.detected { "  change" } else { "" }
        );
    }
    for (k, set) in series.change_sets.iter().enumerate() {
        println!("C_{k} = {set:?}");
    }
    Ok(())
}

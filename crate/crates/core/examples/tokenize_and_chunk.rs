//! Tokenizes the bundled fixture corpus and assigns documents to chunks,
//! first by the explicit schedule, then by splitting each scheduled period
//! into six equal date ranges.
//!
//!     cargo run --example tokenize_and_chunk

use std::path::Path;

use topicshift::corpus::{load_corpus, load_schedule};
use topicshift::{chunk_by_schedule, tokenize, TokenizeRules};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixture");
    let rules = TokenizeRules::default();

    println!(
        "{:?}",
        tokenize("Die Sitzung ist eröffnet (Beifall). Punkt 1!", &rules)
    );

    let docs = load_corpus(&fixture.join("corpus.jsonl"), &rules)?;
    let schedule = load_schedule(&fixture.join("schedule.txt"))?;
    for (name, schedule) in [
        ("schedule", schedule.clone()),
        ("each period in six", schedule.split_equal_spans(6)?),
    ] {
        println!("{name}:");
        for chunk in chunk_by_schedule(docs.clone(), &schedule)?.chunks {
            println!(
                "  chunk {} {}: {} documents, {} tokens",
                chunk.index,
                chunk.date_range(),
                chunk.documents.len(),
                chunk.token_count()
            );
        }
    }
    Ok(())
}

//! Writes a synthetic corpus with a planted topic change, plus its chunk
//! schedule, ready for `topicshift run`.
//!
//!     cargo run --example synthetic_corpus -- <out-dir> [seed]
//!
//! Three topics over disjoint 8-word blocks; from chunk 2 on, topic 0
//! switches to a fresh block of words. The bundled `data/fixture` was made
//! with seed 1.

use std::fs;
use std::path::PathBuf;

use topicshift::corpus::write_corpus;
use topicshift::synthetic::{planted_change, records, schedule_text};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(
        args.next()
            .ok_or("usage: synthetic_corpus <out-dir> [seed]")?,
    );
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let mut spec = planted_change(3, 8, 3, 2, 0);
    spec.docs_per_chunk = 120;
    spec.doc_len = 40;
    let chunks = spec.generate(seed);

    fs::create_dir_all(&out)?;
    write_corpus(
        fs::File::create(out.join("corpus.jsonl"))?,
        &records(&chunks),
    )?;
    fs::write(out.join("schedule.txt"), schedule_text(&spec))?;
    println!(
        "{} documents in {} chunks written to {}",
        chunks.iter().map(|c| c.documents.len()).sum::<usize>(),
        chunks.len(),
        out.display()
    );
    Ok(())
}

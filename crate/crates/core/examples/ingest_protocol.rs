//! Parses one plenary protocol XML file and prints its speeches.
//!
//!     cargo run --example ingest_protocol -- [file.xml]

use std::path::PathBuf;

use topicshift::ingest::{parse_protocol_xml, split_speech_texts, SpeechRules};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/protocols/archive_session.xml")
        });
    let session = parse_protocol_xml(&std::fs::read(&path)?)?;
    println!("session {} on {}", session.session_id, session.date);
    let split = split_speech_texts(&session, &SpeechRules::default());
    for speech in &split.speeches {
        println!("{}: {}", speech.id, speech.text);
    }
    for warning in &split.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

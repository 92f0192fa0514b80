//! Runs the full pipeline on the bundled fixture and lists the outputs.
//!
//!     cargo run --release --example pipeline -- [out-dir]

use std::path::{Path, PathBuf};

use topicshift::{run_pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixture/config.txt");
    let mut config = PipelineConfig::load(&fixture)?;
    config.out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("topicshift-fixture"),
        PathBuf::from,
    );

    let summary = run_pipeline(&config)?;
    for warning in &summary.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "{} changes; outputs in {}",
        summary.series.num_changes(),
        config.out.display()
    );
    let mut entries: Vec<_> = std::fs::read_dir(&config.out)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for name in entries {
        println!("  {}", name.to_string_lossy());
    }
    print!(
        "{}",
        std::fs::read_to_string(config.out.join("changes.csv"))?
    );
    Ok(())
}

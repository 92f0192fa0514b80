use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topicshift::corpus::write_corpus;
use topicshift::ingest::{ingest_files, protocol_files, SpeechRules};
use topicshift::pipeline::{detect_from_checkpoint, load_run, run_pipeline, PipelineConfig};
use topicshift::report::write_atomically;
use topicshift::Result;

/// Rolling topic models with per-topic change detection.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert plenary-protocol XML files into a JSONL corpus, one record per speech.
    Ingest {
        /// XML files or directories holding them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Corpus file to write.
        #[arg(long, short)]
        output: PathBuf,
        /// Speaker-header ruleset, one regex per line.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Skip malformed files instead of aborting.
        #[arg(long)]
        keep_going: bool,
    },
    /// Fit the rolling model, detect changes and write all reports.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-run detection on a finished run with new detection settings.
    Detect {
        /// Output directory of an earlier `run`.
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Regenerate the reports of a finished run.
    Report {
        /// Output directory of an earlier `run`.
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Each flag overrides the config key of the same name.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    periods: Option<String>,
    #[arg(long)]
    chunks_per_period: Option<usize>,
    /// Period split: date or sessions.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    init_chunks: Option<usize>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    chunk_sweeps: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    vocab_threshold: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    z_max: Option<usize>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    top_words: Option<usize>,
    #[arg(long)]
    top_impacts: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    min_token_len: Option<usize>,
    #[arg(long)]
    stopwords: Option<String>,
}

impl Overrides {
    fn apply(&self, config: &mut PipelineConfig) -> Result<()> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(T::to_string)
        }
        let pairs = [
            ("corpus", s(&self.corpus)),
            ("schedule", s(&self.schedule)),
            ("periods", s(&self.periods)),
            ("chunks_per_period", s(&self.chunks_per_period)),
            ("split", s(&self.split)),
            ("out", s(&self.out)),
            ("k", s(&self.k)),
            ("alpha", s(&self.alpha)),
            ("eta", s(&self.eta)),
            ("init_chunks", s(&self.init_chunks)),
            ("memory", s(&self.memory)),
            ("sweeps", s(&self.sweeps)),
            ("chunk_sweeps", s(&self.chunk_sweeps)),
            ("n_init", s(&self.n_init)),
            ("vocab_threshold", s(&self.vocab_threshold)),
            ("p", s(&self.p)),
            ("z_max", s(&self.z_max)),
            ("quantile", s(&self.quantile)),
            ("replicates", s(&self.replicates)),
            ("seed", s(&self.seed)),
            ("top_words", s(&self.top_words)),
            ("top_impacts", s(&self.top_impacts)),
            ("threads", s(&self.threads)),
            ("min_token_len", s(&self.min_token_len)),
            ("stopwords", s(&self.stopwords)),
        ];
        for (key, value) in pairs {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        Ok(())
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            inputs,
            output,
            rules,
            keep_going,
        } => {
            let rules = match rules {
                Some(path) => SpeechRules::load(&path)?,
                None => SpeechRules::default(),
            };
            let files = protocol_files(&inputs)?;
            let report = ingest_files(&files, &rules, keep_going)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            for e in &report.failures {
                log::error!("skipped: {e}");
            }
            write_atomically(&output, |w| write_corpus(w, &report.records))?;
            eprintln!(
                "{} speeches from {} files written to {}",
                report.records.len(),
                files.len() - report.failures.len(),
                output.display()
            );
        }
        Command::Run { config, overrides } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::load(&path)?,
                None => PipelineConfig::default(),
            };
            overrides.apply(&mut cfg)?;
            let summary = run_pipeline(&cfg)?;
            for w in &summary.warnings {
                log::warn!("{w}");
            }
            eprintln!(
                "{} chunks modeled, {} changes detected; reports in {}",
                summary.state.chunks().len(),
                summary.series.num_changes(),
                cfg.out.display()
            );
        }
        Command::Detect { from, overrides } | Command::Report { from, overrides } => {
            let (mut cfg, state) = load_run(&from)?;
            cfg.out = from.clone();
            overrides.apply(&mut cfg)?;
            let series = detect_from_checkpoint(&cfg, &state)?;
            eprintln!(
                "{} changes detected; reports in {}",
                series.num_changes(),
                cfg.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

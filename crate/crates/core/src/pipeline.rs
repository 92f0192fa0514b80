//! End-to-end runs: corpus → chunks → rolling model → detection → reports.
//!
//! Configuration is a flat `key = value` file. Every key can also be set
//! from the command line, and a run's `manifest.txt` is itself a valid
//! configuration reproducing that run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::{chunk_by_schedule, load_corpus, load_schedule, Schedule, TokenizeRules};
use crate::detect::{run_detection, DetectionSeries, DetectorParams};
use crate::error::{Error, Result};
use crate::impact::impact_report;
use crate::lda::LdaParams;
use crate::report::{self, change_id, write_atomically};
use crate::rolling::{RollingParams, RollingState};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const REPORT_FILES: [&str; 6] = [
    "changes.csv",
    "similarities.csv",
    "impacts.csv",
    "topwords.csv",
    "shares.csv",
    "summary.csv",
];

/// How legislative periods are split into chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Equal date spans.
    Date,
    /// Equal numbers of session dates.
    Sessions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    /// Explicit chunk boundaries. Mutually exclusive with `periods`.
    pub schedule: Option<PathBuf>,
    /// Period boundaries, each split into `chunks_per_period` chunks.
    pub periods: Option<PathBuf>,
    pub chunks_per_period: usize,
    pub split: SplitMode,
    pub out: PathBuf,
    pub num_topics: usize,
    /// `None` means `1/K`.
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub init_chunks: usize,
    pub memory_chunks: usize,
    pub sweeps: usize,
    pub chunk_sweeps: usize,
    pub n_init: usize,
    pub vocab_threshold: usize,
    pub p: f64,
    pub z_max: usize,
    pub quantile_level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub top_words: usize,
    pub top_impacts: usize,
    /// Worker threads; 0 uses all cores. Never affects results.
    pub threads: usize,
    pub min_token_len: usize,
    pub stopwords: Option<PathBuf>,
    /// Recorded by a previous run; checked when the corpus is reloaded.
    pub corpus_sha256: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let detect = DetectorParams::default();
        PipelineConfig {
            corpus: None,
            schedule: None,
            periods: None,
            chunks_per_period: 8,
            split: SplitMode::Date,
            out: PathBuf::from("out"),
            num_topics: 30,
            alpha: None,
            eta: None,
            init_chunks: 8,
            memory_chunks: 4,
            sweeps: 200,
            chunk_sweeps: 100,
            n_init: 5,
            vocab_threshold: crate::vocab::DEFAULT_ADMISSION_THRESHOLD,
            p: detect.p,
            z_max: detect.z_max,
            quantile_level: detect.quantile_level,
            replicates: detect.replicates,
            seed: 0,
            top_words: 10,
            top_impacts: 10,
            threads: 0,
            min_token_len: 2,
            stopwords: None,
            corpus_sha256: None,
        }
    }
}

/// Every configuration key, in manifest order.
pub const CONFIG_KEYS: [&str; 25] = [
    "corpus",
    "schedule",
    "periods",
    "chunks_per_period",
    "split",
    "out",
    "k",
    "alpha",
    "eta",
    "init_chunks",
    "memory",
    "sweeps",
    "chunk_sweeps",
    "n_init",
    "vocab_threshold",
    "p",
    "z_max",
    "quantile",
    "replicates",
    "seed",
    "top_words",
    "top_impacts",
    "threads",
    "min_token_len",
    "stopwords",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "corpus" => self.corpus = path(value),
            "schedule" => self.schedule = path(value),
            "periods" => self.periods = path(value),
            "chunks_per_period" => self.chunks_per_period = parse_num(key, value)?,
            "split" => {
                self.split = match value {
                    "date" => SplitMode::Date,
                    "sessions" => SplitMode::Sessions,
                    _ => {
                        return Err(Error::Config(format!(
                            "split: expected date or sessions, got {value:?}"
                        )))
                    }
                }
            }
            "out" => self.out = PathBuf::from(value),
            "k" => self.num_topics = parse_num(key, value)?,
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "eta" => self.eta = Some(parse_num(key, value)?),
            "init_chunks" => self.init_chunks = parse_num(key, value)?,
            "memory" => self.memory_chunks = parse_num(key, value)?,
            "sweeps" => self.sweeps = parse_num(key, value)?,
            "chunk_sweeps" => self.chunk_sweeps = parse_num(key, value)?,
            "n_init" => self.n_init = parse_num(key, value)?,
            "vocab_threshold" => self.vocab_threshold = parse_num(key, value)?,
            "p" => self.p = parse_num(key, value)?,
            "z_max" => self.z_max = parse_num(key, value)?,
            "quantile" => self.quantile_level = parse_num(key, value)?,
            "replicates" => self.replicates = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "top_words" => self.top_words = parse_num(key, value)?,
            "top_impacts" => self.top_impacts = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "min_token_len" => self.min_token_len = parse_num(key, value)?,
            "stopwords" => self.stopwords = path(value),
            "corpus_sha256" => self.corpus_sha256 = (!value.is_empty()).then(|| value.to_string()),
            "version" => {}
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1))
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(config)
    }

    /// Loads a config file. Relative input paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io("pipeline::load_config", path, e))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.corpus,
            &mut config.schedule,
            &mut config.periods,
            &mut config.stopwords,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn lda_params(&self) -> LdaParams {
        let mut lda = LdaParams::new(self.num_topics);
        lda.alpha = self.alpha.unwrap_or(lda.alpha);
        lda.eta = self.eta.unwrap_or(lda.eta);
        lda.sweeps = self.sweeps;
        lda.n_init = self.n_init;
        lda.seed = self.seed;
        lda
    }

    pub fn rolling_params(&self) -> RollingParams {
        RollingParams {
            init_chunks: self.init_chunks,
            memory_chunks: self.memory_chunks,
            chunk_sweeps: self.chunk_sweeps,
            vocab_threshold: self.vocab_threshold,
            lda: self.lda_params(),
        }
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams {
            p: self.p,
            z_max: self.z_max,
            quantile_level: self.quantile_level,
            replicates: self.replicates,
            seed: self.seed,
        }
    }

    /// Checks every parameter bound; called before any work is done.
    pub fn validate(&self) -> Result<()> {
        self.rolling_params().validate()?;
        self.detector_params().validate()?;
        if self.chunks_per_period < 1 {
            return Err(Error::Config("chunks_per_period must be >= 1".into()));
        }
        if self.schedule.is_some() && self.periods.is_some() {
            return Err(Error::Config(
                "set either schedule or periods, not both".into(),
            ));
        }
        Ok(())
    }

    /// Checks that the inputs needed for a full run are present.
    fn validate_inputs(&self) -> Result<()> {
        if self.corpus.is_none() {
            return Err(Error::Config("no corpus given".into()));
        }
        if self.schedule.is_none() && self.periods.is_none() {
            return Err(Error::Config("no schedule or periods given".into()));
        }
        Ok(())
    }

    /// Key-value text of every result-relevant setting. Output location and
    /// thread count are left out: they never change results.
    pub fn manifest(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let lda = self.lda_params();
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match key {
                "corpus" => path(&self.corpus),
                "schedule" => path(&self.schedule),
                "periods" => path(&self.periods),
                "chunks_per_period" => self.chunks_per_period.to_string(),
                "split" => match self.split {
                    SplitMode::Date => "date".into(),
                    SplitMode::Sessions => "sessions".into(),
                },
                "out" | "threads" => continue,
                "k" => self.num_topics.to_string(),
                "alpha" => lda.alpha.to_string(),
                "eta" => lda.eta.to_string(),
                "init_chunks" => self.init_chunks.to_string(),
                "memory" => self.memory_chunks.to_string(),
                "sweeps" => self.sweeps.to_string(),
                "chunk_sweeps" => self.chunk_sweeps.to_string(),
                "n_init" => self.n_init.to_string(),
                "vocab_threshold" => self.vocab_threshold.to_string(),
                "p" => self.p.to_string(),
                "z_max" => self.z_max.to_string(),
                "quantile" => self.quantile_level.to_string(),
                "replicates" => self.replicates.to_string(),
                "seed" => self.seed.to_string(),
                "top_words" => self.top_words.to_string(),
                "top_impacts" => self.top_impacts.to_string(),
                "min_token_len" => self.min_token_len.to_string(),
                "stopwords" => path(&self.stopwords),
                _ => unreachable!("key list and match disagree"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        if let Some(hash) = &self.corpus_sha256 {
            let _ = writeln!(out, "corpus_sha256 = {hash}");
        }
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        out
    }

    fn tokenize_rules(&self) -> Result<TokenizeRules> {
        let rules = TokenizeRules {
            min_len: self.min_token_len,
            ..TokenizeRules::default()
        };
        match &self.stopwords {
            Some(path) => rules.with_stopword_file(path),
            None => Ok(rules),
        }
    }

    fn period_schedule(&self) -> Result<Option<Schedule>> {
        self.periods.as_deref().map(load_schedule).transpose()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Runs `f` on a pool with `threads` workers (0: the global pool).
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    pool.install(f)
}

/// What a completed run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub state: RollingState,
    pub series: DetectionSeries,
    pub warnings: Vec<String>,
}

/// Full run: loads and chunks the corpus, fits the rolling model, detects
/// changes and writes the reports, the manifest and a checkpoint to
/// `config.out`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    config.validate_inputs()?;
    with_threads(config.threads, || {
        let mut config = config.clone();
        let corpus_path = config.corpus.clone().expect("validated");
        let bytes =
            fs::read(&corpus_path).map_err(|e| Error::io("pipeline::run", &corpus_path, e))?;
        let hash = sha256_hex(&bytes);
        if let Some(expected) = &config.corpus_sha256 {
            if *expected != hash {
                return Err(Error::Config(format!(
                    "corpus {} has sha256 {hash}, manifest expects {expected}",
                    corpus_path.display()
                )));
            }
        }
        config.corpus_sha256 = Some(hash);

        let docs = load_corpus(&corpus_path, &config.tokenize_rules()?)?;
        let schedule = match (&config.schedule, config.period_schedule()?) {
            (Some(path), _) => load_schedule(path)?,
            (None, Some(periods)) => match config.split {
                SplitMode::Date => periods.split_equal_spans(config.chunks_per_period)?,
                SplitMode::Sessions => {
                    periods.split_by_sessions(config.chunks_per_period, &docs)?
                }
            },
            (None, None) => unreachable!("validated"),
        };
        let chunked = chunk_by_schedule(docs, &schedule)?;
        if chunked.chunks.len() < config.init_chunks {
            return Err(Error::Config(format!(
                "init_chunks = {} but the schedule has only {} chunks",
                config.init_chunks,
                chunked.chunks.len()
            )));
        }
        let (init, rest) = chunked.chunks.split_at(config.init_chunks);
        log::info!("fitting {} initialization chunks", init.len());
        let mut state = RollingState::init(init, config.rolling_params())?;
        for chunk in rest {
            log::info!("modeling chunk {} ({})", chunk.index, chunk.date_range());
            state.advance(chunk)?;
        }

        fs::create_dir_all(&config.out).map_err(|e| Error::io("pipeline::run", &config.out, e))?;
        state.write_checkpoint(&config.out.join(CHECKPOINT_DIR))?;
        let series = write_outputs(&config, &state)?;
        Ok(RunSummary {
            state,
            series,
            warnings: chunked.warnings,
        })
    })
}

/// Loads the manifest and checkpoint of an earlier run in `run_dir`.
pub fn load_run(run_dir: &Path) -> Result<(PipelineConfig, RollingState)> {
    let config = PipelineConfig::parse(
        &fs::read_to_string(run_dir.join(MANIFEST_FILE))
            .map_err(|e| Error::io("pipeline::load_run", run_dir.join(MANIFEST_FILE), e))?,
    )?;
    let state = RollingState::read_checkpoint(&run_dir.join(CHECKPOINT_DIR))?;
    Ok((config, state))
}

/// Re-runs detection and reporting on a saved rolling state. Only
/// detection and report settings of `config` may differ from the run that
/// produced the checkpoint; model settings are taken from the checkpoint.
pub fn detect_from_checkpoint(
    config: &PipelineConfig,
    state: &RollingState,
) -> Result<DetectionSeries> {
    config.validate()?;
    let model = state.params();
    if model != &config.rolling_params() {
        return Err(Error::Config(
            "model settings differ from the checkpoint; use run to refit".into(),
        ));
    }
    with_threads(config.threads, || {
        fs::create_dir_all(&config.out)
            .map_err(|e| Error::io("pipeline::detect", &config.out, e))?;
        write_outputs(config, state)
    })
}

/// Detection plus all report files and the manifest.
fn write_outputs(config: &PipelineConfig, state: &RollingState) -> Result<DetectionSeries> {
    let series = run_detection(state, &config.detector_params())?;
    log::info!("{} changes detected", series.num_changes());
    let out = &config.out;

    let impacts = series
        .changes()
        .map(|r| {
            Ok((
                change_id(r.topic, r.t),
                impact_report(r, state, config.top_impacts)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let doc_dates = state
        .chunks()
        .iter()
        .flat_map(|c| c.doc_dates.iter().copied());
    let change_dates = series
        .changes()
        .filter_map(|r| state.chunk(r.t).map(|c| c.start));
    let init_last = state.first_index() + config.init_chunks - 1;
    let init_end = state
        .chunk(init_last)
        .map(|c| c.end)
        .unwrap_or(state.chunks()[0].end);
    let periods = match config.period_schedule()? {
        Some(p) => p,
        None => {
            let mut bounds: Vec<_> = state.chunks().iter().map(|c| c.start).collect();
            bounds.push(state.chunks().last().expect("non-empty state").end);
            Schedule::new(bounds)?
        }
    };
    let summary = report::period_summary(doc_dates, change_dates, &periods, init_end);

    write_atomically(&out.join("changes.csv"), |w| {
        report::write_changes(w, &series, state)
    })?;
    write_atomically(&out.join("similarities.csv"), |w| {
        report::write_similarities(w, &series, state)
    })?;
    write_atomically(&out.join("impacts.csv"), |w| {
        report::write_impacts(w, &impacts)
    })?;
    write_atomically(&out.join("topwords.csv"), |w| {
        report::write_top_words(w, state, config.top_words)
    })?;
    write_atomically(&out.join("shares.csv"), |w| report::write_shares(w, state))?;
    write_atomically(&out.join("summary.csv"), |w| {
        report::write_summary(w, &summary)
    })?;
    let manifest = config.manifest();
    write_atomically(&out.join(MANIFEST_FILE), |w| {
        w.write_all(manifest.as_bytes())
    })?;
    Ok(series)
}

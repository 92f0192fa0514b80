//! Rolling LDA over a sequence of time chunks.
//!
//! The first chunks are fitted jointly. Every later chunk is sampled against
//! the topic-word counts of the preceding `memory_chunks` chunks, which act
//! as a fixed prior landscape: only the new chunk's tokens are ever
//! resampled, so the assignments of earlier chunks never change once made.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::corpus::{parse_date, TimeChunk, DATE_FORMAT};
use crate::error::{Error, Result};
use crate::lda::{
    self, decode_pairs, encode_pairs, LdaParams, LdaState, LineReader, TopicWordCounts,
};
use crate::seed;
use crate::vocab::{count_tokens, Vocabulary, DEFAULT_ADMISSION_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct RollingParams {
    pub init_chunks: usize,
    pub memory_chunks: usize,
    pub chunk_sweeps: usize,
    pub vocab_threshold: usize,
    pub lda: LdaParams,
}

impl RollingParams {
    pub fn new(lda: LdaParams) -> Self {
        RollingParams {
            init_chunks: 1,
            memory_chunks: 4,
            chunk_sweeps: 100,
            vocab_threshold: DEFAULT_ADMISSION_THRESHOLD,
            lda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lda.validate()?;
        let op = "rolling::params";
        if self.init_chunks < 1 {
            return Err(Error::params(op, "init_chunks must be >= 1"));
        }
        if self.memory_chunks < 1 {
            return Err(Error::params(op, "memory_chunks must be >= 1"));
        }
        if self.chunk_sweeps < 1 {
            return Err(Error::params(op, "chunk_sweeps must be >= 1"));
        }
        Ok(())
    }
}

/// Frozen assignments of one modeled chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeledChunk {
    pub index: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub doc_ids: Vec<String>,
    pub doc_dates: Vec<NaiveDate>,
    pub words: Vec<Vec<u32>>,
    pub topics: Vec<Vec<u32>>,
    /// Vocabulary size when this chunk was modeled.
    pub vocab_size: usize,
}

impl ModeledChunk {
    pub fn num_tokens(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    pub fn date_range(&self) -> String {
        format!(
            "{}/{}",
            self.start.format(DATE_FORMAT),
            self.end.format(DATE_FORMAT)
        )
    }

    /// `n_{k|t}` zero-padded to `vocab_size` columns.
    pub fn topic_counts(&self, num_topics: usize, vocab_size: usize) -> TopicWordCounts {
        TopicWordCounts::from_assignments(
            num_topics,
            vocab_size,
            self.words
                .iter()
                .map(Vec::as_slice)
                .zip(self.topics.iter().map(Vec::as_slice)),
        )
    }

    fn from_chunk(
        chunk: &TimeChunk,
        words: Vec<Vec<u32>>,
        topics: Vec<Vec<u32>>,
        vocab_size: usize,
    ) -> Self {
        ModeledChunk {
            index: chunk.index,
            start: chunk.start,
            end: chunk.end,
            doc_ids: chunk.documents.iter().map(|d| d.id.clone()).collect(),
            doc_dates: chunk.documents.iter().map(|d| d.date).collect(),
            words,
            topics,
            vocab_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingState {
    params: RollingParams,
    vocab: Vocabulary,
    chunks: Vec<ModeledChunk>,
}

impl RollingState {
    /// Fits the initialization chunks jointly. The vocabulary is seeded by
    /// admitting the pooled token counts of all of them at once.
    pub fn init(chunks: &[TimeChunk], params: RollingParams) -> Result<Self> {
        params.validate()?;
        if chunks.is_empty() {
            return Err(Error::EmptyInit);
        }
        if let Some(w) = chunks.windows(2).find(|w| w[1].index != w[0].index + 1) {
            return Err(Error::NonConsecutiveChunk {
                expected: w[0].index + 1,
                got: w[1].index,
            });
        }
        let mut vocab = Vocabulary::new();
        let counts = count_tokens(
            chunks
                .iter()
                .flat_map(|c| &c.documents)
                .map(|d| d.tokens.as_slice()),
        );
        vocab.admit_minibatch(&counts, params.vocab_threshold);

        let encoded: Vec<Vec<Vec<u32>>> = chunks
            .iter()
            .map(|c| {
                c.documents
                    .iter()
                    .map(|d| vocab.encode(&d.tokens))
                    .collect()
            })
            .collect();
        if encoded.iter().flatten().all(Vec::is_empty) {
            return Err(Error::EmptyInit);
        }
        let pooled: Vec<Vec<u32>> = encoded.iter().flatten().cloned().collect();
        let state = lda::fit(pooled, vocab.len(), &params.lda)?;
        let (_, mut topics) = state.into_parts();

        let mut modeled = Vec::with_capacity(chunks.len());
        let mut rest = topics.drain(..);
        for (chunk, words) in chunks.iter().zip(encoded) {
            let chunk_topics: Vec<Vec<u32>> = rest.by_ref().take(words.len()).collect();
            modeled.push(ModeledChunk::from_chunk(
                chunk,
                words,
                chunk_topics,
                vocab.len(),
            ));
        }
        drop(rest);
        Ok(RollingState {
            params,
            vocab,
            chunks: modeled,
        })
    }

    /// Models the next chunk:
    /// 1. admits the chunk's frequent new words to the vocabulary,
    /// 2. tallies the assignments of the last `memory_chunks` chunks,
    /// 3. draws initial topics for the new tokens sequentially from the
    ///    conditional given that memory, then runs `chunk_sweeps` sweeps over
    ///    the new tokens only.
    pub fn advance(&mut self, chunk: &TimeChunk) -> Result<()> {
        let expected = self.last_index() + 1;
        if chunk.index != expected {
            return Err(Error::NonConsecutiveChunk {
                expected,
                got: chunk.index,
            });
        }
        let counts = count_tokens(chunk.documents.iter().map(|d| d.tokens.as_slice()));
        let added = self
            .vocab
            .admit_minibatch(&counts, self.params.vocab_threshold);
        if !added.is_empty() {
            log::debug!("chunk {}: admitted {} words", chunk.index, added.len());
        }
        let vocab_size = self.vocab.len();
        let memory = self.memory_counts(vocab_size);
        let docs: Vec<Vec<u32>> = chunk
            .documents
            .iter()
            .map(|d| self.vocab.encode(&d.tokens))
            .collect();

        let lda = &self.params.lda;
        let mut rng = seed::rng(lda.seed, &[seed::STREAM_CHUNK, chunk.index as u64]);
        let mut state = LdaState::init_sequential(
            docs,
            vocab_size,
            lda.num_topics,
            lda.alpha,
            lda.eta,
            Some(&memory),
            &mut rng,
        )?;
        for _ in 0..self.params.chunk_sweeps {
            state.sweep_with(lda.alpha, lda.eta, Some(&memory), &mut rng, |_| {});
        }
        let (words, topics) = state.into_parts();
        self.chunks
            .push(ModeledChunk::from_chunk(chunk, words, topics, vocab_size));
        Ok(())
    }

    /// Topic-word counts of the memory window preceding the next chunk.
    pub fn memory_counts(&self, vocab_size: usize) -> TopicWordCounts {
        let k = self.params.lda.num_topics;
        let window = self.chunks.len().saturating_sub(self.params.memory_chunks);
        TopicWordCounts::from_assignments(
            k,
            vocab_size,
            self.chunks[window..].iter().flat_map(|c| {
                c.words
                    .iter()
                    .map(Vec::as_slice)
                    .zip(c.topics.iter().map(Vec::as_slice))
            }),
        )
    }

    /// `n_{k|t}` for every topic, zero-padded to the current vocabulary.
    pub fn topic_counts(&self, t: usize) -> Result<TopicWordCounts> {
        let chunk = self.chunk(t).ok_or(Error::ChunkOutOfRange {
            op: "rolling::topic_counts",
            t,
            first: self.first_index(),
            last: self.last_index(),
        })?;
        Ok(chunk.topic_counts(self.params.lda.num_topics, self.vocab.len()))
    }

    pub fn chunk(&self, t: usize) -> Option<&ModeledChunk> {
        t.checked_sub(self.first_index())
            .and_then(|i| self.chunks.get(i))
    }

    pub fn chunks(&self) -> &[ModeledChunk] {
        &self.chunks
    }

    pub fn first_index(&self) -> usize {
        self.chunks[0].index
    }

    /// Index `t` of the most recently modeled chunk.
    pub fn last_index(&self) -> usize {
        self.chunks
            .last()
            .expect("state holds at least one chunk")
            .index
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &RollingParams {
        &self.params
    }

    pub fn num_topics(&self) -> usize {
        self.params.lda.num_topics
    }

    /// Drops all chunks with index below `t`. Later advances are unaffected
    /// as long as the memory window is kept.
    pub fn drop_history_before(&self, t: usize) -> RollingState {
        let mut out = self.clone();
        out.chunks.retain(|c| c.index >= t);
        assert!(!out.chunks.is_empty(), "at least the last chunk is kept");
        out
    }

    /// Writes `vocab.txt` and `rolling.txt` into `dir`.
    pub fn write_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io("rolling::write_checkpoint", dir, e))?;
        crate::report::write_atomically(&dir.join(VOCAB_FILE), |w| self.vocab.write_to(w))?;
        crate::report::write_atomically(&dir.join(STATE_FILE), |w| self.write_state(w))
    }

    fn write_state<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(out, "{ROLLING_MAGIC}")?;
        writeln!(out, "num_topics {}", p.lda.num_topics)?;
        writeln!(out, "alpha {:?}", p.lda.alpha)?;
        writeln!(out, "eta {:?}", p.lda.eta)?;
        writeln!(out, "sweeps {}", p.lda.sweeps)?;
        writeln!(out, "seed {}", p.lda.seed)?;
        writeln!(out, "n_init {}", p.lda.n_init)?;
        writeln!(out, "init_chunks {}", p.init_chunks)?;
        writeln!(out, "memory_chunks {}", p.memory_chunks)?;
        writeln!(out, "chunk_sweeps {}", p.chunk_sweeps)?;
        writeln!(out, "vocab_threshold {}", p.vocab_threshold)?;
        writeln!(out, "vocab_size {}", self.vocab.len())?;
        writeln!(out, "chunks {}", self.chunks.len())?;
        for c in &self.chunks {
            let totals = c.topic_counts(p.lda.num_topics, c.vocab_size);
            let totals: Vec<String> = totals.totals().iter().map(u64::to_string).collect();
            writeln!(
                out,
                "chunk {} {} {} {} {} {}",
                c.index,
                c.start.format(DATE_FORMAT),
                c.end.format(DATE_FORMAT),
                c.vocab_size,
                c.words.len(),
                totals.join(" ")
            )?;
            for d in 0..c.words.len() {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    serde_json::to_string(&c.doc_ids[d]).expect("string serializes"),
                    c.doc_dates[d].format(DATE_FORMAT),
                    encode_pairs(&c.words[d], &c.topics[d])
                )?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint written by [`RollingState::write_checkpoint`],
    /// recounting every chunk and checking it against the stored totals.
    pub fn read_checkpoint(dir: &Path) -> Result<Self> {
        let vocab_path = dir.join(VOCAB_FILE);
        let state_path = dir.join(STATE_FILE);
        let vocab_file = File::open(&vocab_path)
            .map_err(|e| Error::io("rolling::read_checkpoint", &vocab_path, e))?;
        let vocab = Vocabulary::read_from(BufReader::new(vocab_file))?;
        let state_file = File::open(&state_path)
            .map_err(|e| Error::io("rolling::read_checkpoint", &state_path, e))?;
        let mut lines = LineReader::new(BufReader::new(state_file));

        let magic = lines.next_line()?;
        if magic != ROLLING_MAGIC {
            return Err(lines.error(format!("expected {ROLLING_MAGIC:?}, found {magic:?}")));
        }
        let lda = LdaParams {
            num_topics: lines.field("num_topics")?,
            alpha: lines.field("alpha")?,
            eta: lines.field("eta")?,
            sweeps: lines.field("sweeps")?,
            seed: lines.field("seed")?,
            n_init: lines.field("n_init")?,
        };
        let params = RollingParams {
            init_chunks: lines.field("init_chunks")?,
            memory_chunks: lines.field("memory_chunks")?,
            chunk_sweeps: lines.field("chunk_sweeps")?,
            vocab_threshold: lines.field("vocab_threshold")?,
            lda,
        };
        let vocab_size: usize = lines.field("vocab_size")?;
        if vocab_size != vocab.len() {
            return Err(lines.error(format!(
                "vocabulary file has {} words, state expects {vocab_size}",
                vocab.len()
            )));
        }
        let num_chunks: usize = lines.field("chunks")?;
        let k = params.lda.num_topics;
        let mut chunks = Vec::with_capacity(num_chunks);
        for _ in 0..num_chunks {
            let header = lines.next_line()?;
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.len() != 6 + k || fields[0] != "chunk" {
                return Err(lines.error(format!("bad chunk header {header:?}")));
            }
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| lines.error(format!("bad number {s:?}")))
            };
            let date =
                |s: &str| parse_date(s).ok_or_else(|| lines.error(format!("bad date {s:?}")));
            let index = num(fields[1])? as usize;
            let (start, end) = (date(fields[2])?, date(fields[3])?);
            let chunk_vocab = num(fields[4])? as usize;
            let num_docs = num(fields[5])? as usize;
            let stored_totals = fields[6..]
                .iter()
                .map(|s| num(s))
                .collect::<Result<Vec<u64>>>()?;

            let mut chunk = ModeledChunk {
                index,
                start,
                end,
                doc_ids: Vec::with_capacity(num_docs),
                doc_dates: Vec::with_capacity(num_docs),
                words: Vec::with_capacity(num_docs),
                topics: Vec::with_capacity(num_docs),
                vocab_size: chunk_vocab,
            };
            for _ in 0..num_docs {
                let line = lines.next_line()?;
                let mut parts = line.splitn(3, '\t');
                let (Some(id), Some(d), Some(pairs)) = (parts.next(), parts.next(), parts.next())
                else {
                    return Err(lines.error(format!("bad document line {line:?}")));
                };
                let id: String =
                    serde_json::from_str(id).map_err(|e| lines.error(e.to_string()))?;
                let (words, topics) = decode_pairs(pairs).map_err(|r| lines.error(r))?;
                chunk.doc_ids.push(id);
                let doc_date =
                    parse_date(d).ok_or_else(|| lines.error(format!("bad date {d:?}")))?;
                chunk.doc_dates.push(doc_date);
                chunk.words.push(words);
                chunk.topics.push(topics);
            }
            let recount = LdaState::from_assignments(
                k,
                chunk_vocab.max(1),
                chunk.words.clone(),
                chunk.topics.clone(),
            )?;
            if recount.topic_word().totals() != stored_totals.as_slice() || chunk_vocab > vocab_size
            {
                return Err(lines.error(format!(
                    "chunk {index}: recount does not match stored totals"
                )));
            }
            chunks.push(chunk);
        }
        if chunks.is_empty() || chunks.windows(2).any(|w| w[1].index != w[0].index + 1) {
            return Err(lines.error("chunks missing or not consecutive".into()));
        }
        Ok(RollingState {
            params,
            vocab,
            chunks,
        })
    }
}

pub const VOCAB_FILE: &str = "vocab.txt";
pub const STATE_FILE: &str = "rolling.txt";
const ROLLING_MAGIC: &str = "topicshift-rolling v1";

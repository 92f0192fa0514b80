//! Append-only word ↔ id mapping.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Default admission threshold: a new word must occur more than this many
/// times within one minibatch.
pub const DEFAULT_ADMISSION_THRESHOLD: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn push(&mut self, word: String) -> u32 {
        let id = self.words.len() as u32;
        self.ids.insert(word.clone(), id);
        self.words.push(word);
        id
    }

    /// Appends every out-of-vocabulary word whose count in this minibatch
    /// is strictly greater than `threshold`, in lexicographic order, and
    /// returns the newly added words. Counts are never carried over to later
    /// minibatches.
    pub fn admit_minibatch(
        &mut self,
        counts: &HashMap<String, usize>,
        threshold: usize,
    ) -> Vec<String> {
        let fresh: BTreeMap<&str, usize> = counts
            .iter()
            .filter(|(w, &c)| c > threshold && !self.ids.contains_key(w.as_str()))
            .map(|(w, &c)| (w.as_str(), c))
            .collect();
        let added: Vec<String> = fresh.keys().map(|w| w.to_string()).collect();
        for word in &added {
            self.push(word.clone());
        }
        added
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().filter_map(|&i| self.word(i)).collect()
    }

    /// One word per line, line number (from 0) = id.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in &self.words {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Checkpoint {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if vocab.ids.contains_key(&line) {
                return Err(Error::Checkpoint {
                    line: i + 1,
                    reason: format!("duplicate vocabulary word {line:?}"),
                });
            }
            vocab.push(line);
        }
        Ok(vocab)
    }
}

/// Token counts of a minibatch, the input of [`Vocabulary::admit_minibatch`].
pub fn count_tokens<'a, I, S>(docs: I) -> HashMap<String, usize>
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut counts = HashMap::new();
    for doc in docs {
        for tok in doc {
            *counts.entry(tok.as_ref().to_string()).or_insert(0) += 1;
        }
    }
    counts
}

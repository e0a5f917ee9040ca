//! Frequency-ranked vocabulary with out-of-vocabulary and start markers.

use crate::error::{io_err, Error, Result};
use std::collections::HashMap;
use std::path::Path;

pub const OOV_TOKEN: &str = "<oov>";
pub const BOS_TOKEN: &str = "<bos>";

/// Word ids 0..n_words-1 are real words ordered by descending count (ties
/// broken by first occurrence). Two reserved ids follow: the OOV id
/// (carrying the pooled count of all dropped words) and the BOS id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total: u64,
}

impl Vocabulary {
    /// Builds from a token stream, keeping the `size` most frequent words.
    pub fn build<I>(tokens: I, size: usize) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        if size == 0 {
            return Err(Error::Config("vocabulary size must be at least 1".into()));
        }
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        let mut total = 0u64;
        for (pos, tok) in tokens.into_iter().enumerate() {
            let tok = tok.as_ref();
            if tok.is_empty() {
                continue;
            }
            total += 1;
            counts
                .entry(tok.to_string())
                .and_modify(|e| e.0 += 1)
                .or_insert((1, pos));
        }
        if total == 0 {
            return Err(Error::Empty("vocabulary token stream"));
        }
        let mut ranked: Vec<(String, u64, usize)> = counts
            .into_iter()
            .map(|(w, (c, first))| (w, c, first))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let kept = ranked.len().min(size);
        let oov_count: u64 = ranked[kept..].iter().map(|r| r.1).sum();
        ranked.truncate(kept);

        let mut words: Vec<String> = ranked.iter().map(|r| r.0.clone()).collect();
        let mut word_counts: Vec<u64> = ranked.iter().map(|r| r.1).collect();
        words.push(OOV_TOKEN.to_string());
        word_counts.push(oov_count);
        words.push(BOS_TOKEN.to_string());
        word_counts.push(0);

        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            words,
            counts: word_counts,
            index,
            total,
        })
    }

    /// Number of real words (reserved ids excluded).
    pub fn n_words(&self) -> usize {
        self.words.len() - 2
    }

    /// Total table size including the OOV and BOS rows. This is the
    /// dimension of the embedding table and softmax layer.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn oov_id(&self) -> u32 {
        (self.words.len() - 2) as u32
    }

    pub fn bos_id(&self) -> u32 {
        (self.words.len() - 1) as u32
    }

    /// Id for a word, falling back to the OOV id.
    pub fn id(&self, word: &str) -> u32 {
        self.lookup(word).unwrap_or_else(|| self.oov_id())
    }

    /// Id only if the word is a real vocabulary entry.
    pub fn lookup(&self, word: &str) -> Option<u32> {
        match self.index.get(word) {
            Some(&id) if id < self.oov_id() => Some(id),
            _ => None,
        }
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Tokens seen while building, including those pooled into OOV.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    /// Natural log of the corpus relative frequency of `id`. The OOV id uses
    /// its pooled count. `None` when the count is zero (BOS, or words that
    /// can only appear via a hand-built table).
    pub fn log_freq(&self, id: u32) -> Option<f64> {
        let c = self.counts[id as usize];
        if c == 0 {
            None
        } else {
            Some((c as f64 / self.total as f64).ln())
        }
    }

    pub fn encode<I>(&self, tokens: I) -> Vec<u32>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        tokens.into_iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// TSV rows `word<TAB>count` in id order, reserved rows last. The total
    /// token count rides in a leading comment so frequencies survive the
    /// round trip.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("# total_tokens\t{}\n", self.total));
        for (w, c) in self.words.iter().zip(&self.counts) {
            out.push_str(&format!("{w}\t{c}\n"));
        }
        std::fs::write(path, out).map_err(io_err(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut total: Option<u64> = None;
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in body.lines().enumerate() {
            let line_id = lineno + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# total_tokens\t") {
                total = Some(rest.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_id,
                    column: "total_tokens".into(),
                    message: format!("invalid count `{rest}`"),
                })?);
                continue;
            }
            let (w, c) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line_id,
                column: "word".into(),
                message: "expected `word<TAB>count`".into(),
            })?;
            let count: u64 = c.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_id,
                column: "count".into(),
                message: format!("invalid count `{c}`"),
            })?;
            words.push(w.to_string());
            counts.push(count);
        }
        let total = total.ok_or_else(|| {
            Error::Data(format!("{}: missing total_tokens header", path.display()))
        })?;
        if words.len() < 3
            || words[words.len() - 2] != OOV_TOKEN
            || words[words.len() - 1] != BOS_TOKEN
        {
            return Err(Error::Data(format!(
                "{}: vocabulary must end with {OOV_TOKEN} and {BOS_TOKEN} rows",
                path.display()
            )));
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Vocabulary {
            words,
            counts,
            index,
            total,
        })
    }
}

//! Fixed-length training sequences cut from encoded documents.

use crate::error::{io_err, Error, Result};
use std::path::Path;

/// A contiguous run of `n` token ids from one document. `start` is the
/// token offset of the first id within that document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub doc_id: u32,
    pub start: usize,
    pub ids: Vec<u32>,
}

/// Cuts non-overlapping length-`n` windows from a document; the remainder
/// shorter than `n` is dropped. Every returned sequence has exactly `n` ids,
/// so `sequences * n + remainder == ids.len()`.
pub fn chunk_sequences(doc_id: u32, ids: &[u32], n: usize) -> Result<Vec<TokenSequence>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "sequence length must be at least 2, got {n}"
        )));
    }
    Ok(ids
        .chunks_exact(n)
        .enumerate()
        .map(|(k, chunk)| TokenSequence {
            doc_id,
            start: k * n,
            ids: chunk.to_vec(),
        })
        .collect())
}

/// TSV cache: `doc_id<TAB>start<TAB>id id id ...`.
pub fn save_sequences(path: &Path, seqs: &[TokenSequence]) -> Result<()> {
    let mut out = String::new();
    for s in seqs {
        let ids: Vec<String> = s.ids.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("{}\t{}\t{}\n", s.doc_id, s.start, ids.join(" ")));
    }
    std::fs::write(path, out).map_err(io_err(path))?;
    Ok(())
}

pub fn load_sequences(path: &Path) -> Result<Vec<TokenSequence>> {
    let body = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut seqs = Vec::new();
    for (lineno, line) in body.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            column: column.into(),
            message,
        };
        let mut parts = line.splitn(3, '\t');
        let doc_id = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("doc_id", "invalid doc id".into()))?;
        let start = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("start", "invalid start offset".into()))?;
        let ids_field = parts
            .next()
            .ok_or_else(|| parse_err("ids", "missing id list".into()))?;
        let ids = ids_field
            .split(' ')
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| parse_err("ids", format!("invalid token id `{t}`")))
            })
            .collect::<Result<Vec<u32>>>()?;
        if ids.is_empty() {
            return Err(parse_err("ids", "empty sequence".into()));
        }
        seqs.push(TokenSequence { doc_id, start, ids });
    }
    Ok(seqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn remainder_is_dropped() {
        let ids: Vec<u32> = (0..10).collect();
        let seqs = chunk_sequences(3, &ids, 4).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].ids, vec![0, 1, 2, 3]);
        assert_eq!(seqs[1].ids, vec![4, 5, 6, 7]);
        assert_eq!(seqs[1].start, 4);
        assert!(seqs.iter().all(|s| s.doc_id == 3));
    }

    #[test]
    fn sequence_length_below_two_is_rejected() {
        assert!(chunk_sequences(0, &[1, 2, 3], 1).is_err());
    }

    proptest! {
        /// Lengths always account for every input token.
        #[test]
        fn chunk_accounting_invariant(len in 0usize..200, n in 2usize..12) {
            let ids: Vec<u32> = (0..len as u32).collect();
            let seqs = chunk_sequences(0, &ids, n).unwrap();
            let covered: usize = seqs.iter().map(|s| s.ids.len()).sum();
            prop_assert_eq!(covered + len % n, len);
            for s in &seqs {
                prop_assert_eq!(s.ids.len(), n);
            }
            // Concatenating the chunks reproduces the covered prefix.
            let flat: Vec<u32> = seqs.iter().flat_map(|s| s.ids.clone()).collect();
            prop_assert_eq!(&flat[..], &ids[..covered]);
        }

        #[test]
        fn save_load_round_trip(len in 1usize..80, n in 2usize..9, doc in 0u32..5) {
            let ids: Vec<u32> = (0..len as u32).map(|i| i * 7 % 91).collect();
            let seqs = chunk_sequences(doc, &ids, n).unwrap();
            let dir = tempdir().unwrap();
            let path = dir.path().join("seqs.tsv");
            save_sequences(&path, &seqs).unwrap();
            let back = load_sequences(&path).unwrap();
            prop_assert_eq!(back, seqs);
        }
    }
}

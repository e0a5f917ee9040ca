//! Eye-tracking corpus: per-token fixation indicators and reading measures.

use crate::corpus::Vocabulary;
use crate::error::{io_err, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const EYETRACK_COLUMNS: [&str; 9] = [
    "doc_id",
    "token_idx",
    "word",
    "fixations",
    "first_pass_ms",
    "pos_tag",
    "launch_dist",
    "landing_pos",
    "sent_pos",
];

/// Universal part-of-speech tags, plus punctuation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PosTag {
    Adj,
    Adp,
    Adv,
    Conj,
    Det,
    Noun,
    Num,
    Pron,
    Prt,
    Verb,
    X,
    Punct,
}

impl PosTag {
    pub const ALL: [PosTag; 12] = [
        PosTag::Adj,
        PosTag::Adp,
        PosTag::Adv,
        PosTag::Conj,
        PosTag::Det,
        PosTag::Noun,
        PosTag::Num,
        PosTag::Pron,
        PosTag::Prt,
        PosTag::Verb,
        PosTag::X,
        PosTag::Punct,
    ];

    pub fn parse(s: &str) -> Option<PosTag> {
        Some(match s {
            "ADJ" => PosTag::Adj,
            "ADP" => PosTag::Adp,
            "ADV" => PosTag::Adv,
            "CONJ" => PosTag::Conj,
            "DET" => PosTag::Det,
            "NOUN" => PosTag::Noun,
            "NUM" => PosTag::Num,
            "PRON" => PosTag::Pron,
            "PRT" => PosTag::Prt,
            "VERB" => PosTag::Verb,
            "X" => PosTag::X,
            "." => PosTag::Punct,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Adp => "ADP",
            PosTag::Adv => "ADV",
            PosTag::Conj => "CONJ",
            PosTag::Det => "DET",
            PosTag::Noun => "NOUN",
            PosTag::Num => "NUM",
            PosTag::Pron => "PRON",
            PosTag::Prt => "PRT",
            PosTag::Verb => "VERB",
            PosTag::X => "X",
            PosTag::Punct => ".",
        }
    }
}

/// One token of the eye-tracking corpus. `fixations[r]` is reader r's
/// binary fixation decision, `None` where the measurement is missing.
#[derive(Debug, Clone)]
pub struct EyeTrackRecord {
    pub doc_id: u32,
    pub token_idx: u32,
    pub word: String,
    pub fixations: Vec<Option<bool>>,
    pub first_pass_ms: Option<f64>,
    pub pos_tag: PosTag,
    pub launch_dist: Option<f64>,
    pub landing_pos: Option<f64>,
    pub sent_pos: Option<f64>,
}

impl EyeTrackRecord {
    /// Empirical fixation probability: mean over readers with data.
    pub fn fixation_prob(&self) -> Option<f64> {
        let known: Vec<bool> = self.fixations.iter().filter_map(|f| *f).collect();
        if known.is_empty() {
            None
        } else {
            Some(known.iter().filter(|b| **b).count() as f64 / known.len() as f64)
        }
    }

    /// True when no reader has a decision for this token.
    pub fn excluded(&self) -> bool {
        self.fixations.iter().all(|f| f.is_none())
    }

    pub fn word_len(&self) -> f64 {
        self.word.chars().count() as f64
    }
}

#[derive(Debug, Clone)]
pub struct EyeTrackData {
    pub records: Vec<EyeTrackRecord>,
    pub n_readers: usize,
    /// Distinct document ids in file order.
    pub doc_ids: Vec<u32>,
}

impl EyeTrackData {
    /// Token count of one document.
    pub fn doc_len(&self, doc_id: u32) -> usize {
        self.records.iter().filter(|r| r.doc_id == doc_id).count()
    }
}

pub fn load_eyetrack(path: &Path) -> Result<EyeTrackData> {
    let body = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_eyetrack(&body, path)
}

/// Parses TSV text. `path` is used only for error messages.
pub fn parse_eyetrack(body: &str, path: &Path) -> Result<EyeTrackData> {
    let mut lines = body.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Empty("eye-tracking file"))?;
    let header_cols: Vec<&str> = header.split('\t').collect();
    if header_cols != EYETRACK_COLUMNS {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: "header".into(),
            message: format!(
                "expected columns {}, got {}",
                EYETRACK_COLUMNS.join(", "),
                header_cols.join(", ")
            ),
        });
    }

    let mut records: Vec<EyeTrackRecord> = Vec::new();
    let mut n_readers: Option<usize> = None;
    let mut doc_ids: Vec<u32> = Vec::new();
    let mut expected_idx: u32 = 0;

    for (lineno, line) in lines {
        let line_id = lineno + 1;
        if line.is_empty() {
            continue;
        }
        let err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_id,
            column: column.into(),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != EYETRACK_COLUMNS.len() {
            return Err(err(
                "row",
                format!(
                    "expected {} tab-separated fields, got {}",
                    EYETRACK_COLUMNS.len(),
                    fields.len()
                ),
            ));
        }

        let doc_id: u32 = fields[0]
            .parse()
            .map_err(|_| err("doc_id", format!("invalid doc id `{}`", fields[0])))?;
        let token_idx: u32 = fields[1]
            .parse()
            .map_err(|_| err("token_idx", format!("invalid index `{}`", fields[1])))?;
        let word = fields[2].to_string();
        if word.is_empty() {
            return Err(err("word", "empty word".into()));
        }

        let fixations: Vec<Option<bool>> = fields[3]
            .split(',')
            .map(|t| match t {
                "0" => Ok(Some(false)),
                "1" => Ok(Some(true)),
                "NA" => Ok(None),
                other => Err(err(
                    "fixations",
                    format!("expected 0, 1 or NA, got `{other}`"),
                )),
            })
            .collect::<Result<_>>()?;
        match n_readers {
            None => n_readers = Some(fixations.len()),
            Some(n) if n != fixations.len() => {
                return Err(err(
                    "fixations",
                    format!("expected {n} reader entries, got {}", fixations.len()),
                ));
            }
            _ => {}
        }

        let opt_f64 = |field: &str, column: &str| -> Result<Option<f64>> {
            if field == "NA" {
                Ok(None)
            } else {
                field
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| err(column, format!("invalid number `{field}`")))
            }
        };
        let first_pass_ms = opt_f64(fields[4], "first_pass_ms")?;
        if let Some(ms) = first_pass_ms {
            if !ms.is_finite() || ms < 0.0 {
                return Err(err(
                    "first_pass_ms",
                    format!("duration must be a finite non-negative number, got {ms}"),
                ));
            }
        }
        let pos_tag = PosTag::parse(fields[5])
            .ok_or_else(|| err("pos_tag", format!("unknown tag `{}`", fields[5])))?;
        let launch_dist = opt_f64(fields[6], "launch_dist")?;
        let landing_pos = opt_f64(fields[7], "landing_pos")?;
        let sent_pos = opt_f64(fields[8], "sent_pos")?;

        // Token indices must be dense per document, restarting at 0.
        match doc_ids.last() {
            Some(&d) if d == doc_id => {
                if token_idx != expected_idx {
                    return Err(err(
                        "token_idx",
                        format!("expected {expected_idx}, got {token_idx}"),
                    ));
                }
            }
            _ => {
                if doc_ids.contains(&doc_id) {
                    return Err(err(
                        "doc_id",
                        format!("document {doc_id} appears in two separate blocks"),
                    ));
                }
                if token_idx != 0 {
                    return Err(err(
                        "token_idx",
                        format!("document {doc_id} must start at index 0, got {token_idx}"),
                    ));
                }
                doc_ids.push(doc_id);
                expected_idx = 0;
            }
        }
        expected_idx += 1;

        records.push(EyeTrackRecord {
            doc_id,
            token_idx,
            word,
            fixations,
            first_pass_ms,
            pos_tag,
            launch_dist,
            landing_pos,
            sent_pos,
        });
    }

    if records.is_empty() {
        return Err(Error::Empty("eye-tracking file"));
    }
    Ok(EyeTrackData {
        records,
        n_readers: n_readers.unwrap_or(0),
        doc_ids,
    })
}

/// Vocabulary-derived per-token covariates. `prev_*` fields describe the
/// preceding token in the same document and are `None` at document starts.
#[derive(Debug, Clone)]
pub struct TokenAnnotation {
    pub id: u32,
    pub oov: bool,
    /// Log relative corpus frequency. OOV tokens use the pooled OOV count.
    pub log_freq: Option<f64>,
    pub word_len: f64,
    pub prev_log_freq: Option<f64>,
    /// Mean fixation indicator of the preceding token, over readers with data.
    pub prev_fixated: Option<f64>,
}

pub fn annotate_tokens(data: &EyeTrackData, vocab: &Vocabulary) -> Vec<TokenAnnotation> {
    let mut out = Vec::with_capacity(data.records.len());
    for (k, rec) in data.records.iter().enumerate() {
        let lookup = vocab.lookup(&rec.word);
        let id = lookup.unwrap_or_else(|| vocab.oov_id());
        let prev = if k > 0 && data.records[k - 1].doc_id == rec.doc_id {
            Some(&data.records[k - 1])
        } else {
            None
        };
        out.push(TokenAnnotation {
            id,
            oov: lookup.is_none(),
            log_freq: vocab.log_freq(id),
            word_len: rec.word_len(),
            prev_log_freq: prev.and_then(|p| vocab.log_freq(vocab.id(&p.word))),
            prev_fixated: prev.and_then(|p| p.fixation_prob()),
        });
    }
    out
}

/// Indices of records usable as evaluation points.
///
/// A record is kept only if: it falls inside a complete length-`n` sequence
/// of its document (the tail remainder is dropped), its 1-based position
/// within that sequence is in `boundary+1 ..= n-boundary`, the word is in
/// vocabulary, and at least one reader has a decision for it.
pub fn filter_eval_points(
    data: &EyeTrackData,
    annotations: &[TokenAnnotation],
    n: usize,
    boundary: usize,
) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "sequence length must be at least 2, got {n}"
        )));
    }
    if 2 * boundary >= n {
        return Err(Error::Config(format!(
            "boundary {boundary} leaves no interior in sequences of length {n}"
        )));
    }
    if annotations.len() != data.records.len() {
        return Err(Error::Dimension {
            context: "filter_eval_points annotations",
            expected: data.records.len(),
            actual: annotations.len(),
        });
    }
    let mut kept = Vec::new();
    for (k, (rec, ann)) in data.records.iter().zip(annotations).enumerate() {
        let doc_len = data.doc_len(rec.doc_id);
        let idx = rec.token_idx as usize;
        let in_full_sequence = (idx / n + 1) * n <= doc_len;
        if !in_full_sequence {
            continue;
        }
        let pos1 = idx % n + 1;
        if pos1 <= boundary || pos1 > n - boundary {
            continue;
        }
        if ann.oov || rec.excluded() {
            continue;
        }
        kept.push(k);
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("test.tsv")
    }

    fn header() -> String {
        EYETRACK_COLUMNS.join("\t")
    }

    #[test]
    fn parses_a_minimal_file() {
        let body = format!(
            "{}\n0\t0\tthe\t1,0,NA\t210.5\tDET\t2\t0.4\t1\n0\t1\tcat\tNA,NA,NA\tNA\tNOUN\tNA\tNA\t2\n",
            header()
        );
        let data = parse_eyetrack(&body, &p()).unwrap();
        assert_eq!(data.n_readers, 3);
        assert_eq!(data.records.len(), 2);
        let r0 = &data.records[0];
        assert_eq!(r0.fixations, vec![Some(true), Some(false), None]);
        assert_eq!(r0.fixation_prob(), Some(0.5));
        assert_eq!(r0.pos_tag, PosTag::Det);
        assert!(!r0.excluded());
        assert!(data.records[1].excluded());
        assert_eq!(data.records[1].fixation_prob(), None);
    }

    #[test]
    fn error_messages_name_line_and_column() {
        let body = format!("{}\n0\t0\tthe\t1,2\t210\tDET\tNA\tNA\t1\n", header());
        let err = parse_eyetrack(&body, &p()).unwrap_err().to_string();
        assert!(err.contains("test.tsv:2"), "{err}");
        assert!(err.contains("fixations"), "{err}");

        let body = format!("{}\n0\t0\tthe\t1\t210\tFOO\tNA\tNA\t1\n", header());
        let err = parse_eyetrack(&body, &p()).unwrap_err().to_string();
        assert!(err.contains("pos_tag") && err.contains("FOO"), "{err}");

        let body = format!("{}\n0\t0\tthe\t1\t-5\tDET\tNA\tNA\t1\n", header());
        let err = parse_eyetrack(&body, &p()).unwrap_err().to_string();
        assert!(err.contains("first_pass_ms"), "{err}");
    }

    #[test]
    fn inconsistent_reader_count_is_rejected() {
        let body = format!(
            "{}\n0\t0\ta\t1,0\t100\tX\tNA\tNA\t1\n0\t1\tb\t1\t100\tX\tNA\tNA\t1\n",
            header()
        );
        let err = parse_eyetrack(&body, &p()).unwrap_err().to_string();
        assert!(err.contains("2 reader entries"), "{err}");
    }

    #[test]
    fn non_dense_token_idx_is_rejected() {
        let body = format!(
            "{}\n0\t0\ta\t1\t100\tX\tNA\tNA\t1\n0\t2\tb\t1\t100\tX\tNA\tNA\t1\n",
            header()
        );
        let err = parse_eyetrack(&body, &p()).unwrap_err().to_string();
        assert!(err.contains("expected 1, got 2"), "{err}");
    }

    fn toy_data(words: &[&str], doc_len: usize) -> EyeTrackData {
        let records: Vec<EyeTrackRecord> = (0..doc_len)
            .map(|i| EyeTrackRecord {
                doc_id: 7,
                token_idx: i as u32,
                word: words[i % words.len()].to_string(),
                fixations: vec![Some(i % 2 == 0)],
                first_pass_ms: Some(200.0),
                pos_tag: PosTag::Noun,
                launch_dist: None,
                landing_pos: None,
                sent_pos: Some(1.0),
            })
            .collect();
        EyeTrackData {
            records,
            n_readers: 1,
            doc_ids: vec![7],
        }
    }

    #[test]
    fn filter_drops_boundary_oov_and_tail() {
        // Vocabulary only knows "aa"; "zz" will be OOV.
        let vocab = Vocabulary::build(["aa", "aa", "bb"].iter(), 1).unwrap();
        let data = toy_data(&["aa", "aa", "zz", "aa"], 11);
        let ann = annotate_tokens(&data, &vocab);
        // n=4, boundary=1: interior 1-based positions are 2..=3, i.e.
        // token_idx % 4 in {1, 2}; doc of 11 tokens keeps two full windows.
        let kept = filter_eval_points(&data, &ann, 4, 1).unwrap();
        // Candidates: idx 1 (word aa, keep), 2 (zz, oov), 5 (aa within
        // second window, keep), 6 (zz, oov). Tail 8..10 dropped.
        assert_eq!(kept, vec![1, 5]);
    }

    #[test]
    fn filter_rejects_degenerate_boundary() {
        let vocab = Vocabulary::build(["a"].iter(), 1).unwrap();
        let data = toy_data(&["a"], 4);
        let ann = annotate_tokens(&data, &vocab);
        assert!(filter_eval_points(&data, &ann, 4, 2).is_err());
    }

    #[test]
    fn annotations_track_previous_token() {
        let vocab = Vocabulary::build(["aa", "aa", "bb"].iter(), 2).unwrap();
        let data = toy_data(&["aa", "bb"], 4);
        let ann = annotate_tokens(&data, &vocab);
        assert_eq!(ann[0].prev_log_freq, None);
        assert_eq!(ann[0].prev_fixated, None);
        assert_eq!(ann[1].prev_log_freq, vocab.log_freq(0));
        assert_eq!(ann[1].prev_fixated, Some(1.0));
        assert!(!ann[1].oov);
        assert_eq!(ann[1].word_len, 2.0);
    }
}

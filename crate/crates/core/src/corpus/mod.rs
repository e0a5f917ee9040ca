//! Corpus handling: vocabulary, sequence chunking and eye-tracking data.

mod eyetrack;
mod sequence;
mod vocab;

pub use eyetrack::{
    annotate_tokens, filter_eval_points, load_eyetrack, parse_eyetrack, EyeTrackData,
    EyeTrackRecord, PosTag, TokenAnnotation, EYETRACK_COLUMNS,
};
pub use sequence::{chunk_sequences, load_sequences, save_sequences, TokenSequence};
pub use vocab::{Vocabulary, BOS_TOKEN, OOV_TOKEN};

/// Whitespace tokenizer. Splitting is the only analysis done here; the
/// corpus is expected to be pre-tokenized text.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            if lowercase {
                w.to_lowercase()
            } else {
                w.to_string()
            }
        })
        .collect()
}

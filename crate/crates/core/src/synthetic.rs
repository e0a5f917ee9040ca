//! Synthetic corpora with controllable statistics.
//!
//! Two text generators and an eye-tracking simulator. The pair language
//! interleaves rare long "content" words with frequent short "function"
//! words whose identity is (nearly) determined by the preceding content
//! word, so a reader that tracks context can skip them at little cost.
//! With a nonzero carry rate some function slots instead act as
//! connectives that pick the next content word, which puts a real price
//! on skipping them. The i.i.d. generator has no structure at all, which
//! makes every word equally worth fixating.

use crate::corpus::PosTag;
use crate::error::{Error, Result};
use rand::Rng;

/// Normalized Zipf-like weights: w_k proportional to 1/(k+1)^exponent.
pub fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|k| 1.0 / ((k + 1) as f64).powf(exponent)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

const CONSONANTS: [char; 12] = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

/// Deterministic pronounceable word. The first syllable encodes `seed`,
/// so seeds 0..59 give distinct words at any length >= 2.
fn make_word(seed: usize, len: usize) -> String {
    let mut s = String::with_capacity(len);
    let mut x = seed;
    while s.chars().count() < len {
        s.push(CONSONANTS[x % CONSONANTS.len()]);
        if s.chars().count() < len {
            s.push(VOWELS[(x / CONSONANTS.len()) % VOWELS.len()]);
        }
        x = x / 60 + seed * 7 + 13;
    }
    s
}

/// Alternating content/function language.
///
/// Content word ranks follow a Zipf distribution; rank k has length
/// 4 + k/4, so rare words are long. Each content word has one preferred
/// function-word partner; with probability `noise` the partner is replaced
/// by a uniformly random function word.
///
/// With a nonzero carry rate (see [`PairLanguage::with_carry`]) a function
/// slot is sometimes a uniformly drawn connective whose identity determines
/// the next content word. A connective's identity is independent of the
/// preceding content word, so the only way to predict what it introduces
/// is to read it.
#[derive(Debug, Clone)]
pub struct PairLanguage {
    content: Vec<String>,
    function: Vec<String>,
    cumulative: Vec<f64>,
    noise: f64,
    carry: f64,
}

impl PairLanguage {
    pub fn new(n_content: usize, n_function: usize, noise: f64) -> Result<Self> {
        if n_content == 0 || n_function == 0 {
            return Err(Error::Config("pair language needs both word classes".into()));
        }
        if n_content > 60 || n_function > 60 {
            return Err(Error::Config(format!(
                "at most 60 words per class, got {n_content} content and {n_function} function"
            )));
        }
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::Config(format!(
                "partner noise must be in [0, 1], got {noise}"
            )));
        }
        let content: Vec<String> = (0..n_content).map(|k| make_word(k, 4 + k / 4)).collect();
        // Length 2 keeps function words disjoint from content words.
        let function: Vec<String> = (0..n_function).map(|j| make_word(j, 2)).collect();
        let mut acc = 0.0;
        let cumulative = zipf_weights(n_content, 1.1)
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(PairLanguage {
            content,
            function,
            cumulative,
            noise,
            carry: 0.0,
        })
    }

    /// Set the probability that a function slot is a connective instead of
    /// the preceding word's partner. Documents then carry information across
    /// pair boundaries through the function words.
    pub fn with_carry(mut self, carry: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&carry) {
            return Err(Error::Config(format!(
                "carry rate must be in [0, 1], got {carry}"
            )));
        }
        self.carry = carry;
        Ok(self)
    }

    /// Content word a connective function word j introduces.
    pub fn follower(&self, j: usize) -> usize {
        (2 * j + 1) % self.content.len()
    }

    pub fn content_words(&self) -> &[String] {
        &self.content
    }

    pub fn function_words(&self) -> &[String] {
        &self.function
    }

    /// Preferred partner of content word k.
    pub fn partner(&self, k: usize) -> usize {
        k % self.function.len()
    }

    pub fn is_function_word(&self, word: &str) -> bool {
        // Content words are 4+ characters by construction.
        word.chars().count() == 2 && self.function.iter().any(|f| f == word)
    }

    /// Content rank of a word, if it is a content word.
    pub fn content_rank(&self, word: &str) -> Option<usize> {
        self.content.iter().position(|c| c == word)
    }

    fn sample_content<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen_range(0.0..1.0);
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.content.len() - 1)
    }

    /// One document of `n_pairs` content/function pairs.
    pub fn sample_document<R: Rng>(&self, n_pairs: usize, rng: &mut R) -> Vec<String> {
        let mut doc = Vec::with_capacity(2 * n_pairs);
        let mut forced: Option<usize> = None;
        for _ in 0..n_pairs {
            let k = forced.take().unwrap_or_else(|| self.sample_content(rng));
            doc.push(self.content[k].clone());
            let j = if rng.gen_range(0.0..1.0) < self.carry {
                let j = rng.gen_range(0..self.function.len());
                forced = Some(self.follower(j));
                j
            } else if rng.gen_range(0.0..1.0) < self.noise {
                rng.gen_range(0..self.function.len())
            } else {
                self.partner(k)
            };
            doc.push(self.function[j].clone());
        }
        doc
    }

    pub fn sample_documents<R: Rng>(
        &self,
        n_docs: usize,
        pairs_per_doc: usize,
        rng: &mut R,
    ) -> Vec<Vec<String>> {
        (0..n_docs).map(|_| self.sample_document(pairs_per_doc, rng)).collect()
    }

    /// Part of speech for the eye-tracking simulator: content words are
    /// tagged NOUN, function words ADP.
    pub fn pos_of(&self, word: &str) -> PosTag {
        if self.is_function_word(word) {
            PosTag::Adp
        } else {
            PosTag::Noun
        }
    }

    /// A plausible human fixation probability: function words are mostly
    /// skipped, content words fixated more the rarer (and longer) they are.
    pub fn human_fixation_prob(&self, word: &str) -> f64 {
        match self.content_rank(word) {
            Some(k) => 0.45 + 0.5 * k as f64 / self.content.len() as f64,
            None => 0.2,
        }
    }

    /// First-pass duration mean in milliseconds, increasing with length.
    pub fn duration_mean(&self, word: &str) -> f64 {
        120.0 + 16.0 * word.chars().count() as f64
    }
}

/// Documents of uniformly sampled word types with no sequential structure.
pub fn iid_uniform_corpus<R: Rng>(
    n_types: usize,
    n_docs: usize,
    tokens_per_doc: usize,
    rng: &mut R,
) -> Vec<Vec<String>> {
    let types: Vec<String> = (0..n_types).map(|k| make_word(k, 4 + k % 3)).collect();
    (0..n_docs)
        .map(|_| {
            (0..tokens_per_doc)
                .map(|_| types[rng.gen_range(0..n_types)].clone())
                .collect()
        })
        .collect()
}

/// One document per line, tokens separated by single spaces.
pub fn corpus_text(docs: &[Vec<String>]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct EyetrackSimConfig {
    pub n_readers: usize,
    /// Multiplier on a word's fixation probability when the same reader
    /// fixated the previous word. 1.0 makes decisions independent; below
    /// 1.0, successive fixations repel and the conditional/marginal
    /// fixation ratio drops under 1.
    pub repel: f64,
    /// Probability that an individual decision is recorded as missing.
    pub missing_rate: f64,
}

impl Default for EyetrackSimConfig {
    fn default() -> Self {
        EyetrackSimConfig {
            n_readers: 10,
            repel: 1.0,
            missing_rate: 0.05,
        }
    }
}

/// Simulated eye-tracking TSV for `docs`, with the same column layout the
/// loader expects. `base_prob` gives each word's fixation probability,
/// `duration_mean` the expected first-pass time of fixated words, and
/// `pos_of` its tag. Decisions are sampled per reader with a first-order
/// dependence on the reader's previous decision (see `repel`); the latent
/// decision chain is unaffected by missingness.
pub fn simulate_eyetrack<R: Rng>(
    docs: &[Vec<String>],
    cfg: &EyetrackSimConfig,
    base_prob: &dyn Fn(&str) -> f64,
    duration_mean: &dyn Fn(&str) -> f64,
    pos_of: &dyn Fn(&str) -> PosTag,
    rng: &mut R,
) -> Result<String> {
    if cfg.n_readers == 0 {
        return Err(Error::Config("eye-tracking simulation needs readers".into()));
    }
    if cfg.repel <= 0.0 || !cfg.repel.is_finite() {
        return Err(Error::Config(format!(
            "repel factor must be positive, got {}",
            cfg.repel
        )));
    }
    if !(0.0..=1.0).contains(&cfg.missing_rate) {
        return Err(Error::Config(format!(
            "missing rate must be in [0, 1], got {}",
            cfg.missing_rate
        )));
    }

    let mut out = String::from(
        "doc_id\ttoken_idx\tword\tfixations\tfirst_pass_ms\tpos_tag\tlaunch_dist\tlanding_pos\tsent_pos\n",
    );
    for (doc_id, doc) in docs.iter().enumerate() {
        let mut prev_fix = vec![false; cfg.n_readers];
        let mut last_majority_fix: Option<usize> = None;
        for (idx, word) in doc.iter().enumerate() {
            let base = base_prob(word);
            if !(0.0..=1.0).contains(&base) {
                return Err(Error::Config(format!(
                    "fixation probability for `{word}` is {base}, not in [0, 1]"
                )));
            }
            let mut cells: Vec<&str> = Vec::with_capacity(cfg.n_readers);
            let mut fixated_readers = 0usize;
            for r in 0..cfg.n_readers {
                let p = if prev_fix[r] { (base * cfg.repel).min(1.0) } else { base };
                let fix = rng.gen_range(0.0..1.0) < p;
                prev_fix[r] = fix;
                if fix {
                    fixated_readers += 1;
                }
                let missing = rng.gen_range(0.0..1.0) < cfg.missing_rate;
                cells.push(if missing {
                    "NA"
                } else if fix {
                    "1"
                } else {
                    "0"
                });
            }

            let duration = if fixated_readers > 0 {
                let noise = rng.gen_range(-12.0..12.0);
                format!("{:.1}", (duration_mean(word) + noise).max(0.0))
            } else {
                "NA".to_string()
            };
            let launch = match last_majority_fix {
                Some(j) => format!("{}", idx - j),
                None => "NA".to_string(),
            };
            if 2 * fixated_readers > cfg.n_readers {
                last_majority_fix = Some(idx);
            }
            let landing = format!("{:.2}", rng.gen_range(0.0..1.0));

            out.push_str(&format!(
                "{doc_id}\t{idx}\t{word}\t{}\t{duration}\t{}\t{launch}\t{landing}\t{}\n",
                cells.join(","),
                pos_of(word).label(),
                idx + 1
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_eyetrack;
    use crate::eval::conditional_fixation_ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;
    use std::path::PathBuf;

    #[test]
    fn zipf_weights_are_normalized_and_decreasing() {
        let w = zipf_weights(20, 1.1);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn words_are_distinct_and_lengths_track_rank() {
        let lang = PairLanguage::new(32, 8, 0.05).unwrap();
        let all: HashSet<&String> =
            lang.content_words().iter().chain(lang.function_words()).collect();
        assert_eq!(all.len(), 40);
        assert_eq!(lang.content_words()[0].chars().count(), 4);
        assert_eq!(lang.content_words()[31].chars().count(), 11);
        assert!(lang.function_words().iter().all(|f| f.chars().count() == 2));
        assert!(lang.is_function_word(&lang.function_words()[3].clone()));
        assert!(!lang.is_function_word(&lang.content_words()[0].clone()));
    }

    #[test]
    fn noiseless_documents_pair_every_content_word_with_its_partner() {
        let lang = PairLanguage::new(16, 4, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let doc = lang.sample_document(200, &mut rng);
        assert_eq!(doc.len(), 400);
        for pair in doc.chunks(2) {
            let k = lang.content_rank(&pair[0]).expect("even positions hold content words");
            assert_eq!(pair[1], lang.function_words()[lang.partner(k)]);
        }
    }

    #[test]
    fn connectives_determine_the_next_content_word() {
        let lang = PairLanguage::new(20, 8, 0.0).unwrap().with_carry(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let doc = lang.sample_document(300, &mut rng);
        for window in doc.chunks(2).collect::<Vec<_>>().windows(2) {
            let j = lang
                .function_words()
                .iter()
                .position(|f| *f == window[0][1])
                .expect("odd positions hold function words");
            assert_eq!(window[1][0], lang.content_words()[lang.follower(j)]);
        }
        // Connective identities are independent of the preceding content
        // word, so every function word should occur about equally often.
        let counts: Vec<usize> = lang
            .function_words()
            .iter()
            .map(|f| doc.iter().filter(|t| *t == f).count())
            .collect();
        assert!(counts.iter().all(|&c| c > 15 && c < 60), "{counts:?}");
        assert!(PairLanguage::new(4, 2, 0.0).unwrap().with_carry(1.5).is_err());
    }

    #[test]
    fn zipf_sampling_prefers_low_ranks() {
        let lang = PairLanguage::new(30, 6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let doc = lang.sample_document(3000, &mut rng);
        let count = |w: &str| doc.iter().filter(|t| *t == w).count();
        let top = count(&lang.content_words()[0].clone());
        let mid = count(&lang.content_words()[10].clone());
        assert!(top > 3 * mid, "rank 0 seen {top} times, rank 10 {mid}");
    }

    #[test]
    fn simulated_eyetrack_parses_and_matches_base_rates() {
        let lang = PairLanguage::new(12, 4, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let docs = lang.sample_documents(4, 120, &mut rng);
        let cfg = EyetrackSimConfig::default();
        let tsv = simulate_eyetrack(
            &docs,
            &cfg,
            &|w| lang.human_fixation_prob(w),
            &|w| lang.duration_mean(w),
            &|w| lang.pos_of(w),
            &mut rng,
        )
        .unwrap();
        let data = parse_eyetrack(&tsv, &PathBuf::from("sim.tsv")).unwrap();
        assert_eq!(data.n_readers, 10);
        assert_eq!(data.records.len(), 4 * 240);

        // Function words should be skipped far more often than content words.
        let mean_rate = |function: bool| {
            let probs: Vec<f64> = data
                .records
                .iter()
                .filter(|r| lang.is_function_word(&r.word) == function)
                .filter_map(|r| r.fixation_prob())
                .collect();
            probs.iter().sum::<f64>() / probs.len() as f64
        };
        assert!(mean_rate(false) > mean_rate(true) + 0.2);

        // Some decisions should be missing, none at exactly the rate bounds.
        let missing: usize = data
            .records
            .iter()
            .map(|r| r.fixations.iter().filter(|f| f.is_none()).count())
            .sum();
        let total = data.records.len() * 10;
        assert!(missing > total / 50 && missing < total / 8);
    }

    fn reader_masks(tsv: &str) -> Vec<Vec<Option<bool>>> {
        let data = parse_eyetrack(tsv, &PathBuf::from("sim.tsv")).unwrap();
        let mut masks: Vec<Vec<Option<bool>>> = vec![Vec::new(); data.n_readers];
        for rec in &data.records {
            for (r, f) in rec.fixations.iter().enumerate() {
                masks[r].push(*f);
            }
        }
        masks
    }

    #[test]
    fn repel_factor_controls_successive_fixation_ratio() {
        let lang = PairLanguage::new(12, 4, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let docs = lang.sample_documents(6, 400, &mut rng);

        let run = |repel: f64, rng: &mut ChaCha8Rng| {
            let cfg = EyetrackSimConfig {
                repel,
                missing_rate: 0.0,
                ..EyetrackSimConfig::default()
            };
            let tsv = simulate_eyetrack(
                &docs,
                &cfg,
                &|_| 0.6,
                &|w| lang.duration_mean(w),
                &|w| lang.pos_of(w),
                rng,
            )
            .unwrap();
            conditional_fixation_ratio(&reader_masks(&tsv)).unwrap().ratio
        };

        let independent = run(1.0, &mut rng);
        let repelled = run(0.5, &mut rng);
        assert!((independent - 1.0).abs() < 0.02, "iid ratio {independent}");
        assert!(repelled < 0.8, "repelled ratio {repelled}");
    }

    #[test]
    fn iid_corpus_has_every_type_and_no_pair_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let docs = iid_uniform_corpus(10, 5, 300, &mut rng);
        assert_eq!(docs.len(), 5);
        let types: HashSet<&String> = docs.iter().flatten().collect();
        assert_eq!(types.len(), 10);
        let text = corpus_text(&docs);
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(PairLanguage::new(0, 4, 0.0).is_err());
        assert!(PairLanguage::new(4, 4, 1.5).is_err());
        let lang = PairLanguage::new(4, 2, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let docs = lang.sample_documents(1, 5, &mut rng);
        let cfg = EyetrackSimConfig {
            n_readers: 0,
            ..EyetrackSimConfig::default()
        };
        assert!(simulate_eyetrack(
            &docs,
            &cfg,
            &|_| 0.5,
            &|_| 100.0,
            &|_| PosTag::X,
            &mut rng
        )
        .is_err());
        let cfg = EyetrackSimConfig::default();
        assert!(simulate_eyetrack(
            &docs,
            &cfg,
            &|_| 1.5,
            &|_| 100.0,
            &|_| PosTag::X,
            &mut rng
        )
        .is_err());
    }
}

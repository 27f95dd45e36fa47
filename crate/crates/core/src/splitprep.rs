//! Stratified train/validation/test splitting and tokenization into
//! model-ready encoded batches.

use std::collections::HashMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmotionLabel, LabeledDataset};

/// Fractions for the three splits; each in [0, 1], summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SplitError> {
        let ratios = SplitRatios {
            train,
            validation,
            test,
        };
        ratios.validate()?;
        Ok(ratios)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(SplitError::RatioOutOfRange { ratios: *self });
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SplitError::RatiosDoNotSumToOne { sum });
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("split ratios {ratios:?} must each lie in [0, 1]")]
    RatioOutOfRange { ratios: SplitRatios },
    #[error("split ratios sum to {sum}, expected 1")]
    RatiosDoNotSumToOne { sum: f64 },
    #[error(
        "label {label} has only {count} records; at least 3 are needed when all ratios are nonzero"
    )]
    TooFewRecords { label: EmotionLabel, count: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Splits per label: seeded shuffle, then largest-remainder allocation of the
/// label's records across the three splits. The result is a partition of the
/// input and every per-label split size deviates from exact proportionality
/// by at most one record.
pub fn stratified_split(
    dataset: &LabeledDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset), SplitError> {
    ratios.validate()?;
    let all_nonzero = ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0;
    let counts = dataset.label_counts();
    if all_nonzero {
        for (label, count) in counts.iter() {
            if count > 0 && count < 3 {
                return Err(SplitError::TooFewRecords { label, count });
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut assignment = vec![0usize; dataset.len()];
    for label in EmotionLabel::ALL {
        let mut positions: Vec<usize> = dataset
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(idx, _)| idx)
            .collect();
        if positions.is_empty() {
            continue;
        }
        positions.shuffle(&mut rng);
        let sizes = largest_remainder(
            positions.len(),
            [ratios.train, ratios.validation, ratios.test],
        );
        let mut offset = 0;
        for (split_idx, size) in sizes.into_iter().enumerate() {
            for &pos in &positions[offset..offset + size] {
                assignment[pos] = split_idx;
            }
            offset += size;
        }
    }

    let take = |split_idx: usize| -> Result<LabeledDataset, SplitError> {
        let records = dataset
            .records()
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == split_idx)
            .map(|(r, _)| r.clone())
            .collect();
        Ok(LabeledDataset::from_records_detached(records)?)
    };
    Ok((take(0)?, take(1)?, take(2)?))
}

/// Allocates `total` seats to three splits by largest remainder; ties go to
/// the earlier split in (train, validation, test) order.
fn largest_remainder(total: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        sizes[order[i % 3]] += 1;
    }
    [sizes[0], sizes[1], sizes[2]]
}

/// Encoding contract consumed by [`tokenize_batch`]. `encode` must be
/// deterministic for fixed tokenizer assets and include any special markers.
pub trait Tokenizer {
    fn vocabulary_id(&self) -> &str;
    fn pad_id(&self) -> u32;
    fn encode(&self, text: &str) -> Vec<u32>;
    /// Length of the encoding of the empty string (special markers only).
    fn min_sequence_len(&self) -> usize {
        0
    }
}

/// A batch of padded token-id rows with parallel attention masks.
///
/// Every row is padded to a common length no greater than `max_length`; the
/// mask is 1 exactly on non-padding positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedBatch {
    pub token_ids: Vec<Vec<u32>>,
    pub attention_mask: Vec<Vec<u8>>,
    pub labels: Option<Vec<usize>>,
    pub max_length: usize,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn with_labels(mut self, labels: Vec<EmotionLabel>) -> Self {
        self.labels = Some(labels.into_iter().map(|l| l.index()).collect());
        self
    }
}

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("max_length {max_length} is below the tokenizer minimum sequence of {minimum}")]
    MaxLengthTooSmall { max_length: usize, minimum: usize },
    #[error("tokenizer assets at {path}: {message}")]
    Assets { path: String, message: String },
}

/// Encodes each text, truncates to `max_length`, and pads all rows to the
/// batch maximum with the tokenizer's pad id.
pub fn tokenize_batch(
    texts: &[String],
    tokenizer: &dyn Tokenizer,
    max_length: usize,
) -> Result<EncodedBatch, TokenizeError> {
    let minimum = tokenizer.min_sequence_len();
    if max_length < minimum {
        return Err(TokenizeError::MaxLengthTooSmall {
            max_length,
            minimum,
        });
    }
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(texts.len());
    for text in texts {
        let mut ids = tokenizer.encode(text);
        ids.truncate(max_length);
        rows.push(ids);
    }
    let batch_len = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut masks = Vec::with_capacity(rows.len());
    for row in &mut rows {
        let mut mask = vec![1u8; row.len()];
        mask.resize(batch_len, 0);
        row.resize(batch_len, tokenizer.pad_id());
        masks.push(mask);
    }
    Ok(EncodedBatch {
        token_ids: rows,
        attention_mask: masks,
        labels: None,
        max_length,
    })
}

/// Whitespace tokenizer with stable hashed ids; lets the whole pipeline run
/// without pretrained assets.
#[derive(Debug, Clone, Default)]
pub struct HashTokenizer;

impl HashTokenizer {
    const PAD: u32 = 0;

    fn token_id(token: &str) -> u32 {
        // FNV-1a, folded to 32 bits and kept off the pad id.
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in token.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let folded = (hash ^ (hash >> 32)) as u32;
        folded.max(1)
    }
}

impl Tokenizer for HashTokenizer {
    fn vocabulary_id(&self) -> &str {
        "hash-whitespace-v1"
    }

    fn pad_id(&self) -> u32 {
        Self::PAD
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace().map(Self::token_id).collect()
    }
}

/// WordPiece tokenizer over a `vocab.txt` directory in the layout of the
/// published IndoBERT / DistilBERT vocabulary releases.
///
/// Encoding follows the usual scheme: basic whitespace/punctuation splitting,
/// optional lowercasing, greedy longest-match subword lookup with a `##`
/// continuation prefix, and `[CLS]`/`[SEP]` wrapping.
pub struct WordPieceTokenizer {
    vocab: HashMap<String, u32>,
    vocabulary_id: String,
    lowercase: bool,
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
}

const MAX_WORDPIECE_INPUT_CHARS: usize = 100;

impl WordPieceTokenizer {
    pub fn from_dir(dir: &Path, lowercase: bool) -> Result<Self, TokenizeError> {
        let vocab_path = dir.join("vocab.txt");
        let content = std::fs::read_to_string(&vocab_path).map_err(|e| TokenizeError::Assets {
            path: vocab_path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut vocab = HashMap::new();
        for (idx, line) in content.lines().enumerate() {
            vocab.insert(line.trim_end().to_string(), idx as u32);
        }
        let lookup = |token: &str| {
            vocab
                .get(token)
                .copied()
                .ok_or_else(|| TokenizeError::Assets {
                    path: vocab_path.display().to_string(),
                    message: format!("vocabulary lacks required token {token}"),
                })
        };
        Ok(WordPieceTokenizer {
            pad: lookup("[PAD]")?,
            unk: lookup("[UNK]")?,
            cls: lookup("[CLS]")?,
            sep: lookup("[SEP]")?,
            vocabulary_id: format!("wordpiece:{}", dir.display()),
            lowercase,
            vocab,
        })
    }

    fn basic_tokens(&self, text: &str) -> Vec<String> {
        let prepared = if self.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        };
        let mut tokens = Vec::new();
        let mut current = String::new();
        for c in prepared.chars() {
            if c.is_whitespace() {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            } else if c.is_alphanumeric() {
                current.push(c);
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        tokens
    }

    fn wordpiece_ids(&self, token: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = token.chars().collect();
        if chars.len() > MAX_WORDPIECE_INPUT_CHARS {
            out.push(self.unk);
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut matched = None;
            while end > start {
                let slice: String = chars[start..end].iter().collect();
                let candidate = if start > 0 {
                    format!("##{slice}")
                } else {
                    slice
                };
                if let Some(&id) = self.vocab.get(&candidate) {
                    matched = Some(id);
                    break;
                }
                end -= 1;
            }
            match matched {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.push(self.unk);
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

impl Tokenizer for WordPieceTokenizer {
    fn vocabulary_id(&self) -> &str {
        &self.vocabulary_id
    }

    fn pad_id(&self) -> u32 {
        self.pad
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = vec![self.cls];
        for token in self.basic_tokens(text) {
            self.wordpiece_ids(&token, &mut ids);
        }
        ids.push(self.sep);
        ids
    }

    fn min_sequence_len(&self) -> usize {
        2
    }
}

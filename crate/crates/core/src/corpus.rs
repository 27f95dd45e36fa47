//! Loading, validation and summaries for labeled review datasets in the
//! PRDECT-ID tabular format.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::AugmentationMethod;

/// The five emotion categories carried by review labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionLabel {
    Happy,
    Anger,
    Sadness,
    Love,
    Fear,
}

impl EmotionLabel {
    /// All labels in their fixed canonical order. This order is also the
    /// tie-break order for ensemble hard votes.
    pub const ALL: [EmotionLabel; 5] = [
        EmotionLabel::Happy,
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Love,
        EmotionLabel::Fear,
    ];

    /// Number of distinct labels.
    pub const COUNT: usize = 5;

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Love => "Love",
            EmotionLabel::Fear => "Fear",
        }
    }

    /// Position of the label in [`EmotionLabel::ALL`].
    pub fn index(&self) -> usize {
        match self {
            EmotionLabel::Happy => 0,
            EmotionLabel::Anger => 1,
            EmotionLabel::Sadness => 2,
            EmotionLabel::Love => 3,
            EmotionLabel::Fear => 4,
        }
    }

    pub fn from_index(index: usize) -> Option<EmotionLabel> {
        EmotionLabel::ALL.get(index).copied()
    }

    /// Parses a label string case-insensitively, trimming surrounding
    /// whitespace. Any string other than the five labels is an error.
    pub fn parse(value: &str) -> Result<EmotionLabel, CorpusError> {
        match value.trim().to_lowercase().as_str() {
            "happy" => Ok(EmotionLabel::Happy),
            "anger" => Ok(EmotionLabel::Anger),
            "sadness" => Ok(EmotionLabel::Sadness),
            "love" => Ok(EmotionLabel::Love),
            "fear" => Ok(EmotionLabel::Fear),
            _ => Err(CorpusError::UnknownLabel {
                value: value.to_string(),
            }),
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a record came from: the source file, an augmentation method applied
/// to another record, or a bootstrap resample of another record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Augmented {
        method: AugmentationMethod,
        source_id: String,
    },
    Resampled {
        source_id: String,
    },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }

    /// Id of the record this one was derived from, if any.
    pub fn source_id(&self) -> Option<&str> {
        match self {
            Provenance::Original => None,
            Provenance::Augmented { source_id, .. } | Provenance::Resampled { source_id } => {
                Some(source_id)
            }
        }
    }
}

/// One labeled review text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub text: String,
    pub label: EmotionLabel,
    pub provenance: Provenance,
}

impl ReviewRecord {
    pub fn original(id: impl Into<String>, text: impl Into<String>, label: EmotionLabel) -> Self {
        ReviewRecord {
            id: id.into(),
            text: text.into(),
            label,
            provenance: Provenance::Original,
        }
    }
}

/// Per-label record counts, keyed by [`EmotionLabel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts([usize; EmotionLabel::COUNT]);

impl LabelCounts {
    pub fn get(&self, label: EmotionLabel) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn min_present(&self) -> Option<usize> {
        self.0.iter().copied().filter(|&c| c > 0).min()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, usize)> + '_ {
        EmotionLabel::ALL.iter().map(|&l| (l, self.0[l.index()]))
    }

    fn add(&mut self, label: EmotionLabel) {
        self.0[label.index()] += 1;
    }
}

impl FromIterator<(EmotionLabel, usize)> for LabelCounts {
    fn from_iter<T: IntoIterator<Item = (EmotionLabel, usize)>>(iter: T) -> Self {
        let mut counts = LabelCounts::default();
        for (label, count) in iter {
            counts.0[label.index()] += count;
        }
        counts
    }
}

/// Ordered collection of review records with a label-count index.
///
/// The count index is maintained by construction: it is recomputed from the
/// records in every constructor and never stored independently of them.
/// Record ids are unique and texts are non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    records: Vec<ReviewRecord>,
    label_counts: LabelCounts,
}

impl LabeledDataset {
    /// Builds a dataset from records, validating id uniqueness, non-empty
    /// texts, and that derived records reference an existing source id.
    pub fn from_records(records: Vec<ReviewRecord>) -> Result<Self, CorpusError> {
        let mut ids: HashSet<&str> = HashSet::with_capacity(records.len());
        for record in &records {
            if record.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: record.id.clone(),
                });
            }
            if !ids.insert(&record.id) {
                return Err(CorpusError::DuplicateId {
                    id: record.id.clone(),
                });
            }
        }
        for record in &records {
            if let Some(source) = record.provenance.source_id() {
                if !ids.contains(source) {
                    return Err(CorpusError::DanglingSource {
                        id: record.id.clone(),
                        source_id: source.to_string(),
                    });
                }
            }
        }
        let label_counts = Self::count_labels(&records);
        Ok(LabeledDataset {
            records,
            label_counts,
        })
    }

    /// Builds a dataset whose derived records may reference sources that are
    /// not part of the dataset itself (bootstrap samples, standalone splits).
    pub fn from_records_detached(records: Vec<ReviewRecord>) -> Result<Self, CorpusError> {
        let mut ids: HashSet<&str> = HashSet::with_capacity(records.len());
        for record in &records {
            if record.text.trim().is_empty() {
                return Err(CorpusError::EmptyText {
                    id: record.id.clone(),
                });
            }
            if !ids.insert(&record.id) {
                return Err(CorpusError::DuplicateId {
                    id: record.id.clone(),
                });
            }
        }
        let label_counts = Self::count_labels(&records);
        Ok(LabeledDataset {
            records,
            label_counts,
        })
    }

    fn count_labels(records: &[ReviewRecord]) -> LabelCounts {
        let mut counts = LabelCounts::default();
        for record in records {
            counts.add(record.label);
        }
        counts
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_counts(&self) -> LabelCounts {
        self.label_counts
    }

    pub fn texts(&self) -> Vec<String> {
        self.records.iter().map(|r| r.text.clone()).collect()
    }

    pub fn labels(&self) -> Vec<EmotionLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Content fingerprint over ids, texts, labels and provenance, stable
    /// across runs for identical datasets.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for record in &self.records {
            hasher.update(record.id.as_bytes());
            hasher.update([0x1f]);
            hasher.update(record.text.as_bytes());
            hasher.update([0x1f]);
            hasher.update(record.label.as_str().as_bytes());
            hasher.update([0x1f]);
            match &record.provenance {
                Provenance::Original => hasher.update(b"original"),
                Provenance::Augmented { method, source_id } => {
                    hasher.update(b"augmented:");
                    hasher.update(method.tag().as_bytes());
                    hasher.update([0x1f]);
                    hasher.update(source_id.as_bytes());
                }
                Provenance::Resampled { source_id } => {
                    hasher.update(b"resampled:");
                    hasher.update(source_id.as_bytes());
                }
            }
            hasher.update([0x1e]);
        }
        hex_digest(hasher)
    }

    /// Applies a text transformation to every record, keeping ids, labels and
    /// provenance. Errors if a transformation empties a text.
    pub fn map_texts(
        &self,
        mut transform: impl FnMut(&str) -> String,
    ) -> Result<LabeledDataset, CorpusError> {
        let records = self
            .records
            .iter()
            .map(|r| ReviewRecord {
                id: r.id.clone(),
                text: transform(&r.text),
                label: r.label,
                provenance: r.provenance.clone(),
            })
            .collect();
        LabeledDataset::from_records_detached(records)
    }

    /// Reads a dataset from the JSON-lines interchange format written by
    /// [`LabeledDataset::write_jsonl`].
    pub fn read_jsonl(path: &Path) -> Result<LabeledDataset, CorpusError> {
        let content = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut records = Vec::new();
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReviewRecord =
                serde_json::from_str(line).map_err(|source| CorpusError::Format {
                    path: path.display().to_string(),
                    source,
                })?;
            records.push(record);
        }
        LabeledDataset::from_records_detached(records)
    }

    /// Writes the dataset as one JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn hex_digest(hasher: Sha256) -> String {
    let digest = hasher.finalize();
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Names of the text and label columns in the source table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub text_column: String,
    pub label_column: String,
}

impl Default for ColumnMap {
    /// Column names of the published PRDECT-ID release.
    fn default() -> Self {
        ColumnMap {
            text_column: "Customer Review".to_string(),
            label_column: "Emotion".to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("column {name:?} not found in header")]
    MissingColumn { name: String },
    #[error("row {row}: cannot parse label {value:?}")]
    InvalidLabel { row: usize, value: String },
    #[error("row {row}: empty review text")]
    EmptyRowText { row: usize },
    #[error("empty dataset: file has a header but no data rows")]
    EmptyDataset,
    #[error("unknown label {value:?}")]
    UnknownLabel { value: String },
    #[error("record {id:?} has empty text")]
    EmptyText { id: String },
    #[error("duplicate record id {id:?}")]
    DuplicateId { id: String },
    #[error("record {id:?} references missing source {source_id:?}")]
    DanglingSource { id: String, source_id: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("reading table {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Loads a comma-delimited table with a header row into a dataset.
///
/// One record is produced per data row, with `provenance = original` and the
/// zero-based data-row index as its id. Label strings are parsed
/// case-insensitively. Duplicated rows are preserved as distinct records.
pub fn load_dataset(path: &Path, columns: &ColumnMap) -> Result<LabeledDataset, CorpusError> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| CorpusError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let headers = reader.headers().map_err(|source| CorpusError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let find = |name: &str| headers.iter().position(|h| h == name);
    let text_idx = find(&columns.text_column).ok_or_else(|| CorpusError::MissingColumn {
        name: columns.text_column.clone(),
    })?;
    let label_idx = find(&columns.label_column).ok_or_else(|| CorpusError::MissingColumn {
        name: columns.label_column.clone(),
    })?;

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|source| CorpusError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let row_number = row_idx + 1;
        let text = row.get(text_idx).unwrap_or("").trim();
        if text.is_empty() {
            return Err(CorpusError::EmptyRowText { row: row_number });
        }
        let raw_label = row.get(label_idx).unwrap_or("");
        let label = EmotionLabel::parse(raw_label).map_err(|_| CorpusError::InvalidLabel {
            row: row_number,
            value: raw_label.to_string(),
        })?;
        records.push(ReviewRecord::original(row_idx.to_string(), text, label));
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    LabeledDataset::from_records(records)
}

/// Exact per-label counts; their sum equals the record count.
pub fn label_distribution(dataset: &LabeledDataset) -> LabelCounts {
    dataset.label_counts()
}

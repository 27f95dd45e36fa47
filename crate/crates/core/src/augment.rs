//! Class balancing: undersampling to the minority count, and augmentation
//! (back-translation, synonym replacement) up to a per-label target with a
//! distinctness constraint on every augmented text.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    CorpusError, EmotionLabel, LabelCounts, LabeledDataset, Provenance, ReviewRecord,
};
use crate::translate::{
    round_trip, PivotLanguage, RetryPolicy, TranslateError, TranslationBackend, TranslationCache,
};

/// How an augmented record was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationMethod {
    BtEnglish,
    BtArabic,
    Synonym,
}

impl AugmentationMethod {
    pub const ALL: [AugmentationMethod; 3] = [
        AugmentationMethod::BtEnglish,
        AugmentationMethod::BtArabic,
        AugmentationMethod::Synonym,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            AugmentationMethod::BtEnglish => "bt_en",
            AugmentationMethod::BtArabic => "bt_ar",
            AugmentationMethod::Synonym => "synonym",
        }
    }
}

impl std::fmt::Display for AugmentationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("cannot balance an empty dataset")]
    EmptyDataset,
    #[error("label {label} has no source records to augment from")]
    NoSources { label: EmotionLabel },
    #[error("label {label} is stuck: a full method cycle over all sources produced no distinct output ({shortfall} records short of target)")]
    StuckLabel {
        label: EmotionLabel,
        shortfall: usize,
    },
    #[error("no augmenter provided for method {method}")]
    MissingAugmenter { method: AugmentationMethod },
    #[error("method cycle must not be empty")]
    EmptyMethodCycle,
    #[error("synonym rate {rate} must be in (0, 1]")]
    InvalidRate { rate: f64 },
    #[error("lexicon entry {word:?} lists itself as a synonym")]
    SelfSynonym { word: String },
    #[error("lexicon entry {word:?} has no synonyms")]
    EmptySynonyms { word: String },
    #[error("lexicon file {path}: {message}")]
    LexiconFile { path: String, message: String },
    #[error(transparent)]
    Translation(#[from] TranslateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Map from a word to its candidate replacements. No word may list itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn new<I, S, T>(entries: I) -> Result<Self, AugmentError>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (word, synonyms) in entries {
            let word = word.into().trim().to_lowercase();
            let synonyms: Vec<String> = synonyms
                .into_iter()
                .map(|s| s.into().trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if synonyms.is_empty() {
                return Err(AugmentError::EmptySynonyms { word });
            }
            if synonyms.iter().any(|s| s.to_lowercase() == word) {
                return Err(AugmentError::SelfSynonym { word });
            }
            map.insert(word, synonyms);
        }
        Ok(SynonymLexicon { entries: map })
    }

    /// Loads `word<TAB>syn1,syn2,...` lines; `#` comments and blanks ignored.
    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let content = std::fs::read_to_string(path).map_err(|e| AugmentError::LexiconFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut entries = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let (Some(word), Some(rest)) = (parts.next(), parts.next()) else {
                return Err(AugmentError::LexiconFile {
                    path: path.display().to_string(),
                    message: format!("line {}: expected word<TAB>synonyms", idx + 1),
                });
            };
            let synonyms: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            entries.push((word.to_string(), synonyms));
        }
        SynonymLexicon::new(entries)
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of a single synonym-replacement application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymOutcome {
    pub text: String,
    /// True when no token had a lexicon entry and the input was returned
    /// unchanged.
    pub degenerate: bool,
}

/// Replaces `k = max(1, floor(rate * replaceable))` tokens, chosen uniformly
/// without replacement among tokens with lexicon entries, each by a uniformly
/// chosen synonym. Returns a degenerate outcome when nothing is replaceable.
pub fn synonym_replace(
    text: &str,
    lexicon: &SynonymLexicon,
    rate: f64,
    rng: &mut StdRng,
) -> Result<SynonymOutcome, AugmentError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(AugmentError::InvalidRate { rate });
    }
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    let replaceable: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, token)| lexicon.get(token).is_some())
        .map(|(idx, _)| idx)
        .collect();
    if replaceable.is_empty() {
        return Ok(SynonymOutcome {
            text: text.to_string(),
            degenerate: true,
        });
    }
    let k = ((rate * replaceable.len() as f64).floor() as usize)
        .max(1)
        .min(replaceable.len());
    let chosen = rand::seq::index::sample(rng, replaceable.len(), k);
    for pick in chosen.iter() {
        let token_idx = replaceable[pick];
        let synonyms = lexicon
            .get(&tokens[token_idx])
            .expect("index came from lexicon scan");
        let replacement = &synonyms[rng.random_range(0..synonyms.len())];
        tokens[token_idx] = replacement.clone();
    }
    Ok(SynonymOutcome {
        text: tokens.join(" "),
        degenerate: false,
    })
}

/// Reduces every label present in the dataset to the minimum pre-existing
/// label count, choosing retained records by seeded uniform sampling without
/// replacement. Record order and provenance are preserved.
pub fn undersample(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset, AugmentError> {
    if dataset.is_empty() {
        return Err(AugmentError::EmptyDataset);
    }
    let minimum = dataset
        .label_counts()
        .min_present()
        .expect("dataset is non-empty");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut keep = vec![false; dataset.len()];
    for label in EmotionLabel::ALL {
        let positions: Vec<usize> = dataset
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(idx, _)| idx)
            .collect();
        if positions.is_empty() {
            continue;
        }
        for pick in rand::seq::index::sample(&mut rng, positions.len(), minimum).iter() {
            keep[positions[pick]] = true;
        }
    }
    let records: Vec<ReviewRecord> = dataset
        .records()
        .iter()
        .zip(&keep)
        .filter(|(_, &kept)| kept)
        .map(|(record, _)| record.clone())
        .collect();
    Ok(LabeledDataset::from_records_detached(records)?)
}

/// Per-label augmentation deficits toward a common target count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancePlan {
    pub target: usize,
    pub deficits: LabelCounts,
    pub method_cycle: Vec<AugmentationMethod>,
}

impl BalancePlan {
    pub fn with_method_cycle(
        mut self,
        cycle: Vec<AugmentationMethod>,
    ) -> Result<Self, AugmentError> {
        if cycle.is_empty() {
            return Err(AugmentError::EmptyMethodCycle);
        }
        self.method_cycle = cycle;
        Ok(self)
    }

    pub fn total_deficit(&self) -> usize {
        self.deficits.total()
    }
}

/// Computes per-label deficits toward `target` (default: the maximum current
/// label count). Labels at or above the target get a zero deficit; labels
/// with no records at all are left alone since there is nothing to augment
/// from.
pub fn plan_balance(dataset: &LabeledDataset, target: Option<usize>) -> BalancePlan {
    let counts = dataset.label_counts();
    let target = target.unwrap_or_else(|| counts.max());
    let deficits = EmotionLabel::ALL
        .iter()
        .map(|&label| {
            let count = counts.get(label);
            let deficit = if count == 0 {
                0
            } else {
                target.saturating_sub(count)
            };
            (label, deficit)
        })
        .collect();
    BalancePlan {
        target,
        deficits,
        method_cycle: AugmentationMethod::ALL.to_vec(),
    }
}

/// One augmentation method applied to a single text.
///
/// `Ok(None)` signals a degenerate outcome (the method had nothing to do);
/// the caller then tries the next method in its cycle.
pub trait TextAugmenter {
    fn method(&self) -> AugmentationMethod;
    fn augment(&self, text: &str, rng: &mut StdRng) -> Result<Option<String>, AugmentError>;
}

/// Back-translation through a pivot language.
pub struct BackTranslationAugmenter<'a> {
    pivot: PivotLanguage,
    backend: &'a dyn TranslationBackend,
    cache: &'a TranslationCache,
    policy: RetryPolicy,
}

impl<'a> BackTranslationAugmenter<'a> {
    pub fn new(
        pivot: PivotLanguage,
        backend: &'a dyn TranslationBackend,
        cache: &'a TranslationCache,
        policy: RetryPolicy,
    ) -> Self {
        BackTranslationAugmenter {
            pivot,
            backend,
            cache,
            policy,
        }
    }
}

impl TextAugmenter for BackTranslationAugmenter<'_> {
    fn method(&self) -> AugmentationMethod {
        match self.pivot {
            PivotLanguage::English => AugmentationMethod::BtEnglish,
            PivotLanguage::Arabic => AugmentationMethod::BtArabic,
        }
    }

    fn augment(&self, text: &str, _rng: &mut StdRng) -> Result<Option<String>, AugmentError> {
        let out = round_trip(text, self.pivot, self.backend, self.cache, &self.policy)?;
        Ok(Some(out))
    }
}

/// Synonym replacement over a lexicon at a fixed rate.
pub struct SynonymAugmenter<'a> {
    lexicon: &'a SynonymLexicon,
    rate: f64,
}

impl<'a> SynonymAugmenter<'a> {
    pub fn new(lexicon: &'a SynonymLexicon, rate: f64) -> Self {
        SynonymAugmenter { lexicon, rate }
    }
}

impl TextAugmenter for SynonymAugmenter<'_> {
    fn method(&self) -> AugmentationMethod {
        AugmentationMethod::Synonym
    }

    fn augment(&self, text: &str, rng: &mut StdRng) -> Result<Option<String>, AugmentError> {
        let outcome = synonym_replace(text, self.lexicon, self.rate, rng)?;
        Ok(if outcome.degenerate {
            None
        } else {
            Some(outcome.text)
        })
    }
}

fn normalized(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates augmented records until every deficient label reaches the plan
/// target.
///
/// Sources cycle in seeded-shuffled order; methods rotate round-robin per
/// generated record, with rejected outputs (degenerate, or normalized-equal
/// to the source) falling through to the next method for the same source.
/// Original records are never mutated or dropped; accepted records append in
/// a deterministic order for a fixed seed.
pub fn execute_plan(
    dataset: &LabeledDataset,
    plan: &BalancePlan,
    augmenters: &[&dyn TextAugmenter],
    seed: u64,
) -> Result<LabeledDataset, AugmentError> {
    if plan.method_cycle.is_empty() {
        return Err(AugmentError::EmptyMethodCycle);
    }
    let by_method: HashMap<AugmentationMethod, &dyn TextAugmenter> = augmenters
        .iter()
        .map(|augmenter| (augmenter.method(), *augmenter))
        .collect();
    for method in &plan.method_cycle {
        if !by_method.contains_key(method) {
            return Err(AugmentError::MissingAugmenter { method: *method });
        }
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut output: Vec<ReviewRecord> = dataset.records().to_vec();
    let mut next_aug_id = 0usize;

    for label in EmotionLabel::ALL {
        let deficit = plan.deficits.get(label);
        if deficit == 0 {
            continue;
        }
        let mut sources: Vec<ReviewRecord> = dataset
            .records()
            .iter()
            .filter(|r| r.label == label)
            .cloned()
            .collect();
        if sources.is_empty() {
            return Err(AugmentError::NoSources { label });
        }
        sources.shuffle(&mut rng);

        let cycle_len = plan.method_cycle.len();
        let mut accepted = 0usize;
        let mut cycle_pos = 0usize;
        let mut cursor = 0usize;
        let mut accepted_this_pass = 0usize;
        while accepted < deficit {
            if cursor == sources.len() {
                if accepted_this_pass == 0 {
                    return Err(AugmentError::StuckLabel {
                        label,
                        shortfall: deficit - accepted,
                    });
                }
                cursor = 0;
                accepted_this_pass = 0;
            }
            let source = &sources[cursor];
            cursor += 1;
            let source_norm = normalized(&source.text);

            let mut produced: Option<(AugmentationMethod, String)> = None;
            for offset in 0..cycle_len {
                let method = plan.method_cycle[(cycle_pos + offset) % cycle_len];
                let augmenter = by_method[&method];
                if let Some(candidate) = augmenter.augment(&source.text, &mut rng)? {
                    if normalized(&candidate) != source_norm {
                        produced = Some((method, candidate));
                        break;
                    }
                }
            }
            if let Some((method, text)) = produced {
                output.push(ReviewRecord {
                    id: format!("{}.aug{}", source.id, next_aug_id),
                    text,
                    label,
                    provenance: Provenance::Augmented {
                        method,
                        source_id: source.id.clone(),
                    },
                });
                next_aug_id += 1;
                accepted += 1;
                accepted_this_pass += 1;
                cycle_pos = (cycle_pos + 1) % cycle_len;
            }
        }
    }

    Ok(LabeledDataset::from_records(output)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::{DictionaryBackend, EchoBackend};

    fn record(id: &str, text: &str, label: EmotionLabel) -> ReviewRecord {
        ReviewRecord::original(id, text, label)
    }

    fn dataset(records: Vec<ReviewRecord>) -> LabeledDataset {
        LabeledDataset::from_records(records).unwrap()
    }

    fn two_label_fixture() -> LabeledDataset {
        dataset(vec![
            record("a0", "barang bagus", EmotionLabel::Happy),
            record("a1", "senang sekali", EmotionLabel::Happy),
            record("a2", "puas dengan produk", EmotionLabel::Happy),
            record("b0", "sangat kecewa", EmotionLabel::Anger),
            record("b1", "barang rusak parah", EmotionLabel::Anger),
            record("b2", "penjual lambat", EmotionLabel::Anger),
            record("b3", "pengiriman telat", EmotionLabel::Anger),
            record("b4", "kemasan hancur", EmotionLabel::Anger),
        ])
    }

    #[test]
    fn undersample_reduces_to_minimum_count() {
        let ds = two_label_fixture();
        let out = undersample(&ds, 7).unwrap();
        assert_eq!(out.label_counts().get(EmotionLabel::Happy), 3);
        assert_eq!(out.label_counts().get(EmotionLabel::Anger), 3);
    }

    #[test]
    fn undersample_keeps_already_balanced_dataset_whole() {
        let ds = dataset(vec![
            record("a0", "satu", EmotionLabel::Happy),
            record("b0", "dua", EmotionLabel::Anger),
            record("a1", "tiga", EmotionLabel::Happy),
            record("b1", "empat", EmotionLabel::Anger),
        ]);
        let out = undersample(&ds, 1).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn undersample_is_seed_deterministic() {
        let ds = two_label_fixture();
        let first = undersample(&ds, 99).unwrap();
        let second = undersample(&ds, 99).unwrap();
        assert_eq!(first, second);
        let other_seed = undersample(&ds, 100).unwrap();
        assert_eq!(other_seed.label_counts(), first.label_counts());
    }

    #[test]
    fn undersample_rejects_empty_dataset() {
        let ds = LabeledDataset::from_records(Vec::new()).unwrap();
        assert!(matches!(
            undersample(&ds, 1),
            Err(AugmentError::EmptyDataset)
        ));
    }

    #[test]
    fn undersample_preserves_record_order_and_provenance() {
        let ds = two_label_fixture();
        let out = undersample(&ds, 3).unwrap();
        let positions: Vec<usize> = out
            .records()
            .iter()
            .map(|r| ds.records().iter().position(|o| o.id == r.id).unwrap())
            .collect();
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        assert_eq!(positions, sorted);
        assert!(out.records().iter().all(|r| r.provenance.is_original()));
    }

    #[test]
    fn synonym_replace_forces_one_replacement_for_single_candidate() {
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let out = synonym_replace("barang bagus", &lexicon, 0.5, &mut rng).unwrap();
        assert_eq!(out.text, "barang baik");
        assert!(!out.degenerate);
    }

    #[test]
    fn synonym_replace_without_candidates_is_degenerate() {
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let out = synonym_replace("produk rusak", &lexicon, 0.5, &mut rng).unwrap();
        assert_eq!(out.text, "produk rusak");
        assert!(out.degenerate);
    }

    #[test]
    fn synonym_replace_is_seed_deterministic() {
        let lexicon = SynonymLexicon::new([
            ("bagus", vec!["baik", "mantap"]),
            ("barang", vec!["produk", "item"]),
            ("cepat", vec!["kilat"]),
        ])
        .unwrap();
        let text = "barang bagus cepat sampai";
        let a = synonym_replace(text, &lexicon, 0.6, &mut StdRng::seed_from_u64(7)).unwrap();
        let b = synonym_replace(text, &lexicon, 0.6, &mut StdRng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synonym_replace_replaces_expected_count() {
        let lexicon = SynonymLexicon::new([
            ("satu", vec!["esa"]),
            ("dua", vec!["kembar"]),
            ("tiga", vec!["trio"]),
            ("empat", vec!["kuartet"]),
        ])
        .unwrap();
        let text = "satu dua tiga empat tetap";
        // 4 replaceable tokens at rate 0.5 -> k = 2.
        let out = synonym_replace(text, &lexicon, 0.5, &mut StdRng::seed_from_u64(3)).unwrap();
        let changed = out
            .text
            .split_whitespace()
            .zip(text.split_whitespace())
            .filter(|(after, before)| after != before)
            .count();
        assert_eq!(changed, 2);
        assert!(out.text.ends_with("tetap"));
    }

    #[test]
    fn invalid_rate_is_rejected() {
        let lexicon = SynonymLexicon::new([("a", vec!["b"])]).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        assert!(matches!(
            synonym_replace("a", &lexicon, 0.0, &mut rng),
            Err(AugmentError::InvalidRate { .. })
        ));
        assert!(matches!(
            synonym_replace("a", &lexicon, 1.5, &mut rng),
            Err(AugmentError::InvalidRate { .. })
        ));
    }

    #[test]
    fn lexicon_rejects_self_synonyms_and_empty_lists() {
        assert!(matches!(
            SynonymLexicon::new([("bagus", vec!["bagus"])]),
            Err(AugmentError::SelfSynonym { .. })
        ));
        assert!(matches!(
            SynonymLexicon::new([("bagus", Vec::<String>::new())]),
            Err(AugmentError::EmptySynonyms { .. })
        ));
    }

    #[test]
    fn lexicon_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("syn.tsv");
        std::fs::write(&path, "# sample\nbagus\tbaik, mantap\ncepat\tkilat\n").unwrap();
        let lexicon = SynonymLexicon::load(&path).unwrap();
        assert_eq!(lexicon.get("bagus").unwrap(), ["baik", "mantap"]);
        assert_eq!(lexicon.get("CEPAT").unwrap(), ["kilat"]);
        assert!(lexicon.get("lain").is_none());
    }

    #[test]
    fn plan_balance_computes_deficits_by_subtraction() {
        let ds = dataset(vec![
            record("a0", "satu", EmotionLabel::Happy),
            record("a1", "dua", EmotionLabel::Happy),
            record("b0", "tiga", EmotionLabel::Anger),
            record("b1", "empat", EmotionLabel::Anger),
            record("b2", "lima", EmotionLabel::Anger),
            record("b3", "enam", EmotionLabel::Anger),
            record("b4", "tujuh", EmotionLabel::Anger),
        ]);
        let plan = plan_balance(&ds, Some(5));
        assert_eq!(plan.target, 5);
        assert_eq!(plan.deficits.get(EmotionLabel::Happy), 3);
        assert_eq!(plan.deficits.get(EmotionLabel::Anger), 0);
    }

    #[test]
    fn plan_balance_defaults_to_maximum_count() {
        let ds = two_label_fixture();
        let plan = plan_balance(&ds, None);
        assert_eq!(plan.target, 5);
        assert_eq!(plan.deficits.get(EmotionLabel::Happy), 2);
        assert_eq!(plan.deficits.get(EmotionLabel::Anger), 0);
    }

    #[test]
    fn plan_balance_on_balanced_input_has_zero_deficits() {
        let ds = dataset(vec![
            record("a0", "satu", EmotionLabel::Happy),
            record("b0", "dua", EmotionLabel::Anger),
        ]);
        let plan = plan_balance(&ds, None);
        assert_eq!(plan.total_deficit(), 0);
    }

    fn stub_backend() -> DictionaryBackend {
        DictionaryBackend::new("stub")
            .with_entries("id", "en", [("barang", "item"), ("bagus", "good")])
            .with_entries("en", "id", [("item", "produk"), ("good", "oke")])
            .with_entries("id", "ar", [("barang", "x"), ("bagus", "y")])
            .with_entries("ar", "id", [("x", "benda"), ("y", "istimewa")])
    }

    fn fixture_for_execute() -> LabeledDataset {
        dataset(vec![
            record("a0", "barang bagus", EmotionLabel::Happy),
            record("a1", "bagus barang", EmotionLabel::Happy),
            record("b0", "kecewa berat", EmotionLabel::Anger),
            record("b1", "rusak total", EmotionLabel::Anger),
            record("b2", "lambat kirim", EmotionLabel::Anger),
            record("b3", "salah warna", EmotionLabel::Anger),
        ])
    }

    #[test]
    fn execute_plan_fills_deficits_with_distinct_outputs() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(4));
        assert_eq!(plan.deficits.get(EmotionLabel::Happy), 2);

        let backend = stub_backend();
        let cache = TranslationCache::in_memory();
        let policy = RetryPolicy::immediate(1);
        let bt_en =
            BackTranslationAugmenter::new(PivotLanguage::English, &backend, &cache, policy.clone());
        let bt_ar = BackTranslationAugmenter::new(PivotLanguage::Arabic, &backend, &cache, policy);
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let synonym = SynonymAugmenter::new(&lexicon, 0.3);

        let out = execute_plan(&ds, &plan, &[&bt_en, &bt_ar, &synonym], 11).unwrap();
        assert_eq!(out.label_counts().get(EmotionLabel::Happy), 4);
        assert_eq!(out.label_counts().get(EmotionLabel::Anger), 4);

        let augmented: Vec<&ReviewRecord> = out
            .records()
            .iter()
            .filter(|r| !r.provenance.is_original())
            .collect();
        assert_eq!(augmented.len(), 2);
        for record in augmented {
            assert_eq!(record.label, EmotionLabel::Happy);
            let source_id = record.provenance.source_id().unwrap();
            let source = out
                .records()
                .iter()
                .find(|r| r.id == source_id)
                .expect("source exists");
            assert_ne!(normalized(&record.text), normalized(&source.text));
        }
    }

    #[test]
    fn execute_plan_with_zero_deficit_returns_dataset_unchanged() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(2))
            .with_method_cycle(vec![AugmentationMethod::Synonym])
            .unwrap();
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let synonym = SynonymAugmenter::new(&lexicon, 0.3);
        let out = execute_plan(&ds, &plan, &[&synonym], 0).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn execute_plan_never_drops_or_mutates_originals() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(4))
            .with_method_cycle(vec![
                AugmentationMethod::BtEnglish,
                AugmentationMethod::Synonym,
            ])
            .unwrap();
        let backend = stub_backend();
        let cache = TranslationCache::in_memory();
        let bt_en = BackTranslationAugmenter::new(
            PivotLanguage::English,
            &backend,
            &cache,
            RetryPolicy::immediate(1),
        );
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let synonym = SynonymAugmenter::new(&lexicon, 0.3);
        let out = execute_plan(&ds, &plan, &[&bt_en, &synonym], 5).unwrap();
        assert_eq!(&out.records()[..ds.len()], ds.records());
    }

    #[test]
    fn execute_plan_is_byte_deterministic() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(4));
        let run = || {
            let backend = stub_backend();
            let cache = TranslationCache::in_memory();
            let policy = RetryPolicy::immediate(1);
            let bt_en = BackTranslationAugmenter::new(
                PivotLanguage::English,
                &backend,
                &cache,
                policy.clone(),
            );
            let bt_ar =
                BackTranslationAugmenter::new(PivotLanguage::Arabic, &backend, &cache, policy);
            let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
            let synonym = SynonymAugmenter::new(&lexicon, 0.3);
            let out = execute_plan(&ds, &plan, &[&bt_en, &bt_ar, &synonym], 17).unwrap();
            serde_json::to_string(&out).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn execute_plan_errors_when_stuck() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(4));
        // Echo back-translation never differs; lexicon matches nothing.
        let cache = TranslationCache::in_memory();
        let echo = EchoBackend;
        let bt_en = BackTranslationAugmenter::new(
            PivotLanguage::English,
            &echo,
            &cache,
            RetryPolicy::immediate(1),
        );
        let lexicon = SynonymLexicon::new([("takada", vec!["nil"])]).unwrap();
        let synonym = SynonymAugmenter::new(&lexicon, 0.3);
        let plan = plan
            .with_method_cycle(vec![
                AugmentationMethod::BtEnglish,
                AugmentationMethod::Synonym,
            ])
            .unwrap();
        let err = execute_plan(&ds, &plan, &[&bt_en, &synonym], 0).unwrap_err();
        match err {
            AugmentError::StuckLabel { label, shortfall } => {
                assert_eq!(label, EmotionLabel::Happy);
                assert_eq!(shortfall, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn execute_plan_requires_augmenters_for_cycle_methods() {
        let ds = fixture_for_execute();
        let plan = plan_balance(&ds, Some(4));
        let lexicon = SynonymLexicon::new([("bagus", vec!["baik"])]).unwrap();
        let synonym = SynonymAugmenter::new(&lexicon, 0.3);
        // Default cycle includes both back-translation methods.
        let err = execute_plan(&ds, &plan, &[&synonym], 0).unwrap_err();
        assert!(matches!(err, AugmentError::MissingAugmenter { .. }));
    }
}

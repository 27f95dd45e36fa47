//! Experiment pipeline for Indonesian emotion classification over e-commerce
//! reviews.
//!
//! The crate covers the full flow from a labeled review CSV to a metric
//! report: loading and validation ([`corpus`]), text cleaning ([`preprocess`]),
//! class balancing by undersampling or augmentation ([`augment`]) with
//! back-translation plumbing ([`translate`]), stratified splitting and
//! tokenization ([`splitprep`]), classifier backends ([`models`]), grid search
//! ([`tuner`]), bootstrap bagging ([`ensemble`]), evaluation ([`metrics`]),
//! and run orchestration with persisted, reproducible run records
//! ([`experiment`]).
//!
//! Every stage runs offline with deterministic stub backends; the transformer
//! fine-tuning backend bridges to an external trainer process when pretrained
//! assets are available.

pub mod augment;
pub mod corpus;
pub mod ensemble;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod splitprep;
pub mod translate;
pub mod tuner;

pub use augment::{AugmentationMethod, BalancePlan, SynonymLexicon};
pub use corpus::{EmotionLabel, LabelCounts, LabeledDataset, Provenance, ReviewRecord};
pub use ensemble::{BaggedEnsemble, EnsembleConfig};
pub use experiment::{ExperimentConfig, RunRecord};
pub use metrics::{ConfusionMatrix, MetricReport};
pub use models::{ClassifierBackend, LabelProbs, TrainConfig, TrainedModel, BASELINE_BACKEND_ID};
pub use splitprep::{EncodedBatch, SplitRatios, Tokenizer};
pub use translate::{PivotLanguage, TranslationBackend, TranslationCache};
pub use tuner::{Grid, TuneResult};

//! Skill extraction from job-ad sentences with distant supervision.
//!
//! Sentences are labelled by literal matching against a skill taxonomy, one
//! logistic-regression classifier is trained per skill on sentence embeddings
//! with sampled negatives (optionally "hard" ones drawn from related skills),
//! and skills are ranked for new sentences by classifier probability.

pub mod classifier;
pub mod cli;
pub mod embeddings;
pub mod error;
pub mod evaluation;
mod io;
pub mod matcher;
pub mod pipeline;
pub mod ranking;
pub mod related;
pub mod sampler;
pub mod seed;
pub mod synth;
pub mod taxonomy;
mod text;

pub use classifier::{predict, train_all, train_classifier, BinaryClassifier, ModelSet, TrainConfig};
pub use embeddings::{
    cosine, hash_encode, read_store, write_store, EmbeddingStore, EmbeddingVector, HashEncoder, SentenceEncoder,
    StoreEncoder,
};
pub use error::{Error, Result};
pub use evaluation::{
    evaluate, load_benchmark, mrr, rp_at_k, supervision_quality, Dataset, EvalReport, GoldSentence, Split,
};
pub use matcher::{label_corpus, normalize, Matcher, PositiveSets, Sentence};
pub use ranking::{extract, rank_skills, RankedPrediction, ScoredSkill};
pub use related::{build_related_index, levenshtein, RelatedIndex, Strategy};
pub use sampler::{sample_negatives, Sampler, SamplingConfig, TrainingSet};
pub use taxonomy::{import_esco_csv, load_taxonomy, Skill, SkillId, Taxonomy};

//! Pairwise learning-to-rank for picking the better headline of a news pair.
//!
//! The pipeline pools transformer token states into sentence vectors
//! ([`pooling`]), trains gradient-boosted tree scorers on (better, worse)
//! headline pairs under the pairwise logistic loss ([`ranker`]), averages
//! normalized scores across several such scorers ([`ensemble`]) and grades
//! the resulting left/right/draw labels with a weighted accuracy
//! ([`evaluation`]).

mod binfmt;
pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod pooling;
pub mod ranker;

pub use data::{DrawPolicy, EmbeddingStore, Label, PairDataset, PairRecord, TrainingPairSet};
pub use ensemble::{BlendMember, BlendSpec, Normalization, PairScores, Prediction};
pub use error::{Error, Result};
pub use pooling::{PoolingMethod, TokenEmbeddingSequence, TokenFile};
pub use ranker::{HyperParams, RankerModel};

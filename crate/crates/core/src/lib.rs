//! Relation extraction toolkit.
//!
//! The crate covers the whole pipeline for binary relation classification over
//! pre-parsed sentences:
//!
//! * [`corpus`]: the JSONL instance format, splits, and the doubling schedule of
//!   training sizes.
//! * [`features`]: hand-crafted feature families encoded as one-hot vectors.
//! * [`deppath`]: shortest dependency paths and the binary merge trees built
//!   from them.
//! * [`embed`]: word and entity vector tables, negative sampling and a
//!   skip-gram trainer.
//! * [`net`]: chain and tree LSTM cells with hand-derived gradients.
//! * [`train`]: losses, AdaGrad, pre-training and fine-tuning loops, checkpoints.
//! * [`eval`]: precision/recall/F, accuracy, k-means and the Rand index.
//! * [`experiment`]: presets, the schedule-driven experiment runner and grid
//!   tuning.

pub mod corpus;
pub mod deppath;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod gradcheck;
pub mod net;
pub mod rng;
pub mod train;

pub use corpus::{Dataset, Instance, Mention, Token};
pub use deppath::{DepPath, PathMergeTree};
pub use embed::{EmbeddingKind, EmbeddingTable, UnigramSampler};
pub use error::{Error, Result};
pub use eval::{Average, ConfusionCounts, Partition};
pub use experiment::Preset;
pub use features::{FeatureDictionary, SparseVector};
pub use net::{LstmParams, NodeState, Topology};
pub use train::{Checkpoint, ClassifierParams, TrainConfig};

//! Controversy detection on discussion threads with graph neural networks.
//!
//! Threads are turned into user-interaction graphs ([`ingest`]), nodes get
//! aggregated message-embedding features ([`features`]), and each graph is
//! embedded by either hierarchical soft pooling or cardinality-preserving
//! attention ([`layers`], [`models`]) before an MLP head decides whether the
//! post is controversial. [`train`] holds the training loop and evaluation
//! protocol; [`autodiff`] is the numeric substrate under all of it.

pub mod autodiff;
pub mod error;

pub use error::{Error, Result};
pub mod features;
pub mod ingest;
pub mod layers;
pub mod models;
pub mod train;

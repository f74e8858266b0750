//! Fairness-aware graph augmentation for node-level contrastive learning.
//!
//! The pipeline: load or generate a graph with a binary sensitive attribute,
//! build two corrupted views with fairness-aware feature masking and edge
//! deletion, train a two-layer GCN encoder with a symmetric NT-Xent loss, and
//! evaluate the frozen embeddings with a logistic classifier for accuracy,
//! statistical parity and equal opportunity.

pub mod augment;
pub mod bench;
pub mod commands;
pub mod config;
pub mod contrastive;
pub mod encoder;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod io;
pub mod presets;
pub mod rng;
pub mod sbm;
pub mod sparse;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Adjacency, Graph};

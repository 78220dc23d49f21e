//! Balanced multimodal training at desk scale.
//!
//! The library trains a K-encoder late-fusion classifier and periodically
//! balances it: each modality's learning state is diagnosed from the k-means
//! purity gap between its train and validation representations, mapped to a
//! re-initialization strength, and the corresponding encoder is softly pulled
//! back toward its initial parameters.
//!
//! Modules:
//! - [`nn`]: matrices, MLPs, cross-entropy, SGD with momentum, snapshots
//! - [`datagen`]: seeded synthetic multimodal datasets and CSV IO
//! - [`clustering`]: Lloyd's k-means and clustering purity
//! - [`balance`]: purity gap, re-init strength, soft re-initialization
//! - [`trainer`]: model assembly, training loop, metrics, uni-modal probe

pub mod balance;
pub mod clustering;
pub mod datagen;
pub mod error;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;

//! The `probe` command: train a linear probe on dumped embeddings and
//! report its test metrics.

use std::path::Path;

use anyhow::{bail, Result};
use serde_json::json;

use mmbal_core::datagen::load_features;
use mmbal_core::trainer::{probe_on_features, ProbeConfig};

pub fn run(train: &Path, test: &Path, classes: usize, cfg: ProbeConfig) -> Result<serde_json::Value> {
    let (train_labels, train_feats) = load_features(train)?;
    let (test_labels, test_feats) = load_features(test)?;
    if train_feats.cols() != test_feats.cols() {
        bail!(
            "feature dimension mismatch: {} has {} columns, {} has {}",
            train.display(),
            train_feats.cols(),
            test.display(),
            test_feats.cols()
        );
    }
    let (test_acc, test_macro_f1) =
        probe_on_features(&train_feats, &train_labels, &test_feats, &test_labels, classes, &cfg)?;
    Ok(json!({
        "test_acc": test_acc,
        "test_macro_f1": test_macro_f1,
    }))
}

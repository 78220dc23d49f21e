//! The `diagnose` command: standalone learning-state diagnosis of two
//! feature files (train and validation representations of one modality).

use std::path::Path;

use anyhow::{bail, Result};
use serde_json::json;

use mmbal_core::balance::{diagnose_modality, BalanceConfig, SquashKind};
use mmbal_core::clustering::KMeansConfig;
use mmbal_core::datagen::load_features;

#[allow(clippy::too_many_arguments)]
pub fn run(
    train: &Path,
    val: &Path,
    classes: usize,
    lambda: f64,
    squash: SquashKind,
    kmeans_cfg: KMeansConfig,
) -> Result<serde_json::Value> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        bail!("--lambda {lambda} must be > 1");
    }
    let (train_labels, train_feats) = load_features(train)?;
    let (val_labels, val_feats) = load_features(val)?;
    if train_feats.cols() != val_feats.cols() {
        bail!(
            "feature dimension mismatch: {} has {} columns, {} has {}",
            train.display(),
            train_feats.cols(),
            val.display(),
            val_feats.cols()
        );
    }
    let balance_cfg = BalanceConfig {
        period_h: 1,
        lambda,
        squash,
        reset_momentum: true,
    };
    let d = diagnose_modality(
        &train_feats,
        &val_feats,
        &train_labels,
        &val_labels,
        classes,
        &kmeans_cfg,
        &balance_cfg,
    )?;
    Ok(json!({
        "purity_train": d.purity_train,
        "purity_val": d.purity_val,
        "gap": d.gap,
        "alpha": d.alpha,
    }))
}

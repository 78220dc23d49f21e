//! The `gen` command: write a dataset directory from a config.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use mmbal_core::datagen::{dataset_file_names, generate, save_dataset};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

pub fn run(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = RunManifest::begin(cfg.hash(), cfg.seed);
    let spec = cfg.dataset_spec();
    let dataset = generate(&spec)?;
    save_dataset(&dataset, out)?;
    let outputs: Vec<String> = dataset_file_names(dataset.num_modalities())
        .into_iter()
        .map(|p| p.display().to_string())
        .collect();
    manifest.finish(outputs, out)?;
    if !quiet {
        println!(
            "generated {} modalities x {}/{}/{} samples -> {}",
            dataset.num_modalities(),
            dataset.train.len(),
            dataset.val.len(),
            dataset.test.len(),
            out.display()
        );
    }
    Ok(())
}

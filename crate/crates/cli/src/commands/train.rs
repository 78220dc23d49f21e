//! The `train` command: one experiment run into one output directory.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mmbal_core::datagen::{generate, load_dataset, save_features, MultimodalDataset};
use mmbal_core::trainer::{evaluate, extract_features, train_run_with, unimodal_probe, EpochRecord};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
    pub test_macro_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub modality: usize,
    pub test_acc: f64,
    pub test_macro_f1: f64,
}

/// Summary written as `summary.json`. The `config` field echoes the
/// canonical config text and reparses to the executed configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub artifact_version: String,
    pub mode: String,
    pub seed: u64,
    pub config: String,
    pub config_hash: String,
    #[serde(rename = "final")]
    pub final_metrics: FinalMetrics,
    pub probes: Vec<ProbeMetrics>,
}

fn check_dataset_matches(cfg: &ExperimentConfig, ds: &MultimodalDataset) -> Result<()> {
    if ds.num_classes != cfg.data.num_classes {
        bail!(
            "loaded dataset has {} classes, config says {}",
            ds.num_classes,
            cfg.data.num_classes
        );
    }
    if ds.num_modalities() != cfg.data.modalities.len() {
        bail!(
            "loaded dataset has {} modalities, config says {}",
            ds.num_modalities(),
            cfg.data.modalities.len()
        );
    }
    for (k, (dim, m)) in ds.modality_dims().iter().zip(&cfg.data.modalities).enumerate() {
        if *dim != m.dim {
            bail!("loaded dataset modality {k} has dim {dim}, config says {}", m.dim);
        }
    }
    Ok(())
}

/// Executes one training run: metrics stream, probes, optional embedding
/// dump, summary, manifest.
pub fn run(
    cfg: &ExperimentConfig,
    data_dir: Option<&Path>,
    out: &Path,
    quiet: bool,
) -> Result<RunSummary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = RunManifest::begin(cfg.hash(), cfg.seed);

    let dataset = match data_dir {
        Some(dir) => {
            let ds = load_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
            check_dataset_matches(cfg, &ds)?;
            ds
        }
        None => generate(&cfg.dataset_spec())?,
    };

    let model = cfg.model_spec();
    let train_cfg = cfg.train_config();

    let metrics_path = out.join("metrics.jsonl");
    let mut metrics_file = fs::File::create(&metrics_path)
        .with_context(|| format!("creating {}", metrics_path.display()))?;
    let progress_stride = (train_cfg.epochs / 10).max(1);

    let output = train_run_with(&dataset, &model, &train_cfg, |record: &EpochRecord| {
        let line = serde_json::to_string(record)
            .map_err(|e| mmbal_core::Error::input(format!("serializing record: {e}")))?;
        metrics_file
            .write_all(line.as_bytes())
            .and_then(|_| metrics_file.write_all(b"\n"))
            .and_then(|_| metrics_file.flush())
            .map_err(|e| mmbal_core::Error::io(&metrics_path, e))?;
        if !quiet && record.epoch % progress_stride == 0 {
            println!(
                "epoch {:>4}  loss {:.4}  test_acc {:.4}",
                record.epoch, record.train_loss, record.test_acc
            );
        }
        Ok(())
    })?;

    let mut outputs = vec!["metrics.jsonl".to_string(), "summary.json".to_string()];

    let mut probes = Vec::new();
    for k in 0..model.num_modalities() {
        let probe_cfg = cfg.probe_config(k);
        let (test_acc, test_macro_f1) = unimodal_probe(
            &model.encoder_specs[k],
            &output.params.encoders[k],
            &dataset.train.modalities[k],
            &dataset.train.labels,
            &dataset.test.modalities[k],
            &dataset.test.labels,
            model.num_classes,
            &probe_cfg,
        )?;
        probes.push(ProbeMetrics {
            modality: k,
            test_acc,
            test_macro_f1,
        });
    }

    if cfg.train.dump_embeddings {
        for k in 0..model.num_modalities() {
            for (split, name) in [
                (&dataset.train, "train"),
                (&dataset.val, "val"),
                (&dataset.test, "test"),
            ] {
                let feats = extract_features(
                    &model.encoder_specs[k],
                    &output.params.encoders[k],
                    &split.modalities[k],
                )?;
                let file = format!("embeddings_modality{k}_{name}.csv");
                save_features(&out.join(&file), &split.labels, &feats)?;
                outputs.push(file);
            }
        }
    }

    let last = output
        .records
        .last()
        .expect("a run of >= 1 epochs always evaluates at epoch 0");
    // Re-derive final metrics from the final parameters; equal to the last
    // record whenever the last epoch was an evaluation epoch.
    let (final_acc, final_f1) = if last.epoch == train_cfg.epochs - 1 {
        (last.test_acc, last.test_macro_f1)
    } else {
        evaluate(&model, &output.params, &dataset.test)?
    };
    let summary = RunSummary {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        mode: cfg.mode().to_string(),
        seed: cfg.seed,
        config: cfg.canonical_text(),
        config_hash: cfg.hash(),
        final_metrics: FinalMetrics {
            epoch: last.epoch,
            train_loss: last.train_loss,
            test_acc: final_acc,
            test_macro_f1: final_f1,
        },
        probes,
    };
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;

    manifest.finish(outputs, out)?;

    if !quiet {
        println!(
            "done: mode={} final_test_acc={:.4} -> {}",
            summary.mode,
            summary.final_metrics.test_acc,
            out.display()
        );
    }
    Ok(summary)
}

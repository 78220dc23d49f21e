//! Training loop with the periodic diagnose-and-re-learn schedule,
//! evaluation metrics, and feature extraction.

pub mod metrics;
pub mod model;
pub mod probe;

pub use metrics::{accuracy_and_macro_f1, argmax_rows};
pub use model::{init_model_params, model_logits, model_loss_and_grads, Fusion, ModelParams, ModelSpec};
pub use probe::{probe_on_features, unimodal_probe, ProbeConfig};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::balance::{
    apply_relearn, diagnose_modality, schedule_should_fire, BalanceConfig, ModalityDiagnosis,
};
use crate::clustering::KMeansConfig;
use crate::datagen::{MultimodalDataset, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::mlp::{mlp_forward, MlpSpec};
use crate::nn::optim::sgd_momentum_step;
use crate::nn::snapshot::ParamSnapshot;
use crate::rng::{substream, substream_indexed, substream_seed_indexed};

/// Settings for the diagnosis clusterings. `k` and the per-event seed are
/// filled in by the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansTuning {
    pub max_iters: usize,
    pub restarts: usize,
    pub tol: f64,
    pub standardize: bool,
}

impl Default for KMeansTuning {
    fn default() -> Self {
        KMeansTuning {
            max_iters: 100,
            restarts: 5,
            tol: 1e-6,
            standardize: false,
        }
    }
}

impl KMeansTuning {
    fn to_config(&self, k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            max_iters: self.max_iters,
            restarts: self.restarts,
            seed,
            tol: self.tol,
            standardize: self.standardize,
        }
    }
}

/// Training-run configuration. `balance: None` is the joint-training
/// baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    pub balance: Option<BalanceConfig>,
    pub eval_every: usize,
    pub kmeans: KMeansTuning,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be >= 1".to_string()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config(format!("learning rate {} must be > 0", self.lr)));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum {} must be in [0, 1)",
                self.momentum
            )));
        }
        if self.eval_every < 1 {
            return Err(Error::config("eval_every must be >= 1".to_string()));
        }
        if let Some(b) = &self.balance {
            b.validate()?;
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            momentum: 0.9,
            seed: 0,
            balance: None,
            eval_every: 1,
            kmeans: KMeansTuning::default(),
        }
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
    pub test_macro_f1: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub diagnoses: Vec<ModalityDiagnosis>,
}

/// Final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// The initialization snapshot the re-learning interpolates toward.
    pub init_params: ModelParams,
    pub records: Vec<EpochRecord>,
}

/// Evaluation-mode forward of an encoder alone; row order follows the input.
pub fn extract_features(
    spec: &MlpSpec,
    params: &ParamSnapshot,
    inputs: &Matrix,
) -> Result<Matrix> {
    let (out, _) = mlp_forward(spec, params, inputs)?;
    Ok(out)
}

/// Multimodal accuracy and macro-F1 over a full split, in fixed order.
pub fn evaluate(spec: &ModelSpec, params: &ModelParams, split: &Split) -> Result<(f64, f64)> {
    if split.is_empty() {
        return Err(Error::input("evaluation on an empty split".to_string()));
    }
    let inputs: Vec<&Matrix> = split.modalities.iter().collect();
    let logits = model_logits(spec, params, &inputs)?;
    accuracy_and_macro_f1(&argmax_rows(&logits), &split.labels, spec.num_classes)
}

fn check_data_model(data: &MultimodalDataset, spec: &ModelSpec) -> Result<()> {
    if data.num_modalities() != spec.num_modalities() {
        return Err(Error::config(format!(
            "dataset has {} modalities, model has {}",
            data.num_modalities(),
            spec.num_modalities()
        )));
    }
    for (k, (dim, e)) in data.modality_dims().iter().zip(&spec.encoder_specs).enumerate() {
        if *dim != e.input_dim {
            return Err(Error::config(format!(
                "modality {k}: dataset dim {dim} does not match encoder input dim {}",
                e.input_dim
            )));
        }
    }
    if data.num_classes > spec.num_classes {
        return Err(Error::config(format!(
            "dataset has {} classes, model supports {}",
            data.num_classes, spec.num_classes
        )));
    }
    Ok(())
}

/// Runs training and collects every epoch record.
pub fn train_run(
    data: &MultimodalDataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    train_run_with(data, spec, cfg, |_| Ok(()))
}

/// Runs training, streaming each record to `sink` as it is produced.
///
/// Per epoch: shuffled mini-batch SGD on the joint loss; then, when
/// balancing is configured and the schedule fires, every modality is
/// diagnosed and softly re-initialized; then, on evaluation epochs, test
/// metrics are logged. Diagnosis runs before evaluation on purpose: the
/// post-re-init accuracy drop is part of the metric stream.
///
/// A configured `lambda = 0` makes every re-initialization strength zero,
/// so the diagnosis pass is skipped entirely and the run is bit-identical
/// to the baseline at the same seed.
pub fn train_run_with<F>(
    data: &MultimodalDataset,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    mut sink: F,
) -> Result<TrainOutput>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    spec.validate()?;
    cfg.validate()?;
    data.validate()?;
    check_data_model(data, spec)?;

    let k_mods = spec.num_modalities();
    let n = data.train.len();
    let mut params = init_model_params(spec, &mut substream(cfg.seed, "init"))?;
    let init_params = params.clone();
    let mut velocity = params.zeros_like();
    let mut records = Vec::new();

    let balancing_active = cfg
        .balance
        .as_ref()
        .map_or(false, |b| b.lambda != 0.0);

    for epoch in 0..cfg.epochs {
        // Batch order comes from a per-epoch stream keyed on (seed, epoch),
        // so diagnosis events cannot perturb it.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream_indexed(cfg.seed, "shuffle", epoch as u64));

        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Matrix> = data
                .train
                .modalities
                .iter()
                .map(|m| m.select_rows(chunk))
                .collect();
            let batch_refs: Vec<&Matrix> = batch.iter().collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let (loss, grads) = model_loss_and_grads(spec, &params, &batch_refs, &labels)?;
            loss_sum += loss * chunk.len() as f64;

            for k in 0..k_mods {
                sgd_momentum_step(
                    &mut params.encoders[k],
                    &grads.encoders[k],
                    &mut velocity.encoders[k],
                    cfg.lr,
                    cfg.momentum,
                )?;
            }
            sgd_momentum_step(
                &mut params.classifier,
                &grads.classifier,
                &mut velocity.classifier,
                cfg.lr,
                cfg.momentum,
            )?;
            for k in 0..params.heads.len() {
                sgd_momentum_step(
                    &mut params.heads[k],
                    &grads.heads[k],
                    &mut velocity.heads[k],
                    cfg.lr,
                    cfg.momentum,
                )?;
            }
        }
        let train_loss = loss_sum / n as f64;

        let mut diagnoses: Vec<ModalityDiagnosis> = Vec::new();
        if balancing_active {
            let bal = cfg.balance.as_ref().expect("balancing_active");
            if schedule_should_fire(epoch, bal.period_h) {
                for k in 0..k_mods {
                    let train_feats = extract_features(
                        &spec.encoder_specs[k],
                        &params.encoders[k],
                        &data.train.modalities[k],
                    )?;
                    let val_feats = extract_features(
                        &spec.encoder_specs[k],
                        &params.encoders[k],
                        &data.val.modalities[k],
                    )?;
                    let event_seed = substream_seed_indexed(
                        cfg.seed,
                        "kmeans",
                        (epoch * k_mods + k) as u64,
                    );
                    let kcfg = cfg.kmeans.to_config(spec.num_classes, event_seed);
                    let mut d = diagnose_modality(
                        &train_feats,
                        &val_feats,
                        &data.train.labels,
                        &data.val.labels,
                        spec.num_classes,
                        &kcfg,
                        bal,
                    )?;
                    d.modality = k;
                    d.epoch = epoch;
                    diagnoses.push(d);
                }
                apply_relearn(
                    &mut params.encoders,
                    &init_params.encoders,
                    &mut velocity.encoders,
                    &diagnoses,
                    bal,
                )?;
            }
        }

        if epoch % cfg.eval_every == 0 || !diagnoses.is_empty() {
            let (test_acc, test_macro_f1) = evaluate(spec, &params, &data.test)?;
            let record = EpochRecord {
                epoch,
                train_loss,
                test_acc,
                test_macro_f1,
                diagnoses,
            };
            sink(&record)?;
            records.push(record);
        }
    }

    Ok(TrainOutput {
        params,
        init_params,
        records,
    })
}

//! Uni-modal probe: a fresh linear classifier trained on a frozen encoder's
//! outputs, used to measure representation quality.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::mlp::{init_params, mlp_backward, mlp_forward, MlpSpec};
use crate::nn::optim::sgd_momentum_step;
use crate::nn::snapshot::ParamSnapshot;
use crate::rng::{substream, substream_indexed};
use crate::trainer::metrics::{accuracy_and_macro_f1, argmax_rows};
use crate::trainer::extract_features;

/// Probe training settings. The probe uses the same optimizer family as the
/// main model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 50,
            lr: 1e-2,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Trains a linear probe on the frozen encoder's train-split outputs and
/// evaluates it on the test split. Returns (accuracy, macro_f1).
///
/// The encoder parameters are borrowed immutably and never change.
#[allow(clippy::too_many_arguments)]
pub fn unimodal_probe(
    encoder_spec: &MlpSpec,
    encoder_params: &ParamSnapshot,
    train_inputs: &Matrix,
    train_labels: &[usize],
    test_inputs: &Matrix,
    test_labels: &[usize],
    num_classes: usize,
    cfg: &ProbeConfig,
) -> Result<(f64, f64)> {
    let train_feats = extract_features(encoder_spec, encoder_params, train_inputs)?;
    let test_feats = extract_features(encoder_spec, encoder_params, test_inputs)?;
    probe_on_features(
        &train_feats,
        train_labels,
        &test_feats,
        test_labels,
        num_classes,
        cfg,
    )
}

/// Probe over precomputed feature matrices (used for dumped embeddings and
/// for the identity-encoder case).
pub fn probe_on_features(
    train_feats: &Matrix,
    train_labels: &[usize],
    test_feats: &Matrix,
    test_labels: &[usize],
    num_classes: usize,
    cfg: &ProbeConfig,
) -> Result<(f64, f64)> {
    let spec = MlpSpec::new(train_feats.cols(), vec![], num_classes);
    let mut params = init_params(&spec, &mut substream(cfg.seed, "probe.init"))?;
    let mut velocity = params.zeros_like();
    let n = train_feats.rows();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut substream_indexed(cfg.seed, "probe.shuffle", epoch as u64));
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch = train_feats.select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train_labels[i]).collect();
            let (out, cache) = mlp_forward(&spec, &params, &batch)?;
            let (_, logit_grad) = softmax_cross_entropy(&out, &labels)?;
            let (grads, _) = mlp_backward(&spec, &params, &cache, &logit_grad)?;
            sgd_momentum_step(&mut params, &grads, &mut velocity, cfg.lr, cfg.momentum)?;
        }
    }
    let (logits, _) = mlp_forward(&spec, &params, test_feats)?;
    accuracy_and_macro_f1(&argmax_rows(&logits), test_labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, DatasetSpec, ModalitySpec};
    use crate::nn::snapshot::ParamSnapshot;

    fn identity_encoder(dim: usize) -> (MlpSpec, ParamSnapshot) {
        let spec = MlpSpec::new(dim, vec![], dim);
        let mut params = ParamSnapshot::new();
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        params.push("layer0.weight", vec![dim, dim], eye).unwrap();
        params.push("layer0.bias", vec![dim], vec![0.0; dim]).unwrap();
        (spec, params)
    }

    fn two_modality_spec(sep0: f64, frac1: f64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            num_classes: 3,
            modalities: vec![
                ModalitySpec {
                    dim: 4,
                    class_separation: sep0,
                    noise_sigma: 0.3,
                    informative_fraction: 1.0,
                },
                ModalitySpec {
                    dim: 4,
                    class_separation: 2.0,
                    noise_sigma: 1.0,
                    informative_fraction: frac1,
                },
            ],
            n_train: 150,
            n_val: 60,
            n_test: 120,
            seed,
        }
    }

    #[test]
    fn identity_encoder_on_separable_features_scores_high() {
        let ds = generate(&two_modality_spec(3.0, 1.0, 21)).unwrap();
        let (spec, params) = identity_encoder(4);
        let cfg = ProbeConfig {
            seed: 9,
            ..ProbeConfig::default()
        };
        let (acc, _) = unimodal_probe(
            &spec,
            &params,
            &ds.train.modalities[0],
            &ds.train.labels,
            &ds.test.modalities[0],
            &ds.test.labels,
            3,
            &cfg,
        )
        .unwrap();
        assert!(acc >= 0.95, "probe accuracy {acc}");
    }

    #[test]
    fn uninformative_modality_probes_near_chance() {
        // informative_fraction 0: features carry no label information, so a
        // probe cannot beat chance by more than 0.1 (5 seeds).
        for seed in 0..5u64 {
            let ds = generate(&two_modality_spec(3.0, 0.0, 100 + seed)).unwrap();
            let (spec, params) = identity_encoder(4);
            let cfg = ProbeConfig {
                seed,
                ..ProbeConfig::default()
            };
            let (acc, _) = unimodal_probe(
                &spec,
                &params,
                &ds.train.modalities[1],
                &ds.train.labels,
                &ds.test.modalities[1],
                &ds.test.labels,
                3,
                &cfg,
            )
            .unwrap();
            assert!(acc <= 1.0 / 3.0 + 0.1, "seed {seed}: probe accuracy {acc}");
        }
    }

    #[test]
    fn probe_is_deterministic_and_leaves_encoder_unchanged() {
        let ds = generate(&two_modality_spec(2.0, 1.0, 5)).unwrap();
        let (spec, params) = identity_encoder(4);
        let before = params.clone();
        let cfg = ProbeConfig {
            seed: 7,
            ..ProbeConfig::default()
        };
        let a = unimodal_probe(
            &spec,
            &params,
            &ds.train.modalities[0],
            &ds.train.labels,
            &ds.test.modalities[0],
            &ds.test.labels,
            3,
            &cfg,
        )
        .unwrap();
        let b = unimodal_probe(
            &spec,
            &params,
            &ds.train.modalities[0],
            &ds.train.labels,
            &ds.test.modalities[0],
            &ds.test.labels,
            3,
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(params, before);
    }
}

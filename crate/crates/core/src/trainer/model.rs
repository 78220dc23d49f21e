//! Multimodal model assembly: K uni-modal encoders, concatenation fusion,
//! a linear multimodal classifier, and optional per-modality auxiliary
//! classifier heads trained with their own cross-entropy terms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::mlp::{init_params, mlp_backward, mlp_forward, MlpSpec};
use crate::nn::snapshot::ParamSnapshot;

/// Fusion strategy for uni-modal features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Concat,
}

/// Architecture of the full multimodal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder_specs: Vec<MlpSpec>,
    pub fusion: Fusion,
    pub num_classes: usize,
    /// Adds a per-modality linear classifier and auxiliary cross-entropy
    /// loss per modality, with unit weight.
    pub unimodal_heads: bool,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.encoder_specs.len() < 2 {
            return Err(Error::config("a multimodal model needs at least 2 encoders".to_string()));
        }
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be >= 2".to_string()));
        }
        for e in &self.encoder_specs {
            e.validate()?;
        }
        Ok(())
    }

    pub fn num_modalities(&self) -> usize {
        self.encoder_specs.len()
    }

    /// Linear classifier over the concatenated features.
    pub fn classifier_spec(&self) -> MlpSpec {
        let fused: usize = self.encoder_specs.iter().map(|e| e.output_dim).sum();
        MlpSpec::new(fused, vec![], self.num_classes)
    }

    /// Linear auxiliary head for modality `k`.
    pub fn head_spec(&self, k: usize) -> MlpSpec {
        MlpSpec::new(self.encoder_specs[k].output_dim, vec![], self.num_classes)
    }
}

/// All trainable parameters, grouped so balancing can address encoders
/// individually. The same shape doubles as gradient and velocity storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoders: Vec<ParamSnapshot>,
    pub classifier: ParamSnapshot,
    pub heads: Vec<ParamSnapshot>,
}

impl ModelParams {
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            encoders: self.encoders.iter().map(ParamSnapshot::zeros_like).collect(),
            classifier: self.classifier.zeros_like(),
            heads: self.heads.iter().map(ParamSnapshot::zeros_like).collect(),
        }
    }
}

/// Seeded initialization in a fixed draw order: encoders, classifier, heads.
pub fn init_model_params<R: Rng>(spec: &ModelSpec, rng: &mut R) -> Result<ModelParams> {
    spec.validate()?;
    let encoders = spec
        .encoder_specs
        .iter()
        .map(|e| init_params(e, rng))
        .collect::<Result<Vec<_>>>()?;
    let classifier = init_params(&spec.classifier_spec(), rng)?;
    let heads = if spec.unimodal_heads {
        (0..spec.num_modalities())
            .map(|k| init_params(&spec.head_spec(k), rng))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(ModelParams {
        encoders,
        classifier,
        heads,
    })
}

fn check_inputs(spec: &ModelSpec, inputs: &[&Matrix]) -> Result<usize> {
    if inputs.len() != spec.num_modalities() {
        return Err(Error::config(format!(
            "{} input modalities for a {}-encoder model",
            inputs.len(),
            spec.num_modalities()
        )));
    }
    let rows = inputs[0].rows();
    for (k, (x, e)) in inputs.iter().zip(&spec.encoder_specs).enumerate() {
        if x.cols() != e.input_dim {
            return Err(Error::config(format!(
                "modality {k}: input dim {} does not match encoder input dim {}",
                x.cols(),
                e.input_dim
            )));
        }
        if x.rows() != rows {
            return Err(Error::config(format!(
                "modality {k}: {} rows, expected {rows}",
                x.rows()
            )));
        }
    }
    Ok(rows)
}

/// Multimodal logits for a batch (fused path only).
pub fn model_logits(spec: &ModelSpec, params: &ModelParams, inputs: &[&Matrix]) -> Result<Matrix> {
    check_inputs(spec, inputs)?;
    let mut features = Vec::with_capacity(inputs.len());
    for (k, x) in inputs.iter().enumerate() {
        let (phi, _) = mlp_forward(&spec.encoder_specs[k], &params.encoders[k], x)?;
        features.push(phi);
    }
    let fused = Matrix::hconcat(&features.iter().collect::<Vec<_>>())?;
    let (logits, _) = mlp_forward(&spec.classifier_spec(), &params.classifier, &fused)?;
    Ok(logits)
}

/// Joint loss over a batch and its gradients for every parameter group.
///
/// The loss is the multimodal cross-entropy, plus one unit-weight uni-modal
/// cross-entropy per head when heads are enabled.
pub fn model_loss_and_grads(
    spec: &ModelSpec,
    params: &ModelParams,
    inputs: &[&Matrix],
    labels: &[usize],
) -> Result<(f64, ModelParams)> {
    check_inputs(spec, inputs)?;
    let k_mods = spec.num_modalities();

    let mut features = Vec::with_capacity(k_mods);
    let mut enc_caches = Vec::with_capacity(k_mods);
    for (k, x) in inputs.iter().enumerate() {
        let (phi, cache) = mlp_forward(&spec.encoder_specs[k], &params.encoders[k], x)?;
        features.push(phi);
        enc_caches.push(cache);
    }
    let fused = Matrix::hconcat(&features.iter().collect::<Vec<_>>())?;
    let classifier_spec = spec.classifier_spec();
    let (logits, cls_cache) = mlp_forward(&classifier_spec, &params.classifier, &fused)?;
    let (mut loss, logit_grad) = softmax_cross_entropy(&logits, labels)?;
    let (classifier_grads, fused_grad) =
        mlp_backward(&classifier_spec, &params.classifier, &cls_cache, &logit_grad)?;

    // Split the fused gradient back into per-modality feature gradients.
    let mut feature_grads: Vec<Matrix> = Vec::with_capacity(k_mods);
    let mut offset = 0;
    for e in &spec.encoder_specs {
        let mut g = Matrix::zeros(fused_grad.rows(), e.output_dim);
        for r in 0..fused_grad.rows() {
            g.row_mut(r)
                .copy_from_slice(&fused_grad.row(r)[offset..offset + e.output_dim]);
        }
        offset += e.output_dim;
        feature_grads.push(g);
    }

    let mut head_grads = Vec::new();
    if spec.unimodal_heads {
        for k in 0..k_mods {
            let head_spec = spec.head_spec(k);
            let (head_logits, head_cache) = mlp_forward(&head_spec, &params.heads[k], &features[k])?;
            let (head_loss, head_logit_grad) = softmax_cross_entropy(&head_logits, labels)?;
            loss += head_loss;
            let (hg, feat_grad) =
                mlp_backward(&head_spec, &params.heads[k], &head_cache, &head_logit_grad)?;
            head_grads.push(hg);
            let dst = &mut feature_grads[k];
            for (d, s) in dst.data_mut().iter_mut().zip(feat_grad.data()) {
                *d += s;
            }
        }
    }

    let mut encoder_grads = Vec::with_capacity(k_mods);
    for k in 0..k_mods {
        let (eg, _) = mlp_backward(
            &spec.encoder_specs[k],
            &params.encoders[k],
            &enc_caches[k],
            &feature_grads[k],
        )?;
        encoder_grads.push(eg);
    }

    Ok((
        loss,
        ModelParams {
            encoders: encoder_grads,
            classifier: classifier_grads,
            heads: head_grads,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{compare_grads, finite_diff_grads, DEFAULT_STEP};
    use crate::rng::substream;

    fn tiny_spec(heads: bool) -> ModelSpec {
        ModelSpec {
            encoder_specs: vec![MlpSpec::new(3, vec![4], 2), MlpSpec::new(2, vec![3], 2)],
            fusion: Fusion::Concat,
            num_classes: 3,
            unimodal_heads: heads,
        }
    }

    fn tiny_batch() -> (Matrix, Matrix, Vec<usize>) {
        let x0 = Matrix::from_vec(4, 3, vec![0.5, -0.2, 1.0, 0.9, 0.4, -1.1, -0.3, 0.8, 0.2, 1.4, -0.6, 0.3]).unwrap();
        let x1 = Matrix::from_vec(4, 2, vec![0.1, 0.7, -0.5, 0.2, 1.1, -0.9, 0.4, 0.6]).unwrap();
        (x0, x1, vec![0, 2, 1, 0])
    }

    #[test]
    fn logits_shape_and_determinism() {
        let spec = tiny_spec(false);
        let params = init_model_params(&spec, &mut substream(3, "init")).unwrap();
        let (x0, x1, _) = tiny_batch();
        let a = model_logits(&spec, &params, &[&x0, &x1]).unwrap();
        let b = model_logits(&spec, &params, &[&x0, &x1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows(), 4);
        assert_eq!(a.cols(), 3);
    }

    #[test]
    fn rejects_dim_mismatch() {
        let spec = tiny_spec(false);
        let params = init_model_params(&spec, &mut substream(3, "init")).unwrap();
        let bad = Matrix::zeros(4, 5);
        let (_, x1, _) = tiny_batch();
        assert!(model_logits(&spec, &params, &[&bad, &x1]).is_err());
    }

    // Full-model gradients against central finite differences, with and
    // without auxiliary heads.
    #[test]
    fn joint_loss_gradients_match_finite_differences() {
        for heads in [false, true] {
            let spec = tiny_spec(heads);
            let params = init_model_params(&spec, &mut substream(7, "init")).unwrap();
            let (x0, x1, labels) = tiny_batch();
            let inputs = [&x0, &x1];
            let (_, analytic) = model_loss_and_grads(&spec, &params, &inputs, &labels).unwrap();

            // Flatten components through one snapshot-valued closure each.
            for k in 0..spec.num_modalities() {
                let numeric = finite_diff_grads(
                    &params.encoders[k],
                    |p| {
                        let mut trial = params.clone();
                        trial.encoders[k] = p.clone();
                        Ok(model_loss_and_grads(&spec, &trial, &inputs, &labels)?.0)
                    },
                    DEFAULT_STEP,
                )
                .unwrap();
                let report = compare_grads(&analytic.encoders[k], &numeric);
                assert!(
                    report.max_rel_error <= 1e-4,
                    "heads={heads} encoder {k}: {}",
                    report.max_rel_error
                );
            }
            let numeric = finite_diff_grads(
                &params.classifier,
                |p| {
                    let mut trial = params.clone();
                    trial.classifier = p.clone();
                    Ok(model_loss_and_grads(&spec, &trial, &inputs, &labels)?.0)
                },
                DEFAULT_STEP,
            )
            .unwrap();
            let report = compare_grads(&analytic.classifier, &numeric);
            assert!(report.max_rel_error <= 1e-4, "heads={heads} classifier: {}", report.max_rel_error);
        }
    }

    #[test]
    fn heads_add_to_the_loss() {
        let spec_plain = tiny_spec(false);
        let spec_heads = tiny_spec(true);
        let params = init_model_params(&spec_heads, &mut substream(5, "init")).unwrap();
        let plain_params = ModelParams {
            encoders: params.encoders.clone(),
            classifier: params.classifier.clone(),
            heads: Vec::new(),
        };
        let (x0, x1, labels) = tiny_batch();
        let (loss_plain, _) =
            model_loss_and_grads(&spec_plain, &plain_params, &[&x0, &x1], &labels).unwrap();
        let (loss_heads, _) =
            model_loss_and_grads(&spec_heads, &params, &[&x0, &x1], &labels).unwrap();
        assert!(loss_heads > loss_plain);
    }
}

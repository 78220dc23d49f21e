//! Seeded synthetic multimodal classification datasets.
//!
//! Each modality draws one class-conditional mean per class on a sphere of
//! radius `class_separation`, restricted to the informative dimension
//! subspace, and samples as `mean + N(0, noise_sigma^2 I)`. Labels are
//! assigned round-robin and shuffled, so every class is present in every
//! split. Given the same spec, generation is bit-identical.

mod io;

pub use io::{dataset_file_names, load_dataset, load_features, save_dataset, save_features};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::substream_indexed;

/// Controls how informative one modality is about the class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub dim: usize,
    /// Distance scale between class-conditional means.
    pub class_separation: f64,
    /// Isotropic Gaussian noise standard deviation.
    pub noise_sigma: f64,
    /// Fraction of dimensions whose mean depends on the class; the
    /// informative dimension count is `floor(fraction * dim)`.
    pub informative_fraction: f64,
}

impl ModalitySpec {
    pub fn informative_dims(&self) -> usize {
        (self.informative_fraction * self.dim as f64).floor() as usize
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config(format!("modality {k}: dim must be >= 1")));
        }
        if !(self.class_separation >= 0.0) || !self.class_separation.is_finite() {
            return Err(Error::config(format!(
                "modality {k}: class_separation must be finite and >= 0"
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::config(format!(
                "modality {k}: noise_sigma must be finite and >= 0"
            )));
        }
        if !(0.0..=1.0).contains(&self.informative_fraction) {
            return Err(Error::config(format!(
                "modality {k}: informative_fraction must be in [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub num_classes: usize,
    pub modalities: Vec<ModalitySpec>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be >= 2".to_string()));
        }
        if self.modalities.len() < 2 {
            return Err(Error::config("at least 2 modalities are required".to_string()));
        }
        for (k, m) in self.modalities.iter().enumerate() {
            m.validate(k)?;
        }
        for (name, n) in [("n_train", self.n_train), ("n_val", self.n_val), ("n_test", self.n_test)] {
            if n < self.num_classes {
                return Err(Error::config(format!(
                    "{name} = {n} is smaller than num_classes = {}",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }
}

/// Labels and row-aligned per-modality features for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub labels: Vec<usize>,
    pub modalities: Vec<Matrix>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A generated or loaded multimodal dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalDataset {
    pub num_classes: usize,
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

impl MultimodalDataset {
    pub fn num_modalities(&self) -> usize {
        self.train.modalities.len()
    }

    pub fn modality_dims(&self) -> Vec<usize> {
        self.train.modalities.iter().map(Matrix::cols).collect()
    }

    /// Checks row alignment and per-class presence in train and val.
    pub fn validate(&self) -> Result<()> {
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if split.is_empty() {
                return Err(Error::input(format!("{name} split is empty")));
            }
            for (k, m) in split.modalities.iter().enumerate() {
                if m.rows() != split.labels.len() {
                    return Err(Error::input(format!(
                        "{name} split: modality {k} has {} rows but {} labels",
                        m.rows(),
                        split.labels.len()
                    )));
                }
            }
            if let Some(&y) = split.labels.iter().find(|&&y| y >= self.num_classes) {
                return Err(Error::input(format!(
                    "{name} split: label {y} out of range for {} classes",
                    self.num_classes
                )));
            }
        }
        for (name, split) in [("train", &self.train), ("val", &self.val)] {
            let mut present = vec![false; self.num_classes];
            for &y in &split.labels {
                present[y] = true;
            }
            if let Some(c) = present.iter().position(|&p| !p) {
                return Err(Error::input(format!(
                    "class {c} does not appear in the {name} split"
                )));
            }
        }
        Ok(())
    }
}

/// Class-conditional means for one modality: one row per class, zero on the
/// uninformative dimensions.
fn class_means<R: Rng>(m: &ModalitySpec, num_classes: usize, rng: &mut R) -> Matrix {
    let informative = m.informative_dims();
    let mut means = Matrix::zeros(num_classes, m.dim);
    if informative == 0 || m.class_separation == 0.0 {
        return means;
    }
    for c in 0..num_classes {
        let mut v: Vec<f64> = (0..informative).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            v[0] = 1.0;
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
        let row = means.row_mut(c);
        for (i, x) in v.iter().enumerate() {
            row[i] = x * m.class_separation;
        }
    }
    means
}

fn split_labels<R: Rng>(n: usize, num_classes: usize, rng: &mut R) -> Vec<usize> {
    // Round-robin guarantees every class is present, then shuffle.
    let mut labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    labels.shuffle(rng);
    labels
}

/// Generates the dataset described by `spec`. Deterministic given the spec.
pub fn generate(spec: &DatasetSpec) -> Result<MultimodalDataset> {
    spec.validate()?;
    let k_mods = spec.modalities.len();

    let means: Vec<Matrix> = spec
        .modalities
        .iter()
        .enumerate()
        .map(|(k, m)| class_means(m, spec.num_classes, &mut substream_indexed(spec.seed, "data.means", k as u64)))
        .collect();

    let mut splits = Vec::with_capacity(3);
    for (split_idx, n) in [spec.n_train, spec.n_val, spec.n_test].into_iter().enumerate() {
        let labels = split_labels(
            n,
            spec.num_classes,
            &mut substream_indexed(spec.seed, "data.labels", split_idx as u64),
        );
        let mut modalities = Vec::with_capacity(k_mods);
        for (k, m) in spec.modalities.iter().enumerate() {
            let mut rng =
                substream_indexed(spec.seed, "data.noise", (split_idx * k_mods + k) as u64);
            let mut feats = Matrix::zeros(n, m.dim);
            for (i, &y) in labels.iter().enumerate() {
                let mean = means[k].row(y);
                let row = feats.row_mut(i);
                for d in 0..m.dim {
                    let z: f64 = rng.sample(StandardNormal);
                    row[d] = mean[d] + m.noise_sigma * z;
                }
            }
            modalities.push(feats);
        }
        splits.push(Split { labels, modalities });
    }

    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    let ds = MultimodalDataset {
        num_classes: spec.num_classes,
        train,
        val,
        test,
    };
    ds.validate()?;
    Ok(ds)
}

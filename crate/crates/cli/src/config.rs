//! Flat key-value experiment configuration.
//!
//! One file describes data, model, training, balancing, probe, and k-means
//! settings using dotted section paths (`balance.lambda = 3`). Lines are
//! `key = value`; `#` starts a comment. The canonical form (keys sorted,
//! normalized spacing) feeds the config hash, so the hash is stable under
//! key reordering.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use mmbal_core::balance::{BalanceConfig, SquashKind};
use mmbal_core::datagen::{DatasetSpec, ModalitySpec};
use mmbal_core::nn::MlpSpec;
use mmbal_core::rng::{substream_seed, substream_seed_indexed};
use mmbal_core::trainer::{
    Fusion, KMeansTuning, ModelSpec, ProbeConfig, TrainConfig,
};

/// Parsed but untyped configuration: dotted key -> raw value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_text(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {line_no}: expected 'key = value', found '{line}'"))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                bail!("config line {line_no}: empty key");
            }
            if entries.insert(key.clone(), value).is_some() {
                bail!("config line {line_no}: duplicate key '{key}'");
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_text(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Canonical text: keys sorted, `key = value` lines, newline-terminated.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text, hex-encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Consumes keys from a RawConfig, tracking what was read so unknown keys
/// can be reported by name.
struct KeyReader {
    entries: BTreeMap<String, String>,
}

impl KeyReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| anyhow!("config key '{key}': cannot parse value '{v}'")),
        }
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self
            .take(key)
            .ok_or_else(|| anyhow!("missing required config key '{key}'"))?;
        v.parse()
            .map_err(|_| anyhow!("config key '{key}': cannot parse value '{v}'"))
    }

    fn parse_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => bail!("config key '{key}': expected true or false, found '{v}'"),
        }
    }

    fn parse_dims(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        match self.take(key) {
            None => Ok(default),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|_| anyhow!("config key '{key}': bad dimension '{tok}'"))
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            bail!("unknown config key '{key}'");
        }
        Ok(())
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub balance: Option<BalanceConfig>,
    pub probe: ProbeSection,
    pub kmeans: KMeansTuning,
    raw: RawConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub num_classes: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub modalities: Vec<ModalitySpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    /// Per-encoder hidden layer widths.
    pub hidden_dims: Vec<Vec<usize>>,
    /// Per-encoder output (embedding) dimension.
    pub embed_dims: Vec<usize>,
    pub unimodal_heads: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub eval_every: usize,
    pub dump_embeddings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSection {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<ExperimentConfig> {
        let mut r = KeyReader {
            entries: raw.entries.clone(),
        };

        let seed: u64 = r.parse("seed", 0)?;

        let num_classes: usize = r.parse_required("data.num_classes")?;
        let n_train: usize = r.parse_required("data.n_train")?;
        let n_val: usize = r.parse_required("data.n_val")?;
        let n_test: usize = r.parse_required("data.n_test")?;
        let mut modalities = Vec::new();
        let mut k = 0usize;
        while r.entries.keys().any(|key| key.starts_with(&format!("data.modality{k}."))) {
            let prefix = format!("data.modality{k}");
            let dim: usize = r.parse_required(&format!("{prefix}.dim"))?;
            let class_separation: f64 = r.parse(&format!("{prefix}.class_separation"), 1.0)?;
            let noise_sigma: f64 = r.parse(&format!("{prefix}.noise_sigma"), 1.0)?;
            let informative_fraction: f64 =
                r.parse(&format!("{prefix}.informative_fraction"), 1.0)?;
            modalities.push(ModalitySpec {
                dim,
                class_separation,
                noise_sigma,
                informative_fraction,
            });
            k += 1;
        }
        if modalities.len() < 2 {
            bail!("config must define at least data.modality0 and data.modality1 (contiguous indices)");
        }
        let num_modalities = modalities.len();

        let shared_hidden = r.parse_dims("model.hidden_dims", vec![32])?;
        let shared_embed: usize = r.parse("model.embed_dim", 16)?;
        let mut hidden_dims = Vec::with_capacity(num_modalities);
        let mut embed_dims = Vec::with_capacity(num_modalities);
        for k in 0..num_modalities {
            hidden_dims.push(r.parse_dims(&format!("model.encoder{k}.hidden_dims"), shared_hidden.clone())?);
            embed_dims.push(r.parse(&format!("model.encoder{k}.embed_dim"), shared_embed)?);
        }
        let unimodal_heads = r.parse_bool("model.unimodal_heads", false)?;

        let train = TrainSection {
            epochs: r.parse("train.epochs", 100)?,
            batch_size: r.parse("train.batch_size", 32)?,
            lr: r.parse("train.lr", 1e-3)?,
            momentum: r.parse("train.momentum", 0.9)?,
            eval_every: r.parse("train.eval_every", 1)?,
            dump_embeddings: r.parse_bool("train.dump_embeddings", false)?,
        };

        let has_balance = raw.entries.keys().any(|k| k.starts_with("balance."));
        let balance = if has_balance {
            let lambda: f64 = r.parse_required("balance.lambda")?;
            if !(lambda > 1.0) || !lambda.is_finite() {
                bail!("config key 'balance.lambda': value {lambda} must be > 1");
            }
            let period_h: usize = r.parse("balance.period_h", 20)?;
            if period_h < 1 {
                bail!("config key 'balance.period_h': must be >= 1");
            }
            let squash = match r.take("balance.squash").as_deref() {
                None | Some("tanh") => SquashKind::Tanh,
                Some("clipped_linear") => SquashKind::ClippedLinear,
                Some(v) => bail!("config key 'balance.squash': unknown squash '{v}'"),
            };
            let reset_momentum = r.parse_bool("balance.reset_momentum", true)?;
            Some(BalanceConfig {
                period_h,
                lambda,
                squash,
                reset_momentum,
            })
        } else {
            None
        };

        let probe = ProbeSection {
            epochs: r.parse("probe.epochs", 50)?,
            lr: r.parse("probe.lr", 1e-2)?,
            momentum: r.parse("probe.momentum", 0.9)?,
            batch_size: r.parse("probe.batch_size", 32)?,
        };

        let kmeans = KMeansTuning {
            max_iters: r.parse("kmeans.max_iters", 100)?,
            restarts: r.parse("kmeans.restarts", 5)?,
            tol: r.parse("kmeans.tol", 1e-6)?,
            standardize: r.parse_bool("kmeans.standardize", false)?,
        };

        r.finish()?;

        let cfg = ExperimentConfig {
            seed,
            data: DataSection {
                num_classes,
                n_train,
                n_val,
                n_test,
                modalities,
            },
            model: ModelSection {
                hidden_dims,
                embed_dims,
                unimodal_heads,
            },
            train,
            balance,
            probe,
            kmeans,
            raw,
        };
        cfg.dataset_spec().validate()?;
        cfg.model_spec().validate()?;
        cfg.train_config().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        Self::from_raw(RawConfig::load(path)?)
    }

    /// Replaces the seed, keeping the raw text in sync so the echoed config
    /// reparses to this exact configuration.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.raw.set("seed", &seed.to_string());
    }

    pub fn canonical_text(&self) -> String {
        self.raw.canonical_text()
    }

    pub fn hash(&self) -> String {
        self.raw.hash()
    }

    /// Dataset spec with its seed drawn from the master seed's `data`
    /// substream.
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            num_classes: self.data.num_classes,
            modalities: self.data.modalities.clone(),
            n_train: self.data.n_train,
            n_val: self.data.n_val,
            n_test: self.data.n_test,
            seed: substream_seed(self.seed, "data"),
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        let encoder_specs = self
            .data
            .modalities
            .iter()
            .enumerate()
            .map(|(k, m)| MlpSpec::new(m.dim, self.model.hidden_dims[k].clone(), self.model.embed_dims[k]))
            .collect();
        ModelSpec {
            encoder_specs,
            fusion: Fusion::Concat,
            num_classes: self.data.num_classes,
            unimodal_heads: self.model.unimodal_heads,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            momentum: self.train.momentum,
            seed: self.seed,
            balance: self.balance.clone(),
            eval_every: self.train.eval_every,
            kmeans: self.kmeans.clone(),
        }
    }

    pub fn probe_config(&self, modality: usize) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe.epochs,
            lr: self.probe.lr,
            momentum: self.probe.momentum,
            batch_size: self.probe.batch_size,
            seed: substream_seed_indexed(self.seed, "probe", modality as u64),
        }
    }

    pub fn mode(&self) -> &'static str {
        if self.balance.is_some() {
            "balanced"
        } else {
            "joint_training"
        }
    }
}

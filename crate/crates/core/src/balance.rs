//! Learning-state diagnosis and soft re-initialization.
//!
//! Per modality, k-means purity is measured independently on the train and
//! validation representations; the absolute purity gap is squashed into a
//! re-initialization strength `alpha` in [0, 1); and the encoder is pulled
//! toward its initial parameters by `(1 - alpha) * current + alpha * init`.
//! A larger gap always receives a larger alpha, so the better-learnt
//! modality experiences the greater re-initialization.

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, purity, KMeansConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::snapshot::{interpolate_params, ParamSnapshot};
use crate::rng::substream_seed;

/// Largest f64 strictly below 1, the exclusive upper bound on alpha.
const ALPHA_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Gap-to-strength squashing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquashKind {
    /// `tanh(lambda * gap)`, the default.
    Tanh,
    /// `min(lambda * gap, 1 - 1e-6)`, an alternative with the same
    /// zero-at-zero, monotone, bounded-below-one properties.
    ClippedLinear,
}

/// Balancing schedule and strength parameters.
///
/// Production configurations require `lambda > 1`; that bound is enforced at
/// the configuration boundary. The library itself accepts any finite
/// `lambda >= 0` so the no-op limit (`lambda = 0`) stays testable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    /// Diagnose-and-re-learn every `period_h` epochs.
    pub period_h: usize,
    pub lambda: f64,
    pub squash: SquashKind,
    /// Zero the velocity of re-initialized encoders.
    pub reset_momentum: bool,
}

impl BalanceConfig {
    pub fn new(period_h: usize, lambda: f64) -> Self {
        BalanceConfig {
            period_h,
            lambda,
            squash: SquashKind::Tanh,
            reset_momentum: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_h < 1 {
            return Err(Error::config("balance period must be >= 1".to_string()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::config(format!(
                "lambda {} must be finite and >= 0",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// One modality's diagnosed learning state at one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityDiagnosis {
    pub modality: usize,
    pub purity_train: f64,
    pub purity_val: f64,
    pub gap: f64,
    pub alpha: f64,
    /// Epoch of the event; carried alongside but not part of the
    /// per-record wire schema.
    #[serde(skip)]
    pub epoch: usize,
}

/// Absolute purity gap `|p_train - p_val|`. Both inputs must lie in (0, 1].
pub fn purity_gap(p_train: f64, p_val: f64) -> Result<f64> {
    for (name, p) in [("train", p_train), ("val", p_val)] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::input(format!(
                "{name} purity {p} outside (0, 1]"
            )));
        }
    }
    Ok((p_train - p_val).abs())
}

/// Maps a purity gap to a re-initialization strength in [0, 1).
///
/// Monotone non-decreasing in `gap` (and in `lambda` for gap > 0), zero at
/// zero gap.
pub fn strength(gap: f64, lambda: f64, squash: SquashKind) -> Result<f64> {
    if !(0.0..=1.0).contains(&gap) || gap.is_nan() {
        return Err(Error::input(format!("gap {gap} outside [0, 1]")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::input(format!("lambda {lambda} must be finite and >= 0")));
    }
    let raw = match squash {
        SquashKind::Tanh => (lambda * gap).tanh(),
        SquashKind::ClippedLinear => (lambda * gap).min(1.0 - 1e-6),
    };
    Ok(raw.min(ALPHA_MAX))
}

/// Diagnoses one modality: clusters train and validation features
/// independently (k = number of classes), measures both purities, and
/// composes the gap and strength.
///
/// The returned record has `modality` and `epoch` set to 0; callers that
/// track several modalities fill them in.
#[allow(clippy::too_many_arguments)]
pub fn diagnose_modality(
    train_feats: &Matrix,
    val_feats: &Matrix,
    train_labels: &[usize],
    val_labels: &[usize],
    num_classes: usize,
    kmeans_cfg: &KMeansConfig,
    balance_cfg: &BalanceConfig,
) -> Result<ModalityDiagnosis> {
    balance_cfg.validate()?;
    if train_feats.rows() != train_labels.len() || val_feats.rows() != val_labels.len() {
        return Err(Error::input(
            "features and labels are not row-aligned".to_string(),
        ));
    }
    // Independent clusterings: separate seeds for the two splits.
    let train_cfg = KMeansConfig {
        k: num_classes,
        seed: substream_seed(kmeans_cfg.seed, "train"),
        ..kmeans_cfg.clone()
    };
    let val_cfg = KMeansConfig {
        k: num_classes,
        seed: substream_seed(kmeans_cfg.seed, "val"),
        ..kmeans_cfg.clone()
    };
    let train_clusters = kmeans(train_feats, &train_cfg)?;
    let val_clusters = kmeans(val_feats, &val_cfg)?;
    let purity_train = purity(&train_clusters.assignments, train_labels, num_classes)?;
    let purity_val = purity(&val_clusters.assignments, val_labels, num_classes)?;
    let gap = purity_gap(purity_train, purity_val)?;
    let alpha = strength(gap, balance_cfg.lambda, balance_cfg.squash)?;
    Ok(ModalityDiagnosis {
        modality: 0,
        purity_train,
        purity_val,
        gap,
        alpha,
        epoch: 0,
    })
}

/// Applies soft re-initialization to every encoder according to its
/// diagnosis. Parameters outside the encoders are untouched. Encoders with
/// `alpha == 0` are skipped entirely, so a zero-strength event leaves both
/// parameters and optimizer state bit-identical.
pub fn apply_relearn(
    encoders: &mut [ParamSnapshot],
    inits: &[ParamSnapshot],
    velocities: &mut [ParamSnapshot],
    diagnoses: &[ModalityDiagnosis],
    cfg: &BalanceConfig,
) -> Result<()> {
    if encoders.len() != inits.len()
        || encoders.len() != velocities.len()
        || encoders.len() != diagnoses.len()
    {
        return Err(Error::config(format!(
            "apply_relearn: {} encoders, {} inits, {} velocities, {} diagnoses",
            encoders.len(),
            inits.len(),
            velocities.len(),
            diagnoses.len()
        )));
    }
    for (k, d) in diagnoses.iter().enumerate() {
        if d.modality != k {
            return Err(Error::config(format!(
                "diagnosis at position {k} is for modality {}",
                d.modality
            )));
        }
        if !(0.0..1.0).contains(&d.alpha) {
            return Err(Error::config(format!(
                "alpha {} for modality {k} outside [0, 1)",
                d.alpha
            )));
        }
    }
    for (k, d) in diagnoses.iter().enumerate() {
        if d.alpha == 0.0 {
            continue;
        }
        encoders[k] = interpolate_params(&encoders[k], &inits[k], d.alpha)?;
        if cfg.reset_momentum {
            velocities[k].zero();
        }
    }
    Ok(())
}

/// The periodic schedule: fires after the training step of every epoch `t`
/// with `t mod period == 0` (so the first event is at `t = 0`).
pub fn schedule_should_fire(epoch: usize, period_h: usize) -> bool {
    assert!(period_h >= 1, "schedule period must be >= 1");
    epoch % period_h == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    // High-precision reference values (25-digit evaluation).
    const TANH_1_5: f64 = 0.9051482536448664382423037;
    const TANH_7: f64 = 0.9999983369439446717357164;

    #[test]
    fn purity_gap_hand_cases() {
        assert!((purity_gap(0.9, 0.6).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(purity_gap(0.7, 0.7).unwrap(), 0.0);
        assert!((purity_gap(0.4, 0.7).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn purity_gap_rejects_out_of_range() {
        assert!(purity_gap(0.0, 0.5).is_err());
        assert!(purity_gap(0.5, 1.1).is_err());
    }

    #[test]
    fn strength_matches_high_precision_tanh() {
        assert_eq!(strength(0.0, 3.0, SquashKind::Tanh).unwrap(), 0.0);
        let a = strength(0.5, 3.0, SquashKind::Tanh).unwrap();
        assert!((a - TANH_1_5).abs() < 1e-12, "{a}");
        let b = strength(1.0, 7.0, SquashKind::Tanh).unwrap();
        assert!((b - TANH_7).abs() < 1e-12, "{b}");
    }

    #[test]
    fn strength_stays_below_one() {
        for squash in [SquashKind::Tanh, SquashKind::ClippedLinear] {
            for lambda in [0.0, 1.0, 3.0, 7.0, 50.0, 1e6] {
                let v = strength(1.0, lambda, squash).unwrap();
                assert!((0.0..1.0).contains(&v), "{squash:?} lambda {lambda}: {v}");
            }
        }
    }

    #[test]
    fn strength_monotone_in_gap_and_lambda() {
        for squash in [SquashKind::Tanh, SquashKind::ClippedLinear] {
            let mut prev = -1.0;
            for i in 0..=1000 {
                let gap = i as f64 / 1000.0;
                let v = strength(gap, 3.0, squash).unwrap();
                assert!(v >= prev, "{squash:?} not monotone at gap {gap}");
                prev = v;
            }
        }
        let lo = strength(0.4, 2.0, SquashKind::Tanh).unwrap();
        let hi = strength(0.4, 5.0, SquashKind::Tanh).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn alpha_zero_iff_gap_zero() {
        assert_eq!(strength(0.0, 3.0, SquashKind::Tanh).unwrap(), 0.0);
        for gap in [1e-9, 1e-3, 0.2, 1.0] {
            assert!(strength(gap, 3.0, SquashKind::Tanh).unwrap() > 0.0);
        }
    }

    #[test]
    fn strength_rejects_negative_gap() {
        assert!(matches!(
            strength(-0.1, 3.0, SquashKind::Tanh),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn schedule_fires_on_multiples_of_period() {
        assert!(schedule_should_fire(0, 20));
        assert!(!schedule_should_fire(19, 20));
        assert!(schedule_should_fire(40, 20));
        assert!(schedule_should_fire(5, 1));
    }

    fn snap(values: &[f64]) -> ParamSnapshot {
        let mut s = ParamSnapshot::new();
        s.push("w", vec![values.len()], values.to_vec()).unwrap();
        s
    }

    fn diag(modality: usize, alpha: f64) -> ModalityDiagnosis {
        ModalityDiagnosis {
            modality,
            purity_train: 1.0,
            purity_val: 1.0,
            gap: 0.0,
            alpha,
            epoch: 0,
        }
    }

    #[test]
    fn zero_alpha_leaves_everything_bit_identical() {
        let mut encoders = vec![snap(&[1.0, 2.0]), snap(&[3.0, 4.0])];
        let inits = vec![snap(&[0.0, 0.0]), snap(&[0.0, 0.0])];
        let mut velocities = vec![snap(&[0.5, 0.5]), snap(&[0.25, 0.25])];
        let before_enc = encoders.clone();
        let before_vel = velocities.clone();
        let cfg = BalanceConfig::new(1, 0.0);
        apply_relearn(
            &mut encoders,
            &inits,
            &mut velocities,
            &[diag(0, 0.0), diag(1, 0.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(encoders, before_enc);
        assert_eq!(velocities, before_vel);
    }

    #[test]
    fn near_one_alpha_approaches_init() {
        let mut encoders = vec![snap(&[10.0]), snap(&[10.0])];
        let inits = vec![snap(&[2.0]), snap(&[2.0])];
        let mut velocities = vec![snap(&[1.0]), snap(&[1.0])];
        let cfg = BalanceConfig::new(1, 3.0);
        apply_relearn(
            &mut encoders,
            &inits,
            &mut velocities,
            &[diag(0, ALPHA_MAX), diag(1, 0.0)],
            &cfg,
        )
        .unwrap();
        assert!((encoders[0].entries()[0].values[0] - 2.0).abs() < 1e-12);
        assert_eq!(encoders[1].entries()[0].values[0], 10.0);
        // reset_momentum zeroes only the re-initialized encoder's velocity
        assert_eq!(velocities[0].entries()[0].values[0], 0.0);
        assert_eq!(velocities[1].entries()[0].values[0], 1.0);
    }

    #[test]
    fn mixed_alphas_touch_only_their_encoders() {
        let mut encoders = vec![snap(&[2.0, 4.0]), snap(&[8.0, 16.0])];
        let inits = vec![snap(&[0.0, 0.0]), snap(&[0.0, 0.0])];
        let mut velocities = vec![snap(&[0.0, 0.0]), snap(&[0.0, 0.0])];
        let cfg = BalanceConfig::new(1, 3.0);
        apply_relearn(
            &mut encoders,
            &inits,
            &mut velocities,
            &[diag(0, 0.8), diag(1, 0.1)],
            &cfg,
        )
        .unwrap();
        // Elementwise recomputation: (1 - a) * cur + a * 0
        assert!((encoders[0].entries()[0].values[0] - 0.2 * 2.0).abs() < 1e-12);
        assert!((encoders[0].entries()[0].values[1] - 0.2 * 4.0).abs() < 1e-12);
        assert!((encoders[1].entries()[0].values[0] - 0.9 * 8.0).abs() < 1e-12);
        assert!((encoders[1].entries()[0].values[1] - 0.9 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn larger_gap_receives_larger_alpha() {
        let gaps = [0.05, 0.1, 0.3, 0.6, 0.9];
        for squash in [SquashKind::Tanh, SquashKind::ClippedLinear] {
            for lambda in [1.5, 3.0, 7.0] {
                for w in gaps.windows(2) {
                    let lo = strength(w[0], lambda, squash).unwrap();
                    let hi = strength(w[1], lambda, squash).unwrap();
                    assert!(hi >= lo);
                }
            }
        }
    }

    #[test]
    fn diagnosis_on_identical_splits_gives_zero_gap() {
        let feats = Matrix::from_vec(
            8,
            1,
            vec![0.0, 0.05, 0.1, 0.15, 5.0, 5.05, 5.1, 5.15],
        )
        .unwrap();
        let labels = vec![0usize, 0, 0, 0, 1, 1, 1, 1];
        let kcfg = KMeansConfig::new(2, 3);
        let bcfg = BalanceConfig::new(1, 3.0);
        let d = diagnose_modality(&feats, &feats, &labels, &labels, 2, &kcfg, &bcfg).unwrap();
        assert_eq!(d.gap, 0.0);
        assert_eq!(d.alpha, 0.0);
        assert_eq!(d.purity_train, 1.0);
    }

    #[test]
    fn diagnosis_composes_gap_and_strength() {
        // Train features cluster perfectly by label; validation features put
        // both labels in each blob, so purity_val = 0.5 and gap = 0.5.
        let train = Matrix::from_vec(4, 1, vec![0.0, 0.01, 9.0, 9.01]).unwrap();
        let train_labels = vec![0usize, 0, 1, 1];
        let val = Matrix::from_vec(4, 1, vec![0.0, 0.01, 9.0, 9.01]).unwrap();
        let val_labels = vec![0usize, 1, 0, 1];
        let kcfg = KMeansConfig::new(2, 5);
        let bcfg = BalanceConfig::new(1, 3.0);
        let d = diagnose_modality(&train, &val, &train_labels, &val_labels, 2, &kcfg, &bcfg).unwrap();
        assert_eq!(d.purity_train, 1.0);
        assert_eq!(d.purity_val, 0.5);
        assert!((d.gap - 0.5).abs() < 1e-15);
        assert!((d.alpha - TANH_1_5).abs() < 1e-12);
    }
}

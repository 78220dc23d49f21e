//! Lloyd's k-means over feature matrices and clustering purity.
//!
//! Alternates nearest-centroid assignment (Euclidean distance, ties broken
//! by lowest cluster index) with centroid recomputation until assignments
//! stabilize, the centroid shift drops below `tol`, or `max_iters` is
//! reached. Initial centroids are distinct samples drawn from the seeded
//! stream; the best of `restarts` runs by inertia is returned.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dist_sq, Matrix};
use crate::rng::substream_indexed;

/// K-means configuration. `k` is set to the class count when used for
/// learning-state diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Centroid-shift convergence threshold (max over clusters, Euclidean).
    pub tol: f64,
    /// Per-feature z-scoring before clustering. Off by default; when on,
    /// centroids and inertia are reported in the standardized space.
    pub standardize: bool,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iters: 100,
            restarts: 5,
            seed,
            tol: 1e-6,
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("kmeans k must be >= 1".to_string()));
        }
        if self.max_iters < 1 || self.restarts < 1 {
            return Err(Error::config(
                "kmeans max_iters and restarts must be >= 1".to_string(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::config(format!("kmeans tol {} must be >= 0", self.tol)));
        }
        Ok(())
    }
}

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster index per sample, in [0, k).
    pub assignments: Vec<usize>,
    /// k x d centroid matrix.
    pub centroids: Matrix,
    /// Sum of squared distances from samples to their assigned centroid.
    pub inertia: f64,
    /// Lloyd iterations executed.
    pub iterations: usize,
    /// True iff assignments stabilized or the centroid shift fell below tol.
    pub converged: bool,
}

fn nearest_centroid(sample: &[f64], centroids: &Matrix) -> usize {
    let mut best = 0usize;
    let mut best_d = dist_sq(sample, centroids.row(0));
    for m in 1..centroids.rows() {
        let d = dist_sq(sample, centroids.row(m));
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    best
}

/// Runs Lloyd iterations from explicit initial centroids.
///
/// Building block for [`kmeans`]; also usable directly to enumerate all
/// seeding choices on small instances.
pub fn lloyd_from_initial(
    features: &Matrix,
    initial_centroids: &Matrix,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterResult> {
    let n = features.rows();
    let k = initial_centroids.rows();
    if n < k {
        return Err(Error::input(format!("{n} samples but k = {k}")));
    }
    if initial_centroids.cols() != features.cols() {
        return Err(Error::input(format!(
            "centroid dim {} does not match feature dim {}",
            initial_centroids.cols(),
            features.cols()
        )));
    }
    if !features.is_finite() {
        return Err(Error::input("features contain non-finite values".to_string()));
    }

    let mut centroids = initial_centroids.clone();
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..max_iters {
        iterations += 1;

        // Assignment step: nearest centroid, ties to the lowest index.
        let mut changed = false;
        for i in 0..n {
            let a = nearest_centroid(features.row(i), &centroids);
            if a != assignments[i] {
                changed = true;
                assignments[i] = a;
            }
        }
        if !changed {
            converged = true;
            break;
        }

        // Update step: centroid = mean of members.
        let mut sums = Matrix::zeros(k, features.cols());
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let m = assignments[i];
            counts[m] += 1;
            let row = features.row(i);
            let dst = sums.row_mut(m);
            for c in 0..row.len() {
                dst[c] += row[c];
            }
        }
        let mut shift_sq = 0.0f64;
        let mut taken: Vec<usize> = Vec::new();
        for m in 0..k {
            if counts[m] > 0 {
                let inv = 1.0 / counts[m] as f64;
                let dst = sums.row_mut(m);
                for v in dst.iter_mut() {
                    *v *= inv;
                }
                shift_sq = shift_sq.max(dist_sq(sums.row(m), centroids.row(m)));
            } else {
                // Empty-cluster repair: reseed to the sample farthest from
                // its assigned centroid, keeping exactly k live clusters.
                let mut far_i = 0usize;
                let mut far_d = -1.0f64;
                for i in 0..n {
                    if taken.contains(&i) {
                        continue;
                    }
                    let d = dist_sq(features.row(i), centroids.row(assignments[i]));
                    if d > far_d {
                        far_d = d;
                        far_i = i;
                    }
                }
                taken.push(far_i);
                sums.row_mut(m).copy_from_slice(features.row(far_i));
                shift_sq = shift_sq.max(dist_sq(sums.row(m), centroids.row(m)));
            }
        }
        centroids = sums;

        if shift_sq.sqrt() < tol {
            converged = true;
            break;
        }
    }

    let mut inertia = 0.0;
    for i in 0..n {
        inertia += dist_sq(features.row(i), centroids.row(assignments[i]));
    }
    Ok(ClusterResult {
        assignments,
        centroids,
        inertia,
        iterations,
        converged,
    })
}

fn standardized(features: &Matrix) -> Matrix {
    let (n, d) = (features.rows(), features.cols());
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (c, v) in features.row(r).iter().enumerate() {
            mean[c] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for r in 0..n {
        for (c, v) in features.row(r).iter().enumerate() {
            let dv = v - mean[c];
            var[c] += dv * dv;
        }
    }
    let mut out = features.clone();
    for r in 0..n {
        let row = out.row_mut(r);
        for c in 0..d {
            let sd = (var[c] / n as f64).sqrt();
            row[c] = if sd > 0.0 { (row[c] - mean[c]) / sd } else { row[c] - mean[c] };
        }
    }
    out
}

/// Best-of-restarts k-means.
pub fn kmeans(features: &Matrix, cfg: &KMeansConfig) -> Result<ClusterResult> {
    cfg.validate()?;
    if features.rows() < cfg.k {
        return Err(Error::input(format!(
            "{} samples is fewer than k = {}",
            features.rows(),
            cfg.k
        )));
    }
    if !features.is_finite() {
        return Err(Error::input("features contain non-finite values".to_string()));
    }
    let work;
    let feats = if cfg.standardize {
        work = standardized(features);
        &work
    } else {
        features
    };

    let mut best: Option<ClusterResult> = None;
    for r in 0..cfg.restarts {
        let mut rng = substream_indexed(cfg.seed, "kmeans.init", r as u64);
        let picks = sample(&mut rng, feats.rows(), cfg.k).into_vec();
        let init = feats.select_rows(&picks);
        let result = lloyd_from_initial(feats, &init, cfg.max_iters, cfg.tol)?;
        let better = match &best {
            None => true,
            Some(b) => result.inertia < b.inertia,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Clustering purity against ground-truth labels:
/// `(1/N) * sum over clusters of the majority class count` within each
/// cluster. Value in (0, 1]; 1 iff every cluster is label-homogeneous.
pub fn purity(assignments: &[usize], labels: &[usize], num_classes: usize) -> Result<f64> {
    if assignments.is_empty() || labels.is_empty() {
        return Err(Error::input("purity of an empty clustering".to_string()));
    }
    if assignments.len() != labels.len() {
        return Err(Error::input(format!(
            "{} assignments but {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::input(format!(
                "label {y} at position {i} out of range for {num_classes} classes"
            )));
        }
    }
    let clusters = assignments.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; clusters * num_classes];
    for (&a, &y) in assignments.iter().zip(labels) {
        counts[a * num_classes + y] += 1;
    }
    let mut majority_sum = 0usize;
    for m in 0..clusters {
        majority_sum += counts[m * num_classes..(m + 1) * num_classes]
            .iter()
            .max()
            .copied()
            .unwrap_or(0);
    }
    Ok(majority_sum as f64 / assignments.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn two_well_separated_groups() {
        let feats = one_d(&[0.0, 0.1, 5.0, 5.1]);
        let cfg = KMeansConfig::new(2, 0);
        let res = kmeans(&feats, &cfg).unwrap();
        assert_eq!(res.assignments[0], res.assignments[1]);
        assert_eq!(res.assignments[2], res.assignments[3]);
        assert_ne!(res.assignments[0], res.assignments[2]);
        let mut cents = vec![res.centroids.get(0, 0), res.centroids.get(1, 0)];
        cents.sort_by(f64::total_cmp);
        assert!((cents[0] - 0.05).abs() < 1e-12);
        assert!((cents[1] - 5.05).abs() < 1e-12);
        // Exhaustive 2-partition minimum for this instance.
        assert!((res.inertia - 0.01).abs() < 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn k_equal_to_sample_count_gives_singletons() {
        let feats = one_d(&[1.0, 2.0, 4.0, 8.0]);
        let cfg = KMeansConfig::new(4, 3);
        let res = kmeans(&feats, &cfg).unwrap();
        let mut seen = res.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        assert!(res.inertia.abs() < 1e-18);
    }

    #[test]
    fn duplicated_dataset_keeps_centroids() {
        let base = one_d(&[0.0, 0.1, 5.0, 5.1]);
        let doubled = one_d(&[0.0, 0.1, 5.0, 5.1, 0.0, 0.1, 5.0, 5.1]);
        let cfg = KMeansConfig::new(2, 7);
        let a = kmeans(&base, &cfg).unwrap();
        let b = kmeans(&doubled, &cfg).unwrap();
        let mut ca = vec![a.centroids.get(0, 0), a.centroids.get(1, 0)];
        let mut cb = vec![b.centroids.get(0, 0), b.centroids.get(1, 0)];
        ca.sort_by(f64::total_cmp);
        cb.sort_by(f64::total_cmp);
        for (x, y) in ca.iter().zip(&cb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_too_few_samples_and_non_finite() {
        let feats = one_d(&[1.0, 2.0]);
        assert!(matches!(
            kmeans(&feats, &KMeansConfig::new(3, 0)),
            Err(Error::Input(_))
        ));
        let bad = one_d(&[1.0, f64::NAN, 2.0]);
        assert!(matches!(
            kmeans(&bad, &KMeansConfig::new(2, 0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn inertia_non_increasing_across_iterations() {
        // Same initial centroids, increasing iteration budgets.
        let feats = Matrix::from_vec(
            8,
            2,
            vec![
                0.0, 0.0, 0.2, -0.1, 3.0, 3.1, 2.9, 2.8, -1.0, 2.0, -1.2, 2.2, 5.0, -0.5, 5.2, -0.3,
            ],
        )
        .unwrap();
        let init = feats.select_rows(&[0, 1, 2]);
        let mut prev = f64::INFINITY;
        for iters in 1..=10 {
            let res = lloyd_from_initial(&feats, &init, iters, 0.0).unwrap();
            assert!(
                res.inertia <= prev + 1e-12,
                "inertia rose from {prev} to {} at {iters} iters",
                res.inertia
            );
            prev = res.inertia;
        }
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Two duplicate points as two initial centroids force an empty cluster.
        let feats = one_d(&[0.0, 0.0, 5.0, 9.0]);
        let init = feats.select_rows(&[0, 1]);
        let res = lloyd_from_initial(&feats, &init, 50, 0.0).unwrap();
        let mut seen = res.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 2, "repair must keep two live clusters");
    }

    #[test]
    fn purity_hand_cases() {
        assert_eq!(purity(&[0, 0, 1, 1], &[0, 0, 1, 1], 2).unwrap(), 1.0);
        assert_eq!(purity(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.5);
        assert_eq!(purity(&[0, 1, 2], &[0, 0, 1], 2).unwrap(), 1.0);
    }

    #[test]
    fn purity_rejects_bad_input() {
        assert!(purity(&[], &[], 2).is_err());
        assert!(purity(&[0, 1], &[0], 2).is_err());
        assert!(purity(&[0, 1], &[0, 5], 2).is_err());
    }

    #[test]
    fn kmeans_is_deterministic() {
        let feats = Matrix::from_vec(6, 2, vec![0.0, 0.0, 1.0, 1.0, 0.2, 0.1, 4.0, 4.0, 4.1, 3.9, 0.1, 0.3]).unwrap();
        let cfg = KMeansConfig::new(2, 42);
        let a = kmeans(&feats, &cfg).unwrap();
        let b = kmeans(&feats, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[cfg(test)]
mod purity_properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // Invariant under permutation of cluster indices and bijective
        // relabeling of classes.
        #[test]
        fn invariant_under_relabelings(
            pairs in proptest::collection::vec((0usize..4, 0usize..3), 1..40),
            cluster_perm in Just([2usize, 0, 3, 1]),
            class_perm in Just([1usize, 2, 0]),
        ) {
            let assignments: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let base = purity(&assignments, &labels, 3).unwrap();
            let permuted_a: Vec<usize> = assignments.iter().map(|&a| cluster_perm[a]).collect();
            let permuted_y: Vec<usize> = labels.iter().map(|&y| class_perm[y]).collect();
            let relabeled = purity(&permuted_a, &permuted_y, 3).unwrap();
            prop_assert!((base - relabeled).abs() < 1e-15);
        }

        // Invariant under consistent permutation of sample order.
        #[test]
        fn invariant_under_sample_order(
            pairs in proptest::collection::vec((0usize..4, 0usize..3), 2..40),
            seed in 0u64..1000,
        ) {
            let assignments: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let base = purity(&assignments, &labels, 3).unwrap();

            use rand::seq::SliceRandom;
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut crate::rng::substream(seed, "test.perm"));
            let pa: Vec<usize> = order.iter().map(|&i| assignments[i]).collect();
            let py: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            prop_assert!((base - purity(&pa, &py, 3).unwrap()).abs() < 1e-15);
        }

        // In (0, 1]; equals 1 iff every cluster is label-homogeneous.
        #[test]
        fn bounded_and_one_iff_homogeneous(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40),
        ) {
            let assignments: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let p = purity(&assignments, &labels, 3).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            let homogeneous = {
                let mut by_cluster: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                for (&a, &y) in assignments.iter().zip(&labels) {
                    by_cluster.entry(a).or_default().push(y);
                }
                by_cluster.values().all(|ys| ys.windows(2).all(|w| w[0] == w[1]))
            };
            prop_assert_eq!(p == 1.0, homogeneous);
        }
    }
}

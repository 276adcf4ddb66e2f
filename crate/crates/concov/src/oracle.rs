//! Vetting of generated inputs: norm-distance thresholds, an optional
//! local-outlier-factor post-filter over cosine distance, and the adversarial
//! verdict. Accepted inputs with a changed label are adversarial examples.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;
use crate::tensor::{norm_l0, norm_linf, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L0,
    Linf,
}

impl Norm {
    pub fn distance(&self, a: &Tensor, b: &Tensor) -> Result<f64> {
        match self {
            Norm::L0 => norm_l0(a, b),
            Norm::Linf => norm_linf(a, b),
        }
    }

    /// Default oracle threshold: 1/4 for L-infinity, a quarter of the input
    /// features (at least one) for L0.
    pub fn default_dthr(&self, n_features: usize) -> f64 {
        match self {
            Norm::Linf => 0.25,
            Norm::L0 => (n_features / 4).max(1) as f64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Norm::L0 => "L0",
            Norm::Linf => "Linf",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l0" => Ok(Norm::L0),
            "linf" => Ok(Norm::Linf),
            other => Err(Error::Input(format!(
                "unknown norm `{other}` (expected l0 or linf)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub norm: Norm,
    pub dthr: f64,
    pub lof_enabled: bool,
    pub lof_k: usize,
    pub lof_threshold: f64,
    pub lof_sample: usize,
}

impl OracleConfig {
    pub fn new(norm: Norm, n_features: usize) -> Self {
        OracleConfig {
            norm,
            dthr: norm.default_dthr(n_features),
            lof_enabled: false,
            lof_k: 20,
            lof_threshold: 1.5,
            lof_sample: 3000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dthr <= 0.0 {
            return Err(Error::Input(format!("distance threshold {} must be positive", self.dthr)));
        }
        if self.lof_enabled {
            if self.lof_k < 2 {
                return Err(Error::Input("LOF needs at least 2 neighbours".into()));
            }
            if self.lof_sample <= self.lof_k {
                return Err(Error::Input(format!(
                    "LOF sample size {} must exceed k = {}",
                    self.lof_sample, self.lof_k
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Distance,
    Outlier,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub accepted: bool,
    pub distance: f64,
    pub lof_score: Option<f64>,
    pub adversarial: bool,
    pub reject_reason: Option<RejectReason>,
}

// ---------------------------------------------------------------------------
// Local outlier factor (Breunig et al.) over cosine distance

fn cosine_distance(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fitted novelty estimator: k-distances and local reachability densities of
/// the sample are precomputed; scoring a query point is O(sample size).
#[derive(Debug, Clone)]
pub struct LofEstimator {
    points: Vec<Vec<f64>>,
    norms: Vec<f64>,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

/// Exactly the k nearest indices by (distance, index) order; ties break
/// toward the lower index.
fn k_nearest(dists: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dists.len()).filter(|&i| Some(i) != skip).collect();
    idx.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

impl LofEstimator {
    /// Fits on a sample; vectors must be nonzero for the cosine distance to
    /// be defined.
    pub fn fit(sample: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if sample.len() <= k {
            return Err(Error::Input(format!(
                "LOF sample of {} points cannot support k = {k}",
                sample.len()
            )));
        }
        let norms: Vec<f64> = sample.iter().map(|p| vec_norm(p)).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::Input(format!(
                "LOF sample point {i} is the zero vector; cosine distance undefined"
            )));
        }
        let n = sample.len();
        let dist_rows: Vec<Vec<f64>> = par::map_range(n, |i| {
            (0..n)
                .map(|j| cosine_distance(&sample[i], norms[i], &sample[j], norms[j]))
                .collect()
        });
        let mut neighbors = Vec::with_capacity(n);
        let mut k_distance = Vec::with_capacity(n);
        for i in 0..n {
            let nn = k_nearest(&dist_rows[i], k, Some(i));
            k_distance.push(dist_rows[i][*nn.last().expect("k >= 1")]);
            neighbors.push(nn);
        }
        let lrd: Vec<f64> = (0..n)
            .map(|i| {
                let sum: f64 = neighbors[i]
                    .iter()
                    .map(|&j| dist_rows[i][j].max(k_distance[j]))
                    .sum();
                if sum == 0.0 {
                    f64::INFINITY
                } else {
                    k as f64 / sum
                }
            })
            .collect();
        Ok(LofEstimator {
            points: sample,
            norms,
            k,
            k_distance,
            lrd,
        })
    }

    pub fn sample_len(&self) -> usize {
        self.points.len()
    }

    /// LOF of a query point against the fitted sample: the ratio of the
    /// neighbours' mean local reachability density to the query's own.
    /// Returns an error for zero vectors (cosine undefined).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let nx = vec_norm(x);
        if nx == 0.0 {
            return Err(Error::Input(
                "cannot score the zero vector under cosine distance".into(),
            ));
        }
        let dists: Vec<f64> = self
            .points
            .iter()
            .zip(&self.norms)
            .map(|(p, &np)| cosine_distance(x, nx, p, np))
            .collect();
        let nn = k_nearest(&dists, self.k, None);
        let reach_sum: f64 = nn.iter().map(|&j| dists[j].max(self.k_distance[j])).sum();
        let lrd_x = if reach_sum == 0.0 {
            f64::INFINITY
        } else {
            self.k as f64 / reach_sum
        };
        let lrd_nn_mean = nn.iter().map(|&j| self.lrd[j]).sum::<f64>() / self.k as f64;
        if lrd_x.is_infinite() && lrd_nn_mean.is_infinite() {
            // duplicated point inside an ultra-dense cluster
            return Ok(1.0);
        }
        Ok(lrd_nn_mean / lrd_x)
    }
}

/// Draws the LOF reference sample: the first `size` training inputs after a
/// seeded shuffle.
pub fn lof_training_sample(train: &[Tensor], size: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..train.len()).collect();
    Rng::new(seed ^ 0x10F).shuffle(&mut idx);
    idx.truncate(size);
    idx.iter().map(|&i| train[i].data().to_vec()).collect()
}

/// Applies the oracle to a generated input: distance threshold, optional LOF
/// filter, then the adversarial comparison of labels.
pub fn vet(
    cfg: &OracleConfig,
    lof: Option<&LofEstimator>,
    reference: &Tensor,
    reference_label: usize,
    generated: &Tensor,
    generated_label: usize,
) -> Result<Verdict> {
    let distance = cfg.norm.distance(reference, generated)?;
    if distance > cfg.dthr {
        return Ok(Verdict {
            accepted: false,
            distance,
            lof_score: None,
            adversarial: false,
            reject_reason: Some(RejectReason::Distance),
        });
    }
    let mut lof_score = None;
    if cfg.lof_enabled {
        if let Some(estimator) = lof {
            match estimator.score(generated.data()) {
                Ok(score) => {
                    lof_score = Some(score);
                    if score > cfg.lof_threshold {
                        return Ok(Verdict {
                            accepted: false,
                            distance,
                            lof_score,
                            adversarial: false,
                            reject_reason: Some(RejectReason::Outlier),
                        });
                    }
                }
                // zero vector: treated as an outlier
                Err(_) => {
                    return Ok(Verdict {
                        accepted: false,
                        distance,
                        lof_score: None,
                        adversarial: false,
                        reject_reason: Some(RejectReason::Outlier),
                    })
                }
            }
        }
    }
    Ok(Verdict {
        accepted: true,
        distance,
        lof_score,
        adversarial: generated_label != reference_label,
        reject_reason: None,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Direct transcription of the LOF formulas, quadratic and index-tied
    /// like the estimator but built independently from the definition.
    pub fn lof_brute_force(sample: &[Vec<f64>], query: &[f64], k: usize) -> f64 {
        let d = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (1.0 - dot / (vec_norm(a) * vec_norm(b))).clamp(0.0, 2.0)
        };
        let knn_of = |p: &[f64], skip: Option<usize>| {
            let mut order: Vec<usize> = (0..sample.len()).filter(|&i| Some(i) != skip).collect();
            order.sort_by(|&a, &b| {
                d(p, &sample[a]).total_cmp(&d(p, &sample[b])).then(a.cmp(&b))
            });
            order.truncate(k);
            order
        };
        let kdist = |i: usize| {
            let nn = knn_of(&sample[i], Some(i));
            d(&sample[i], &sample[*nn.last().unwrap()])
        };
        let lrd = |p: &[f64], skip: Option<usize>| {
            let nn = knn_of(p, skip);
            let s: f64 = nn.iter().map(|&j| d(p, &sample[j]).max(kdist(j))).sum();
            if s == 0.0 {
                f64::INFINITY
            } else {
                k as f64 / s
            }
        };
        let nn = knn_of(query, None);
        let num: f64 = nn.iter().map(|&j| lrd(&sample[j], Some(j))).sum::<f64>() / k as f64;
        let den = lrd(query, None);
        if num.is_infinite() && den.is_infinite() {
            1.0
        } else {
            num / den
        }
    }

    #[test]
    fn duplicated_point_scores_one() {
        let mut sample: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 2.0, 3.0]).collect();
        sample.push(vec![0.9, 2.1, 3.0]);
        let est = LofEstimator::fit(sample, 3).unwrap();
        let score = est.score(&[1.0, 2.0, 3.0]).unwrap();
        assert!((score - 1.0).abs() < 1e-9, "{score}");
    }

    #[test]
    fn far_point_matches_brute_force() {
        let mut rng = crate::rng::Rng::new(3);
        // 20-point cluster with one distant direction
        let sample: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![1.0 + rng.range(-0.05, 0.05), 1.0 + rng.range(-0.05, 0.05)])
            .collect();
        let est = LofEstimator::fit(sample.clone(), 3).unwrap();
        let far = [1.0, -0.8];
        let got = est.score(&far).unwrap();
        let expect = lof_brute_force(&sample, &far, 3);
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!(got > 1.5, "a far point should be an outlier, got {got}");
    }

    #[test]
    fn interior_grid_point_is_inlier() {
        // angular grid of directions; an interior direction has homogeneous density
        let sample: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = 0.3 + 0.02 * i as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let est = LofEstimator::fit(sample, 4).unwrap();
        let t: f64 = 0.3 + 0.02 * 14.5;
        let score = est.score(&[t.cos(), t.sin()]).unwrap();
        assert!((0.9..=1.1).contains(&score), "{score}");
    }

    #[test]
    fn cosine_scale_invariance() {
        let mut rng = crate::rng::Rng::new(8);
        let sample: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..4).map(|_| rng.range(0.1, 1.0)).collect())
            .collect();
        let est = LofEstimator::fit(sample, 5).unwrap();
        let x = [0.4, 0.2, 0.9, 0.5];
        let scaled: Vec<f64> = x.iter().map(|v| v * 7.3).collect();
        let a = est.score(&x).unwrap();
        let b = est.score(&scaled).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn zero_vector_rejected() {
        let sample: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64 + 1.0]).collect();
        let est = LofEstimator::fit(sample, 3).unwrap();
        assert!(est.score(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn vet_distance_and_adversarial_rules() {
        let cfg = OracleConfig {
            norm: Norm::Linf,
            dthr: 0.25,
            lof_enabled: false,
            lof_k: 20,
            lof_threshold: 1.5,
            lof_sample: 3000,
        };
        let x = Tensor::from_vec(vec![0.5, 0.5]).unwrap();
        // identical input: accepted, not adversarial
        let v = vet(&cfg, None, &x, 1, &x, 1).unwrap();
        assert!(v.accepted && !v.adversarial && v.distance == 0.0);
        // distance 0.3 > 0.25: rejected(distance)
        let mut far = x.clone();
        far.data_mut()[0] += 0.3;
        let v = vet(&cfg, None, &x, 1, &far, 1).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.reject_reason, Some(RejectReason::Distance));
        // close with flipped label: accepted adversarial
        let mut near = x.clone();
        near.data_mut()[0] += 0.1;
        let v = vet(&cfg, None, &x, 1, &near, 0).unwrap();
        assert!(v.accepted && v.adversarial);
        // adversarial implies accepted by construction
        assert!(!v.accepted || v.adversarial == (0 != 1));
    }

    #[test]
    fn vet_symmetric_and_monotone_in_distance() {
        let cfg = OracleConfig {
            norm: Norm::Linf,
            dthr: 0.25,
            lof_enabled: false,
            lof_k: 20,
            lof_threshold: 1.5,
            lof_sample: 3000,
        };
        let mut rng = crate::rng::Rng::new(12);
        for _ in 0..50 {
            let a = Tensor::from_vec(vec![rng.uniform(), rng.uniform()]).unwrap();
            let b = Tensor::from_vec(vec![rng.uniform(), rng.uniform()]).unwrap();
            let dab = cfg.norm.distance(&a, &b).unwrap();
            let dba = cfg.norm.distance(&b, &a).unwrap();
            assert_eq!(dab, dba);
            // shrinking the perturbation never flips accept -> reject
            let mid = Tensor::from_vec(
                a.data().iter().zip(b.data()).map(|(x, y)| x + 0.5 * (y - x)).collect(),
            )
            .unwrap();
            let v_full = vet(&cfg, None, &a, 0, &b, 0).unwrap();
            let v_half = vet(&cfg, None, &a, 0, &mid, 0).unwrap();
            if v_full.accepted {
                assert!(v_half.accepted);
            }
        }
    }

    #[test]
    fn lof_filter_rejects_outliers_in_vet() {
        let mut rng = crate::rng::Rng::new(21);
        let sample: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![1.0 + rng.range(-0.02, 0.02), 1.0 + rng.range(-0.02, 0.02)])
            .collect();
        let est = LofEstimator::fit(sample, 5).unwrap();
        let cfg = OracleConfig {
            norm: Norm::L0,
            dthr: 2.0,
            lof_enabled: true,
            lof_k: 5,
            lof_threshold: 1.5,
            lof_sample: 30,
        };
        let x = Tensor::from_vec(vec![1.0, 1.0]).unwrap();
        let outlier = Tensor::from_vec(vec![1.0, -0.5]).unwrap();
        let v = vet(&cfg, Some(&est), &x, 0, &outlier, 0).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.reject_reason, Some(RejectReason::Outlier));
        let inlier = Tensor::from_vec(vec![1.01, 0.99]).unwrap();
        let v = vet(&cfg, Some(&est), &x, 0, &inlier, 0).unwrap();
        assert!(v.accepted);
    }
}

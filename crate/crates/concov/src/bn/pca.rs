//! Per-layer linear feature extraction: principal components of the sample
//! covariance, with a deterministic sign convention so fitted projections are
//! reproducible.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// An affine projection onto the top principal components of a layer's
/// activations: `features = components * (v - mean)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// Row per extracted feature, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Fraction of total variance captured by each component.
    pub variance_ratios: Vec<f64>,
}

impl Projection {
    pub fn num_features(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn captured_variance(&self) -> f64 {
        self.variance_ratios.iter().sum()
    }

    /// Projects one activation vector; affine and therefore LP-encodable.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::Input(format!(
                "projection over {} neurons applied to a vector of length {}",
                self.mean.len(),
                v.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|row| {
                row.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect())
    }
}

/// Fits the top `num_features` principal components of `samples` (rows are
/// observations). Components are eigenvectors of the sample covariance
/// (denominator n-1) ordered by descending eigenvalue; each component's
/// largest-magnitude entry is made positive (lowest index on magnitude
/// ties). Errors when the sample has fewer nonzero-variance directions than
/// requested.
pub fn pca_fit(samples: &[Vec<f64>], num_features: usize) -> Result<Projection> {
    if num_features == 0 {
        return Err(Error::Input("at least one feature must be extracted".into()));
    }
    if samples.len() < 2 || samples.len() < num_features {
        return Err(Error::Input(format!(
            "{} samples are not enough to extract {num_features} features",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Input("samples have inconsistent lengths".into()));
    }
    if num_features > dim {
        return Err(Error::Input(format!(
            "cannot extract {num_features} features from {dim}-neuron activations"
        )));
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for s in samples {
        for i in 0..dim {
            let di = s[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let rank_tol = 1e-12 * eig.eigenvalues[order[0]].max(1.0);
    // eigenvalues below the rank tolerance are numerical noise; dropping
    // them keeps degenerate cases (all variance on a line) exact
    let clamped = |l: f64| if l > rank_tol { l } else { 0.0 };
    let total: f64 = eig.eigenvalues.iter().map(|&l| clamped(l)).sum();
    if total <= 0.0 {
        return Err(Error::Input("degenerate sample: zero total variance".into()));
    }
    let nonzero = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > rank_tol)
        .count();
    if nonzero < num_features {
        return Err(Error::Input(format!(
            "sample is rank-deficient: {nonzero} nonzero eigenvalues, {num_features} features requested"
        )));
    }

    let mut components = Vec::with_capacity(num_features);
    let mut variance_ratios = Vec::with_capacity(num_features);
    for &i in order.iter().take(num_features) {
        let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // sign convention: the entry of largest magnitude is positive
        let lead = row
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.abs().total_cmp(&b.abs()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
        components.push(row);
        variance_ratios.push(clamped(eig.eigenvalues[i]) / total);
    }
    Ok(Projection {
        mean,
        components,
        variance_ratios,
    })
}

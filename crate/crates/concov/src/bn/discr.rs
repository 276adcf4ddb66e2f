//! Discretization of extracted features into interval sets. Intervals follow
//! the half-open `[lo, hi)` convention; binning partitions the real line at
//! the stored cut points, so out-of-range values land in the outermost
//! intervals either way.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscrStrategy {
    Uniform,
    Quantile,
}

impl std::str::FromStr for DiscrStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DiscrStrategy::Uniform),
            "quantile" => Ok(DiscrStrategy::Quantile),
            other => Err(Error::Input(format!(
                "unknown discretization strategy `{other}` (expected uniform or quantile)"
            ))),
        }
    }
}

/// An ordered set of intervals over one feature. `boundaries` holds the m-1
/// cut points of m intervals; with `extended` the outermost intervals are
/// `(-inf, b_1)` and `[b_{m-1}, inf)` and the cut points include the fitted
/// range endpoints. Non-extended sets keep the fitted `range` for display.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalSet {
    pub boundaries: Vec<f64>,
    pub extended: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl IntervalSet {
    pub fn interval_count(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Interval index of a value: the number of cut points <= value.
    pub fn interval_index(&self, v: f64) -> usize {
        self.boundaries.iter().take_while(|&&b| b <= v).count()
    }

    /// Closed lower bound of interval `i`, when finite.
    pub fn lower(&self, i: usize) -> Option<f64> {
        if i == 0 {
            if self.extended {
                None
            } else {
                self.range.map(|(lo, _)| lo)
            }
        } else {
            Some(self.boundaries[i - 1])
        }
    }

    /// Open upper bound of interval `i`, when finite.
    pub fn upper(&self, i: usize) -> Option<f64> {
        if i == self.boundaries.len() {
            if self.extended {
                None
            } else {
                self.range.map(|(_, hi)| hi)
            }
        } else {
            Some(self.boundaries[i])
        }
    }

    /// Bounds of interval `i` as the binning sees them: cut points only, so
    /// the outermost intervals are unbounded. Lower bounds are closed, upper
    /// bounds open.
    pub fn bin_bounds(&self, i: usize) -> (Option<f64>, Option<f64>) {
        let lo = if i == 0 { None } else { Some(self.boundaries[i - 1]) };
        let hi = if i == self.boundaries.len() {
            None
        } else {
            Some(self.boundaries[i])
        };
        (lo, hi)
    }

    /// Distance from a value to interval `i` (zero inside), measured to the
    /// nearest boundary.
    pub fn distance(&self, i: usize, v: f64) -> f64 {
        if self.interval_index(v) == i {
            return 0.0;
        }
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.boundaries[i - 1] };
        let hi = if i == self.boundaries.len() { f64::INFINITY } else { self.boundaries[i] };
        if v < lo {
            lo - v
        } else {
            (v - hi).max(0.0)
        }
    }

    /// Renders interval `i` in the report style: `(-inf, -15.6)`,
    /// `[-15.6, 155)`, `[155, inf)`, with 3-significant-digit boundaries.
    pub fn format_interval(&self, i: usize) -> String {
        let lo = self.lower(i);
        let hi = self.upper(i);
        let open = |b: Option<f64>| b.map(format_sig3).unwrap_or_else(|| "inf".into());
        match lo {
            None => format!("(-inf, {})", open(hi)),
            Some(lo) => format!("[{}, {})", format_sig3(lo), open(hi)),
        }
    }
}

/// Rounds to 3 significant decimal digits and prints without trailing zeros:
/// 106.42 -> "106", -15.61 -> "-15.6", 0.0012345 -> "0.00123".
pub fn format_sig3(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let digits = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(2 - digits);
    let rounded = (v * scale).round() / scale;
    format!("{rounded}")
}

/// Fits an interval set over training values of one feature. `feature` only
/// labels error messages. Requires m >= 2 intervals (m >= 3 when extended)
/// and a non-degenerate value range.
pub fn discretize_fit(
    values: &[f64],
    m: usize,
    strategy: DiscrStrategy,
    extended: bool,
    feature: usize,
) -> Result<IntervalSet> {
    let min_m = if extended { 3 } else { 2 };
    if m < min_m {
        return Err(Error::Input(format!(
            "feature {feature}: {m} intervals requested, need at least {min_m}{}",
            if extended { " with extended discretization" } else { "" }
        )));
    }
    if values.is_empty() {
        return Err(Error::Input(format!("feature {feature}: no training values")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Err(Error::Input(format!(
            "feature {feature} is constant ({lo}); cannot discretize"
        )));
    }

    // Number of bounded intervals over [lo, hi].
    let inner = if extended { m - 2 } else { m };
    let cuts = match strategy {
        DiscrStrategy::Uniform => {
            let width = (hi - lo) / inner as f64;
            (1..inner).map(|i| lo + width * i as f64).collect::<Vec<f64>>()
        }
        DiscrStrategy::Quantile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            (1..inner)
                .map(|i| sorted[i * n / inner])
                .collect::<Vec<f64>>()
        }
    };
    let boundaries: Vec<f64> = if extended {
        std::iter::once(lo)
            .chain(cuts)
            .chain(std::iter::once(hi))
            .collect()
    } else {
        cuts
    };
    for w in boundaries.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Input(format!(
                "feature {feature}: interval boundaries are not strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
    }
    Ok(IntervalSet {
        boundaries,
        extended,
        range: if extended { None } else { Some((lo, hi)) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_three_bins_matches_observed_range() {
        let values: Vec<f64> = vec![-15.6, 0.0, 10.0, 155.0];
        let set = discretize_fit(&values, 3, DiscrStrategy::Uniform, true, 0).unwrap();
        assert_eq!(set.interval_count(), 3);
        assert_eq!(set.format_interval(0), "(-inf, -15.6)");
        assert_eq!(set.format_interval(1), "[-15.6, 155)");
        assert_eq!(set.format_interval(2), "[155, inf)");
        assert_eq!(set.interval_index(-100.0), 0);
        assert_eq!(set.interval_index(-15.6), 1);
        assert_eq!(set.interval_index(0.0), 1);
        assert_eq!(set.interval_index(155.0), 2);
        assert_eq!(set.interval_index(1e9), 2);
    }

    #[test]
    fn uniform_two_bins_midpoint() {
        let set = discretize_fit(&[0.0, 1.0], 2, DiscrStrategy::Uniform, false, 0).unwrap();
        assert_eq!(set.boundaries, vec![0.5]);
        assert_eq!(set.format_interval(0), "[0, 0.5)");
        assert_eq!(set.format_interval(1), "[0.5, 1)");
    }

    #[test]
    fn quantile_four_bins_even_counts() {
        // sort-and-count oracle: every interval holds exactly 2 of 1..=8
        let values: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let set = discretize_fit(&values, 4, DiscrStrategy::Quantile, false, 0).unwrap();
        let mut counts = vec![0usize; set.interval_count()];
        for &v in &values {
            counts[set.interval_index(v)] += 1;
        }
        assert_eq!(counts, vec![2, 2, 2, 2]);
        // oracle route: walk the sorted values and count bins directly
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let oracle: Vec<usize> = (0..4)
            .map(|b| {
                sorted
                    .iter()
                    .filter(|&&v| {
                        let after_lo = b == 0 || v >= set.boundaries[b - 1];
                        let before_hi = b == 3 || v < set.boundaries[b];
                        after_lo && before_hi
                    })
                    .count()
            })
            .collect();
        assert_eq!(counts, oracle);
    }

    #[test]
    fn constant_feature_errors_with_name() {
        let err = discretize_fit(&[2.0, 2.0], 3, DiscrStrategy::Uniform, true, 7)
            .unwrap_err()
            .to_string();
        assert!(err.contains("feature 7"), "{err}");
    }

    #[test]
    fn extended_needs_three_intervals() {
        assert!(discretize_fit(&[0.0, 1.0], 2, DiscrStrategy::Uniform, true, 0).is_err());
        assert!(discretize_fit(&[0.0, 1.0], 1, DiscrStrategy::Uniform, false, 0).is_err());
    }

    #[test]
    fn sig3_formatting_oracle() {
        assert_eq!(format_sig3(106.42), "106");
        assert_eq!(format_sig3(-15.61), "-15.6");
        assert_eq!(format_sig3(-3.128), "-3.13");
        assert_eq!(format_sig3(375.2), "375");
        assert_eq!(format_sig3(11.0), "11");
        assert_eq!(format_sig3(0.0012345), "0.00123");
        assert_eq!(format_sig3(-9.9), "-9.9");
        // brute-force digit-count oracle over random values
        let mut rng = crate::rng::Rng::new(5);
        for _ in 0..200 {
            let v = rng.range(-500.0, 500.0);
            if v == 0.0 {
                continue;
            }
            let s = format_sig3(v);
            let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
            let trimmed = digits.trim_start_matches('0');
            assert!(trimmed.len() <= 3, "{v} -> {s}");
        }
    }

    #[test]
    fn every_value_maps_to_exactly_one_interval() {
        let set = discretize_fit(&[-4.0, -1.0, 3.0, 9.0], 5, DiscrStrategy::Uniform, true, 0).unwrap();
        let mut rng = crate::rng::Rng::new(9);
        for _ in 0..500 {
            let v = rng.range(-20.0, 20.0);
            let idx = set.interval_index(v);
            assert!(idx < set.interval_count());
            assert_eq!(set.distance(idx, v), 0.0);
            for other in 0..set.interval_count() {
                if other != idx {
                    assert!(set.distance(other, v) > 0.0);
                }
            }
        }
    }
}

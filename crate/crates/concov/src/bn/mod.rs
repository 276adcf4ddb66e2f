//! Bayesian-network abstraction over hidden features: per-layer linear
//! projections, per-feature interval sets, a complete-bipartite layered
//! graph, and empirical count tables fitted from a test suite. Probabilities
//! are maximum-likelihood frequencies, so "rarely exercised" means an exact
//! zero count.

pub mod discr;
pub mod pca;

use crate::error::{Error, Result};
use crate::model::{ActivationTrace, Network};
use discr::IntervalSet;
use pca::Projection;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const ABSTR_FORMAT: &str = "concov-bnabstr-v1";

/// One abstracted layer: a projection and one interval set per feature.
#[derive(Debug, Clone)]
pub struct BnLayer {
    pub name: String,
    pub projection: Projection,
    pub intervals: Vec<IntervalSet>,
}

#[derive(Debug, Clone)]
pub struct BnAbstraction {
    pub layers: Vec<BnLayer>,
}

impl BnAbstraction {
    pub fn new(layers: Vec<BnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Input("abstraction needs at least one layer".into()));
        }
        for l in &layers {
            if l.intervals.len() != l.projection.num_features() {
                return Err(Error::Input(format!(
                    "layer `{}`: {} interval sets for {} features",
                    l.name,
                    l.intervals.len(),
                    l.projection.num_features()
                )));
            }
        }
        Ok(BnAbstraction { layers })
    }

    /// One node per (layer, feature).
    pub fn node_count(&self) -> usize {
        self.layers.iter().map(|l| l.projection.num_features()).sum()
    }

    /// Complete bipartite edges between consecutive layers' features.
    pub fn edge_count(&self) -> usize {
        self.layers
            .windows(2)
            .map(|w| w[0].projection.num_features() * w[1].projection.num_features())
            .sum()
    }

    /// Total number of (node, interval) entries.
    pub fn total_intervals(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.intervals.iter().map(|s| s.interval_count()))
            .sum()
    }

    /// Network layer indices corresponding to the abstracted layers.
    pub fn resolve_layers(&self, net: &Network) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .map(|l| {
                net.layer_index(&l.name)
                    .ok_or_else(|| Error::Model(format!("abstraction layer `{}` not in network", l.name)))
            })
            .collect()
    }

    /// Feature values per abstracted layer for one trace: the projection of
    /// the layer's post-activation output.
    pub fn features_of(&self, net: &Network, trace: &ActivationTrace) -> Result<Vec<Vec<f64>>> {
        let idx = self.resolve_layers(net)?;
        self.layers
            .iter()
            .zip(idx)
            .map(|(l, k)| l.projection.project(trace.layers[k].post.data()))
            .collect()
    }

    /// Interval index per (layer, feature) for given feature values.
    pub fn bin(&self, features: &[Vec<f64>]) -> Vec<Vec<u16>> {
        self.layers
            .iter()
            .zip(features)
            .map(|(l, f)| {
                l.intervals
                    .iter()
                    .zip(f)
                    .map(|(set, &v)| set.interval_index(v) as u16)
                    .collect()
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Count tables

/// Empirical counts: marginals per node interval, and for each non-root
/// layer a table keyed by the parent layer's full interval combination.
#[derive(Debug, Clone)]
pub struct BnCounts {
    /// marginals[layer][feature][interval]
    pub marginals: Vec<Vec<Vec<u64>>>,
    /// cond[layer-1]: parent combination -> per-feature interval counts
    pub cond: Vec<BTreeMap<Vec<u16>, Vec<Vec<u64>>>>,
    pub n_fitted: u64,
}

impl BnCounts {
    pub fn new(abstr: &BnAbstraction) -> Self {
        let marginals = abstr
            .layers
            .iter()
            .map(|l| l.intervals.iter().map(|s| vec![0u64; s.interval_count()]).collect())
            .collect();
        let cond = abstr.layers.iter().skip(1).map(|_| BTreeMap::new()).collect();
        BnCounts {
            marginals,
            cond,
            n_fitted: 0,
        }
    }

    /// Adds one test's interval combination to every table.
    pub fn add(&mut self, abstr: &BnAbstraction, bins: &[Vec<u16>]) {
        for (li, layer_bins) in bins.iter().enumerate() {
            for (fi, &b) in layer_bins.iter().enumerate() {
                self.marginals[li][fi][b as usize] += 1;
            }
            if li > 0 {
                let parent = bins[li - 1].clone();
                let entry = self.cond[li - 1].entry(parent).or_insert_with(|| {
                    abstr.layers[li]
                        .intervals
                        .iter()
                        .map(|s| vec![0u64; s.interval_count()])
                        .collect()
                });
                for (fi, &b) in layer_bins.iter().enumerate() {
                    entry[fi][b as usize] += 1;
                }
            }
        }
        self.n_fitted += 1;
    }

    /// Fraction of (node, interval) entries with a nonzero count. Increments
    /// are exact multiples of 1 / total_intervals.
    pub fn bfc_measure(&self, abstr: &BnAbstraction) -> f64 {
        let witnessed: usize = self
            .marginals
            .iter()
            .flat_map(|layer| layer.iter().flat_map(|f| f.iter().filter(|&&c| c > 0)))
            .count();
        witnessed as f64 / abstr.total_intervals() as f64
    }

    pub fn bfc_witnessed(&self) -> usize {
        self.marginals
            .iter()
            .flat_map(|layer| layer.iter().flat_map(|f| f.iter().filter(|&&c| c > 0)))
            .count()
    }

    /// Over all non-root nodes: of the (active parent combination, own
    /// interval) entries, the fraction with a nonzero joint count.
    pub fn bfdc_measure(&self, abstr: &BnAbstraction) -> Result<f64> {
        if abstr.layers.len() < 2 {
            return Err(Error::Input(
                "feature-dependence coverage needs at least two abstracted layers".into(),
            ));
        }
        let (num, den) = self.bfdc_counts(abstr);
        if den == 0 {
            return Ok(0.0);
        }
        Ok(num as f64 / den as f64)
    }

    /// (numerator, denominator) of the feature-dependence ratio.
    pub fn bfdc_counts(&self, abstr: &BnAbstraction) -> (u64, u64) {
        let mut num = 0u64;
        let mut den = 0u64;
        for (li, table) in self.cond.iter().enumerate() {
            let child = &abstr.layers[li + 1];
            let child_intervals: u64 = child.intervals.iter().map(|s| s.interval_count() as u64).sum();
            den += table.len() as u64 * child_intervals;
            for counts in table.values() {
                num += counts
                    .iter()
                    .flat_map(|f| f.iter().filter(|&&c| c > 0))
                    .count() as u64;
            }
        }
        (num, den)
    }
}

// ---------------------------------------------------------------------------
// Target selection

/// An unexercised abstraction entry to aim a search engine at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BnTarget {
    /// Unexercised marginal interval.
    Interval {
        layer: usize,
        feature: usize,
        interval: usize,
    },
    /// Unexercised conditional entry with an active parent combination.
    CptEntry {
        layer: usize,
        feature: usize,
        interval: usize,
        parent_combo: Vec<u16>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BnSelection {
    Target {
        target: BnTarget,
        /// Suite index of the candidate test.
        candidate: usize,
    },
    Exhausted,
}

/// Attempted (target, candidate) pairs, excluded from re-selection so the
/// loop rotates candidates instead of retrying a failed pair forever.
pub type AttemptedBfc = std::collections::BTreeSet<(usize, usize, usize, usize)>;
pub type AttemptedBfdc = std::collections::BTreeSet<(usize, usize, usize, Vec<u16>, usize)>;

/// Picks the first unexercised (layer, feature, interval) whose nearest
/// candidate exists; the candidate is the suite test whose projected feature
/// value is closest to the interval, skipping already-attempted pairs. Ties
/// break on (layer, feature, interval, test).
pub fn bfc_select_target(
    abstr: &BnAbstraction,
    counts: &BnCounts,
    suite_features: &[Vec<Vec<f64>>],
    attempted: &AttemptedBfc,
) -> BnSelection {
    for (li, layer) in abstr.layers.iter().enumerate() {
        for (fi, set) in layer.intervals.iter().enumerate() {
            for interval in 0..set.interval_count() {
                if counts.marginals[li][fi][interval] > 0 {
                    continue;
                }
                let mut best: Option<(f64, usize)> = None;
                for (ti, feats) in suite_features.iter().enumerate() {
                    if attempted.contains(&(li, fi, interval, ti)) {
                        continue;
                    }
                    let d = set.distance(interval, feats[li][fi]);
                    if best.map(|(b, _)| d < b).unwrap_or(true) {
                        best = Some((d, ti));
                    }
                }
                if let Some((_, ti)) = best {
                    return BnSelection::Target {
                        target: BnTarget::Interval {
                            layer: li,
                            feature: fi,
                            interval,
                        },
                        candidate: ti,
                    };
                }
            }
        }
    }
    BnSelection::Exhausted
}

/// Picks the first unexercised conditional entry whose parent combination is
/// active; the candidate is the test exhibiting that combination whose child
/// feature value is closest to the target interval.
pub fn bfdc_select_target(
    abstr: &BnAbstraction,
    counts: &BnCounts,
    suite_features: &[Vec<Vec<f64>>],
    suite_bins: &[Vec<Vec<u16>>],
    attempted: &AttemptedBfdc,
) -> BnSelection {
    for (ci, table) in counts.cond.iter().enumerate() {
        let li = ci + 1;
        let layer = &abstr.layers[li];
        for (fi, set) in layer.intervals.iter().enumerate() {
            for interval in 0..set.interval_count() {
                for (combo, table_counts) in table.iter() {
                    if table_counts[fi][interval] > 0 {
                        continue;
                    }
                    let mut best: Option<(f64, usize)> = None;
                    for (ti, feats) in suite_features.iter().enumerate() {
                        if &suite_bins[ti][li - 1] != combo {
                            continue;
                        }
                        if attempted.contains(&(li, fi, interval, combo.clone(), ti)) {
                            continue;
                        }
                        let d = set.distance(interval, feats[li][fi]);
                        if best.map(|(b, _)| d < b).unwrap_or(true) {
                            best = Some((d, ti));
                        }
                    }
                    if let Some((_, ti)) = best {
                        return BnSelection::Target {
                            target: BnTarget::CptEntry {
                                layer: li,
                                feature: fi,
                                interval,
                                parent_combo: combo.clone(),
                            },
                            candidate: ti,
                        };
                    }
                }
            }
        }
    }
    BnSelection::Exhausted
}

// ---------------------------------------------------------------------------
// Fitting

/// Fits projections and interval sets for the named layers over the traces
/// of the given training inputs. PCA fits run in parallel across layers;
/// `log` receives the per-layer progress lines.
#[allow(clippy::too_many_arguments)]
pub fn fit_abstraction(
    net: &Network,
    train: &[crate::tensor::Tensor],
    layer_names: &[String],
    num_features: usize,
    num_intervals: usize,
    strategy: discr::DiscrStrategy,
    extended: bool,
    log: &mut dyn FnMut(&str),
) -> Result<BnAbstraction> {
    if layer_names.is_empty() {
        return Err(Error::Input("abstraction needs at least one layer".into()));
    }
    let layer_idx: Vec<usize> = layer_names
        .iter()
        .map(|n| {
            net.layer_index(n)
                .ok_or_else(|| Error::Input(format!("no layer named `{n}`")))
        })
        .collect::<Result<_>>()?;
    let traces = crate::model::batch_forward_traces(net, train)?;

    // per-layer activation samples, then parallel PCA fits
    let samples: Vec<Vec<Vec<f64>>> = layer_idx
        .iter()
        .map(|&k| traces.iter().map(|t| t.layers[k].post.data().to_vec()).collect())
        .collect();
    let projections: Vec<Result<Projection>> =
        crate::par::map(&samples, |s| pca::pca_fit(s, num_features));

    let mut layers = Vec::with_capacity(layer_names.len());
    for ((name, sample), projection) in layer_names.iter().zip(&samples).zip(projections) {
        log(&format!("| Extracting and discretizing features for layer {name}..."));
        let projection = projection?;
        log(&format!("| Extracted {num_features} features"));
        let mut intervals = Vec::with_capacity(num_features);
        for fi in 0..num_features {
            let values: Vec<f64> = sample
                .iter()
                .map(|v| projection.project(v).map(|f| f[fi]))
                .collect::<Result<_>>()?;
            let set = discr::discretize_fit(&values, num_intervals, strategy, extended, fi)
                .map_err(|e| Error::Input(format!("layer `{name}`: {e}")))?;
            log(&format!(
                "| Discretization of feature {fi} involves {} intervals",
                set.interval_count()
            ));
            intervals.push(set);
        }
        log(&format!("| Discretized {num_features} features"));
        layers.push(BnLayer {
            name: name.clone(),
            projection,
            intervals,
        });
    }
    for layer in &layers {
        log(&format!(
            "| Captured variance ratio for layer {} is {:.2}%",
            layer.name,
            100.0 * layer.projection.captured_variance()
        ));
    }
    BnAbstraction::new(layers)
}

// ---------------------------------------------------------------------------
// Serialization and display

#[derive(Serialize, Deserialize)]
struct AbstrFile {
    format: String,
    layers: Vec<AbstrLayerFile>,
}

#[derive(Serialize, Deserialize)]
struct AbstrLayerFile {
    name: String,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    variance_ratios: Vec<f64>,
    intervals: Vec<IntervalSet>,
}

pub fn save_abstraction(abstr: &BnAbstraction, path: impl AsRef<Path>) -> Result<()> {
    let file = AbstrFile {
        format: ABSTR_FORMAT.into(),
        layers: abstr
            .layers
            .iter()
            .map(|l| AbstrLayerFile {
                name: l.name.clone(),
                mean: l.projection.mean.clone(),
                components: l.projection.components.clone(),
                variance_ratios: l.projection.variance_ratios.clone(),
                intervals: l.intervals.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Data(format!("abstraction serialization failed: {e}")))?;
    std::fs::write(path.as_ref(), json)
        .map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}

pub fn load_abstraction(path: impl AsRef<Path>) -> Result<BnAbstraction> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::io(path.as_ref().display().to_string(), e))?;
    let file: AbstrFile = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("malformed abstraction file: {e}")))?;
    if file.format != ABSTR_FORMAT {
        return Err(Error::Data(format!(
            "unsupported abstraction format `{}` (expected {ABSTR_FORMAT})",
            file.format
        )));
    }
    BnAbstraction::new(
        file.layers
            .into_iter()
            .map(|l| BnLayer {
                name: l.name,
                projection: Projection {
                    mean: l.mean,
                    components: l.components,
                    variance_ratios: l.variance_ratios,
                },
                intervals: l.intervals,
            })
            .collect(),
    )
}

/// Prints the feature/interval table in the `show` layout.
pub fn show(abstr: &BnAbstraction, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "===  Extracted Features and Associated Intervals  =============================="
    )?;
    let layer_w = abstr
        .layers
        .iter()
        .map(|l| l.name.len())
        .max()
        .unwrap_or(0)
        .max("Layer".len());
    writeln!(out, "{:layer_w$}  {:9}  Intervals", "Layer", "Feature")?;
    writeln!(
        out,
        "{}  {}  {}",
        "-".repeat(layer_w),
        "-".repeat(9),
        "-".repeat(41)
    )?;
    for layer in &abstr.layers {
        for (fi, set) in layer.intervals.iter().enumerate() {
            let name = if fi == 0 { layer.name.as_str() } else { "" };
            let ivals: Vec<String> = (0..set.interval_count()).map(|i| set.format_interval(i)).collect();
            writeln!(out, "{:layer_w$}  {:<9}  {}", name, fi, ivals.join(", "))?;
        }
    }
    Ok(())
}

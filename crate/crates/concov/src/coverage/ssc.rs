//! Sign-sign coverage: a (condition, decision) neuron pair is covered by two
//! tests that flip the signs of both neurons while the rest of the decision's
//! fan-in keeps its signs. The condition ratio `r` relaxes the accounting to
//! allow up to ceil(r * |fan-in|) flipped conditions per covering pair.
//!
//! Only pairs produced by (candidate, generated-test) executions are counted,
//! so the measure starts at zero regardless of the initial suite size.

use crate::error::{Error, Result};
use crate::model::{ActivationTrace, LayerKind, Network};
use std::collections::BTreeSet;

/// Fan-in geometry of a decision layer.
#[derive(Debug, Clone)]
pub enum FanIn {
    /// Dense decisions see the whole condition layer.
    Dense { n_conditions: usize },
    /// Conv decisions see their kernel receptive field.
    Conv {
        kernel_h: usize,
        kernel_w: usize,
        in_ch: usize,
        stride: usize,
        in_w: usize,
        out_w: usize,
        out_ch: usize,
    },
}

/// Pair bookkeeping for one decision layer and its condition layer.
#[derive(Debug, Clone)]
pub struct DecisionLayer {
    /// Network index of the decision ReLU layer.
    pub dec_layer: usize,
    /// Network index of the condition ReLU layer feeding it.
    pub cond_layer: usize,
    pub n_decisions: usize,
    pub fan_in: FanIn,
}

impl DecisionLayer {
    pub fn fan_in_size(&self) -> usize {
        match &self.fan_in {
            FanIn::Dense { n_conditions } => *n_conditions,
            FanIn::Conv {
                kernel_h, kernel_w, in_ch, ..
            } => kernel_h * kernel_w * in_ch,
        }
    }

    pub fn pair_count(&self) -> u64 {
        self.n_decisions as u64 * self.fan_in_size() as u64
    }

    /// Flat condition-layer indices in the fan-in of decision `dec`, in a
    /// fixed order (kernel scan order for conv).
    pub fn conditions_of(&self, dec: usize) -> Vec<usize> {
        match &self.fan_in {
            FanIn::Dense { n_conditions } => (0..*n_conditions).collect(),
            FanIn::Conv {
                kernel_h,
                kernel_w,
                in_ch,
                stride,
                in_w,
                out_w,
                out_ch,
            } => {
                let cell = dec / out_ch;
                let oy = cell / out_w;
                let ox = cell % out_w;
                let mut out = Vec::with_capacity(kernel_h * kernel_w * in_ch);
                for ky in 0..*kernel_h {
                    for kx in 0..*kernel_w {
                        let iy = oy * stride + ky;
                        let ix = ox * stride + kx;
                        for ic in 0..*in_ch {
                            out.push((iy * in_w + ix) * in_ch + ic);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Resolves decision layers (given as ReLU layers or the affine layers in
/// front of them) and checks each decision's direct fan-in is itself a ReLU
/// layer. Returns the per-layer pair bookkeeping.
pub fn enumerate_pairs(net: &Network, decision_relu_layers: &[usize]) -> Result<Vec<DecisionLayer>> {
    let mut out = Vec::new();
    for &dec in decision_relu_layers {
        if !matches!(net.layer(dec).kind, LayerKind::Relu) {
            return Err(Error::Input(format!(
                "decision layer `{}` is not a ReLU layer",
                net.layer(dec).name
            )));
        }
        if dec < 2 {
            return Err(Error::Input(format!(
                "decision layer `{}` has no preceding condition layer",
                net.layer(dec).name
            )));
        }
        let affine = dec - 1;
        let cond = dec - 2;
        if !matches!(net.layer(cond).kind, LayerKind::Relu) {
            return Err(Error::Input(format!(
                "decision layer `{}`: its fan-in `{}` does not come from a ReLU layer",
                net.layer(dec).name,
                net.layer(cond).name
            )));
        }
        let n_decisions = net.output_shape(dec).iter().product();
        let fan_in = match &net.layer(affine).kind {
            LayerKind::Dense { weights, .. } => FanIn::Dense {
                n_conditions: weights.shape()[0],
            },
            LayerKind::Conv2D { weights, stride, .. } => {
                let in_shape = net.layer_input_shape(affine);
                let out_shape = net.output_shape(affine);
                FanIn::Conv {
                    kernel_h: weights.shape()[0],
                    kernel_w: weights.shape()[1],
                    in_ch: weights.shape()[2],
                    stride: *stride,
                    in_w: in_shape[1],
                    out_w: out_shape[1],
                    out_ch: out_shape[2],
                }
            }
            _ => {
                return Err(Error::Input(format!(
                    "decision layer `{}` is not fed by a dense or conv layer",
                    net.layer(dec).name
                )))
            }
        };
        out.push(DecisionLayer {
            dec_layer: dec,
            cond_layer: cond,
            n_decisions,
            fan_in,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SscSelection {
    Target {
        layer_pos: usize,
        dec: usize,
        cond: usize,
        candidate: usize,
    },
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SscState {
    pub layers: Vec<DecisionLayer>,
    covered: Vec<BTreeSet<(u32, u32)>>, // (decision, condition)
    cond_ratio: f64,
}

fn sign(u: f64) -> bool {
    u > 0.0
}

impl SscState {
    /// `cond_ratio` in (0, 1]; with small ratios the accounting is the
    /// strict one-condition-flip criterion.
    pub fn new(layers: Vec<DecisionLayer>, cond_ratio: f64) -> Result<Self> {
        if !(cond_ratio > 0.0 && cond_ratio <= 1.0) {
            return Err(Error::Input(format!(
                "condition ratio {cond_ratio} outside (0, 1]"
            )));
        }
        let covered = layers.iter().map(|_| BTreeSet::new()).collect();
        Ok(SscState {
            layers,
            covered,
            cond_ratio,
        })
    }

    pub fn total_pairs(&self) -> u64 {
        self.layers.iter().map(|l| l.pair_count()).sum()
    }

    pub fn covered_pairs(&self) -> u64 {
        self.covered.iter().map(|s| s.len() as u64).sum()
    }

    pub fn measure(&self) -> f64 {
        let total = self.total_pairs();
        if total == 0 {
            return 0.0;
        }
        self.covered_pairs() as f64 / total as f64
    }

    fn max_flips(&self, fan_in: usize) -> usize {
        ((self.cond_ratio * fan_in as f64).ceil() as usize).max(1)
    }

    /// Records every pair covered by the (candidate, new-test) trace pair.
    pub fn update(&mut self, a: &ActivationTrace, b: &ActivationTrace) -> Result<usize> {
        let mut added = 0;
        for (li, dl) in self.layers.iter().enumerate() {
            let (ua, ub) = (
                a.layers
                    .get(dl.dec_layer)
                    .ok_or_else(|| Error::Input("trace does not cover decision layer".into()))?
                    .pre
                    .data(),
                b.layers[dl.dec_layer].pre.data(),
            );
            let (ca, cb) = (
                a.layers[dl.cond_layer].pre.data(),
                b.layers[dl.cond_layer].pre.data(),
            );
            if ua.len() != dl.n_decisions || ub.len() != dl.n_decisions {
                return Err(Error::Input("trace shape does not match decision layer".into()));
            }
            let max_flips = self.max_flips(dl.fan_in_size());
            for dec in 0..dl.n_decisions {
                if sign(ua[dec]) == sign(ub[dec]) {
                    continue;
                }
                let conditions = dl.conditions_of(dec);
                let flipped: Vec<usize> = conditions
                    .iter()
                    .copied()
                    .filter(|&c| sign(ca[c]) != sign(cb[c]))
                    .collect();
                if flipped.is_empty() || flipped.len() > max_flips {
                    continue;
                }
                for c in flipped {
                    if self.covered[li].insert((dec as u32, c as u32)) {
                        added += 1;
                    }
                }
            }
        }
        Ok(added)
    }

    pub fn is_covered(&self, layer_pos: usize, dec: usize, cond: usize) -> bool {
        self.covered[layer_pos].contains(&(dec as u32, cond as u32))
    }

    /// First uncovered pair in (layer, decision, condition) order; the
    /// candidate is the suite test whose condition pre-activation is closest
    /// to the sign boundary (lowest test index on ties). Already-attempted
    /// (pair, candidate) combinations are skipped.
    pub fn select_target(
        &self,
        suite_traces: &[ActivationTrace],
        attempted: &BTreeSet<(usize, u32, u32, usize)>,
    ) -> SscSelection {
        for (li, dl) in self.layers.iter().enumerate() {
            for dec in 0..dl.n_decisions {
                for cond in dl.conditions_of(dec) {
                    if self.is_covered(li, dec, cond) {
                        continue;
                    }
                    let mut best: Option<(f64, usize)> = None;
                    for (ti, t) in suite_traces.iter().enumerate() {
                        if attempted.contains(&(li, dec as u32, cond as u32, ti)) {
                            continue;
                        }
                        let m = t.layers[dl.cond_layer].pre.data()[cond].abs();
                        if best.map(|(b, _)| m < b).unwrap_or(true) {
                            best = Some((m, ti));
                        }
                    }
                    if let Some((_, ti)) = best {
                        return SscSelection::Target {
                            layer_pos: li,
                            dec,
                            cond,
                            candidate: ti,
                        };
                    }
                }
            }
        }
        SscSelection::Exhausted
    }
}

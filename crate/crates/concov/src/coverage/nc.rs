//! Neuron coverage: a neuron counts as activated when its pre-activation is
//! strictly positive on at least one recorded test.

use super::CoverageLayers;
use crate::error::{Error, Result};
use crate::model::ActivationTrace;

#[derive(Debug, Clone)]
pub struct NcState {
    layers: CoverageLayers,
    /// Witness mask per selected layer; bits only ever flip false -> true.
    witnessed: Vec<Vec<bool>>,
}

/// Outcome of target selection.
#[derive(Debug, Clone, PartialEq)]
pub enum NcSelection {
    Target {
        /// Network index of the ReLU layer.
        layer: usize,
        neuron: usize,
        /// Suite index of the candidate test.
        candidate: usize,
        /// Candidate's pre-activation at the target neuron.
        best_u: f64,
    },
    Exhausted,
}

impl NcState {
    pub fn new(layers: CoverageLayers) -> Self {
        let witnessed = layers.sizes.iter().map(|&n| vec![false; n]).collect();
        NcState { layers, witnessed }
    }

    pub fn layers(&self) -> &CoverageLayers {
        &self.layers
    }

    /// Fraction of selected neurons with an activation witness.
    pub fn measure(&self) -> f64 {
        let total = self.layers.total_neurons();
        if total == 0 {
            return 0.0;
        }
        self.covered_count() as f64 / total as f64
    }

    pub fn covered_count(&self) -> usize {
        self.witnessed
            .iter()
            .map(|mask| mask.iter().filter(|&&b| b).count())
            .sum()
    }

    /// Marks every neuron with `u > 0` in the trace. The measure is
    /// non-decreasing and updates commute (set union).
    pub fn update(&mut self, trace: &ActivationTrace) -> Result<()> {
        for (li, &layer) in self.layers.relu_layers.iter().enumerate() {
            let pre = trace
                .layers
                .get(layer)
                .ok_or_else(|| Error::Input("trace does not cover selected layers".into()))?
                .pre
                .data();
            if pre.len() != self.witnessed[li].len() {
                return Err(Error::Input(format!(
                    "trace layer {layer} has {} neurons, expected {}",
                    pre.len(),
                    self.witnessed[li].len()
                )));
            }
            for (bit, &u) in self.witnessed[li].iter_mut().zip(pre) {
                if u > 0.0 {
                    *bit = true;
                }
            }
        }
        Ok(())
    }

    /// Recomputes the measure from scratch over a set of traces; used to
    /// check that incremental accounting never drifts.
    pub fn recompute(layers: CoverageLayers, traces: &[ActivationTrace]) -> Result<f64> {
        let mut state = NcState::new(layers);
        for t in traces {
            state.update(t)?;
        }
        Ok(state.measure())
    }

    /// Picks the unwitnessed neuron and suite test whose pre-activation is
    /// maximal (closest to activation from below). Ties break on (layer
    /// order, neuron index, test index).
    pub fn select_target(&self, suite_traces: &[ActivationTrace]) -> NcSelection {
        let mut best: Option<(f64, usize, usize, usize)> = None; // (u, layer_pos, neuron, test)
        for (li, &layer) in self.layers.relu_layers.iter().enumerate() {
            for (neuron, &seen) in self.witnessed[li].iter().enumerate() {
                if seen {
                    continue;
                }
                for (ti, trace) in suite_traces.iter().enumerate() {
                    let u = trace.layers[layer].pre.data()[neuron];
                    let better = match &best {
                        None => true,
                        Some((bu, bl, bn, bt)) => {
                            u > *bu
                                || (u == *bu && (li, neuron, ti) < (*bl, *bn, *bt))
                        }
                    };
                    if better {
                        best = Some((u, li, neuron, ti));
                    }
                }
            }
        }
        match best {
            Some((u, li, neuron, ti)) => NcSelection::Target {
                layer: self.layers.relu_layers[li],
                neuron,
                candidate: ti,
                best_u: u,
            },
            None => NcSelection::Exhausted,
        }
    }
}

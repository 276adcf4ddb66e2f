//! Structural coverage criteria: neuron coverage (NC) and sign-sign coverage
//! (SSC), with bookkeeping and test-target selection.

pub mod nc;
pub mod ssc;

use crate::error::{Error, Result};
use crate::model::{LayerKind, Network};

/// A structural test target: either activate one neuron, or flip a
/// (condition, decision) pair across two ReLU layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuralTarget {
    Activate {
        /// Network index of the ReLU layer.
        layer: usize,
        neuron: usize,
    },
    SignSign {
        cond_layer: usize,
        cond: usize,
        dec_layer: usize,
        dec: usize,
    },
}

/// ReLU layers selected for structural coverage; neuron values are the
/// pre-activations entering each selected ReLU.
#[derive(Debug, Clone)]
pub struct CoverageLayers {
    /// Network indices of the selected ReLU layers, in network order.
    pub relu_layers: Vec<usize>,
    /// Neuron count per selected layer.
    pub sizes: Vec<usize>,
}

impl CoverageLayers {
    /// Resolves layer names to ReLU layers. A name may refer either to a
    /// ReLU layer or to a dense/conv layer directly followed by one (the
    /// usual way models name their computational layers). Names that do not
    /// output through ReLU are dropped and reported back to the caller.
    pub fn select(net: &Network, names: &[String]) -> Result<(Self, Vec<String>)> {
        let mut relu_layers = Vec::new();
        let mut dropped = Vec::new();
        for name in names {
            let k = net
                .layer_index(name)
                .ok_or_else(|| Error::Input(format!("no layer named `{name}`")))?;
            let resolved = match net.layer(k).kind {
                LayerKind::Relu => Some(k),
                LayerKind::Dense { .. } | LayerKind::Conv2D { .. }
                    if k + 1 < net.depth() && matches!(net.layer(k + 1).kind, LayerKind::Relu) =>
                {
                    Some(k + 1)
                }
                _ => None,
            };
            match resolved {
                Some(k) => relu_layers.push(k),
                None => dropped.push(name.clone()),
            }
        }
        relu_layers.sort_unstable();
        relu_layers.dedup();
        if relu_layers.is_empty() {
            return Err(Error::Input(
                "no selected layer outputs through a ReLU activation".into(),
            ));
        }
        let sizes = relu_layers
            .iter()
            .map(|&k| net.output_shape(k).iter().product())
            .collect();
        Ok((CoverageLayers { relu_layers, sizes }, dropped))
    }

    /// All ReLU layers of the network.
    pub fn all_relu(net: &Network) -> Result<Self> {
        let relu_layers: Vec<usize> = net
            .layers()
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l.kind, LayerKind::Relu))
            .map(|(k, _)| k)
            .collect();
        if relu_layers.is_empty() {
            return Err(Error::Input("network has no ReLU layers".into()));
        }
        let sizes = relu_layers
            .iter()
            .map(|&k| net.output_shape(k).iter().product())
            .collect();
        Ok(CoverageLayers { relu_layers, sizes })
    }

    pub fn total_neurons(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Formats a neuron index the way reports name them: a bare index for dense
/// layers, a `(row, col, channel)` triple for rank-3 layers.
pub fn format_neuron(shape: &[usize], flat: usize) -> String {
    if shape.len() == 3 {
        let (w, c) = (shape[1], shape[2]);
        let y = flat / (w * c);
        let x = (flat / c) % w;
        let ch = flat % c;
        format!("({y}, {x}, {ch})")
    } else {
        format!("{flat}")
    }
}

/// Reports name targets by the computational layer feeding the ReLU when
/// there is one.
pub fn display_layer_name(net: &Network, relu_layer: usize) -> &str {
    if relu_layer > 0 {
        let prev = net.layer(relu_layer - 1);
        if matches!(prev.kind, LayerKind::Dense { .. } | LayerKind::Conv2D { .. }) {
            return &prev.name;
        }
    }
    &net.layer(relu_layer).name
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_model;

    #[test]
    fn select_accepts_relu_and_affine_names() {
        let net = generate_model("dense:4,relu,dense:3,relu,dense:2,softmax", &[2], 0).unwrap();
        let (by_relu, dropped) =
            CoverageLayers::select(&net, &["activation".into(), "activation_1".into()]).unwrap();
        assert!(dropped.is_empty());
        let (by_affine, dropped) =
            CoverageLayers::select(&net, &["dense".into(), "dense_1".into()]).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(by_relu.relu_layers, by_affine.relu_layers);
        assert_eq!(by_relu.sizes, vec![4, 3]);
    }

    #[test]
    fn select_drops_non_relu_outputs() {
        let net = generate_model("dense:4,relu,dense:2,softmax", &[2], 0).unwrap();
        let (sel, dropped) =
            CoverageLayers::select(&net, &["dense".into(), "dense_1".into()]).unwrap();
        assert_eq!(sel.relu_layers.len(), 1);
        assert_eq!(dropped, vec!["dense_1".to_string()]);
    }

    #[test]
    fn unknown_layer_is_error() {
        let net = generate_model("dense:4,relu,dense:2,softmax", &[2], 0).unwrap();
        assert!(CoverageLayers::select(&net, &["nope".into()]).is_err());
    }

    #[test]
    fn neuron_formatting() {
        assert_eq!(format_neuron(&[100], 42), "42");
        assert_eq!(format_neuron(&[26, 26, 32], (1 * 26 + 4) * 32 + 27), "(1, 4, 27)");
    }
}

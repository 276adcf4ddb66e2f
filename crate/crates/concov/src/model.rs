//! Feed-forward network representation, inference with full activation
//! tracing, the portable JSON model format, and a deterministic model
//! generator that replaces externally trained checkpoints.
//!
//! Conventions: dense weights are indexed `[in][out]`, convolution weights
//! `[kh][kw][in_ch][out_ch]`, flattening is row-major over (height, width,
//! channel). Convolutions use valid padding only, with stride 1..=4.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub enum LayerKind {
    Dense {
        weights: Tensor, // [in, out]
        bias: Tensor,    // [out]
    },
    Conv2D {
        weights: Tensor, // [kh, kw, in_ch, out_ch]
        bias: Tensor,    // [out_ch]
        stride: usize,
    },
    MaxPool2D {
        pool_h: usize,
        pool_w: usize,
    },
    Flatten,
    Relu,
    Softmax,
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    /// Number of trainable parameters.
    pub fn param_count(&self) -> usize {
        match &self.kind {
            LayerKind::Dense { weights, bias } | LayerKind::Conv2D { weights, bias, .. } => {
                weights.len() + bias.len()
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    /// Output shape of each layer, precomputed at construction.
    output_shapes: Vec<Vec<usize>>,
}

/// Per-layer record of one forward pass: `pre` is the value entering the
/// layer's nonlinearity (for affine layers the affine result itself), `post`
/// the layer output. Max-pool layers also record, for every output cell, the
/// flat input index selected as the window maximum.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub pre: Tensor,
    pub post: Tensor,
    pub pool_sel: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub layers: Vec<LayerTrace>,
}

impl ActivationTrace {
    /// Pre-softmax class scores (the `pre` of the final softmax layer).
    pub fn scores(&self) -> &Tensor {
        &self.layers.last().expect("non-empty network").pre
    }

    pub fn label(&self) -> usize {
        self.scores().argmax()
    }
}

fn shape_product(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Model("network has no layers".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &layers {
            if !seen.insert(l.name.clone()) {
                return Err(Error::Model(format!("duplicate layer name `{}`", l.name)));
            }
        }
        let mut output_shapes = Vec::with_capacity(layers.len());
        let mut shape = input_shape.clone();
        for layer in &layers {
            shape = layer_output_shape(layer, &shape)?;
            output_shapes.push(shape.clone());
        }
        // Classification head: softmax over a dense output.
        match layers.last().map(|l| &l.kind) {
            Some(LayerKind::Softmax) => {}
            _ => {
                return Err(Error::Model(
                    "final layer must be softmax over a dense classification head".into(),
                ))
            }
        }
        let has_dense_head = layers
            .iter()
            .rev()
            .skip(1)
            .find(|l| !matches!(l.kind, LayerKind::Relu))
            .map(|l| matches!(l.kind, LayerKind::Dense { .. }))
            .unwrap_or(false);
        if !has_dense_head {
            return Err(Error::Model(
                "softmax output must be preceded by a dense layer".into(),
            ));
        }
        Ok(Network {
            input_shape,
            layers,
            output_shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_shape(&self, k: usize) -> &[usize] {
        &self.output_shapes[k]
    }

    /// Shape feeding layer `k`.
    pub fn layer_input_shape(&self, k: usize) -> &[usize] {
        if k == 0 {
            &self.input_shape
        } else {
            &self.output_shapes[k - 1]
        }
    }

    pub fn n_classes(&self) -> usize {
        shape_product(self.output_shapes.last().expect("non-empty"))
    }

    pub fn n_inputs(&self) -> usize {
        shape_product(&self.input_shape)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Pre-softmax class scores and predicted label (lowest index on ties).
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, usize)> {
        let trace = self.forward_trace(x)?;
        let scores = trace.scores().clone();
        let label = scores.argmax();
        Ok((scores, label))
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<ActivationTrace> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Input(format!(
                "input shape {:?} does not match network input {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut value = x.clone();
        for layer in &self.layers {
            let (pre, post, pool_sel) = apply_layer(layer, &value)?;
            value = post.clone();
            layers.push(LayerTrace { pre, post, pool_sel });
        }
        Ok(ActivationTrace { layers })
    }
}

/// Output shape of one layer given its input shape; errors describe the
/// offending layer by name.
pub fn layer_output_shape(layer: &Layer, input: &[usize]) -> Result<Vec<usize>> {
    let err = |msg: String| Error::Model(format!("layer `{}`: {msg}", layer.name));
    match &layer.kind {
        LayerKind::Dense { weights, bias } => {
            if weights.shape().len() != 2 {
                return Err(err(format!("dense weights must be rank 2, got {:?}", weights.shape())));
            }
            let (w_in, w_out) = (weights.shape()[0], weights.shape()[1]);
            if bias.shape() != [w_out] {
                return Err(err(format!(
                    "bias shape {:?} does not match output size {w_out}",
                    bias.shape()
                )));
            }
            if input.len() != 1 || input[0] != w_in {
                return Err(err(format!(
                    "input shape {input:?} does not match weight rows {w_in}"
                )));
            }
            Ok(vec![w_out])
        }
        LayerKind::Conv2D { weights, bias, stride } => {
            if weights.shape().len() != 4 {
                return Err(err(format!("conv weights must be rank 4, got {:?}", weights.shape())));
            }
            let (kh, kw, in_ch, out_ch) = (
                weights.shape()[0],
                weights.shape()[1],
                weights.shape()[2],
                weights.shape()[3],
            );
            if bias.shape() != [out_ch] {
                return Err(err(format!(
                    "bias shape {:?} does not match output channels {out_ch}",
                    bias.shape()
                )));
            }
            if !(1..=4).contains(stride) {
                return Err(err(format!("stride {stride} outside supported range 1..=4")));
            }
            if input.len() != 3 || input[2] != in_ch {
                return Err(err(format!(
                    "input shape {input:?} does not match kernel [{kh},{kw},{in_ch},{out_ch}]"
                )));
            }
            let (h, w) = (input[0], input[1]);
            if h < kh || w < kw || (h - kh) % stride != 0 || (w - kw) % stride != 0 {
                return Err(err(format!(
                    "valid-padding output dims of {h}x{w} input with {kh}x{kw} kernel, stride {stride} are not integral"
                )));
            }
            Ok(vec![(h - kh) / stride + 1, (w - kw) / stride + 1, out_ch])
        }
        LayerKind::MaxPool2D { pool_h, pool_w } => {
            if input.len() != 3 {
                return Err(err(format!("max-pool input must be rank 3, got {input:?}")));
            }
            let (h, w, c) = (input[0], input[1], input[2]);
            if h < *pool_h || w < *pool_w {
                return Err(err(format!("pool {pool_h}x{pool_w} larger than input {h}x{w}")));
            }
            Ok(vec![(h - pool_h) / pool_h + 1, (w - pool_w) / pool_w + 1, c])
        }
        LayerKind::Flatten => Ok(vec![shape_product(input)]),
        LayerKind::Relu | LayerKind::Softmax => Ok(input.to_vec()),
    }
}

fn apply_layer(layer: &Layer, input: &Tensor) -> Result<(Tensor, Tensor, Option<Vec<usize>>)> {
    match &layer.kind {
        LayerKind::Dense { weights, bias } => {
            let out = dense_forward(weights, bias, input)?;
            Ok((out.clone(), out, None))
        }
        LayerKind::Conv2D { weights, bias, stride } => {
            let out = conv2d_forward(weights, bias, *stride, input)?;
            Ok((out.clone(), out, None))
        }
        LayerKind::MaxPool2D { pool_h, pool_w } => {
            let (out, sel) = maxpool_forward(*pool_h, *pool_w, input);
            Ok((input.clone(), out, Some(sel)))
        }
        LayerKind::Flatten => {
            let out = input.reshape(vec![input.len()])?;
            Ok((input.clone(), out, None))
        }
        LayerKind::Relu => {
            let data = input.data().iter().map(|&u| u.max(0.0)).collect();
            let out = Tensor::new(input.shape().to_vec(), data)?;
            Ok((input.clone(), out, None))
        }
        LayerKind::Softmax => {
            let out = softmax(input)?;
            Ok((input.clone(), out, None))
        }
    }
}

fn dense_forward(weights: &Tensor, bias: &Tensor, input: &Tensor) -> Result<Tensor> {
    let n_in = weights.shape()[0];
    let n_out = weights.shape()[1];
    let w = weights.data();
    let v = input.data();
    let mut out = bias.data().to_vec();
    for h in 0..n_in {
        let vh = v[h];
        let row = &w[h * n_out..(h + 1) * n_out];
        for (o, wo) in out.iter_mut().zip(row) {
            *o += wo * vh;
        }
    }
    Tensor::new(vec![n_out], out)
}

fn conv2d_forward(weights: &Tensor, bias: &Tensor, stride: usize, input: &Tensor) -> Result<Tensor> {
    let (kh, kw, in_ch, out_ch) = (
        weights.shape()[0],
        weights.shape()[1],
        weights.shape()[2],
        weights.shape()[3],
    );
    let (h, w) = (input.shape()[0], input.shape()[1]);
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;
    let wd = weights.data();
    let vd = input.data();
    let mut out = vec![0.0; oh * ow * out_ch];
    for oy in 0..oh {
        for ox in 0..ow {
            let base = (oy * ow + ox) * out_ch;
            out[base..base + out_ch].copy_from_slice(bias.data());
            for ky in 0..kh {
                for kx in 0..kw {
                    let iy = oy * stride + ky;
                    let ix = ox * stride + kx;
                    let in_base = (iy * w + ix) * in_ch;
                    let w_base = (ky * kw + kx) * in_ch * out_ch;
                    for ic in 0..in_ch {
                        let vi = vd[in_base + ic];
                        let w_row = &wd[w_base + ic * out_ch..w_base + (ic + 1) * out_ch];
                        for oc in 0..out_ch {
                            out[base + oc] += w_row[oc] * vi;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, out_ch], out)
}

fn maxpool_forward(pool_h: usize, pool_w: usize, input: &Tensor) -> (Tensor, Vec<usize>) {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let oh = (h - pool_h) / pool_h + 1;
    let ow = (w - pool_w) / pool_w + 1;
    let vd = input.data();
    let mut out = vec![0.0; oh * ow * c];
    let mut sel = vec![0usize; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((oy * pool_h) * w + ox * pool_w) * c + ch;
                let mut best = vd[best_idx];
                for py in 0..pool_h {
                    for px in 0..pool_w {
                        let idx = ((oy * pool_h + py) * w + (ox * pool_w + px)) * c + ch;
                        if vd[idx] > best {
                            best = vd[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (oy * ow + ox) * c + ch;
                out[o] = best;
                sel[o] = best_idx;
            }
        }
    }
    (
        Tensor::new(vec![oh, ow, c], out).expect("pool output finite"),
        sel,
    )
}

fn softmax(input: &Tensor) -> Result<Tensor> {
    let max = input.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = input.data().iter().map(|&u| (u - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(input.shape().to_vec(), exps.iter().map(|e| e / sum).collect())
}

/// Traces for a batch of inputs; parallel across inputs when enabled.
pub fn batch_forward_traces(net: &Network, inputs: &[Tensor]) -> Result<Vec<ActivationTrace>> {
    par::map(inputs, |x| net.forward_trace(x))
        .into_iter()
        .collect()
}

/// Sequential twin of [`batch_forward_traces`], kept for benchmarking and as
/// the no-feature fallback body.
pub fn batch_forward_traces_seq(net: &Network, inputs: &[Tensor]) -> Result<Vec<ActivationTrace>> {
    par::map_seq(inputs, |x| net.forward_trace(x))
        .into_iter()
        .collect()
}

/// Predicted labels for a batch of inputs.
pub fn batch_labels(net: &Network, inputs: &[Tensor]) -> Result<Vec<usize>> {
    par::map(inputs, |x| net.forward(x).map(|(_, l)| l))
        .into_iter()
        .collect()
}

// ---------------------------------------------------------------------------
// Model file format (concov-model-v1)

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    r#in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_w: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    in_ch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_ch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool_h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool_w: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

pub const MODEL_FORMAT: &str = "concov-model-v1";

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let layers = net
        .layers()
        .iter()
        .map(|l| match &l.kind {
            LayerKind::Dense { weights, bias } => LayerFile {
                name: l.name.clone(),
                kind: "dense".into(),
                r#in: Some(weights.shape()[0]),
                out: Some(weights.shape()[1]),
                weights: Some(weights.data().to_vec()),
                bias: Some(bias.data().to_vec()),
                kernel_h: None,
                kernel_w: None,
                in_ch: None,
                out_ch: None,
                stride: None,
                pool_h: None,
                pool_w: None,
            },
            LayerKind::Conv2D { weights, bias, stride } => LayerFile {
                name: l.name.clone(),
                kind: "conv2d".into(),
                kernel_h: Some(weights.shape()[0]),
                kernel_w: Some(weights.shape()[1]),
                in_ch: Some(weights.shape()[2]),
                out_ch: Some(weights.shape()[3]),
                stride: Some(*stride),
                weights: Some(weights.data().to_vec()),
                bias: Some(bias.data().to_vec()),
                r#in: None,
                out: None,
                pool_h: None,
                pool_w: None,
            },
            LayerKind::MaxPool2D { pool_h, pool_w } => LayerFile {
                name: l.name.clone(),
                kind: "maxpool2d".into(),
                pool_h: Some(*pool_h),
                pool_w: Some(*pool_w),
                r#in: None,
                out: None,
                kernel_h: None,
                kernel_w: None,
                in_ch: None,
                out_ch: None,
                stride: None,
                weights: None,
                bias: None,
            },
            LayerKind::Flatten | LayerKind::Relu | LayerKind::Softmax => LayerFile {
                name: l.name.clone(),
                kind: match l.kind {
                    LayerKind::Flatten => "flatten",
                    LayerKind::Relu => "relu",
                    _ => "softmax",
                }
                .into(),
                r#in: None,
                out: None,
                kernel_h: None,
                kernel_w: None,
                in_ch: None,
                out_ch: None,
                stride: None,
                pool_h: None,
                pool_w: None,
                weights: None,
                bias: None,
            },
        })
        .collect();
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        input_shape: net.input_shape().to_vec(),
        layers,
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Model(format!("model serialization failed: {e}")))?;
    std::fs::write(path.as_ref(), json)
        .map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::io(path.as_ref().display().to_string(), e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("malformed model file: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Model(format!(
            "unsupported model format `{}` (expected {MODEL_FORMAT})",
            file.format
        )));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for lf in file.layers {
        let missing = |what: &str| Error::Model(format!("layer `{}`: missing {what}", lf.name));
        let kind = match lf.kind.as_str() {
            "dense" => {
                let n_in = lf.r#in.ok_or_else(|| missing("in"))?;
                let n_out = lf.out.ok_or_else(|| missing("out"))?;
                let weights = lf.weights.ok_or_else(|| missing("weights"))?;
                let bias = lf.bias.ok_or_else(|| missing("bias"))?;
                let weights = Tensor::new(vec![n_in, n_out], weights).map_err(|e| {
                    Error::Model(format!("layer `{}`: weights: {e}", lf.name))
                })?;
                let bias = Tensor::new(vec![n_out], bias)
                    .map_err(|e| Error::Model(format!("layer `{}`: bias: {e}", lf.name)))?;
                LayerKind::Dense { weights, bias }
            }
            "conv2d" => {
                let kh = lf.kernel_h.ok_or_else(|| missing("kernel_h"))?;
                let kw = lf.kernel_w.ok_or_else(|| missing("kernel_w"))?;
                let in_ch = lf.in_ch.ok_or_else(|| missing("in_ch"))?;
                let out_ch = lf.out_ch.ok_or_else(|| missing("out_ch"))?;
                let weights = lf.weights.ok_or_else(|| missing("weights"))?;
                let bias = lf.bias.ok_or_else(|| missing("bias"))?;
                let weights = Tensor::new(vec![kh, kw, in_ch, out_ch], weights).map_err(|e| {
                    Error::Model(format!("layer `{}`: weights: {e}", lf.name))
                })?;
                let bias = Tensor::new(vec![out_ch], bias)
                    .map_err(|e| Error::Model(format!("layer `{}`: bias: {e}", lf.name)))?;
                LayerKind::Conv2D {
                    weights,
                    bias,
                    stride: lf.stride.unwrap_or(1),
                }
            }
            "maxpool2d" => LayerKind::MaxPool2D {
                pool_h: lf.pool_h.ok_or_else(|| missing("pool_h"))?,
                pool_w: lf.pool_w.ok_or_else(|| missing("pool_w"))?,
            },
            "flatten" => LayerKind::Flatten,
            "relu" => LayerKind::Relu,
            "softmax" => LayerKind::Softmax,
            other => {
                return Err(Error::Model(format!(
                    "layer `{}`: unknown layer kind `{other}`",
                    lf.name
                )))
            }
        };
        layers.push(Layer {
            name: lf.name,
            kind,
        });
    }
    Network::new(file.input_shape, layers)
}

// ---------------------------------------------------------------------------
// Deterministic model generator

/// Builds a network from an architecture string such as
/// `"conv:3x3x32,relu,maxpool:2x2,flatten,dense:10,softmax"`. Parameters are
/// drawn from the seeded PRNG: biases uniform in [-0.5, 0.5], weights uniform
/// in [-1, 1] scaled by 1/sqrt(fan_in). Layer names follow the familiar
/// `conv2d`, `conv2d_1`, `activation`, ... numbering.
pub fn generate_model(spec: &str, input_shape: &[usize], seed: u64) -> Result<Network> {
    let mut rng = Rng::new(seed);
    let mut layers = Vec::new();
    let mut shape = input_shape.to_vec();
    let mut counters: std::collections::BTreeMap<&'static str, usize> = Default::default();
    let next_name = |base: &'static str, counters: &mut std::collections::BTreeMap<&str, usize>| {
        let n = counters.entry(base).or_insert(0);
        let name = if *n == 0 {
            base.to_string()
        } else {
            format!("{base}_{n}")
        };
        *n += 1;
        name
    };

    for token in spec.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err(Error::Input(format!("empty layer token in spec `{spec}`")));
        }
        let mut parts = token.split(':');
        let head = parts.next().unwrap();
        let kind = match head {
            "dense" => {
                let out: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Input(format!("dense layer needs a size: `{token}`")))?;
                if shape.len() != 1 {
                    return Err(Error::Input(format!(
                        "dense layer after shape {shape:?}; insert `flatten` first"
                    )));
                }
                let n_in = shape[0];
                let scale = 1.0 / (n_in as f64).sqrt();
                let weights: Vec<f64> = (0..n_in * out).map(|_| rng.range(-1.0, 1.0) * scale).collect();
                let bias: Vec<f64> = (0..out).map(|_| rng.range(-0.5, 0.5)).collect();
                LayerKind::Dense {
                    weights: Tensor::new(vec![n_in, out], weights)?,
                    bias: Tensor::new(vec![out], bias)?,
                }
            }
            "conv" => {
                let dims = parts
                    .next()
                    .ok_or_else(|| Error::Input(format!("conv layer needs KHxKWxOC: `{token}`")))?;
                let d: Vec<usize> = dims
                    .split('x')
                    .map(|s| s.parse().map_err(|_| Error::Input(format!("bad conv dims `{dims}`"))))
                    .collect::<Result<_>>()?;
                if d.len() != 3 {
                    return Err(Error::Input(format!("conv dims must be KHxKWxOC: `{token}`")));
                }
                let stride = match parts.next() {
                    Some(s) => s
                        .strip_prefix('s')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Input(format!("bad conv stride in `{token}`")))?,
                    None => 1,
                };
                if shape.len() != 3 {
                    return Err(Error::Input(format!(
                        "conv layer requires a rank-3 input, got shape {shape:?}"
                    )));
                }
                let (kh, kw, out_ch) = (d[0], d[1], d[2]);
                let in_ch = shape[2];
                let fan_in = kh * kw * in_ch;
                let scale = 1.0 / (fan_in as f64).sqrt();
                let weights: Vec<f64> = (0..kh * kw * in_ch * out_ch)
                    .map(|_| rng.range(-1.0, 1.0) * scale)
                    .collect();
                let bias: Vec<f64> = (0..out_ch).map(|_| rng.range(-0.5, 0.5)).collect();
                LayerKind::Conv2D {
                    weights: Tensor::new(vec![kh, kw, in_ch, out_ch], weights)?,
                    bias: Tensor::new(vec![out_ch], bias)?,
                    stride,
                }
            }
            "maxpool" => {
                let dims = parts
                    .next()
                    .ok_or_else(|| Error::Input(format!("maxpool needs PHxPW: `{token}`")))?;
                let d: Vec<usize> = dims
                    .split('x')
                    .map(|s| s.parse().map_err(|_| Error::Input(format!("bad pool dims `{dims}`"))))
                    .collect::<Result<_>>()?;
                if d.len() != 2 {
                    return Err(Error::Input(format!("maxpool dims must be PHxPW: `{token}`")));
                }
                LayerKind::MaxPool2D {
                    pool_h: d[0],
                    pool_w: d[1],
                }
            }
            "flatten" => LayerKind::Flatten,
            "relu" => LayerKind::Relu,
            "softmax" => LayerKind::Softmax,
            other => return Err(Error::Input(format!("unknown layer kind `{other}` in spec"))),
        };
        let name = match &kind {
            LayerKind::Dense { .. } => next_name("dense", &mut counters),
            LayerKind::Conv2D { .. } => next_name("conv2d", &mut counters),
            LayerKind::MaxPool2D { .. } => next_name("max_pooling2d", &mut counters),
            LayerKind::Flatten => next_name("flatten", &mut counters),
            LayerKind::Relu | LayerKind::Softmax => next_name("activation", &mut counters),
        };
        let layer = Layer { name, kind };
        shape = layer_output_shape(&layer, &shape)?;
        layers.push(layer);
    }
    Network::new(input_shape.to_vec(), layers)
}

/// One-line architecture summary, used by CLI diagnostics.
pub fn describe(net: &Network) -> String {
    let mut s = String::new();
    let _ = write!(s, "input {:?}", net.input_shape());
    for (k, l) in net.layers().iter().enumerate() {
        let _ = write!(s, " -> {} {:?}", l.name, net.output_shape(k));
    }
    s
}

//! Encodes the behaviour of a network around a candidate input as a linear
//! program: the candidate's ReLU signs and max-pool selections are fixed
//! (with the target's neurons flipped), giving an exact linear region, and
//! the L-infinity distance to the candidate is minimized subject to the
//! test target, input box bounds, and a sampled lower bound on the distance.

use super::problem::{LpProblem, Op, VarId};
use crate::error::{Error, Result};
use crate::model::{ActivationTrace, LayerKind, Network};
use crate::tensor::Tensor;

/// A target interval for an affine feature of one layer's output values:
/// `lo <= coeffs . v + offset < hi`. Upper bounds are open and encoded with
/// an epsilon margin.
#[derive(Debug, Clone)]
pub struct FeatureConstraint {
    /// Network layer index whose post-activation values are projected.
    pub layer: usize,
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

/// What the generated input must achieve, beyond staying in the candidate's
/// activation region.
#[derive(Debug, Clone)]
pub enum LpGoal {
    /// Flip the sign of these (ReLU layer, neuron) pre-activations.
    FlipSigns(Vec<(usize, usize)>),
    /// Steer affine features into target intervals (conjunction).
    FeatureIntervals(Vec<FeatureConstraint>),
}

impl LpGoal {
    pub fn depth(&self) -> usize {
        match self {
            LpGoal::FlipSigns(flips) => flips.iter().map(|&(k, _)| k).max().unwrap_or(0),
            LpGoal::FeatureIntervals(fcs) => fcs.iter().map(|fc| fc.layer).max().unwrap_or(0),
        }
    }

    fn flipped(&self, layer: usize, neuron: usize) -> bool {
        match self {
            LpGoal::FlipSigns(flips) => flips.iter().any(|&(k, n)| k == layer && n == neuron),
            LpGoal::FeatureIntervals(_) => false,
        }
    }
}

/// One layer value as the LP sees it: a variable or a known constant.
#[derive(Debug, Clone, Copy)]
enum Expr {
    Var(VarId),
    Const(f64),
}

pub struct Encoded {
    pub problem: LpProblem,
    pub input_vars: Vec<VarId>,
    pub dist_var: VarId,
    /// Deepest encoded network layer (inclusive).
    pub depth: usize,
}

/// Builds the LP for candidate `x` (with its trace) and a goal. `bounds` are
/// the dataset's per-feature input bounds, `eps` the activation margin, `lb`
/// the sampled lower bound on the distance.
pub fn encode(
    net: &Network,
    x: &Tensor,
    trace: &ActivationTrace,
    goal: &LpGoal,
    bounds: &[(f64, f64)],
    eps: f64,
    lb: f64,
) -> Result<Encoded> {
    let depth = goal.depth();
    if depth >= net.depth() {
        return Err(Error::Input(format!(
            "goal references layer {depth}, network has {}",
            net.depth()
        )));
    }
    let n_inputs = net.n_inputs();
    if bounds.len() != n_inputs || x.len() != n_inputs {
        return Err(Error::Input(format!(
            "{} input bounds for {} input features",
            bounds.len(),
            n_inputs
        )));
    }

    let mut p = LpProblem::new();
    let input_vars: Vec<VarId> = bounds.iter().map(|&(lo, hi)| p.add_var(lo, hi)).collect();
    let dist_var = p.add_var(lb.max(0.0), f64::INFINITY);

    // outputs of every encoded layer; index 0 holds the input itself
    let mut per_layer: Vec<Vec<Expr>> = Vec::with_capacity(depth + 2);
    per_layer.push(input_vars.iter().map(|&v| Expr::Var(v)).collect());

    for k in 0..=depth {
        let vals = per_layer.last().unwrap().clone();
        let layer = net.layer(k);
        let out = match &layer.kind {
            LayerKind::Dense { weights, bias } => {
                let n_in = weights.shape()[0];
                let n_out = weights.shape()[1];
                let w = weights.data();
                let mut out = Vec::with_capacity(n_out);
                for j in 0..n_out {
                    let u = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
                    let mut terms = vec![(u, 1.0)];
                    let mut rhs = bias.data()[j];
                    for (i, val) in vals.iter().enumerate().take(n_in) {
                        let wij = w[i * n_out + j];
                        match val {
                            Expr::Var(v) => terms.push((*v, -wij)),
                            Expr::Const(c) => rhs += wij * c,
                        }
                    }
                    p.add_constraint(terms, Op::Eq, rhs);
                    out.push(Expr::Var(u));
                }
                out
            }
            LayerKind::Conv2D { weights, bias, stride } => {
                let (kh, kw, in_ch, out_ch) = (
                    weights.shape()[0],
                    weights.shape()[1],
                    weights.shape()[2],
                    weights.shape()[3],
                );
                let in_shape = net.layer_input_shape(k);
                let (h, w_dim) = (in_shape[0], in_shape[1]);
                let oh = (h - kh) / stride + 1;
                let ow = (w_dim - kw) / stride + 1;
                let wd = weights.data();
                let mut out = Vec::with_capacity(oh * ow * out_ch);
                for oy in 0..oh {
                    for ox in 0..ow {
                        for oc in 0..out_ch {
                            let u = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
                            let mut terms = vec![(u, 1.0)];
                            let mut rhs = bias.data()[oc];
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = oy * stride + ky;
                                    let ix = ox * stride + kx;
                                    for ic in 0..in_ch {
                                        let wv = wd[((ky * kw + kx) * in_ch + ic) * out_ch + oc];
                                        match vals[(iy * w_dim + ix) * in_ch + ic] {
                                            Expr::Var(v) => terms.push((v, -wv)),
                                            Expr::Const(c) => rhs += wv * c,
                                        }
                                    }
                                }
                            }
                            p.add_constraint(terms, Op::Eq, rhs);
                            out.push(Expr::Var(u));
                        }
                    }
                }
                out
            }
            LayerKind::Relu => {
                let pre = trace.layers[k].pre.data();
                let mut out = Vec::with_capacity(vals.len());
                for (i, val) in vals.iter().enumerate() {
                    let active = (pre[i] > 0.0) != goal.flipped(k, i);
                    if active {
                        add_expr_bound(&mut p, *val, Op::Ge, eps);
                        out.push(*val);
                    } else {
                        add_expr_bound(&mut p, *val, Op::Le, -eps);
                        out.push(Expr::Const(0.0));
                    }
                }
                out
            }
            LayerKind::MaxPool2D { pool_h, pool_w } => {
                let sel = trace.layers[k]
                    .pool_sel
                    .as_ref()
                    .expect("pool trace carries selections");
                let in_shape = net.layer_input_shape(k);
                let (h, w_dim, c) = (in_shape[0], in_shape[1], in_shape[2]);
                let oh = (h - pool_h) / pool_h + 1;
                let ow = (w_dim - pool_w) / pool_w + 1;
                let mut out = Vec::with_capacity(oh * ow * c);
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let o = (oy * ow + ox) * c + ch;
                            let s = sel[o];
                            for py in 0..*pool_h {
                                for px in 0..*pool_w {
                                    let idx =
                                        ((oy * pool_h + py) * w_dim + (ox * pool_w + px)) * c + ch;
                                    if idx != s {
                                        add_expr_pair(&mut p, vals[s], vals[idx], Op::Ge);
                                    }
                                }
                            }
                            out.push(vals[s]);
                        }
                    }
                }
                out
            }
            LayerKind::Flatten => vals,
            LayerKind::Softmax => {
                return Err(Error::Input(format!(
                    "layer `{}`: softmax outputs cannot be encoded linearly",
                    layer.name
                )))
            }
        };
        per_layer.push(out);
    }

    if let LpGoal::FeatureIntervals(fcs) = goal {
        for fc in fcs {
            let exprs = &per_layer[fc.layer + 1];
            if fc.coeffs.len() != exprs.len() {
                return Err(Error::Input(format!(
                    "feature row of length {} against layer with {} values",
                    fc.coeffs.len(),
                    exprs.len()
                )));
            }
            let mut terms = Vec::new();
            let mut constant = fc.offset;
            for (c, e) in fc.coeffs.iter().zip(exprs) {
                match e {
                    Expr::Var(v) => terms.push((*v, *c)),
                    Expr::Const(k) => constant += c * k,
                }
            }
            if let Some(lo) = fc.lo {
                p.add_constraint(terms.clone(), Op::Ge, lo - constant);
            }
            if let Some(hi) = fc.hi {
                p.add_constraint(terms, Op::Le, hi - eps - constant);
            }
        }
    }

    // |x' - x| <= d
    for (i, &xv) in input_vars.iter().enumerate() {
        let xi = x.data()[i];
        p.add_constraint(vec![(xv, 1.0), (dist_var, -1.0)], Op::Le, xi);
        p.add_constraint(vec![(xv, -1.0), (dist_var, -1.0)], Op::Le, -xi);
    }
    p.set_objective(vec![(dist_var, 1.0)]);

    Ok(Encoded {
        problem: p,
        input_vars,
        dist_var,
        depth,
    })
}

fn add_expr_bound(p: &mut LpProblem, expr: Expr, op: Op, rhs: f64) {
    match expr {
        Expr::Var(v) => p.add_constraint(vec![(v, 1.0)], op, rhs),
        Expr::Const(c) => {
            let ok = match op {
                Op::Ge => c >= rhs,
                Op::Le => c <= rhs,
                Op::Eq => c == rhs,
            };
            if !ok {
                // constant violates the requirement: force infeasibility
                p.add_constraint(vec![], Op::Eq, 1.0);
            }
        }
    }
}

fn add_expr_pair(p: &mut LpProblem, a: Expr, b: Expr, op: Op) {
    match (a, b) {
        (Expr::Var(va), Expr::Var(vb)) => p.add_constraint(vec![(va, 1.0), (vb, -1.0)], op, 0.0),
        (Expr::Var(va), Expr::Const(cb)) => p.add_constraint(vec![(va, 1.0)], op, cb),
        (Expr::Const(ca), Expr::Var(vb)) => {
            let flipped = match op {
                Op::Ge => Op::Le,
                Op::Le => Op::Ge,
                Op::Eq => Op::Eq,
            };
            p.add_constraint(vec![(vb, 1.0)], flipped, ca)
        }
        (Expr::Const(ca), Expr::Const(cb)) => {
            let ok = match op {
                Op::Ge => ca >= cb,
                Op::Le => ca <= cb,
                Op::Eq => ca == cb,
            };
            if !ok {
                p.add_constraint(vec![], Op::Eq, 1.0);
            }
        }
    }
}

/// Checks a solved input against the encoded region and target: every ReLU
/// sign (with the goal's flips) holds with margin eps/2, pool selections
/// still attain their window maxima, features land in their intervals, and
/// the input respects its box bounds.
pub fn verify_solution(
    net: &Network,
    candidate: &ActivationTrace,
    goal: &LpGoal,
    x_new: &Tensor,
    bounds: &[(f64, f64)],
    eps: f64,
) -> Result<bool> {
    let depth = goal.depth();
    for (v, &(lo, hi)) in x_new.data().iter().zip(bounds) {
        if *v < lo - 1e-9 || *v > hi + 1e-9 {
            return Ok(false);
        }
    }
    let trace = net.forward_trace(x_new)?;
    for k in 0..=depth {
        match net.layer(k).kind {
            LayerKind::Relu => {
                let pre_c = candidate.layers[k].pre.data();
                let pre_n = trace.layers[k].pre.data();
                for i in 0..pre_c.len() {
                    let want_active = (pre_c[i] > 0.0) != goal.flipped(k, i);
                    let ok = if want_active {
                        pre_n[i] >= eps / 2.0
                    } else {
                        pre_n[i] <= -eps / 2.0
                    };
                    if !ok {
                        return Ok(false);
                    }
                }
            }
            LayerKind::MaxPool2D { .. } => {
                let sel = candidate.layers[k].pool_sel.as_ref().unwrap();
                let pre_n = trace.layers[k].pre.data();
                let post_n = trace.layers[k].post.data();
                for (o, &s) in sel.iter().enumerate() {
                    // the encoded selection must still attain the maximum
                    if pre_n[s] < post_n[o] - 1e-9 {
                        return Ok(false);
                    }
                }
            }
            _ => {}
        }
    }
    if let LpGoal::FeatureIntervals(fcs) = goal {
        for fc in fcs {
            let v = trace.layers[fc.layer].post.data();
            let f: f64 = fc.offset + fc.coeffs.iter().zip(v).map(|(c, x)| c * x).sum::<f64>();
            if let Some(lo) = fc.lo {
                if f < lo {
                    return Ok(false);
                }
            }
            if let Some(hi) = fc.hi {
                if f >= hi {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

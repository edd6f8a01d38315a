use std::sync::Arc;

use super::{FlexNetError, ModelParams, Pooling};
use crate::autodiff::{Tape, Tensor, Var};
use crate::channel::GainMatrix;
use crate::graphrep::FlexGraph;
use crate::objective::relaxed_sum_rate;
use crate::scalar::Scalar;

/// Relaxed model outputs for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T> {
    /// Per node, in `[0, p_max]`.
    pub power: Vec<T>,
    /// Per node, in `[0, 1]`; partners sum to one.
    pub direction: Vec<T>,
}

impl<T: Scalar> ForwardOutput<T> {
    /// Relaxed transmit indicator of the lower node of every pair.
    pub fn pair_directions(&self) -> Vec<T> {
        self.direction.iter().step_by(2).copied().collect()
    }
}

/// Several graphs packed as one disjoint union so a minibatch runs as a
/// handful of large matrix products.
pub(crate) struct GraphBatch<T> {
    n_vertices: usize,
    /// Vertex offset of each member graph, plus the total at the end.
    offsets: Vec<usize>,
    x1: Tensor<T>,
    edge_feat: Tensor<T>,
    edge_src: Arc<[usize]>,
    edge_dst: Arc<[usize]>,
    partner: Arc<[usize]>,
    lower: Arc<[usize]>,
    upper: Arc<[usize]>,
    /// Row of `[d_lower; d_upper]` holding each vertex's direction.
    interleave: Arc<[usize]>,
    p_max: Tensor<T>,
}

fn check_graph<T: Scalar>(graph: &FlexGraph<T>) -> Result<(), FlexNetError> {
    let n = graph.n_vertices;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(FlexNetError::DimensionMismatch(format!(
            "{n} vertices do not form pairs"
        )));
    }
    if graph.vertex_feature.len() != n || graph.intf_feature.len() != graph.intf_edges.len() {
        return Err(FlexNetError::DimensionMismatch(
            "feature counts disagree with the graph".into(),
        ));
    }
    if graph
        .intf_edges
        .iter()
        .any(|&(u, v)| u >= n || v >= n || u == v || u == v ^ 1)
    {
        return Err(FlexNetError::DimensionMismatch("malformed interference edge".into()));
    }
    Ok(())
}

impl<T: Scalar> GraphBatch<T> {
    pub(crate) fn new(graphs: &[&FlexGraph<T>]) -> Result<Self, FlexNetError> {
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        let (mut x1, mut p_max, mut edge_feat) = (Vec::new(), Vec::new(), Vec::new());
        let (mut src, mut dst, mut partner) = (Vec::new(), Vec::new(), Vec::new());
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        let mut base = 0;
        for g in graphs {
            check_graph(g)?;
            offsets.push(base);
            x1.extend_from_slice(&g.vertex_feature);
            p_max.extend(std::iter::repeat_n(g.p_max, g.n_vertices));
            edge_feat.extend_from_slice(&g.intf_feature);
            for &(u, v) in &g.intf_edges {
                src.push(base + u);
                dst.push(base + v);
            }
            partner.extend((0..g.n_vertices).map(|v| base + (v ^ 1)));
            for k in 0..g.n_vertices / 2 {
                lower.push(base + 2 * k);
                upper.push(base + 2 * k + 1);
            }
            base += g.n_vertices;
        }
        offsets.push(base);
        let n_pairs = lower.len();
        let interleave: Vec<usize> = (0..base)
            .map(|v| (v / 2) + if v % 2 == 0 { 0 } else { n_pairs })
            .collect();
        let n_edges = src.len();
        Ok(Self {
            n_vertices: base,
            offsets,
            x1: Tensor::column(x1),
            edge_feat: Tensor::new(n_edges, 1, edge_feat)?,
            edge_src: src.into(),
            edge_dst: dst.into(),
            partner: partner.into(),
            lower: lower.into(),
            upper: upper.into(),
            interleave: interleave.into(),
            p_max: Tensor::column(p_max),
        })
    }

    pub(crate) fn n_graphs(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Raw gains the loss is evaluated with, aligned to a [`GraphBatch`].
pub(crate) struct LossTerms<T> {
    edge_gain: Tensor<T>,
    desired_gain: Tensor<T>,
    inv_noise: Tensor<T>,
}

impl<T: Scalar> LossTerms<T> {
    pub(crate) fn new(pairs: &[(&FlexGraph<T>, &GainMatrix<T>)]) -> Result<Self, FlexNetError> {
        let (mut edge, mut desired, mut inv_noise) = (Vec::new(), Vec::new(), Vec::new());
        for (graph, g) in pairs {
            if g.n_nodes() != graph.n_vertices {
                return Err(FlexNetError::DimensionMismatch(format!(
                    "graph has {} vertices, gain matrix {} nodes",
                    graph.n_vertices,
                    g.n_nodes()
                )));
            }
            edge.extend(graph.intf_edges.iter().map(|&(u, v)| g.gain(v, u)));
            desired.extend((0..g.n_nodes()).map(|v| g.gain(v, v ^ 1)));
            inv_noise.extend(g.noise_powers().iter().map(|&s| T::one() / s));
        }
        let n_edges = edge.len();
        Ok(Self {
            edge_gain: Tensor::new(n_edges, 1, edge)?,
            desired_gain: Tensor::column(desired),
            inv_noise: Tensor::column(inv_noise),
        })
    }
}

/// Tape handles of the parameters, in [`ModelParams::tensors`] order.
pub(crate) fn bind_params<T: Scalar>(tape: &mut Tape<T>, params: &ModelParams<T>, trainable: bool) -> Vec<Var> {
    params
        .tensors()
        .into_iter()
        .map(|t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
        .collect()
}

fn pool<T: Scalar>(
    tape: &mut Tape<T>,
    pooling: Pooling,
    x: Var,
    group: Arc<[usize]>,
    n_groups: usize,
) -> Result<Var, FlexNetError> {
    Ok(match pooling {
        Pooling::Sum => tape.sum_pool(x, group, n_groups)?,
        Pooling::Max => tape.max_pool(x, group, n_groups)?,
    })
}

/// `w2 · relu(w1 · relu(w0 · x + b0) + b1) + b2`, row-wise.
fn head<T: Scalar>(tape: &mut Tape<T>, x: Var, vars: &[Var]) -> Result<Var, FlexNetError> {
    let mut h = x;
    for i in 0..3 {
        let z = tape.matmul(h, vars[2 * i])?;
        let z = tape.add_row(z, vars[2 * i + 1])?;
        h = if i < 2 { tape.relu(z) } else { z };
    }
    Ok(h)
}

/// Records the forward pass; returns per-vertex power and direction, both
/// `V × 1`.
pub(crate) fn forward_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    batch: &GraphBatch<T>,
    params: &ModelParams<T>,
    vars: &[Var],
) -> Result<(Var, Var), FlexNetError> {
    let n = batch.n_vertices;
    let x1 = tape.constant(batch.x1.clone());
    let edge_feat = tape.constant(batch.edge_feat.clone());
    let mut x = x1;
    for l in 0..params.n_layers() {
        let w = &vars[5 * l..5 * l + 5];
        let from_src = tape.matmul(x, w[0])?;
        let from_dst = tape.matmul(x, w[1])?;
        let from_edge = tape.matmul(edge_feat, w[2])?;
        let a = tape.gather_rows(from_src, batch.edge_src.clone())?;
        let b = tape.gather_rows(from_dst, batch.edge_dst.clone())?;
        let msg = tape.add(a, b)?;
        let msg = tape.add(msg, from_edge)?;
        let msg = tape.relu(msg);
        let alpha_intf = pool(tape, params.pooling, msg, batch.edge_dst.clone(), n)?;
        let c = tape.concat_cols(x1, alpha_intf)?;

        // the desired neighborhood is the single partner, so pooling over
        // it is the identity for either choice of pooling
        let from_partner = tape.matmul(c, w[3])?;
        let from_self = tape.matmul(c, w[4])?;
        let from_partner = tape.gather_rows(from_partner, batch.partner.clone())?;
        let alpha_dsr = tape.add(from_partner, from_self)?;
        let alpha_dsr = tape.relu(alpha_dsr);
        x = tape.concat_cols(x1, alpha_dsr)?;
    }

    let base = 5 * params.n_layers();
    let p_out = head(tape, x, &vars[base..base + 6])?;
    let p_out = tape.scale(p_out, T::one() / params.temperature_power);
    let p_unit = tape.sigmoid(p_out);
    let p_max = tape.constant(batch.p_max.clone());
    let power = tape.mul(p_unit, p_max)?;

    let lo = tape.gather_rows(x, batch.lower.clone())?;
    let hi = tape.gather_rows(x, batch.upper.clone())?;
    let both = tape.concat_cols(lo, hi)?;
    let d_out = head(tape, both, &vars[base + 6..base + 12])?;
    let d_out = tape.scale(d_out, T::one() / params.temperature_direction);
    let d_lo = tape.sigmoid(d_out);
    let d_hi = tape.scale(d_lo, -T::one());
    let d_hi = tape.add_scalar(d_hi, T::one());
    let stacked = tape.concat_rows(d_lo, d_hi)?;
    let direction = tape.gather_rows(stacked, batch.interleave.clone())?;
    Ok((power, direction))
}

/// Mean negative relaxed sum-rate over the batch, as a `1 × 1` node.
///
/// Each rate is written as `log2(1 + (I + S)/σ²) − log2(1 + I/σ²)`, which
/// equals `log2(1 + S/(σ² + I))` and needs no division on the tape.
pub(crate) fn loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    batch: &GraphBatch<T>,
    terms: &LossTerms<T>,
    power: Var,
    direction: Var,
) -> Result<Var, FlexNetError> {
    let active = tape.mul(power, direction)?;
    let edge_gain = tape.constant(terms.edge_gain.clone());
    let desired_gain = tape.constant(terms.desired_gain.clone());
    let inv_noise = tape.constant(terms.inv_noise.clone());

    let from_src = tape.gather_rows(active, batch.edge_src.clone())?;
    let received = tape.mul(from_src, edge_gain)?;
    let interference = tape.sum_pool(received, batch.edge_dst.clone(), batch.n_vertices)?;
    let from_partner = tape.gather_rows(active, batch.partner.clone())?;
    let signal = tape.mul(from_partner, desired_gain)?;

    let total = tape.add(interference, signal)?;
    let total = tape.mul(total, inv_noise)?;
    let total = tape.log2_1p(total);
    let noise_only = tape.mul(interference, inv_noise)?;
    let noise_only = tape.log2_1p(noise_only);
    let rate = tape.sub(total, noise_only)?;
    let rate = tape.sum_all(rate);
    Ok(tape.scale(rate, -T::one() / T::of(batch.n_graphs() as f64)))
}

/// Relaxed power and direction for every node of `graph`.
pub fn forward<T: Scalar>(graph: &FlexGraph<T>, params: &ModelParams<T>) -> Result<ForwardOutput<T>, FlexNetError> {
    let batch = GraphBatch::new(&[graph])?;
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params, false);
    let (p, d) = forward_on_tape(&mut tape, &batch, params, &vars)?;
    Ok(ForwardOutput {
        power: tape.value(p).data().to_vec(),
        direction: tape.value(d).data().to_vec(),
    })
}

/// Training loss of one network: the negated relaxed sum-rate.
pub fn loss<T: Scalar>(g: &GainMatrix<T>, out: &ForwardOutput<T>) -> Result<T, FlexNetError> {
    relaxed_sum_rate(g, &out.power, &out.direction)
        .map(|r| -r)
        .map_err(|e| FlexNetError::DimensionMismatch(e.to_string()))
}

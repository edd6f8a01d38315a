//! Dual-edge graph of a flexible-duplex network.
//!
//! One vertex per node carrying the (normalized) gain of its desired link;
//! undirected desired edges between partners; a directed interference edge
//! `u → v` for every node `u` that is neither `v` nor its partner, carrying
//! the normalized gain `g[v][u]` as heard at the destination.
//!
//! Raw gains span many orders of magnitude, so features are mapped to
//! `log10(1 + g · p_max / σ²) / 10`, an SNR-like quantity in bels scaled to
//! roughly unit range.

use serde::{Deserialize, Serialize};

use crate::channel::GainMatrix;
use crate::scalar::Scalar;

/// Divisor keeping typical features (0 to about 15 bels) near unit scale.
const FEATURE_SCALE: f64 = 10.0;

/// Constants of the feature transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm<T> {
    pub p_max: T,
    pub noise: T,
}

impl<T: Scalar> FeatureNorm<T> {
    /// Power budget and mean noise power of `g`.
    pub fn from_gains(g: &GainMatrix<T>) -> Self {
        let noise = g.noise_powers().iter().copied().sum::<T>() / T::of(g.n_nodes() as f64);
        Self {
            p_max: g.p_max(),
            noise,
        }
    }

    #[inline]
    pub fn apply(&self, gain: T) -> T {
        (T::one() + gain * self.p_max / self.noise).log10() / T::of(FEATURE_SCALE)
    }

    pub fn cast<U: Scalar>(&self) -> FeatureNorm<U> {
        FeatureNorm {
            p_max: U::of(self.p_max.to_f64_lossy()),
            noise: U::of(self.noise.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexGraph<T> {
    pub n_vertices: usize,
    pub vertex_feature: Vec<T>,
    /// `(2k, 2k + 1)` for every pair.
    pub desired_edges: Vec<(usize, usize)>,
    /// Directed `(src, dst)`, grouped by destination in ascending order.
    pub intf_edges: Vec<(usize, usize)>,
    pub intf_feature: Vec<T>,
    pub norm: FeatureNorm<T>,
    /// Power budget of the instance (scales the power head).
    pub p_max: T,
}

impl<T: Scalar> FlexGraph<T> {
    pub fn n_pairs(&self) -> usize {
        self.n_vertices / 2
    }
}

/// Graph of `g` normalized with its own power budget and noise.
pub fn build_graph<T: Scalar>(g: &GainMatrix<T>) -> FlexGraph<T> {
    build_graph_with(g, FeatureNorm::from_gains(g))
}

/// Graph of `g` under an externally fixed feature transform, e.g. the one a
/// model was trained with.
pub fn build_graph_with<T: Scalar>(g: &GainMatrix<T>, norm: FeatureNorm<T>) -> FlexGraph<T> {
    let n = g.n_nodes();
    let vertex_feature = (0..n).map(|v| norm.apply(g.gain(v, v ^ 1))).collect();
    let desired_edges = (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    let mut intf_edges = Vec::with_capacity(n * n.saturating_sub(2));
    let mut intf_feature = Vec::with_capacity(n * n.saturating_sub(2));
    for dst in 0..n {
        for src in 0..n {
            if src != dst && src != dst ^ 1 {
                intf_edges.push((src, dst));
                intf_feature.push(norm.apply(g.gain(dst, src)));
            }
        }
    }
    FlexGraph {
        n_vertices: n,
        vertex_feature,
        desired_edges,
        intf_edges,
        intf_feature,
        norm,
        p_max: g.p_max(),
    }
}

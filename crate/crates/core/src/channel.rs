//! Channel gains from geometry: free-space path loss, log-normal
//! shadowing and Rayleigh fading, each drawn independently per ordered
//! node pair so the resulting channel is non-reciprocal.

use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from};
use crate::scalar::Scalar;
use crate::topology::{NetworkTopology, TopologyError};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("expected a positive value for {what}, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },
    #[error("invalid gain matrix: {0}")]
    InvalidGains(String),
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Squared channel magnitudes `g[n][k] = |h_{n,k}|²` (gain from node `k`
/// into node `n`) for a `2N`-node network, with per-node noise power and
/// the common power budget. The diagonal is unused and held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix<T> {
    n_nodes: usize,
    gains: Vec<T>,
    noise: Vec<T>,
    p_max: T,
}

impl<T: Scalar> GainMatrix<T> {
    /// Builds a gain matrix from row-major entries. Diagonal entries are
    /// overwritten with zero.
    pub fn new(n_nodes: usize, mut gains: Vec<T>, noise: Vec<T>, p_max: T) -> Result<Self, ChannelError> {
        if n_nodes < 2 || !n_nodes.is_multiple_of(2) {
            return Err(ChannelError::InvalidGains(format!(
                "node count must be even and at least 2, got {n_nodes}"
            )));
        }
        if gains.len() != n_nodes * n_nodes {
            return Err(ChannelError::InvalidGains(format!(
                "expected {} entries, got {}",
                n_nodes * n_nodes,
                gains.len()
            )));
        }
        if noise.len() != n_nodes {
            return Err(ChannelError::InvalidGains(format!(
                "expected {n_nodes} noise powers, got {}",
                noise.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !g.is_finite() || **g < T::zero()) {
            return Err(ChannelError::InvalidGains(format!(
                "gain {g} is negative or not finite"
            )));
        }
        if noise.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(ChannelError::InvalidGains("noise powers must be positive".into()));
        }
        if !(p_max.is_finite() && p_max > T::zero()) {
            return Err(ChannelError::InvalidGains(format!(
                "power budget must be positive, got {p_max}"
            )));
        }
        for n in 0..n_nodes {
            gains[n * n_nodes + n] = T::zero();
        }
        Ok(Self {
            n_nodes,
            gains,
            noise,
            p_max,
        })
    }

    /// Same noise power at every node.
    pub fn with_uniform_noise(n_nodes: usize, gains: Vec<T>, noise: T, p_max: T) -> Result<Self, ChannelError> {
        Self::new(n_nodes, gains, vec![noise; n_nodes], p_max)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_pairs(&self) -> usize {
        self.n_nodes / 2
    }

    /// Gain from node `from` into node `to`.
    #[inline]
    pub fn gain(&self, to: usize, from: usize) -> T {
        self.gains[to * self.n_nodes + from]
    }

    /// Everything node `to` hears, indexed by source.
    pub fn row(&self, to: usize) -> &[T] {
        &self.gains[to * self.n_nodes..(to + 1) * self.n_nodes]
    }

    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    pub fn noise(&self, n: usize) -> T {
        self.noise[n]
    }

    pub fn noise_powers(&self) -> &[T] {
        &self.noise
    }

    pub fn p_max(&self) -> T {
        self.p_max
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GainMatrix<U> {
        let conv = |x: &T| U::of(x.to_f64_lossy());
        GainMatrix {
            n_nodes: self.n_nodes,
            gains: self.gains.iter().map(conv).collect(),
            noise: self.noise.iter().map(conv).collect(),
            p_max: U::of(self.p_max.to_f64_lossy()),
        }
    }

    /// Relabels user pairs: new pair `k` is old pair `order[k]`, with the
    /// two nodes of each pair kept in place.
    pub fn permute_pairs(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n_pairs(), "pair permutation has wrong length");
        let node_map: Vec<usize> = order.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let n = self.n_nodes;
        let mut gains = vec![T::zero(); n * n];
        for (new_to, &old_to) in node_map.iter().enumerate() {
            for (new_from, &old_from) in node_map.iter().enumerate() {
                gains[new_to * n + new_from] = self.gain(old_to, old_from);
            }
        }
        Self {
            n_nodes: n,
            gains,
            noise: node_map.iter().map(|&k| self.noise[k]).collect(),
            p_max: self.p_max,
        }
    }
}

/// Physical and size parameters for synthetic network generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub area_side_m: f64,
    pub min_distance_m: f64,
    pub frequency_hz: f64,
    pub shadow_sigma_db: f64,
    pub n_pairs: usize,
    pub p_max_w: f64,
    pub noise_w: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            area_side_m: 4000.0,
            min_distance_m: 100.0,
            frequency_hz: 5.0e9,
            shadow_sigma_db: 9.5,
            n_pairs: 4,
            p_max_w: 1.0,
            noise_w: 1.0e-13,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = [
            ("area_side_m", self.area_side_m),
            ("min_distance_m", self.min_distance_m),
            ("frequency_hz", self.frequency_hz),
            ("p_max_w", self.p_max_w),
            ("noise_w", self.noise_w),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChannelError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shadow_sigma_db.is_finite() && self.shadow_sigma_db >= 0.0) {
            return Err(ChannelError::InvalidConfig(format!(
                "shadow_sigma_db must be non-negative, got {}",
                self.shadow_sigma_db
            )));
        }
        if self.n_pairs == 0 {
            return Err(ChannelError::InvalidConfig("n_pairs must be at least 1".into()));
        }
        Ok(())
    }

    /// Draws one network: topology, shadowing and fading.
    pub fn sample(&self, seed: u64) -> Result<GainMatrix<f64>, ChannelError> {
        self.validate()?;
        let topology = NetworkTopology::generate(
            self.area_side_m,
            self.min_distance_m,
            self.n_pairs,
            derive_seed(seed, 0),
        )?;
        let mean = large_scale_gain(&topology, self.frequency_hz, self.shadow_sigma_db, derive_seed(seed, 1))?;
        let faded = sample_rayleigh(&mean, derive_seed(seed, 2));
        GainMatrix::with_uniform_noise(topology.n_nodes(), faded, self.noise_w, self.p_max_w)
    }
}

/// Free-space path loss in dB.
pub fn path_loss_db(distance_m: f64, frequency_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(ChannelError::NonPositiveInput {
            what: "distance",
            value: distance_m,
        });
    }
    if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
        return Err(ChannelError::NonPositiveInput {
            what: "frequency",
            value: frequency_hz,
        });
    }
    let constant = 20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT).log10();
    Ok(20.0 * distance_m.log10() + 20.0 * frequency_hz.log10() + constant)
}

/// Path loss plus log-normal shadowing as a linear mean-gain matrix
/// (row-major, `2N × 2N`, zero diagonal).
pub fn large_scale_gain(
    topology: &NetworkTopology,
    frequency_hz: f64,
    shadow_sigma_db: f64,
    seed: u64,
) -> Result<Vec<f64>, ChannelError> {
    topology.validate()?;
    if !(shadow_sigma_db >= 0.0 && shadow_sigma_db.is_finite()) {
        return Err(ChannelError::InvalidConfig(format!(
            "shadowing deviation must be non-negative, got {shadow_sigma_db}"
        )));
    }
    let shadow = Normal::new(0.0, shadow_sigma_db).expect("validated deviation");
    let mut rng = rng_from(seed);
    let n = topology.n_nodes();
    let mut out = vec![0.0; n * n];
    for to in 0..n {
        for from in 0..n {
            if to == from {
                continue;
            }
            let d = topology.positions[to].distance(&topology.positions[from]);
            let loss = path_loss_db(d, frequency_hz)? + shadow.sample(&mut rng);
            out[to * n + from] = 10f64.powf(-loss / 10.0);
        }
    }
    Ok(out)
}

/// Multiplies each entry by an independent unit-mean exponential draw, the
/// power of a Rayleigh-distributed amplitude.
pub fn sample_rayleigh(mean_gain: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    mean_gain
        .iter()
        .map(|&m| {
            let e: f64 = Exp1.sample(&mut rng);
            m * e
        })
        .collect()
}

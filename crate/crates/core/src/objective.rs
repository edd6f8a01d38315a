//! SINR and sum-rate of a flexible-duplex allocation.
//!
//! Node `n` receives from its partner `m = n ^ 1` only when the partner
//! transmits (`d_m = 1`); every other transmitting node interferes. In
//! relaxed mode the directions are continuous weights in `[0, 1]` and the
//! same formulas apply unchanged.

use thiserror::Error;

use crate::channel::GainMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("node index {index} out of range for {n_nodes} nodes")]
    IndexOutOfRange { index: usize, n_nodes: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("power {value} of node {node} outside [0, {p_max}]")]
    PowerOutOfRange { node: usize, value: f64, p_max: f64 },
    #[error("directions of pair ({0}, {1}) are not complementary")]
    InconsistentPair(usize, usize),
    #[error("direction {value} of node {node} is not admissible in {mode:?} mode")]
    InvalidDirection {
        node: usize,
        value: f64,
        mode: DirectionMode,
    },
}

/// The partner of node `n` in a network of `n_nodes` nodes (0-based).
pub fn partner(n: usize, n_nodes: usize) -> Result<usize, ObjectiveError> {
    if n >= n_nodes || !n_nodes.is_multiple_of(2) {
        return Err(ObjectiveError::IndexOutOfRange { index: n, n_nodes });
    }
    Ok(n ^ 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMode {
    /// `d_n ∈ {0, 1}`.
    Binary,
    /// `d_n ∈ [0, 1]`.
    Relaxed,
}

/// Per-node transmit power and direction (`1` transmit, `0` receive).
///
/// Pair consistency is checked on the canonical side: `d[2k + 1]` must be
/// exactly `1 - d[2k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    power: Vec<T>,
    direction: Vec<T>,
    mode: DirectionMode,
}

impl<T: Scalar> Allocation<T> {
    pub fn new(power: Vec<T>, direction: Vec<T>, mode: DirectionMode, p_max: T) -> Result<Self, ObjectiveError> {
        let n = power.len();
        if direction.len() != n {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "{n} powers but {} directions",
                direction.len()
            )));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "node count must be even and at least 2, got {n}"
            )));
        }
        for (node, &p) in power.iter().enumerate() {
            if !(p >= T::zero() && p <= p_max) {
                return Err(ObjectiveError::PowerOutOfRange {
                    node,
                    value: p.to_f64_lossy(),
                    p_max: p_max.to_f64_lossy(),
                });
            }
        }
        for (node, &d) in direction.iter().enumerate() {
            let ok = match mode {
                DirectionMode::Binary => d == T::zero() || d == T::one(),
                DirectionMode::Relaxed => d >= T::zero() && d <= T::one(),
            };
            if !ok {
                return Err(ObjectiveError::InvalidDirection {
                    node,
                    value: d.to_f64_lossy(),
                    mode,
                });
            }
        }
        for k in 0..n / 2 {
            if direction[2 * k + 1] != T::one() - direction[2 * k] {
                return Err(ObjectiveError::InconsistentPair(2 * k, 2 * k + 1));
            }
        }
        Ok(Self { power, direction, mode })
    }

    /// Binary allocation from a per-pair choice: `lower_transmits[k]`
    /// selects node `2k` (true) or `2k + 1` (false) as the transmitter.
    pub fn from_pair_choices(power: Vec<T>, lower_transmits: &[bool], p_max: T) -> Result<Self, ObjectiveError> {
        let direction = directions_from_choices(lower_transmits);
        Self::new(power, direction, DirectionMode::Binary, p_max)
    }

    /// Relaxed allocation from the lower node's direction of every pair.
    pub fn relaxed_from_pairs(power: Vec<T>, lower_direction: &[T], p_max: T) -> Result<Self, ObjectiveError> {
        let direction = lower_direction.iter().flat_map(|&d| [d, T::one() - d]).collect();
        Self::new(power, direction, DirectionMode::Relaxed, p_max)
    }

    pub fn power(&self) -> &[T] {
        &self.power
    }

    pub fn direction(&self) -> &[T] {
        &self.direction
    }

    pub fn mode(&self) -> DirectionMode {
        self.mode
    }

    pub fn n_nodes(&self) -> usize {
        self.power.len()
    }

    /// For binary allocations: whether the lower node of each pair transmits.
    pub fn pair_choices(&self) -> Vec<bool> {
        (0..self.n_nodes() / 2)
            .map(|k| self.direction[2 * k] > T::of(0.5))
            .collect()
    }
}

/// Per-node direction vector from per-pair choices.
pub fn directions_from_choices<T: Scalar>(lower_transmits: &[bool]) -> Vec<T> {
    lower_transmits
        .iter()
        .flat_map(|&lower| {
            if lower {
                [T::one(), T::zero()]
            } else {
                [T::zero(), T::one()]
            }
        })
        .collect()
}

fn check_dims<T: Scalar>(g: &GainMatrix<T>, power: &[T], direction: &[T]) -> Result<(), ObjectiveError> {
    if power.len() != g.n_nodes() || direction.len() != g.n_nodes() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "gain matrix has {} nodes, allocation has {} powers and {} directions",
            g.n_nodes(),
            power.len(),
            direction.len()
        )));
    }
    Ok(())
}

/// SINR at node `n` without any validation.
#[inline]
pub(crate) fn sinr_raw<T: Scalar>(g: &GainMatrix<T>, power: &[T], direction: &[T], n: usize) -> T {
    let m = n ^ 1;
    let row = g.row(n);
    let signal = power[m] * direction[m] * row[m];
    let mut interference = g.noise(n);
    for k in 0..row.len() {
        if k != n && k != m {
            interference += power[k] * direction[k] * row[k];
        }
    }
    signal / interference
}

#[inline]
pub(crate) fn sum_rate_raw<T: Scalar>(g: &GainMatrix<T>, power: &[T], direction: &[T]) -> T {
    (0..g.n_nodes())
        .map(|n| (T::one() + sinr_raw(g, power, direction, n)).log2())
        .sum()
}

/// SINR of node `n` under `alloc`.
pub fn sinr<T: Scalar>(g: &GainMatrix<T>, alloc: &Allocation<T>, n: usize) -> Result<T, ObjectiveError> {
    check_dims(g, &alloc.power, &alloc.direction)?;
    partner(n, g.n_nodes())?;
    Ok(sinr_raw(g, &alloc.power, &alloc.direction, n))
}

/// Total Shannon rate in bits over every node.
pub fn sum_rate<T: Scalar>(g: &GainMatrix<T>, alloc: &Allocation<T>) -> Result<T, ObjectiveError> {
    check_dims(g, &alloc.power, &alloc.direction)?;
    Ok(sum_rate_raw(g, &alloc.power, &alloc.direction))
}

/// Sum-rate with continuous directions; `direction` must be pair-consistent
/// and inside `[0, 1]`, powers inside `[0, p_max]`.
pub fn relaxed_sum_rate<T: Scalar>(g: &GainMatrix<T>, power: &[T], direction: &[T]) -> Result<T, ObjectiveError> {
    check_dims(g, power, direction)?;
    let alloc = Allocation::new(power.to_vec(), direction.to_vec(), DirectionMode::Relaxed, g.p_max())?;
    Ok(sum_rate_raw(g, &alloc.power, &alloc.direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_node(g01: f64, g10: f64) -> GainMatrix<f64> {
        GainMatrix::with_uniform_noise(2, vec![0.0, g01, g10, 0.0], 1.0, 1.0).unwrap()
    }

    fn four_node() -> GainMatrix<f64> {
        let mut g = vec![0.0; 16];
        g[1] = 1.0; // 0 <- 1
        g[3] = 1.0; // 0 <- 3
        g[2 * 4 + 3] = 1.0; // 2 <- 3
        g[2 * 4 + 1] = 1.0; // 2 <- 1
        GainMatrix::with_uniform_noise(4, g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn partner_map() {
        assert_eq!(partner(0, 4).unwrap(), 1);
        assert_eq!(partner(1, 4).unwrap(), 0);
        // 1-based n = 3 -> m = 2 (3 mod 2) + 3 - 1 = 4
        let one_based = |n: usize| 2 * (n % 2) + n - 1;
        assert_eq!(one_based(3), 4);
        assert_eq!(partner(2, 4).unwrap() + 1, one_based(3));
        for n in 0..10 {
            assert_eq!(partner(partner(n, 10).unwrap(), 10).unwrap(), n);
            assert_eq!(partner(n, 10).unwrap() + 1, one_based(n + 1));
        }
        assert!(matches!(
            partner(4, 4),
            Err(ObjectiveError::IndexOutOfRange { index: 4, n_nodes: 4 })
        ));
    }

    #[test]
    fn single_link() {
        let g = two_node(3.0, 0.5);
        let a = Allocation::from_pair_choices(vec![0.0, 1.0], &[false], 1.0).unwrap();
        assert_relative_eq!(sinr(&g, &a, 0).unwrap(), 3.0);
        assert_eq!(sinr(&g, &a, 1).unwrap(), 0.0);
        assert_relative_eq!(sum_rate(&g, &a).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn one_interferer() {
        let g = four_node();
        let a = Allocation::from_pair_choices(vec![1.0; 4], &[false, false], 1.0).unwrap();
        assert_relative_eq!(sinr(&g, &a, 0).unwrap(), 0.5);
        assert_relative_eq!(sum_rate(&g, &a).unwrap(), 2.0 * 1.5f64.log2(), epsilon = 1e-14);
        assert_relative_eq!(sum_rate(&g, &a).unwrap(), 1.169925, epsilon = 1e-6);
    }

    #[test]
    fn silent_partner() {
        let g = four_node();
        let a = Allocation::from_pair_choices(vec![1.0; 4], &[true, false], 1.0).unwrap();
        // node 0 transmits, so its own partner does not serve it
        assert_eq!(sinr(&g, &a, 0).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_gains() {
        let g = GainMatrix::with_uniform_noise(4, vec![0.0; 16], 1.0, 1.0).unwrap();
        let a = Allocation::from_pair_choices(vec![1.0; 4], &[true, false], 1.0).unwrap();
        assert_eq!(sum_rate(&g, &a).unwrap(), 0.0);
    }

    #[test]
    fn relaxed_half_directions() {
        let g = two_node(3.0, 3.0);
        let got = relaxed_sum_rate(&g, &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        // independent scalar evaluation: each node sees 1 * 0.5 * 3 / 1
        let oracle = 2.0 * (1.0f64 + 0.5 * 3.0 / 1.0).log2();
        assert_relative_eq!(got, oracle, epsilon = 1e-15);
        assert_relative_eq!(got, 2.6439, epsilon = 1e-4);
    }

    #[test]
    fn relaxed_equals_binary_on_binary_input() {
        let g = four_node();
        let a = Allocation::from_pair_choices(vec![0.3, 0.7, 0.2, 0.9], &[false, true], 1.0).unwrap();
        assert_eq!(
            relaxed_sum_rate(&g, a.power(), a.direction()).unwrap(),
            sum_rate(&g, &a).unwrap()
        );
    }

    #[test]
    fn validation() {
        assert!(matches!(
            Allocation::new(vec![1.0, 2.0], vec![0.0, 1.0], DirectionMode::Binary, 1.0),
            Err(ObjectiveError::PowerOutOfRange { node: 1, .. })
        ));
        assert!(matches!(
            Allocation::new(vec![1.0, 1.0], vec![1.0, 1.0], DirectionMode::Binary, 1.0),
            Err(ObjectiveError::InconsistentPair(0, 1))
        ));
        assert!(matches!(
            Allocation::new(vec![1.0, 1.0], vec![0.5, 0.5], DirectionMode::Binary, 1.0),
            Err(ObjectiveError::InvalidDirection { .. })
        ));
        assert!(Allocation::new(vec![1.0, 1.0], vec![0.5, 0.5], DirectionMode::Relaxed, 1.0).is_ok());
        assert!(relaxed_sum_rate(&four_node(), &[1.0; 2], &[0.5; 2]).is_err());
    }

    #[test]
    fn single_precision() {
        let g = two_node(3.0, 0.5).cast::<f32>();
        let a = Allocation::from_pair_choices(vec![0.0f32, 1.0], &[false], 1.0).unwrap();
        assert!((sum_rate(&g, &a).unwrap() - 2.0).abs() < 1e-6);
    }

    fn instance(n_pairs: usize) -> impl Strategy<Value = (GainMatrix<f64>, Vec<f64>, Vec<f64>, Vec<usize>)> {
        let n = 2 * n_pairs;
        (
            prop::collection::vec(0.0f64..10.0, n * n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.0f64..=1.0, n_pairs),
            Just((0..n_pairs).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(move |(gains, p, d, perm)| {
                let g = GainMatrix::with_uniform_noise(n, gains, 0.5, 1.0).unwrap();
                let d = d.iter().flat_map(|&x| [x, 1.0 - x]).collect();
                (g, p, d, perm)
            })
    }

    proptest! {
        #[test]
        fn rate_is_nonnegative_and_permutation_invariant((g, p, d, perm) in instance(4)) {
            let r = relaxed_sum_rate(&g, &p, &d).unwrap();
            prop_assert!(r >= 0.0);
            let permute = |v: &[f64]| perm.iter().flat_map(|&k| [v[2 * k], v[2 * k + 1]]).collect::<Vec<_>>();
            let gp = g.permute_pairs(&perm);
            let rp = relaxed_sum_rate(&gp, &permute(&p), &permute(&d)).unwrap();
            prop_assert!((r - rp).abs() <= 1e-12 * r.max(1.0));
        }

        #[test]
        fn desired_gain_is_monotone((g, p, d, _perm) in instance(3), node in 0usize..6, bump in 0.0f64..5.0) {
            let before = relaxed_sum_rate(&g, &p, &d).unwrap();
            let mut gains = g.gains().to_vec();
            gains[node * 6 + (node ^ 1)] += bump;
            let g2 = GainMatrix::with_uniform_noise(6, gains, 0.5, 1.0).unwrap();
            prop_assert!(relaxed_sum_rate(&g2, &p, &d).unwrap() >= before);
        }
    }
}

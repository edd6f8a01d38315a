//! WMMSE power control for a fixed direction assignment.
//!
//! With directions fixed the network is an ordinary `N`-link interference
//! channel. Channels only enter through their gains, so the scalar WMMSE
//! iteration runs on real amplitudes `√g`:
//!
//! ```text
//! u_i = √g_ii v_i / (σ_i² + Σ_j g_ij v_j²)
//! w_i = 1 / (1 - u_i √g_ii v_i)
//! v_i = clamp(w_i u_i √g_ii / Σ_j w_j u_j² g_ji, 0, √p_max)
//! ```
//!
//! where `g_ij` is the gain from transmitter `j` into receiver `i`. The
//! sum-rate is non-decreasing from one iteration to the next.

use crate::channel::GainMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseConfig<T> {
    pub max_iters: usize,
    /// Stop once an iteration improves the sum-rate by less than this (bits).
    pub tol: T,
}

impl<T: Scalar> Default for WmmseConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: T::of(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutcome<T> {
    /// Per-node powers; receivers are held at zero.
    pub power: Vec<T>,
    /// Sum-rate at `power`, in bits.
    pub rate: T,
    pub iterations: usize,
    /// Sum-rate at the starting point followed by the value after each iteration.
    pub trace: Vec<T>,
}

/// The fixed-duplex view of a direction assignment.
struct Links<T> {
    tx: Vec<usize>,
    /// `gain[i * n + j]`: transmitter `j` into receiver `i`.
    gain: Vec<T>,
    noise: Vec<T>,
}

impl<T: Scalar> Links<T> {
    fn new(g: &GainMatrix<T>, lower_transmits: &[bool]) -> Self {
        let tx: Vec<usize> = lower_transmits
            .iter()
            .enumerate()
            .map(|(k, &lower)| if lower { 2 * k } else { 2 * k + 1 })
            .collect();
        let rx: Vec<usize> = tx.iter().map(|&t| t ^ 1).collect();
        let n = tx.len();
        let mut gain = Vec::with_capacity(n * n);
        for &r in &rx {
            for &t in &tx {
                gain.push(g.gain(r, t));
            }
        }
        Self {
            noise: rx.iter().map(|&r| g.noise(r)).collect(),
            tx,
            gain,
        }
    }

    fn len(&self) -> usize {
        self.tx.len()
    }

    /// Fixed-duplex sum-rate for transmit amplitudes `v`.
    fn rate(&self, v: &[T]) -> T {
        let n = self.len();
        (0..n)
            .map(|i| {
                let row = &self.gain[i * n..(i + 1) * n];
                let mut interference = self.noise[i];
                for j in 0..n {
                    if j != i {
                        interference += row[j] * v[j] * v[j];
                    }
                }
                (T::one() + row[i] * v[i] * v[i] / interference).log2()
            })
            .sum()
    }
}

/// Runs WMMSE for the directions in `lower_transmits` (pair `k` transmits
/// from node `2k` when true, `2k + 1` otherwise) starting from `p_init`.
pub fn wmmse<T: Scalar>(
    g: &GainMatrix<T>,
    lower_transmits: &[bool],
    p_init: &[T],
    config: &WmmseConfig<T>,
) -> WmmseOutcome<T> {
    assert_eq!(lower_transmits.len(), g.n_pairs(), "one direction per pair");
    assert_eq!(p_init.len(), g.n_nodes(), "one initial power per node");
    let links = Links::new(g, lower_transmits);
    let n = links.len();
    let v_max = g.p_max().sqrt();
    let mut v: Vec<T> = links
        .tx
        .iter()
        .map(|&t| p_init[t].max(T::zero()).sqrt().min(v_max))
        .collect();
    let amp: Vec<T> = (0..n).map(|i| links.gain[i * n + i].sqrt()).collect();
    let mut u = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];

    let mut rate = links.rate(&v);
    let mut trace = vec![rate];
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        for i in 0..n {
            let row = &links.gain[i * n..(i + 1) * n];
            let mut interference = links.noise[i];
            for j in 0..n {
                if j != i {
                    interference += row[j] * v[j] * v[j];
                }
            }
            let total = interference + row[i] * v[i] * v[i];
            u[i] = amp[i] * v[i] / total;
            // 1 - u_i √g_ii v_i, written without the cancellation
            w[i] = total / interference;
        }
        for i in 0..n {
            let numerator = w[i] * u[i] * amp[i];
            let denominator: T = (0..n).map(|j| w[j] * u[j] * u[j] * links.gain[j * n + i]).sum();
            v[i] = if denominator > T::zero() {
                (numerator / denominator).max(T::zero()).min(v_max)
            } else {
                T::zero()
            };
        }
        let next = links.rate(&v);
        trace.push(next);
        let improvement = next - rate;
        rate = next;
        if improvement < config.tol {
            break;
        }
    }

    let mut power = vec![T::zero(); g.n_nodes()];
    for (i, &t) in links.tx.iter().enumerate() {
        power[t] = v[i] * v[i];
    }
    WmmseOutcome {
        power,
        rate,
        iterations,
        trace,
    }
}

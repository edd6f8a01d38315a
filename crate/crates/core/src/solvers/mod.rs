//! Classical solvers for the joint power/direction problem.
//!
//! * [`exhaustive_search`]: WMMSE on every direction vector, the reference.
//! * [`heuristic_search`]: alternating direction flips and WMMSE.
//! * [`max_power_baseline`] and [`max_power_silent_baseline`]: one-shot rules.

mod baselines;
mod search;
mod wmmse;

use std::time::Instant;

use thiserror::Error;

pub use baselines::{max_power_baseline, max_power_silent_baseline};
pub use search::{
    direct_search_directions, exhaustive_search, heuristic_search, HeuristicConfig, MAX_EXHAUSTIVE_PAIRS,
};
pub use wmmse::{wmmse, WmmseConfig, WmmseOutcome};

use crate::channel::GainMatrix;
use crate::objective::{directions_from_choices, sum_rate_raw, Allocation};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("exhaustive search limited to {limit} pairs, got {n_pairs}")]
    TooManyPairs { n_pairs: usize, limit: usize },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
}

/// Output of any solver: a binary allocation and the rate it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult<T> {
    pub alloc: Allocation<T>,
    /// `sum_rate(g, alloc)` in bits.
    pub achieved_rate: T,
    /// Solver-specific work count: WMMSE runs, restarts or rounds.
    pub iterations: usize,
    pub wall_time: f64,
}

impl<T: Scalar> SolverResult<T> {
    /// Packs a binary allocation, evaluating its rate on `g`.
    pub(crate) fn from_choices(
        g: &GainMatrix<T>,
        power: Vec<T>,
        lower_transmits: &[bool],
        iterations: usize,
        started: Instant,
    ) -> Self {
        let direction: Vec<T> = directions_from_choices(lower_transmits);
        let achieved_rate = sum_rate_raw(g, &power, &direction);
        let alloc = Allocation::new(power, direction, crate::objective::DirectionMode::Binary, g.p_max())
            .expect("solvers produce feasible allocations");
        Self {
            alloc,
            achieved_rate,
            iterations,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }
}

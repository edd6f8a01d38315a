//! Node placement and pairing for synthetic flexible-duplex networks.
//!
//! Nodes are dropped in a square by dart throwing with a minimum spacing,
//! then matched into user pairs uniformly at random. After pairing the
//! nodes are relabeled so that pair `k` occupies indices `2k` and `2k + 1`;
//! everything downstream relies on `partner(n) = n ^ 1`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from};

/// Rejections tolerated per point before the packing is declared infeasible.
pub const MAX_REJECTIONS_PER_POINT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("cannot place {count} points {min_distance} m apart in a {area_side} m square")]
    InfeasiblePacking {
        count: usize,
        min_distance: f64,
        area_side: f64,
    },
    #[error("pairing needs an even node count, got {0}")]
    OddNodeCount(usize),
    #[error("invalid topology parameter: {0}")]
    InvalidParameter(String),
}

/// A planar point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node positions plus the user-pair structure, in adjacent-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub positions: Vec<Point>,
    pub pairs: Vec<(usize, usize)>,
    pub area_side: f64,
}

impl NetworkTopology {
    /// Places `2 * n_pairs` nodes and pairs them. Positions are reordered so
    /// that pair `k` is `(2k, 2k + 1)`.
    pub fn generate(area_side: f64, min_distance: f64, n_pairs: usize, seed: u64) -> Result<Self, TopologyError> {
        if n_pairs == 0 {
            return Err(TopologyError::InvalidParameter("n_pairs must be at least 1".into()));
        }
        let count = 2 * n_pairs;
        let points = sample_poisson_disk(area_side, min_distance, count, derive_seed(seed, 0))?;
        let matching = pair_nodes(count, derive_seed(seed, 1))?;
        let positions = matching.iter().flat_map(|&(a, b)| [points[a], points[b]]).collect();
        let pairs = (0..n_pairs).map(|k| (2 * k, 2 * k + 1)).collect();
        Ok(Self {
            positions,
            pairs,
            area_side,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Checks the structural invariants: even size, in-bounds coordinates
    /// and a perfect matching in adjacent-index order.
    pub fn validate(&self) -> Result<(), TopologyError> {
        let n = self.positions.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(TopologyError::OddNodeCount(n));
        }
        let inside = |v: f64| (0.0..=self.area_side).contains(&v);
        if let Some(p) = self.positions.iter().find(|p| !inside(p.x) || !inside(p.y)) {
            return Err(TopologyError::InvalidParameter(format!(
                "point ({}, {}) lies outside the area",
                p.x, p.y
            )));
        }
        if self.pairs.len() * 2 != n
            || self
                .pairs
                .iter()
                .enumerate()
                .any(|(k, &pair)| pair != (2 * k, 2 * k + 1))
        {
            return Err(TopologyError::InvalidParameter(
                "pairs are not in adjacent-index order".into(),
            ));
        }
        Ok(())
    }
}

/// Dart-throwing Poisson-disk sampler over `[0, area_side]²`.
pub fn sample_poisson_disk(
    area_side: f64,
    min_distance: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Point>, TopologyError> {
    if !(area_side > 0.0 && area_side.is_finite()) {
        return Err(TopologyError::InvalidParameter(format!(
            "area side must be positive, got {area_side}"
        )));
    }
    if !(min_distance > 0.0 && min_distance.is_finite()) {
        return Err(TopologyError::InvalidParameter(format!(
            "minimum distance must be positive, got {min_distance}"
        )));
    }
    if count == 0 {
        return Err(TopologyError::InvalidParameter("count must be at least 1".into()));
    }
    let infeasible = TopologyError::InfeasiblePacking {
        count,
        min_distance,
        area_side,
    };
    // Disks of radius min_distance / 2 must fit by area.
    let disk = std::f64::consts::PI * (min_distance / 2.0).powi(2);
    if count > 1 && count as f64 * disk >= area_side * area_side {
        return Err(infeasible);
    }

    let mut rng = rng_from(seed);
    let mut points: Vec<Point> = Vec::with_capacity(count);
    let min_sq = min_distance * min_distance;
    while points.len() < count {
        let mut placed = false;
        for _ in 0..MAX_REJECTIONS_PER_POINT {
            let candidate = Point {
                x: rng.random::<f64>() * area_side,
                y: rng.random::<f64>() * area_side,
            };
            let clear = points.iter().all(|p| {
                let (dx, dy) = (p.x - candidate.x, p.y - candidate.y);
                dx * dx + dy * dy >= min_sq
            });
            if clear {
                points.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(infeasible);
        }
    }
    Ok(points)
}

/// Uniformly random perfect matching on `0..count`, returned in the order
/// that defines the relabeling: matching entry `k` becomes pair `(2k, 2k+1)`.
pub fn pair_nodes(count: usize, seed: u64) -> Result<Vec<(usize, usize)>, TopologyError> {
    if count == 0 || !count.is_multiple_of(2) {
        return Err(TopologyError::OddNodeCount(count));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng_from(seed));
    Ok(order.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

use std::time::Instant;

use rand::Rng;

use super::baselines::silenced_profile;
use super::wmmse::{wmmse, WmmseConfig};
use super::{SolverError, SolverResult};
use crate::channel::GainMatrix;
use crate::objective::{directions_from_choices, sum_rate_raw};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::Scalar;

/// Largest network [`exhaustive_search`] will enumerate.
pub const MAX_EXHAUSTIVE_PAIRS: usize = 16;

/// Transmitter powers for fixed directions: WMMSE from full power and,
/// when it differs, from full power with crosslink-dominated transmitters
/// switched off (the silent-node rule applied to these directions). The
/// better end point wins. Returns `(rate, power, wmmse_runs)`.
pub(crate) fn solve_powers<T: Scalar>(
    g: &GainMatrix<T>,
    lower_transmits: &[bool],
    config: &WmmseConfig<T>,
) -> (T, Vec<T>, usize) {
    let full = vec![g.p_max(); g.n_nodes()];
    let out = wmmse(g, lower_transmits, &full, config);
    let mut best = (rate_at(g, &out.power, lower_transmits), out.power, 1);
    let silenced = silenced_profile(g, lower_transmits);
    let active = silenced.iter().filter(|&&p| p > T::zero()).count();
    if active < g.n_pairs() {
        let alt = wmmse(g, lower_transmits, &silenced, config);
        let rate = rate_at(g, &alt.power, lower_transmits);
        best.2 = 2;
        if rate > best.0 {
            best.0 = rate;
            best.1 = alt.power;
        }
    }
    best
}

fn rate_at<T: Scalar>(g: &GainMatrix<T>, power: &[T], lower_transmits: &[bool]) -> T {
    let direction: Vec<T> = directions_from_choices(lower_transmits);
    sum_rate_raw(g, power, &direction)
}

/// Greedy single-pair flips at fixed powers until no flip improves the
/// sum-rate. `power[n]` is the power node `n` would use as transmitter.
/// Each step applies the best improving flip (lowest pair on ties).
pub fn direct_search_directions<T: Scalar>(g: &GainMatrix<T>, power: &[T], init: &[bool]) -> Vec<bool> {
    assert_eq!(init.len(), g.n_pairs(), "one direction per pair");
    assert_eq!(power.len(), g.n_nodes(), "one power per node");
    let mut current = init.to_vec();
    let mut rate = rate_at(g, power, &current);
    loop {
        let mut best: Option<(usize, T)> = None;
        for k in 0..current.len() {
            current[k] = !current[k];
            let candidate = rate_at(g, power, &current);
            current[k] = !current[k];
            if candidate > best.map_or(rate, |b| b.1) {
                best = Some((k, candidate));
            }
        }
        match best {
            Some((k, r)) => {
                current[k] = !current[k];
                rate = r;
            }
            None => return current,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicConfig<T> {
    /// Stop a restart once a round improves the sum-rate by less than this (bits).
    pub epsilon: T,
    /// Random direction initializations; `None` uses one per pair.
    pub n_restarts: Option<usize>,
    pub seed: u64,
    pub wmmse: WmmseConfig<T>,
    /// Safety cap on direction/power rounds per restart.
    pub max_rounds: usize,
}

impl<T: Scalar> Default for HeuristicConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::of(1e-3),
            n_restarts: None,
            seed: 0,
            wmmse: WmmseConfig::default(),
            max_rounds: 100,
        }
    }
}

/// Coordinate descent: alternate [`direct_search_directions`] at the
/// current powers with WMMSE at the current directions, from several random
/// direction vectors, keeping the best.
///
/// Powers come from the same per-direction solver as [`exhaustive_search`],
/// so every candidate's rate is exactly what it computes for the same
/// directions.
/// Between rounds both nodes of a pair carry the pair's power, so a flip
/// hands the transmitter's power to its partner.
pub fn heuristic_search<T: Scalar>(
    g: &GainMatrix<T>,
    config: &HeuristicConfig<T>,
) -> Result<SolverResult<T>, SolverError> {
    if config.epsilon.is_nan() || config.epsilon <= T::zero() {
        return Err(SolverError::InvalidParameter("epsilon must be positive".into()));
    }
    let restarts = config.n_restarts.unwrap_or(g.n_pairs());
    if restarts == 0 {
        return Err(SolverError::InvalidParameter("at least one restart is required".into()));
    }
    let started = Instant::now();
    let full = vec![g.p_max(); g.n_nodes()];
    let mut best: Option<(T, Vec<bool>, Vec<T>)> = None;
    let mut rounds_total = 0;

    for restart in 0..restarts {
        let mut rng = rng_from(derive_seed(config.seed, restart as u64));
        let mut choices: Vec<bool> = (0..g.n_pairs()).map(|_| rng.random()).collect();
        let mut pair_power = full.clone();
        let mut previous = T::neg_infinity();
        for _ in 0..config.max_rounds {
            rounds_total += 1;
            choices = direct_search_directions(g, &pair_power, &choices);
            let (rate, power, _) = solve_powers(g, &choices, &config.wmmse);
            if best.as_ref().is_none_or(|b| rate > b.0) {
                best = Some((rate, choices.clone(), power.clone()));
            }
            if rate - previous < config.epsilon {
                break;
            }
            previous = rate;
            for k in 0..g.n_pairs() {
                let p = power[2 * k].max(power[2 * k + 1]);
                pair_power[2 * k] = p;
                pair_power[2 * k + 1] = p;
            }
        }
    }
    let (_, choices, power) = best.expect("at least one restart ran");
    Ok(SolverResult::from_choices(g, power, &choices, rounds_total, started))
}

/// Power control on all `2^N` direction vectors; the best wins, ties going to the
/// lexicographically smallest per-node direction vector.
pub fn exhaustive_search<T: Scalar>(
    g: &GainMatrix<T>,
    config: &WmmseConfig<T>,
) -> Result<SolverResult<T>, SolverError> {
    let n_pairs = g.n_pairs();
    if n_pairs > MAX_EXHAUSTIVE_PAIRS {
        return Err(SolverError::TooManyPairs {
            n_pairs,
            limit: MAX_EXHAUSTIVE_PAIRS,
        });
    }
    let started = Instant::now();
    let mut best: Option<(T, Vec<bool>, Vec<T>)> = None;
    let mut wmmse_runs = 0;
    let mut choices = vec![false; n_pairs];
    let count = 1usize << n_pairs;
    for mask in 0..count {
        // pair 0 is the most significant bit; a set bit means the lower
        // node transmits (d = (1, 0) sorts after (0, 1))
        for (k, c) in choices.iter_mut().enumerate() {
            *c = (mask >> (n_pairs - 1 - k)) & 1 == 1;
        }
        let (rate, power, runs) = solve_powers(g, &choices, config);
        wmmse_runs += runs;
        if best.as_ref().is_none_or(|b| rate > b.0) {
            best = Some((rate, choices.clone(), power));
        }
    }
    let (_, choices, power) = best.expect("at least one direction vector");
    Ok(SolverResult::from_choices(g, power, &choices, wmmse_runs, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::solvers::{max_power_baseline, max_power_silent_baseline};

    fn asymmetric_pair() -> GainMatrix<f64> {
        // 1 -> 0 has gain 5, 0 -> 1 has gain 2
        GainMatrix::with_uniform_noise(2, vec![0.0, 5.0, 2.0, 0.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn direct_search_picks_stronger_link() {
        let g = asymmetric_pair();
        for init in [true, false] {
            assert_eq!(direct_search_directions(&g, &[0.3, 0.3], &[init]), vec![false]);
        }
    }

    #[test]
    fn direct_search_is_one_flip_optimal() {
        let cfg = ChannelConfig {
            n_pairs: 5,
            ..ChannelConfig::default()
        };
        for seed in 0..20 {
            let g = cfg.sample(seed).unwrap();
            let p = vec![1.0; 10];
            let init = vec![seed % 2 == 0; 5];
            let out = direct_search_directions(&g, &p, &init);
            let r = rate_at(&g, &p, &out);
            assert!(r >= rate_at(&g, &p, &init));
            for k in 0..5 {
                let mut flipped = out.clone();
                flipped[k] = !flipped[k];
                assert!(rate_at(&g, &p, &flipped) <= r);
            }
        }
    }

    #[test]
    fn direct_search_from_every_start_finds_best_of_four() {
        let cfg = ChannelConfig {
            n_pairs: 2,
            ..ChannelConfig::default()
        };
        let all = [[false, false], [false, true], [true, false], [true, true]];
        for seed in 0..30 {
            let g = cfg.sample(seed).unwrap();
            let p = vec![1.0; 4];
            let enumerated = all.iter().map(|c| rate_at(&g, &p, c)).fold(f64::MIN, f64::max);
            let searched = all
                .iter()
                .map(|c| rate_at(&g, &p, &direct_search_directions(&g, &p, c)))
                .fold(f64::MIN, f64::max);
            assert_eq!(searched, enumerated);
        }
    }

    #[test]
    fn single_pair_exhaustive_picks_stronger_direction() {
        let g = asymmetric_pair();
        let r = exhaustive_search(&g, &WmmseConfig::default()).unwrap();
        assert_eq!(r.alloc.direction(), &[0.0, 1.0]);
        assert_eq!(r.alloc.power(), &[0.0, 1.0]);
        assert_eq!(r.iterations, 2); // one WMMSE run per direction
        let h = heuristic_search(&g, &HeuristicConfig::default()).unwrap();
        assert_eq!(h.alloc, r.alloc);
        assert_eq!(h.achieved_rate, r.achieved_rate);
    }

    #[test]
    fn exhaustive_guard() {
        let g = GainMatrix::with_uniform_noise(34, vec![0.0; 34 * 34], 1.0, 1.0).unwrap();
        assert_eq!(
            exhaustive_search(&g, &WmmseConfig::default()).unwrap_err(),
            SolverError::TooManyPairs { n_pairs: 17, limit: 16 }
        );
    }

    #[test]
    fn exhaustive_tie_prefers_smallest_vector() {
        let g = GainMatrix::with_uniform_noise(4, vec![0.0; 16], 1.0, 1.0).unwrap();
        let r = exhaustive_search(&g, &WmmseConfig::default()).unwrap();
        assert_eq!(r.alloc.direction(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(r.achieved_rate, 0.0);
    }

    #[test]
    fn heuristic_rejects_bad_parameters() {
        let g = asymmetric_pair();
        let bad_eps = HeuristicConfig {
            epsilon: 0.0,
            ..HeuristicConfig::default()
        };
        assert!(heuristic_search(&g, &bad_eps).is_err());
        let no_restarts = HeuristicConfig {
            n_restarts: Some(0),
            ..HeuristicConfig::default()
        };
        assert!(heuristic_search(&g, &no_restarts).is_err());
    }

    #[test]
    fn dominance_on_random_networks() {
        let cfg = ChannelConfig::default();
        for seed in 0..40 {
            let g = cfg.sample(seed).unwrap();
            let ex = exhaustive_search(&g, &WmmseConfig::default()).unwrap();
            let h = heuristic_search(
                &g,
                &HeuristicConfig {
                    seed,
                    ..HeuristicConfig::default()
                },
            )
            .unwrap();
            let mp = max_power_baseline(&g);
            let ms = max_power_silent_baseline(&g);
            assert!(ex.achieved_rate >= h.achieved_rate);
            assert!(ex.achieved_rate >= mp.achieved_rate);
            assert!(ex.achieved_rate >= ms.achieved_rate);
        }
    }

    #[test]
    fn heuristic_is_deterministic() {
        let g = ChannelConfig::default().sample(9).unwrap();
        let cfg = HeuristicConfig {
            seed: 4,
            ..HeuristicConfig::default()
        };
        let a = heuristic_search(&g, &cfg).unwrap();
        let b = heuristic_search(&g, &cfg).unwrap();
        assert_eq!(a.alloc, b.alloc);
    }
}

use std::time::Instant;

use super::SolverResult;
use crate::channel::GainMatrix;
use crate::scalar::Scalar;

/// Per pair, the direction whose desired link is stronger; ties go to the
/// lower index. `true` means node `2k` transmits.
fn strongest_directions<T: Scalar>(g: &GainMatrix<T>) -> Vec<bool> {
    (0..g.n_pairs())
        .map(|k| {
            let (a, b) = (2 * k, 2 * k + 1);
            g.gain(b, a) >= g.gain(a, b)
        })
        .collect()
}

fn transmitter(k: usize, lower: bool) -> usize {
    if lower {
        2 * k
    } else {
        2 * k + 1
    }
}

/// Every pair transmits at full power along its stronger direction.
pub fn max_power_baseline<T: Scalar>(g: &GainMatrix<T>) -> SolverResult<T> {
    let started = Instant::now();
    let choices = strongest_directions(g);
    let mut power = vec![T::zero(); g.n_nodes()];
    for (k, &lower) in choices.iter().enumerate() {
        power[transmitter(k, lower)] = g.p_max();
    }
    SolverResult::from_choices(g, power, &choices, 1, started)
}

/// Full power for every transmitter of `lower_transmits`, except those that
/// reach another receiver at least twice as strongly as their own, which
/// get zero. Receivers get zero as well.
pub(crate) fn silenced_profile<T: Scalar>(g: &GainMatrix<T>, lower_transmits: &[bool]) -> Vec<T> {
    let tx: Vec<usize> = lower_transmits
        .iter()
        .enumerate()
        .map(|(k, &lower)| transmitter(k, lower))
        .collect();
    let two = T::of(2.0);
    let mut power = vec![T::zero(); g.n_nodes()];
    for &t in &tx {
        let own_rx = t ^ 1;
        let desired = g.gain(own_rx, t);
        let dominated = tx
            .iter()
            .map(|&other| other ^ 1)
            .filter(|&r| r != own_rx)
            .any(|r| g.gain(r, t) >= two * desired);
        if !dominated {
            power[t] = g.p_max();
        }
    }
    power
}

/// [`max_power_baseline`], then silences every transmitter that reaches
/// some other receiver at least twice as strongly as its own. Decisions are
/// taken simultaneously from the initial assignment.
pub fn max_power_silent_baseline<T: Scalar>(g: &GainMatrix<T>) -> SolverResult<T> {
    let started = Instant::now();
    let choices = strongest_directions(g);
    let power = silenced_profile(g, &choices);
    SolverResult::from_choices(g, power, &choices, 1, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stronger_direction_wins() {
        // g[1][0] = 5 (0 -> 1), g[0][1] = 2 (1 -> 0)
        let g = GainMatrix::with_uniform_noise(2, vec![0.0, 2.0, 5.0, 0.0], 1.0, 1.0).unwrap();
        let r = max_power_baseline(&g);
        assert_eq!(r.alloc.direction(), &[1.0, 0.0]);
        assert_eq!(r.alloc.power(), &[1.0, 0.0]);
        assert!((r.achieved_rate - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let g = GainMatrix::with_uniform_noise(2, vec![0.0, 3.0, 3.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(max_power_baseline(&g).alloc.direction(), &[1.0, 0.0]);
    }

    fn two_pair_instance(cross: f64) -> GainMatrix<f64> {
        // lower nodes transmit (desired gain 1 each way into the upper node,
        // weaker reverse links); transmitter 0 reaches receiver 3 with `cross`.
        let mut g = vec![0.0; 16];
        g[4] = 1.0; // 1 <- 0
        g[1] = 0.5; // 0 <- 1
        g[3 * 4 + 2] = 1.0; // 3 <- 2
        g[2 * 4 + 3] = 0.5; // 2 <- 3
        g[3 * 4] = cross; // 3 <- 0
        GainMatrix::with_uniform_noise(4, g, 1.0, 1.0).unwrap()
    }

    #[test]
    fn crosslink_at_twice_desired_silences() {
        let g = two_pair_instance(2.0);
        let r = max_power_silent_baseline(&g);
        assert_eq!(r.alloc.power(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.alloc.direction(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn weak_crosslinks_change_nothing() {
        let g = two_pair_instance(1.9);
        assert_eq!(max_power_silent_baseline(&g).alloc, max_power_baseline(&g).alloc);
    }

    #[test]
    fn only_receivers_count() {
        // node 2 transmits, so a strong link 0 -> 2 is not a crosslink
        let mut g = two_pair_instance(0.0).gains().to_vec();
        g[2 * 4] = 10.0;
        let g = GainMatrix::with_uniform_noise(4, g, 1.0, 1.0).unwrap();
        assert_eq!(max_power_silent_baseline(&g).alloc.power(), &[1.0, 0.0, 1.0, 0.0]);
    }
}

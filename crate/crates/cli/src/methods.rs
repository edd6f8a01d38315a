//! Running the allocation methods over a set of instances and summarizing
//! the outcome as benchmark rows.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use flexduplex::channel::GainMatrix;
use flexduplex::flexnet::{infer, ModelParams};
use flexduplex::rng::derive_seed;
use flexduplex::solvers::{
    exhaustive_search, heuristic_search, max_power_baseline, max_power_silent_baseline, HeuristicConfig, SolverResult,
    WmmseConfig, MAX_EXHAUSTIVE_PAIRS,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Flexnet,
    Exhaustive,
    Heuristic,
    MaxPower,
    MaxPowerSilent,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Flexnet,
        Method::Exhaustive,
        Method::Heuristic,
        Method::MaxPower,
        Method::MaxPowerSilent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Flexnet => "flexnet",
            Method::Exhaustive => "exhaustive",
            Method::Heuristic => "heuristic",
            Method::MaxPower => "maxpower",
            Method::MaxPowerSilent => "maxpower_silent",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method '{s}' (expected one of {})", known.join(", "))
        })
    }
}

/// Per-instance outcome of one method.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub rates: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl MethodRun {
    pub fn mean_rate(&self) -> f64 {
        mean(&self.rates)
    }

    pub fn mean_seconds(&self) -> f64 {
        mean(&self.seconds)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One output row of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub n_pairs: usize,
    pub mean_rate: f64,
    /// Mean rate over the exhaustive mean rate, when exhaustive ran.
    pub ratio: Option<f64>,
    pub mean_seconds: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Runs one method on one instance. The heuristic for instance `index`
/// is seeded with `derive_seed(seed, index)`.
pub fn solve_one(
    method: Method,
    g: &GainMatrix<f64>,
    model: Option<&ModelParams<f64>>,
    seed: u64,
    index: usize,
) -> Result<SolverResult<f64>> {
    Ok(match method {
        Method::Flexnet => match model {
            Some(params) => infer(g, params),
            None => bail!("the flexnet method needs a model"),
        },
        Method::Exhaustive => exhaustive_search(g, &WmmseConfig::default())?,
        Method::Heuristic => heuristic_search(
            g,
            &HeuristicConfig {
                seed: derive_seed(seed, index as u64),
                ..HeuristicConfig::default()
            },
        )?,
        Method::MaxPower => max_power_baseline(g),
        Method::MaxPowerSilent => max_power_silent_baseline(g),
    })
}

/// Refuses exhaustive search on networks too large to enumerate.
pub fn check_exhaustive(methods: &[Method], n_pairs: usize) -> Result<(), String> {
    if methods.contains(&Method::Exhaustive) && n_pairs > MAX_EXHAUSTIVE_PAIRS {
        return Err(format!(
            "exhaustive search is limited to {MAX_EXHAUSTIVE_PAIRS} pairs; the data has {n_pairs}"
        ));
    }
    Ok(())
}

/// Every method over every sample, one thread, in a fixed order.
pub fn run_methods(
    samples: &[GainMatrix<f64>],
    methods: &[Method],
    model: Option<&ModelParams<f64>>,
    seed: u64,
) -> Result<Vec<MethodRun>> {
    methods
        .iter()
        .map(|&method| {
            let mut run = MethodRun {
                method,
                rates: Vec::with_capacity(samples.len()),
                seconds: Vec::with_capacity(samples.len()),
            };
            for (i, g) in samples.iter().enumerate() {
                let r = solve_one(method, g, model, seed, i)?;
                run.rates.push(r.achieved_rate);
                run.seconds.push(r.wall_time);
            }
            Ok(run)
        })
        .collect()
}

pub fn summarize(runs: &[MethodRun], n_pairs: usize, seed: u64) -> Vec<BenchmarkRow> {
    let reference = runs
        .iter()
        .find(|r| r.method == Method::Exhaustive)
        .map(MethodRun::mean_rate);
    runs.iter()
        .map(|r| BenchmarkRow {
            method: r.method.name().to_string(),
            n_pairs,
            mean_rate: r.mean_rate(),
            ratio: reference.map(|e| if e > 0.0 { r.mean_rate() / e } else { 1.0 }),
            mean_seconds: r.mean_seconds(),
            samples: r.rates.len(),
            seed,
        })
        .collect()
}

/// Mean rate of `params` over `samples` relative to exhaustive search.
pub fn flexnet_ratio(samples: &[GainMatrix<f64>], params: &ModelParams<f64>, exhaustive_rates: &[f64]) -> f64 {
    let rate: f64 = samples.iter().map(|g| infer(g, params).achieved_rate).sum();
    rate / exhaustive_rates.iter().sum::<f64>()
}

//! Command arguments. Every command reads an optional JSON config file,
//! then applies explicit flags on top. File keys are the long flag names
//! with underscores, except `learning_rate` for `--lr` and `batch_size` for
//! `--batch`. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flexduplex::channel::ChannelConfig;
use flexduplex::flexnet::{Pooling, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::methods::Method;
use crate::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "flexduplex",
    version,
    about = "Flexible-duplex resource allocation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample channel realizations into a dataset file.
    Generate(GenerateArgs),
    /// Train a model on a dataset file.
    Train(TrainArgs),
    /// Compare methods on a test dataset.
    Evaluate(EvaluateArgs),
    /// Per-sample running time of each method across network sizes.
    BenchTime(BenchTimeArgs),
    /// One model trained on mixed sizes against one model per size.
    Generalize(GeneralizeArgs),
}

/// Numeric precision used for training; checkpoints are always stored as f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

pub fn load_file<C: DeserializeOwned + Serialize + Default>(path: Option<&Path>) -> Result<C, Failure> {
    let Some(p) = path else {
        return Ok(C::default());
    };
    let bad = |e: String| Failure::Usage(format!("invalid config {}: {e}", p.display()));
    let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    // flattened records cannot deny unknown fields themselves, so compare
    // against the keys of the default record
    let known = serde_json::to_value(C::default()).expect("configs serialize");
    if let (Some(given), Some(known)) = (value.as_object(), known.as_object()) {
        if let Some(key) = given.keys().find(|k| !known.contains_key(*k)) {
            return Err(bad(format!("unknown field '{key}'")));
        }
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $args.$field.clone() { $cfg.$field = v; } )*
    };
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list<T: std::str::FromStr<Err = String>>(s: &str) -> Result<Vec<T>, Failure> {
    s.split(',').map(|x| x.trim().parse::<T>().map_err(usage)).collect()
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| usage(format!("bad pair count '{x}': {e}")))
        })
        .collect()
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of transmitter-receiver pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    pub count: Option<usize>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset path (default `dataset.bin`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Side of the square deployment area in meters.
    #[arg(long)]
    pub area_side_m: Option<f64>,
    /// Minimum distance between any two nodes in meters.
    #[arg(long)]
    pub min_distance_m: Option<f64>,
    /// Carrier frequency in hertz.
    #[arg(long)]
    pub frequency_hz: Option<f64>,
    /// Log-normal shadowing standard deviation in dB.
    #[arg(long)]
    pub shadow_sigma_db: Option<f64>,
    /// Per-node power budget in watts.
    #[arg(long)]
    pub p_max_w: Option<f64>,
    /// Noise power in watts.
    #[arg(long)]
    pub noise_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub pairs: usize,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub area_side_m: f64,
    pub min_distance_m: f64,
    pub frequency_hz: f64,
    pub shadow_sigma_db: f64,
    pub p_max_w: f64,
    pub noise_w: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        let ch = ChannelConfig::default();
        Self {
            pairs: ch.n_pairs,
            count: 1000,
            seed: 0,
            out: PathBuf::from("dataset.bin"),
            area_side_m: ch.area_side_m,
            min_distance_m: ch.min_distance_m,
            frequency_hz: ch.frequency_hz,
            shadow_sigma_db: ch.shadow_sigma_db,
            p_max_w: ch.p_max_w,
            noise_w: ch.noise_w,
        }
    }
}

impl GenerateConfig {
    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig {
            area_side_m: self.area_side_m,
            min_distance_m: self.min_distance_m,
            frequency_hz: self.frequency_hz,
            shadow_sigma_db: self.shadow_sigma_db,
            n_pairs: self.pairs,
            p_max_w: self.p_max_w,
            noise_w: self.noise_w,
        }
    }
}

impl GenerateArgs {
    pub fn resolve(&self) -> Result<GenerateConfig, Failure> {
        let mut cfg: GenerateConfig = load_file(self.config.as_deref())?;
        overlay!(cfg, self; pairs, count, seed, out, area_side_m, min_distance_m, frequency_hz,
            shadow_sigma_db, p_max_w, noise_w);
        if cfg.pairs == 0 {
            return Err(usage("--pairs must be at least 1"));
        }
        if cfg.count == 0 {
            return Err(usage("--count must be at least 1"));
        }
        cfg.channel().validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

// ------------------------------------------------------------------- train

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// Adam learning rate.
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Minibatch size.
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    /// Passes over the training set.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Message-passing layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden width of every layer and head.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Power-head temperature.
    #[arg(long)]
    pub temperature_power: Option<f64>,
    /// Direction-head temperature.
    #[arg(long)]
    pub temperature_direction: Option<f64>,
    /// Neighbor aggregation: sum or max.
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Training precision.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

/// Hyperparameters shared by `train` and `generalize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub layers: usize,
    pub hidden: usize,
    pub temperature_power: f64,
    pub temperature_direction: f64,
    pub pooling: Pooling,
    pub precision: Precision,
}

impl Default for Hyper {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            layers: t.layers,
            hidden: t.hidden,
            temperature_power: t.temperature_power,
            temperature_direction: t.temperature_direction,
            pooling: t.pooling,
            precision: Precision::default(),
        }
    }
}

impl Hyper {
    fn overlay(&mut self, f: &TrainFlags) {
        let cfg = self;
        overlay!(cfg, f; learning_rate, batch_size, epochs, layers, hidden, temperature_power,
            temperature_direction, pooling, precision);
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            layers: self.layers,
            hidden: self.hidden,
            temperature_power: self.temperature_power,
            temperature_direction: self.temperature_direction,
            pooling: self.pooling,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Checkpoint path (default `model.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss-history CSV path (defaults to the checkpoint path with a
    /// `.history.csv` suffix).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub hyper: TrainFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainCmdConfig {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub history: Option<PathBuf>,
    pub seed: u64,
    #[serde(flatten)]
    pub hyper: Hyper,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset.bin"),
            out: PathBuf::from("model.json"),
            history: None,
            seed: 0,
            hyper: Hyper::default(),
        }
    }
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainCmdConfig, Failure> {
        let mut cfg: TrainCmdConfig = load_file(self.config.as_deref())?;
        overlay!(cfg, self; dataset, out, seed);
        if self.history.is_some() {
            cfg.history = self.history.clone();
        }
        if cfg.history.is_none() {
            let mut p = cfg.out.clone().into_os_string();
            p.push(".history.csv");
            cfg.history = Some(PathBuf::from(p));
        }
        cfg.hyper.overlay(&self.hyper);
        cfg.hyper
            .train_config(cfg.seed)
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Checkpoint, required when `flexnet` is among the methods.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated subset of flexnet, exhaustive, heuristic, maxpower,
    /// maxpower_silent.
    #[arg(long)]
    pub methods: Option<String>,
    /// Results CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub dataset: PathBuf,
    pub model: Option<PathBuf>,
    pub methods: String,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("test.bin"),
            model: None,
            methods: "flexnet,exhaustive,heuristic,maxpower,maxpower_silent".into(),
            out: None,
            seed: 0,
        }
    }
}

impl EvaluateArgs {
    pub fn resolve(&self) -> Result<(EvaluateConfig, Vec<Method>), Failure> {
        let mut cfg: EvaluateConfig = load_file(self.config.as_deref())?;
        overlay!(cfg, self; dataset, methods, seed);
        if self.model.is_some() {
            cfg.model = self.model.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        let methods = parse_list::<Method>(&cfg.methods)?;
        if methods.contains(&Method::Flexnet) && cfg.model.is_none() {
            return Err(usage("the flexnet method needs --model"));
        }
        Ok((cfg, methods))
    }
}

// -------------------------------------------------------------- bench-time

#[derive(Debug, Args)]
pub struct BenchTimeArgs {
    /// JSON config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated pair counts.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Random instances per size.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated methods to time.
    #[arg(long)]
    pub methods: Option<String>,
    /// Checkpoint for flexnet; freshly initialized weights otherwise (the
    /// cost of a forward pass does not depend on the weight values).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Sizes above this are skipped for exhaustive search.
    #[arg(long)]
    pub exhaustive_max_pairs: Option<usize>,
    /// Timing CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchTimeConfig {
    pub pairs: String,
    pub samples: usize,
    pub methods: String,
    pub model: Option<PathBuf>,
    pub exhaustive_max_pairs: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for BenchTimeConfig {
    fn default() -> Self {
        Self {
            pairs: "2,4,8,16".into(),
            samples: 100,
            methods: "flexnet,exhaustive,heuristic,maxpower,maxpower_silent".into(),
            model: None,
            exhaustive_max_pairs: 8,
            out: None,
            seed: 0,
        }
    }
}

impl BenchTimeArgs {
    pub fn resolve(&self) -> Result<(BenchTimeConfig, Vec<usize>, Vec<Method>), Failure> {
        let mut cfg: BenchTimeConfig = load_file(self.config.as_deref())?;
        overlay!(cfg, self; pairs, samples, methods, exhaustive_max_pairs, seed);
        if self.model.is_some() {
            cfg.model = self.model.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        let sizes = parse_sizes(&cfg.pairs)?;
        if sizes.contains(&0) {
            return Err(usage("pair counts must be at least 1"));
        }
        if cfg.samples == 0 {
            return Err(usage("--samples must be at least 1"));
        }
        if cfg.exhaustive_max_pairs > flexduplex::solvers::MAX_EXHAUSTIVE_PAIRS {
            return Err(usage(format!(
                "--exhaustive-max-pairs cannot exceed {}",
                flexduplex::solvers::MAX_EXHAUSTIVE_PAIRS
            )));
        }
        let methods = parse_list::<Method>(&cfg.methods)?;
        Ok((cfg, sizes, methods))
    }
}

// -------------------------------------------------------------- generalize

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    /// JSON config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated pair counts.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Training samples per model; the mixed model splits them evenly
    /// across sizes.
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Test samples per size.
    #[arg(long)]
    pub test_count: Option<usize>,
    /// Results CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub hyper: TrainFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneralizeConfig {
    pub pairs: String,
    pub train_count: usize,
    pub test_count: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    #[serde(flatten)]
    pub hyper: Hyper,
}

impl Default for GeneralizeConfig {
    fn default() -> Self {
        Self {
            pairs: "2,4,8".into(),
            train_count: 10_000,
            test_count: 1000,
            out: None,
            seed: 0,
            hyper: Hyper::default(),
        }
    }
}

impl GeneralizeArgs {
    pub fn resolve(&self) -> Result<(GeneralizeConfig, Vec<usize>), Failure> {
        let mut cfg: GeneralizeConfig = load_file(self.config.as_deref())?;
        overlay!(cfg, self; pairs, train_count, test_count, seed);
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.hyper.overlay(&self.hyper);
        let sizes = parse_sizes(&cfg.pairs)?;
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(usage("pair counts must be at least 1"));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n > flexduplex::solvers::MAX_EXHAUSTIVE_PAIRS) {
            return Err(usage(format!(
                "ratios need exhaustive search, limited to {} pairs (got {n})",
                flexduplex::solvers::MAX_EXHAUSTIVE_PAIRS
            )));
        }
        if cfg.train_count < sizes.len() || cfg.test_count == 0 {
            return Err(usage("need at least one training sample per size and one test sample"));
        }
        cfg.hyper
            .train_config(cfg.seed)
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        Ok((cfg, sizes))
    }
}

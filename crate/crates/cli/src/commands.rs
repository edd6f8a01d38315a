use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use flexduplex::channel::GainMatrix;
use flexduplex::dataset::{generate_dataset, load_dataset, save_dataset};
use flexduplex::flexnet::{self, init_params, load_model, save_model, FlexNetError, TrainConfig, TrainOutcome};
use flexduplex::rng::derive_seed;
use serde::Serialize;

use crate::config::{BenchTimeArgs, EvaluateArgs, GeneralizeArgs, GenerateArgs, GenerateConfig, Precision, TrainArgs};
use crate::methods::{check_exhaustive, flexnet_ratio, mean, run_methods, summarize, Method};
use crate::Failure;

fn echo<C: Serialize>(cfg: &C) {
    println!(
        "effective config: {}",
        serde_json::to_string(cfg).expect("configs serialize")
    );
}

/// Writes rows as CSV with a header, optionally preceded by `# comment`
/// lines, to `out` or standard output.
pub fn write_csv<R: Serialize>(rows: &[R], out: Option<&Path>, comment: Option<&str>) -> anyhow::Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut sink = io::BufWriter::new(sink);
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(sink, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains at the requested precision and returns f64 parameters.
pub fn train_model(
    samples: &[GainMatrix<f64>],
    config: &TrainConfig,
    precision: Precision,
) -> Result<TrainOutcome<f64>, FlexNetError> {
    match precision {
        Precision::F64 => flexnet::train(samples, config),
        Precision::F32 => {
            let narrow: Vec<GainMatrix<f32>> = samples.iter().map(GainMatrix::cast).collect();
            let out = flexnet::train(&narrow, config)?;
            Ok(TrainOutcome {
                params: out.params.cast(),
                history: out.history,
                best_epoch: out.best_epoch,
            })
        }
    }
}

pub fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = args.resolve()?;
    echo(&cfg);
    let data = generate_dataset(&cfg.channel(), cfg.count, cfg.seed)?;
    save_dataset(&data, &cfg.out)?;
    println!(
        "wrote {} samples of {} nodes to {}",
        data.len(),
        2 * cfg.pairs,
        cfg.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct HistoryRow {
    epoch: usize,
    mean_loss: f64,
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let cfg = args.resolve()?;
    echo(&cfg);
    let data = load_dataset(&cfg.dataset).with_context(|| format!("cannot load {}", cfg.dataset.display()))?;
    let tc = cfg.hyper.train_config(cfg.seed);
    let out = train_model(data.samples(), &tc, cfg.hyper.precision)?;
    save_model(&out.params, &cfg.out)?;
    let rows: Vec<HistoryRow> = out
        .history
        .iter()
        .enumerate()
        .map(|(i, &l)| HistoryRow {
            epoch: i + 1,
            mean_loss: l,
        })
        .collect();
    let history = cfg.history.as_deref().expect("resolved");
    write_csv(&rows, Some(history), None)?;
    println!(
        "trained on {} samples; best epoch {} (mean loss {:.6}); model {}, history {}",
        data.len(),
        out.best_epoch + 1,
        out.history[out.best_epoch],
        cfg.out.display(),
        history.display()
    );
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let (cfg, methods) = args.resolve()?;
    echo(&cfg);
    let data = load_dataset(&cfg.dataset).with_context(|| format!("cannot load {}", cfg.dataset.display()))?;
    let n_pairs = data.header().n_nodes / 2;
    check_exhaustive(&methods, n_pairs).map_err(Failure::Usage)?;
    let model = match &cfg.model {
        Some(p) => Some(load_model(p).with_context(|| format!("cannot load model {}", p.display()))?),
        None => None,
    };
    let runs = run_methods(data.samples(), &methods, model.as_ref(), cfg.seed)?;
    write_csv(&summarize(&runs, n_pairs, cfg.seed), cfg.out.as_deref(), None)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub n_pairs: usize,
    pub mean_seconds: f64,
}

pub const TIMING_NOTE: &str = "per-sample wall time on one thread; excludes dataset generation and graph construction";

/// Mean per-sample time of each method at each size. Exhaustive search is
/// skipped above `exhaustive_max_pairs`.
pub fn time_methods(
    sizes: &[usize],
    samples: usize,
    methods: &[Method],
    model: &flexnet::ModelParams<f64>,
    exhaustive_max_pairs: usize,
    seed: u64,
) -> anyhow::Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let channel = GenerateConfig {
            pairs: n,
            ..GenerateConfig::default()
        }
        .channel();
        let data = generate_dataset(&channel, samples, derive_seed(seed, i as u64))?;
        let active: Vec<Method> = methods
            .iter()
            .copied()
            .filter(|&m| m != Method::Exhaustive || n <= exhaustive_max_pairs)
            .collect();
        for run in run_methods(data.samples(), &active, Some(model), seed)? {
            rows.push(TimingRow {
                method: run.method.name().into(),
                n_pairs: n,
                mean_seconds: run.mean_seconds(),
            });
        }
    }
    Ok(rows)
}

pub fn bench_time(args: &BenchTimeArgs) -> Result<(), Failure> {
    let (cfg, sizes, methods) = args.resolve()?;
    echo(&cfg);
    let model = match &cfg.model {
        Some(p) => load_model(p).with_context(|| format!("cannot load model {}", p.display()))?,
        None => init_params(&TrainConfig::default(), cfg.seed)?,
    };
    let rows = time_methods(
        &sizes,
        cfg.samples,
        &methods,
        &model,
        cfg.exhaustive_max_pairs,
        cfg.seed,
    )?;
    let note = format!(
        "{TIMING_NOTE}\nexhaustive skipped above {} pairs; {} samples per size",
        cfg.exhaustive_max_pairs, cfg.samples
    );
    write_csv(&rows, cfg.out.as_deref(), Some(&note))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralizeRow {
    pub model_kind: String,
    pub n_pairs: usize,
    pub mean_rate: f64,
    pub ratio: f64,
}

pub fn generalize(args: &GeneralizeArgs) -> Result<(), Failure> {
    let (cfg, sizes) = args.resolve()?;
    echo(&cfg);
    let tc = cfg.hyper.train_config(cfg.seed);
    let per_size_mixed = cfg.train_count / sizes.len();
    let mut train_sets = Vec::new();
    let mut test_sets = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let channel = GenerateConfig {
            pairs: n,
            ..GenerateConfig::default()
        }
        .channel();
        train_sets.push(generate_dataset(
            &channel,
            cfg.train_count,
            derive_seed(cfg.seed, 2 * i as u64),
        )?);
        test_sets.push(generate_dataset(
            &channel,
            cfg.test_count,
            derive_seed(cfg.seed, 2 * i as u64 + 1),
        )?);
    }
    let mixed: Vec<GainMatrix<f64>> = train_sets
        .iter()
        .flat_map(|d| d.samples()[..per_size_mixed].iter().cloned())
        .collect();
    let mixed_model = train_model(&mixed, &tc, cfg.hyper.precision)?.params;

    let mut rows = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let test = test_sets[i].samples();
        let exhaustive = run_methods(test, &[Method::Exhaustive], None, cfg.seed)?.remove(0);
        let own = train_model(train_sets[i].samples(), &tc, cfg.hyper.precision)?.params;
        for (kind, model) in [("mixed", &mixed_model), ("per_size", &own)] {
            let ratio = flexnet_ratio(test, model, &exhaustive.rates);
            rows.push(GeneralizeRow {
                model_kind: kind.into(),
                n_pairs: n,
                mean_rate: ratio * mean(&exhaustive.rates),
                ratio,
            });
        }
    }
    write_csv(&rows, cfg.out.as_deref(), None)?;
    Ok(())
}

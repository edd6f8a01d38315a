use std::time::Instant;

use rand::seq::SliceRandom;

use super::model::{bind_params, forward_on_tape, loss_on_tape, GraphBatch, LossTerms};
use super::{forward, init_params, FlexNetError, ModelParams, TrainConfig};
use crate::autodiff::{adam_step, AdamConfig, AdamState, Tape, Tensor};
use crate::channel::GainMatrix;
use crate::graphrep::{build_graph_with, FeatureNorm, FlexGraph};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::Scalar;
use crate::solvers::SolverResult;

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters at the end of the epoch with the lowest mean loss.
    pub params: ModelParams<T>,
    /// Mean minibatch loss of every epoch.
    pub history: Vec<f64>,
    pub best_epoch: usize,
}

fn graphs_for<T: Scalar>(samples: &[GainMatrix<T>], norm: FeatureNorm<T>) -> Vec<FlexGraph<T>> {
    samples.iter().map(|g| build_graph_with(g, norm)).collect()
}

/// Loss of the minibatch `idx` recorded on a fresh tape, with gradients
/// when `trainable`.
fn batch_loss<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[GainMatrix<T>],
    graphs: &[FlexGraph<T>],
    idx: &[usize],
    trainable: bool,
) -> Result<(T, Vec<Tensor<T>>), FlexNetError> {
    let refs: Vec<&FlexGraph<T>> = idx.iter().map(|&i| &graphs[i]).collect();
    let pairs: Vec<_> = idx.iter().map(|&i| (&graphs[i], &samples[i])).collect();
    let batch = GraphBatch::new(&refs)?;
    let terms = LossTerms::new(&pairs)?;
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params, trainable);
    let (p, d) = forward_on_tape(&mut tape, &batch, params, &vars)?;
    let loss = loss_on_tape(&mut tape, &batch, &terms, p, d)?;
    let value = tape.value(loss).item()?;
    if !trainable {
        return Ok((value, Vec::new()));
    }
    tape.backward(loss)?;
    Ok((value, vars.iter().map(|&v| tape.grad_tensor(v)).collect()))
}

/// Mean loss over `samples` and its gradient with respect to every tensor
/// of [`ModelParams::tensors`].
pub fn loss_and_gradient<T: Scalar>(
    samples: &[GainMatrix<T>],
    params: &ModelParams<T>,
) -> Result<(T, Vec<Tensor<T>>), FlexNetError> {
    if samples.is_empty() {
        return Err(FlexNetError::EmptyDataset);
    }
    let graphs = graphs_for(samples, params.norm);
    let idx: Vec<usize> = (0..samples.len()).collect();
    batch_loss(params, samples, &graphs, &idx, true)
}

/// Mean loss over `samples` without recording gradients.
pub fn mean_loss<T: Scalar>(samples: &[GainMatrix<T>], params: &ModelParams<T>) -> Result<T, FlexNetError> {
    if samples.is_empty() {
        return Err(FlexNetError::EmptyDataset);
    }
    let graphs = graphs_for(samples, params.norm);
    let mut total = T::zero();
    let idx: Vec<usize> = (0..samples.len()).collect();
    for chunk in idx.chunks(256) {
        let (l, _) = batch_loss(params, samples, &graphs, chunk, false)?;
        total += l * T::of(chunk.len() as f64);
    }
    Ok(total / T::of(samples.len() as f64))
}

/// Minibatch Adam on the mean negative relaxed sum-rate. Samples may mix
/// network sizes. Shuffling is seeded per epoch, so the run is a pure
/// function of `(samples, config)`.
pub fn train<T: Scalar>(samples: &[GainMatrix<T>], config: &TrainConfig) -> Result<TrainOutcome<T>, FlexNetError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(FlexNetError::EmptyDataset);
    }
    let mut params: ModelParams<T> = init_params(config, derive_seed(config.seed, 0))?;
    params.norm = FeatureNorm::from_gains(&samples[0]);
    let graphs = graphs_for(samples, params.norm);
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut states: Vec<AdamState<T>> = params.tensors().iter().map(|t| AdamState::new(t.len())).collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_from(derive_seed(config.seed, 1 + epoch as u64)));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (loss, grads) = batch_loss(&params, samples, &graphs, chunk, true)?;
            total += loss.to_f64_lossy() * chunk.len() as f64;
            for ((t, g), st) in params.tensors_mut().into_iter().zip(&grads).zip(&mut states) {
                adam_step(t.data_mut(), g.data(), st, &adam)?;
            }
        }
        let mean = total / samples.len() as f64;
        history.push(mean);
        if best.as_ref().is_none_or(|(b, _, _)| mean < *b) {
            best = Some((mean, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

/// Runs the model on `g` and rounds the directions: the lower node of a
/// pair transmits when its relaxed indicator is at least one half.
/// Receivers get zero power; transmit powers stay continuous.
///
/// `wall_time` covers the forward pass and rounding, not graph building.
pub fn infer<T: Scalar>(g: &GainMatrix<T>, params: &ModelParams<T>) -> SolverResult<T> {
    let graph = build_graph_with(g, params.norm);
    let started = Instant::now();
    let out = forward(&graph, params).expect("graphs built from gain matrices are well formed");
    let half = T::of(0.5);
    let choices: Vec<bool> = out.pair_directions().iter().map(|&d| d >= half).collect();
    let mut power = out.power;
    for (k, &lower) in choices.iter().enumerate() {
        let rx = if lower { 2 * k + 1 } else { 2 * k };
        power[rx] = T::zero();
    }
    SolverResult::from_choices(g, power, &choices, 1, started)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FlexNetError, Pooling, TrainConfig};
use crate::autodiff::Tensor;
use crate::graphrep::FeatureNorm;
use crate::rng::rng_from;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Weights of one message-passing layer. `in` is 1 for the first layer and
/// `1 + H` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// `in × H`, applied to the interference source.
    pub w_u_intf: Tensor<T>,
    /// `in × H`, applied to the interference destination.
    pub w_v_intf: Tensor<T>,
    /// `1 × H`, applied to the edge gain.
    pub w_e_intf: Tensor<T>,
    /// `(1 + H) × H`, applied to the partner's combined state.
    pub w_u_dsr: Tensor<T>,
    /// `(1 + H) × H`, applied to the vertex's own combined state.
    pub w_v_dsr: Tensor<T>,
}

/// Perceptron with two ReLU hidden layers and a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    pub weights: [Tensor<T>; 3],
    pub biases: [Tensor<T>; 3],
}

/// Everything needed to run the model: weights, fixed hyperparameters and
/// the feature transform the weights were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub layers: Vec<LayerParams<T>>,
    pub power_head: HeadParams<T>,
    pub direction_head: HeadParams<T>,
    pub temperature_power: T,
    pub temperature_direction: T,
    pub hidden: usize,
    pub pooling: Pooling,
    pub norm: FeatureNorm<T>,
}

const LAYER_NAMES: [&str; 5] = ["w_u_intf", "w_v_intf", "w_e_intf", "w_u_dsr", "w_v_dsr"];

/// Expected `(name, rows, cols)` of every tensor, in [`ModelParams::tensors`] order.
fn layout(layers: usize, hidden: usize) -> Vec<(String, usize, usize)> {
    let h = hidden;
    let mut out = Vec::new();
    for l in 0..layers {
        let inp = if l == 0 { 1 } else { 1 + h };
        let shapes = [(inp, h), (inp, h), (1, h), (1 + h, h), (1 + h, h)];
        for (name, (r, c)) in LAYER_NAMES.iter().zip(shapes) {
            out.push((format!("layer{l}.{name}"), r, c));
        }
    }
    for (head, inp) in [("power", 1 + h), ("direction", 2 * (1 + h))] {
        let dims = [inp, h, h, 1];
        for i in 0..3 {
            out.push((format!("{head}.w{i}"), dims[i], dims[i + 1]));
            out.push((format!("{head}.b{i}"), 1, dims[i + 1]));
        }
    }
    out
}

fn uniform<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<T> {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.random_range(-bound..=bound)))
        .collect();
    Tensor::new(rows, cols, data).expect("shape from layout")
}

/// Fresh weights, uniform in `±1/√fan_in` except the zeroed head output
/// layers; the feature transform defaults
/// to the channel defaults until training replaces it.
pub fn init_params<T: Scalar>(config: &TrainConfig, seed: u64) -> Result<ModelParams<T>, FlexNetError> {
    config.validate()?;
    let mut rng = rng_from(seed);
    let mut tensors: Vec<Tensor<T>> = layout(config.layers, config.hidden)
        .into_iter()
        .map(|(_, r, c)| uniform(&mut rng, r, c))
        .collect();
    // Head output layers start at zero so every sigmoid starts at its
    // midpoint. With small temperatures a random start saturates them and
    // the gradient vanishes before training begins.
    let n = tensors.len();
    for idx in [n - 8, n - 2] {
        for t in &mut tensors[idx..idx + 2] {
            t.data_mut().fill(T::zero());
        }
    }
    let norm = FeatureNorm {
        p_max: T::one(),
        noise: T::of(1e-13),
    };
    ModelParams::from_tensors(
        config.layers,
        config.hidden,
        config.pooling,
        T::of(config.temperature_power),
        T::of(config.temperature_direction),
        norm,
        tensors,
    )
}

impl<T: Scalar> ModelParams<T> {
    /// Assembles parameters from tensors in [`tensors`](Self::tensors) order.
    pub fn from_tensors(
        layers: usize,
        hidden: usize,
        pooling: Pooling,
        temperature_power: T,
        temperature_direction: T,
        norm: FeatureNorm<T>,
        tensors: Vec<Tensor<T>>,
    ) -> Result<Self, FlexNetError> {
        if layers == 0 || hidden == 0 {
            return Err(FlexNetError::InvalidConfig(
                "layers and hidden width must be positive".into(),
            ));
        }
        if !(temperature_power > T::zero() && temperature_direction > T::zero()) {
            return Err(FlexNetError::InvalidConfig("temperatures must be positive".into()));
        }
        let expected = layout(layers, hidden);
        if tensors.len() != expected.len() {
            return Err(FlexNetError::DimensionMismatch(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, r, c), t) in expected.iter().zip(&tensors) {
            if t.shape() != (*r, *c) {
                return Err(FlexNetError::DimensionMismatch(format!(
                    "{name}: expected {r}×{c}, got {}×{}",
                    t.rows(),
                    t.cols()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("count checked");
        let layer_params = (0..layers)
            .map(|_| LayerParams {
                w_u_intf: next(),
                w_v_intf: next(),
                w_e_intf: next(),
                w_u_dsr: next(),
                w_v_dsr: next(),
            })
            .collect();
        let mut head = || {
            let (w0, b0, w1, b1, w2, b2) = (next(), next(), next(), next(), next(), next());
            HeadParams {
                weights: [w0, w1, w2],
                biases: [b0, b1, b2],
            }
        };
        let power_head = head();
        let direction_head = head();
        Ok(Self {
            layers: layer_params,
            power_head,
            direction_head,
            temperature_power,
            temperature_direction,
            hidden,
            pooling,
            norm,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Every trainable tensor in a fixed order: per layer the five
    /// aggregation matrices, then each head as `w0, b0, w1, b1, w2, b2`.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend([&l.w_u_intf, &l.w_v_intf, &l.w_e_intf, &l.w_u_dsr, &l.w_v_dsr]);
        }
        for h in [&self.power_head, &self.direction_head] {
            for i in 0..3 {
                out.extend([&h.weights[i], &h.biases[i]]);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend([
                &mut l.w_u_intf,
                &mut l.w_v_intf,
                &mut l.w_e_intf,
                &mut l.w_u_dsr,
                &mut l.w_v_dsr,
            ]);
        }
        for h in [&mut self.power_head, &mut self.direction_head] {
            let [w0, w1, w2] = &mut h.weights;
            let [b0, b1, b2] = &mut h.biases;
            out.extend([w0, b0, w1, b1, w2, b2]);
        }
        out
    }

    /// Checkpoint names matching [`tensors`](Self::tensors).
    pub fn tensor_names(&self) -> Vec<String> {
        layout(self.n_layers(), self.hidden)
            .into_iter()
            .map(|(n, _, _)| n)
            .collect()
    }

    pub fn n_weights(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams::from_tensors(
            self.n_layers(),
            self.hidden,
            self.pooling,
            U::of(self.temperature_power.to_f64_lossy()),
            U::of(self.temperature_direction.to_f64_lossy()),
            self.norm.cast(),
            self.tensors().into_iter().map(|t| t.cast()).collect(),
        )
        .expect("shapes are preserved by casting")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Temperatures {
    power: f64,
    direction: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    layers: usize,
    hidden: usize,
    temperatures: Temperatures,
    pooling: Pooling,
    normalization: FeatureNorm<f64>,
    weights: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Serializes `params` to the JSON checkpoint format.
pub fn model_to_json<T: Scalar>(params: &ModelParams<T>) -> String {
    let weights = params
        .tensor_names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, t)| {
            let rows = (0..t.rows())
                .map(|r| t.row(r).iter().map(|x| x.to_f64_lossy()).collect())
                .collect();
            (name, rows)
        })
        .collect();
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        layers: params.n_layers(),
        hidden: params.hidden,
        temperatures: Temperatures {
            power: params.temperature_power.to_f64_lossy(),
            direction: params.temperature_direction.to_f64_lossy(),
        },
        pooling: params.pooling,
        normalization: params.norm.cast(),
        weights,
    };
    serde_json::to_string(&ckpt).expect("checkpoint serializes")
}

/// Parses a JSON checkpoint.
pub fn model_from_json(text: &str) -> Result<ModelParams<f64>, FlexNetError> {
    let value: Value = serde_json::from_str(text).map_err(|e| FlexNetError::SchemaMismatch(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| FlexNetError::SchemaMismatch("missing format_version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(FlexNetError::UnsupportedVersion(version));
    }
    let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| FlexNetError::SchemaMismatch(e.to_string()))?;
    if ckpt.layers == 0 || ckpt.hidden == 0 {
        return Err(FlexNetError::SchemaMismatch(
            "layers and hidden must be positive".into(),
        ));
    }
    let expected = layout(ckpt.layers, ckpt.hidden);
    if ckpt.weights.len() != expected.len() {
        return Err(FlexNetError::SchemaMismatch(format!(
            "expected {} weight arrays, found {}",
            expected.len(),
            ckpt.weights.len()
        )));
    }
    let mut tensors = Vec::with_capacity(expected.len());
    for (name, r, c) in &expected {
        let rows = ckpt
            .weights
            .get(name)
            .ok_or_else(|| FlexNetError::SchemaMismatch(format!("missing weight {name}")))?;
        if rows.len() != *r || rows.iter().any(|row| row.len() != *c) {
            return Err(FlexNetError::SchemaMismatch(format!("{name} is not {r}×{c}")));
        }
        let data = rows.iter().flatten().copied().collect();
        tensors.push(Tensor::new(*r, *c, data)?);
    }
    let norm = ckpt.normalization;
    if !(norm.p_max > 0.0 && norm.noise > 0.0) {
        return Err(FlexNetError::SchemaMismatch(
            "normalization constants must be positive".into(),
        ));
    }
    ModelParams::from_tensors(
        ckpt.layers,
        ckpt.hidden,
        ckpt.pooling,
        ckpt.temperatures.power,
        ckpt.temperatures.direction,
        norm,
        tensors,
    )
    .map_err(|e| FlexNetError::SchemaMismatch(e.to_string()))
}

pub fn save_model<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<(), FlexNetError> {
    fs::write(path, model_to_json(params))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams<f64>, FlexNetError> {
    model_from_json(&fs::read_to_string(path)?)
}

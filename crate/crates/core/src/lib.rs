//! Resource allocation for flexible-duplex wireless networks.
//!
//! Every pair of nodes picks which end transmits and how much power to
//! use. The crate simulates the channel, evaluates the sum-rate, solves the
//! problem with classical methods (exhaustive search over directions,
//! coordinate descent, fixed baselines) and with Flex-Net, a graph neural
//! network trained without labels.
//!
//! Numerical code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, and the `*32` variants to `f32` for faster training.

pub mod autodiff;
pub mod channel;
pub mod dataset;
pub mod flexnet;
pub mod graphrep;
pub mod objective;
pub mod rng;
pub mod scalar;
pub mod solvers;
pub mod topology;

pub type GainMatrix = channel::GainMatrix<f64>;
pub type Allocation = objective::Allocation<f64>;
pub type FlexGraph = graphrep::FlexGraph<f64>;
pub type FeatureNorm = graphrep::FeatureNorm<f64>;
pub type ModelParams = flexnet::ModelParams<f64>;
pub type ForwardOutput = flexnet::ForwardOutput<f64>;
pub type TrainOutcome = flexnet::TrainOutcome<f64>;
pub type SolverResult = solvers::SolverResult<f64>;
pub type Tensor = autodiff::Tensor<f64>;

pub type GainMatrix32 = channel::GainMatrix<f32>;
pub type ModelParams32 = flexnet::ModelParams<f32>;
pub type TrainOutcome32 = flexnet::TrainOutcome<f32>;

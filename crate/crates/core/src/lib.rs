//! Embeddings of finite metric spaces into Gaussian mixtures under the
//! mixture-Wasserstein distance `MW₂`, with Euclidean, hyperbolic and
//! Fisher–Rao baselines.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`.

pub mod analysis;
pub mod baselines;
pub mod embed;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod model;
pub mod scalar;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MetricSpace = metric::FiniteMetricSpace<f64>;
pub type Mixture1D = transport::GaussianMixture1D<f64>;
pub type MixtureD = transport::GaussianMixtureD<f64>;
pub type Plan = transport::TransportPlan<f64>;
pub type Transformer = model::PTParams<f64>;
pub type Mlp = model::MLPParams<f64>;
pub type Readout = baselines::ReadoutModel<f64>;
pub type Model = trainer::Model<f64>;
pub type Report = analysis::DistortionReport<f64>;

pub type MetricSpaceF32 = metric::FiniteMetricSpace<f32>;
pub type Mixture1DF32 = transport::GaussianMixture1D<f32>;
pub type TransformerF32 = model::PTParams<f32>;

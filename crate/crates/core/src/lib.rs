//! Optimally time-dependent (OTD) modes evolved alongside nonlinear dynamical
//! systems, reduced-operator growth indicators, and the conditional statistics
//! used to score them as predictors of extreme bursts.
//!
//! Every numerical kernel is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the scalar to `f64`, which is what the
//! command-line harness and the acceptance suite use.

pub mod dmd;
pub mod dynsys;
pub mod error;
pub mod integrators;
pub mod models;
pub mod numerics;
pub mod otd;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use dynsys::{
    eval_linearized, eval_rhs, inner_product, DynamicalSystem, InnerProductKind, LinearOperator,
    StateVector, TangentVector,
};
pub use error::{OtdError, Result};
pub use scalar::Scalar;

pub type DenseMatrix = numerics::DenseMatrix<f64>;
pub type SpectralGrid1D = numerics::SpectralGrid1D<f64>;
pub type SpectralGrid2D = numerics::SpectralGrid2D<f64>;
pub type StepControl = integrators::StepControl<f64>;
pub type OtdBasis = otd::OtdBasis<f64>;
pub type ReducedOperator = otd::ReducedOperator<f64>;
pub type OtdRecord = otd::OtdRecord<f64>;
pub type Prototype = models::prototype::Prototype<f64>;
pub type PrototypeParams = models::prototype::PrototypeParams<f64>;
pub type KolmogorovFlow = models::kolmogorov::KolmogorovFlow<f64>;
pub type KolmogorovParams = models::kolmogorov::KolmogorovParams<f64>;
pub type Mnls = models::mnls::Mnls<f64>;
pub type MnlsParams = models::mnls::MnlsParams<f64>;
pub type DmdResult = dmd::DmdResult<f64>;
pub type ConditionalDensity = stats::ConditionalDensity<f64>;

//! Engineered decoherence in a two-qubit system–environment model.
//!
//! The numerical core ([`qmat`], [`model`], the closed forms in [`oracle`])
//! is generic over the scalar type; the aliases below fix it to `f64`.

pub mod cli;
pub mod ensemble;
pub mod model;
pub mod oracle;
pub mod qmat;
pub mod scalar;

pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type DensityMatrix2 = qmat::DensityMatrix2<f64>;
pub type DensityMatrix4 = qmat::DensityMatrix4<f64>;
pub type Unitary2 = qmat::Unitary2<f64>;
pub type Unitary4 = qmat::Unitary4<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type KickParams = model::KickParams<f64>;
pub type KondoParams = model::KondoParams<f64>;
pub type DDParams = model::DDParams<f64>;
pub type Timeline = model::Timeline<f64>;
pub type Trajectory = model::Trajectory<f64>;

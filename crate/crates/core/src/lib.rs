//! Coupled freeze/thaw heat transport and variably-saturated water flow in
//! permafrost soil columns, with an evapotranspiration sink limited by soil
//! water availability and temperature.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the file formats and the CLI use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constitutive;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod et;
pub mod flow;
pub mod forcing;
pub mod heat;
pub mod mesh;
pub mod oracles;
pub mod output;
pub mod real;
pub mod scenario;
mod tridiag;

pub use error::{ConfigError, Error, Result};
pub use real::Real;

pub type ColumnMesh = mesh::ColumnMesh<f64>;
pub type SoilLayer = mesh::SoilLayer<f64>;
pub type SoilProfile = mesh::SoilProfile<f64>;
pub type ColumnState = mesh::ColumnState<f64>;
pub type VegetationParams = et::VegetationParams<f64>;
pub type ClimateForcing = forcing::ClimateForcing<f64>;
pub type ScenarioConfig = scenario::ScenarioConfig<f64>;
pub type DiagnosticsSeries = engine::DiagnosticsSeries<f64>;
pub type RunOutput = engine::RunOutput<f64>;
pub type StefanProblem = oracles::StefanProblem<f64>;

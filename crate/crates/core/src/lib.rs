//! Density control of point swarms.
//!
//! Each agent estimates the swarm density with a kernel density estimate
//! and moves with `v = -D grad(f - f_desired) / f`, which makes the
//! density error obey a heat equation with zero-flux walls. Grid solvers
//! in [`oracle`] check the particle method against that equation.

pub mod checks;
pub mod controller;
pub mod crossval;
pub mod desired;
pub mod error;
pub mod field;
pub mod kde;
pub mod kernels;
pub mod oracle;
pub mod pgm;
pub mod runner;
pub mod scenario;
pub mod simulator;

pub type Vec2 = nalgebra::Vector2<f64>;

pub use controller::{ControlLaw, Denominator};
pub use error::{Error, Result};
pub use field::{Domain, IngestOptions, ScalarField};
pub use kde::{DensityEstimate, Estimator, Method, SwarmState};
pub use kernels::{BandwidthPolicy, Kernel};
pub use simulator::{SimConfig, Simulation};

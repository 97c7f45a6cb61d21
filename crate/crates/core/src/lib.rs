//! Stochastic shear-flow laboratory.
//!
//! A channel `(0, L)² × (0, h)` whose bottom wall slides at an
//! Ornstein–Uhlenbeck speed `X_t`. The crate provides exact simulation of the
//! wall noise, the random boundary-layer background flow and its calculus,
//! closed-form dissipation bounds, a desk-scale incompressible solver, and
//! pathwise/ensemble diagnostics that witness the bounds on simulated data.

pub mod background;
pub mod bounds;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ou;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use background::{BackgroundParams, ProfileSample};
pub use bounds::{BoundsReport, FlowConfig};
pub use diagnostics::{DissipationStats, FluctuationField, InequalityLedger};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use harness::{ExperimentConfig, RunManifest};
pub use ou::{GradientSystem, OuParams, OuPath, PathInit};
pub use solver::{GridSpec, InitialCondition, Simulation, TrajectoryRecord, VelocityField};

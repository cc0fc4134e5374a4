//! Small-noise behavior of cooperative ODE systems driven by white noise.
//!
//! The crate locates and classifies equilibria, integrates deterministic and
//! stochastic trajectories, evaluates and minimizes the Freidlin-Wentzell
//! action to estimate quasipotentials, and estimates stationary measures and
//! their concentration as the noise vanishes. The Griffith positive-feedback
//! circuit is the worked instance throughout.

pub mod action;
pub mod equilibria;
pub mod error;
pub mod flow;
pub mod measure;
pub mod models;
#[cfg(feature = "oracles")]
pub mod oracles;
pub mod order;
pub mod sde;

pub use error::{Error, Result};
pub use models::{GriffithModel, GriffithParams, Model, ModelSpec, NoiseSpec, OuModel};
pub use order::Point;

//! Multi-index antithetic stochastic gradient Langevin estimators.
//!
//! The crate simulates coupled stochastic-gradient Langevin chains and combines
//! them into nested antithetic differences over two level indices: the
//! mini-batch size `s = 2^l1 * s0` and the step size `h = 2^-l2 * h0`. The
//! adaptive driver allocates paths across the level grid and grows it until the
//! extrapolated bias drops below half the target RMSE.
//!
//! Everything here is `no_std` with `alloc`. IO, file formats and the command
//! line live in the `masga` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adaptive;
pub mod error;
pub mod estimators;
pub mod math;
pub mod models;
pub mod oracles;
pub mod rng;
pub mod sde;

pub use adaptive::{AdaptiveConfig, EstimatorReport, LevelShape, Rates};
pub use error::Error;
pub use estimators::{Coupling, LevelGeometry, LevelSampler, LevelStats, MultiIndex, TestFunction};
pub use models::{Batch, Dataset, DriftModel, LogisticModel, MixtureModel, OuModel, Prior, ReplacementMode};
pub use rng::{NoiseSource, Role, StreamKey};
pub use sde::{ChainCluster, ChainLabel, ChainState, ClusterSpec};

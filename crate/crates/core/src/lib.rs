//! Economics of a two-sided food-delivery platform.
//!
//! * [`equilibrium`]: the one-period game and a platform optimizer.
//! * [`dynamics`]: the infinite-horizon state model solved by value iteration.
//! * [`abm`]: the agent-based market simulation and its strategy comparison.
//! * [`report`]: cross-run aggregation and data export.

pub mod abm;
pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod params;
pub mod report;
pub mod stream;

pub use config::{validate_config, ConfigError, Profile, Range, SimConfig, Strategy};
pub use params::{ControlBounds, Controls, Objective, StaticParams};
pub use stream::{derive_stream, RandomStream, StreamId};

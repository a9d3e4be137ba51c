//! Budget-constrained weight adaptation for SIS epidemic spreading on
//! weighted networks.
//!
//! The decision variable is a schedule of contact weights `w_ij(t)`, one
//! matrix per unit interval of `[1, T)`. Each schedule is scored by
//! integrating the N-intertwined mean-field SIS equations and measuring the
//! accumulated infection `∫ Σ √p_i dt`, subject to a quadratic adaptation
//! budget. Optimization uses NSDE with ε constraint handling, either on the
//! full problem or inside a random-grouping cooperative coevolution loop.
//!
//! Modules:
//! - [`graph`]: Barabási–Albert networks, topology metrics, spectral radius.
//! - [`dynamics`]: encoding, integration, objective and constraint.
//! - [`de`]: NSDE operators and generations.
//! - [`epsilon`]: ε schedule and comparator.
//! - [`coevolve`]: grouping, subcomponent optimization, the full runners.
//! - [`baselines`]: no adaptation and constant adaptation.
//! - [`stats`], [`experiment`]: rank-sum tests, campaigns, CSV output.

pub mod baselines;
pub mod coevolve;
pub mod de;
pub mod dynamics;
pub mod epsilon;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

//! Branching random walks on weighted graphs.
//!
//! The crate is organised around five subsystems:
//!
//! * [`graph`]: weighted graphs with bounded geometry, built-in families,
//!   products, finite truncations and local-isomorphism projections.
//! * [`spectral`]: Perron–Frobenius eigenvalues of finite kernels, truncation
//!   ladders converging to the strong critical parameter, and the expected
//!   occupancy series/ODE.
//! * [`sim`]: exact continuous-time simulation of the BRW and its capped,
//!   generation-truncated and birth-capped variants, with coupled runs and
//!   Monte-Carlo survival estimation.
//! * [`coupling`]: block events, oriented percolation fields and the drift
//!   analysis for walks on `Z`.
//! * [`random_env`]: bond percolation on finite boxes and the strong critical
//!   parameter of percolation clusters.
//!
//! [`cli`] wires everything to a configuration-driven experiment runner.

pub mod cli;
pub mod coupling;
pub mod error;
pub mod graph;
pub mod random_env;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Vertex, WeightedGraph};

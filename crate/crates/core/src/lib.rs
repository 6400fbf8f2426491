//! Computational design framework for hall-effect based multi-axis force
//! sensing flexures.
//!
//! The crate covers the whole forward chain from applied force to quantized
//! sensor counts and the tooling built on top of it:
//!
//! * [`magnetostatics`]: analytic exterior fields of permanent magnets,
//!   sensitivity profiles and interference budgets.
//! * [`flexure`]: cantilever flexure mechanics, Von Kármán stretching,
//!   bending stress and fatigue screening.
//! * [`transducer`]: one sensing unit (sensor flexure + magnet flexure),
//!   force sensitivity, force range and constraint checks.
//! * [`design_search`]: grid sweeps, Pareto extraction and design selection.
//! * [`inverse_models`]: dataset synthesis, the Gaussian RBF ideal model and
//!   the stacked GRU with uncertainty output.
//! * [`cli_io`]: configuration, persistence, reports and the `hallflex` CLI.

pub mod cli_io;
pub mod design_search;
pub mod error;
pub mod flexure;
pub mod inverse_models;
pub mod magnetostatics;
pub mod transducer;

pub use error::{Error, Result};

/// Gauss per tesla.
pub const GAUSS_PER_TESLA: f64 = 1.0e4;

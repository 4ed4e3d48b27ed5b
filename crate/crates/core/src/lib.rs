//! Verification tooling for fixed-point results on S-metric spaces.
//!
//! The crate evaluates Zamfirescu-type contraction quantities, checks the
//! gauge and ε-δ conditions that guarantee a unique fixed point, runs
//! Picard iteration, tests the discontinuity criterion at the fixed point,
//! and verifies fixed circles and discs. Finite spaces are checked
//! exhaustively; real-line spaces are checked on a sampling grid.

pub mod contraction;
pub mod error;
pub mod expr;
pub mod fixed_circle;
pub mod harness;
pub mod map;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use map::MapDef;
pub use space::{MetricDef, MetricSpace, Point, SMetricDef, Space, Universe, DEFAULT_TOLERANCE};

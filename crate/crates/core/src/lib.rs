//! Numerical laboratory for the curvature flow of planar triple-junction
//! networks.
//!
//! * [`topology`] and [`geometry`] model networks as polylines on graphs.
//! * [`energy`] evaluates the Gaussian energy and the shrinker residual.
//! * [`graphrep`] writes nearby networks as normal graphs over a reference.
//! * [`flow`] integrates the flow and detects singularities.
//! * [`rescale`] performs Huisken and parabolic rescalings and runs the
//!   blowup uniqueness experiment.
//! * [`stability`] computes second-variation spectra, Łojasiewicz exponents
//!   and searches for shrinkers.

pub mod cli;
pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod graphrep;
mod linalg;
pub mod rescale;
pub mod shapes;
pub mod stability;
pub mod topology;
pub mod vec2;

pub use error::{Error, Result};
pub use geometry::DiscreteNetwork;
pub use topology::GraphTopology;
pub use vec2::Vec2;

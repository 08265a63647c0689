//! Roll-angle estimation for stereo disparity maps.
//!
//! A camera rig mounted with a small roll tilts the road surface in the
//! image. For a road scene, disparity along the (rotation-corrected)
//! vertical image coordinate follows a parabola, so the roll angle can be
//! recovered by asking: at which rotation does a parabola explain the
//! disparities best? This crate builds that least-squares fit energy and
//! minimizes it with gradient descent (adaptive learning rate),
//! golden-section search, or an exhaustive grid scan, alongside a
//! closed-form plane-fit baseline.
//!
//! Results are deterministic: repeated runs on the same input produce
//! bit-identical reports regardless of the worker thread count (set via the
//! `ROLLFIT_THREADS` environment variable, read once per process).

pub mod disparity;
pub mod energy;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod solver;

pub use disparity::{generate_synthetic, DisparityMap, Mask, PixelSample, SyntheticRoadSpec};
pub use error::{Error, Result};
pub use solver::{solve, Method, SolverConfig, SolverReport, Termination};

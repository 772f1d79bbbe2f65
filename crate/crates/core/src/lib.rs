//! Vessel-tree analysis: exact distance transforms and thinning, skeleton
//! graphs with calibrated radii, Murray-exponent calibration, a
//! differentiable Murray/radius loss, topology metrics and a Poiseuille
//! network simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod grid;
pub mod hemo;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod murray;
pub mod raster;
pub mod skeleton;
pub mod synth;
pub mod topology;
pub mod units;

pub(crate) mod autodiff;

pub use error::{Error, Result};
pub use graph::{BifurcationRecord, VesselGraph};
pub use grid::{Alphabet, Connectivity, MaskGrid, ScalarField, Shape, VesselClass};
pub use murray::ExponentTable;

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod boxdim;
pub mod calibration;
pub mod dyadic;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod inequalities;
pub mod io;
pub mod morton;
pub mod regular;
pub mod scenery;

pub use dyadic::{DyadicCube, DyadicMeasure, GridSet};
pub use error::{LabError, Result};

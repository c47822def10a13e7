//! Marker-based drill navigation.
//!
//! The pipeline runs per frame: [`edgemap`] extracts subpixel edgels and
//! chains them, [`matcher`] locates the drill marker by chamfer search and
//! least-squares refinement, [`calib`] maps the marker pose into world
//! centimeters, and [`plangeo`] / [`navigate`] evaluate it against the
//! planned pedicle corridor. [`synth`] renders scenes with exact ground truth.

pub mod calib;
pub mod edgemap;
pub mod error;
pub mod frame;
pub mod geom;
pub mod kv;
pub mod matcher;
pub mod navigate;
pub mod plangeo;
pub mod synth;

pub use error::{Error, Result};
pub use frame::Frame;
pub use geom::Point;

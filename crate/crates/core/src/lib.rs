pub mod cli;
pub mod depth;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod terrain;
pub mod triage;

pub use error::{Error, Result};

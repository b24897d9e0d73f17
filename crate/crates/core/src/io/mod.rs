//! File formats, run configuration, and output products.

pub mod artifacts;
pub mod config;
pub mod products;
pub mod raster_io;
pub mod tables;

pub use config::{RunConfig, Stage};
pub use products::{format_g, OutputRow, TABLE_COLUMNS};
pub use raster_io::{read_complex, read_mask, read_raster, write_complex, write_mask, write_raster};

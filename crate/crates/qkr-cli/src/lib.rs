//! Command-line front end for the kicked-rotor toolkit: config-driven
//! experiment presets, resonance-map export, parameter sweeps and line-shape
//! re-fits.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod presets;

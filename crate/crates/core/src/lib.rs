//! Simulation toolkit for a perception-guided, variable-rate orchard sprayer.
//!
//! The pipeline mirrors the physical system:
//!
//! 1. [`perception`]: segmentation masks and depth rasters are depth-gated,
//!    split into one zone per nozzle and reduced to canopy fraction and
//!    distance.
//! 2. [`control`]: each zone's features become a PWM duty under one of three
//!    control modes.
//! 3. [`valve`]: duties drive proportional valves; flow and dispensed volume
//!    are integrated over time.
//! 4. [`spray`]: nozzle output is stamped onto simulated water-sensitive
//!    papers and scored by adhesion rate.
//! 5. [`harness`]: field scenarios are replayed under all three modes and
//!    summarised per target / no-target group.
//!
//! The `spraysim` binary wraps these stages as `run`, `compare`,
//! `calibrate` and `show-config` subcommands.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod harness;
pub mod io;
pub mod perception;
pub mod spray;
pub mod stats;
pub mod valve;

pub use error::{Error, Result};

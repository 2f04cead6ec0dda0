//! Field-trial replay: scenarios, trials under each control mode, and
//! summary reports.

pub mod generate;
pub mod report;
pub mod scenario;
pub mod trial;

pub use generate::{generate_scenario, GeneratorSpec};
pub use report::{compare_controls, summarize, Report};
pub use scenario::{naju_default, Scenario, Tag};
pub use trial::{prepare_frames, run_trial, PreparedFrames, TrialConfig, TrialResult};

//! Effective configuration: built-in defaults, then a TOML file, then
//! command-line flags.
//!
//! A config file may set any subset of keys. Tables are merged key by key
//! over the defaults, so `[pe2]\ntrials = 2` keeps every other distance
//! sweep setting. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlMode, ControllerConfig};
use crate::error::{Error, Result};
use crate::harness::scenario::BUILTIN_DEFAULT;
use crate::harness::TrialConfig;
use crate::perception::PerceptionConfig;
use crate::spray::calibrate::SweepSetup;
use crate::spray::PlumeModel;
use crate::valve::{PwmSettings, ValveParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    /// Manifest path, or the builtin scenario's name.
    pub scenario: String,
    /// Deposition seeds; one trial per seed and mode.
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Worker threads; all processors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Write per-step valve traces for `run`.
    pub write_traces: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            scenario: BUILTIN_DEFAULT.to_string(),
            seeds: vec![1, 2, 3],
            out: PathBuf::from("spraysim-out"),
            jobs: None,
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSettings {
    /// Largest mean gap-paper R_p attributed to drift from nearby trees.
    pub bleed_tolerance: f64,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self { bleed_tolerance: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub run: RunSettings,
    pub controller: ControllerConfig,
    pub perception: PerceptionConfig,
    pub valve: ValveParams,
    pub pwm: PwmSettings,
    pub plume: PlumeModel,
    pub harness: HarnessSettings,
    pub pe1: SweepSetup,
    pub pe2: SweepSetup,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            run: RunSettings::default(),
            controller: ControllerConfig::default(),
            perception: PerceptionConfig::default(),
            valve: ValveParams::default(),
            pwm: PwmSettings::default(),
            plume: PlumeModel::default(),
            harness: HarnessSettings::default(),
            pe1: SweepSetup::pe1(),
            pe2: SweepSetup::pe2(),
        }
    }
}

/// Values given on the command line; `None` leaves the lower layer alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub mode: Option<ControlMode>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

fn merge(base: &mut toml::Table, layer: toml::Table) {
    for (key, value) in layer {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses `1,2,3` into seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed {s:?} in {text:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("empty seed list".into()));
    }
    Ok(seeds)
}

impl SimConfig {
    /// Defaults overlaid with `text`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let layer: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        let mut base = toml::Table::try_from(SimConfig::default())
            .map_err(|e| Error::Config(format!("cannot encode defaults: {e}")))?;
        merge(&mut base, layer);
        let cfg: SimConfig = base
            .try_into()
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.scenario {
            self.run.scenario = s.clone();
        }
        if let Some(m) = o.mode {
            self.controller.mode = m;
        }
        if let Some(s) = &o.seeds {
            self.run.seeds = s.clone();
        }
        if let Some(out) = &o.out {
            self.run.out = out.clone();
        }
        if o.jobs.is_some() {
            self.run.jobs = o.jobs;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.valve.validate()?;
        self.pwm.validate()?;
        self.plume.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.run.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.harness.bleed_tolerance >= 0.0) {
            return Err(Error::Config("bleed tolerance must be non-negative".into()));
        }
        for (name, s) in [("pe1", &self.pe1), ("pe2", &self.pe2)] {
            let ok = !s.duties.is_empty()
                && !s.keys.is_empty()
                && s.trials > 0
                && s.speed > 0.0
                && s.dt > 0.0
                && s.duties.iter().all(|d| (self.plume.min_reach_duty..=100.0).contains(d));
            if !ok {
                return Err(Error::Config(format!("{name} sweep settings out of range")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Runtime(format!("cannot encode config: {e}")))
    }

    pub fn trial_config(&self, keep_trace: bool) -> TrialConfig {
        TrialConfig {
            controller: self.controller,
            perception: self.perception,
            valve: self.valve,
            pwm: self.pwm,
            plume: self.plume,
            keep_trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_tables_keep_their_own_defaults() {
        let cfg = SimConfig::from_toml("[pe2]\ntrials = 2\n[controller]\nk_p = 0.9\n").unwrap();
        assert_eq!(cfg.pe2.trials, 2);
        assert_eq!(cfg.pe2.keys, SweepSetup::pe2().keys);
        assert_eq!(cfg.controller.k_p, 0.9);
        assert_eq!(cfg.controller.thres_nozzle, 0.10);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let mut cfg = SimConfig::from_toml("[run]\nseeds = [4, 5]\nout = \"file\"\n").unwrap();
        assert_eq!(cfg.run.seeds, vec![4, 5]);
        cfg.apply(&Overrides {
            out: Some("flag".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.run.out, PathBuf::from("flag"));
        assert_eq!(cfg.run.seeds, vec![4, 5]);
        assert_eq!(cfg.run.scenario, BUILTIN_DEFAULT);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(SimConfig::from_toml("[valve]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[controller]\nmode = \"bogus\"\n"), Err(Error::Config(_))));
        assert!(matches!(SimConfig::from_toml("[valve]\na_n = -1.0\n"), Err(Error::Config(_))));
        assert!(parse_seeds("1,x").is_err());
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
    }
}

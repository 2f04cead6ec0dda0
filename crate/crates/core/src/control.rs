//! Per-nozzle duty-cycle control laws.
//!
//! Three modes are compared in the field trials:
//!
//! * [`ControlMode::AllOpen`]: every nozzle at the duty ceiling.
//! * [`ControlMode::OnOff`]: nozzle fully on when the canopy fraction exceeds
//!   `thres_nozzle`, off otherwise.
//! * [`ControlMode::VariableFlow`]: the same threshold gate, then the floor
//!   duty for close targets and a proportional law `k_p * A_p[%] * d_c + c_v`
//!   clamped to `[duty_floor, duty_ceiling]` for the rest.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::ZoneFeatures;

pub const NOZZLES_PER_SIDE: usize = 4;
pub const MAX_NOZZLES: usize = 2 * NOZZLES_PER_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlMode {
    #[serde(rename = "all")]
    AllOpen,
    #[serde(rename = "onoff")]
    OnOff,
    #[serde(rename = "variable")]
    VariableFlow,
}

impl ControlMode {
    pub const ALL: [ControlMode; 3] = [
        ControlMode::AllOpen,
        ControlMode::OnOff,
        ControlMode::VariableFlow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::AllOpen => "all",
            ControlMode::OnOff => "onoff",
            ControlMode::VariableFlow => "variable",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-open" | "allopen" => Ok(ControlMode::AllOpen),
            "onoff" | "on-off" => Ok(ControlMode::OnOff),
            "variable" | "variable-flow" => Ok(ControlMode::VariableFlow),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; valid modes: all, onoff, variable"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Canopy fraction at or below which a nozzle stays off.
    pub thres_nozzle: f64,
    pub k_p: f64,
    /// Dead-zone offset, duty percentage points.
    pub c_v: f64,
    pub duty_floor: f64,
    pub duty_ceiling: f64,
    /// Targets at or inside this distance get `duty_floor`.
    pub near_distance: f64,
    pub mode: ControlMode,
    /// Apply the on/off threshold before the proportional law.
    pub variable_gate_by_threshold: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            thres_nozzle: 0.10,
            k_p: 0.8,
            c_v: 0.0,
            duty_floor: 75.0,
            duty_ceiling: 100.0,
            near_distance: 0.9,
            mode: ControlMode::VariableFlow,
            variable_gate_by_threshold: true,
        }
    }
}

impl ControllerConfig {
    pub fn with_mode(mut self, mode: ControlMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.thres_nozzle)
            && self.duty_floor > 0.0
            && self.duty_floor < self.duty_ceiling
            && self.duty_ceiling <= 100.0
            && self.k_p > 0.0
            && self.near_distance > 0.0
            && self.c_v.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("controller settings out of range: {self:?}")))
        }
    }
}

/// Why a command deviates from what its mode would normally emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// Canopy above threshold but no finite distance to scale against.
    NonFiniteDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NozzleCommand {
    pub nozzle_index: usize,
    /// PWM duty in percent; `0` means the valve is closed.
    pub duty: f64,
    pub mode: ControlMode,
    pub frame_id: u64,
    pub diagnostic: Option<Diagnostic>,
}

impl NozzleCommand {
    fn new(features: &ZoneFeatures, duty: f64, mode: ControlMode) -> Self {
        Self {
            nozzle_index: features.zone_index,
            duty,
            mode,
            frame_id: 0,
            diagnostic: None,
        }
    }

    pub fn is_on(&self) -> bool {
        self.duty > 0.0
    }
}

pub fn all_open(features: &ZoneFeatures, cfg: &ControllerConfig) -> NozzleCommand {
    NozzleCommand::new(features, cfg.duty_ceiling, ControlMode::AllOpen)
}

fn below_threshold(features: &ZoneFeatures, cfg: &ControllerConfig) -> bool {
    features.a_p <= cfg.thres_nozzle
}

pub fn on_off(features: &ZoneFeatures, cfg: &ControllerConfig) -> NozzleCommand {
    let duty = if below_threshold(features, cfg) {
        0.0
    } else {
        cfg.duty_ceiling
    };
    NozzleCommand::new(features, duty, ControlMode::OnOff)
}

/// Unclamped output of the proportional law, `A_p` taken in percent.
pub fn proportional_duty(a_p: f64, d_c: f64, cfg: &ControllerConfig) -> f64 {
    cfg.k_p * (a_p * 100.0) * d_c + cfg.c_v
}

pub fn variable_rate(features: &ZoneFeatures, cfg: &ControllerConfig) -> NozzleCommand {
    let mode = ControlMode::VariableFlow;
    let gated = if cfg.variable_gate_by_threshold {
        below_threshold(features, cfg)
    } else {
        features.valid_pixel_count == 0 || features.a_p <= 0.0
    };
    if gated {
        return NozzleCommand::new(features, 0.0, mode);
    }
    if !features.d_c.is_finite() {
        let mut cmd = NozzleCommand::new(features, 0.0, mode);
        cmd.diagnostic = Some(Diagnostic::NonFiniteDistance);
        return cmd;
    }
    let duty = if features.d_c <= cfg.near_distance {
        cfg.duty_floor
    } else {
        proportional_duty(features.a_p, features.d_c, cfg).clamp(cfg.duty_floor, cfg.duty_ceiling)
    };
    NozzleCommand::new(features, duty, mode)
}

pub fn command(features: &ZoneFeatures, cfg: &ControllerConfig) -> NozzleCommand {
    match cfg.mode {
        ControlMode::AllOpen => all_open(features, cfg),
        ControlMode::OnOff => on_off(features, cfg),
        ControlMode::VariableFlow => variable_rate(features, cfg),
    }
}

/// Applies the configured law to one camera side (4 zones) or both (8).
/// Nozzle indices follow list position.
pub fn command_frame(
    zones: &[ZoneFeatures],
    cfg: &ControllerConfig,
    frame_id: u64,
) -> Result<Vec<NozzleCommand>> {
    if zones.len() != NOZZLES_PER_SIDE && zones.len() != MAX_NOZZLES {
        return Err(Error::Config(format!(
            "expected {NOZZLES_PER_SIDE} zones per camera side, got {}",
            zones.len()
        )));
    }
    Ok(zones
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let mut cmd = command(z, cfg);
            cmd.nozzle_index = i;
            cmd.frame_id = frame_id;
            cmd
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(a_p: f64, d_c: f64) -> ZoneFeatures {
        ZoneFeatures {
            zone_index: 0,
            a_p,
            d_c,
            v_p: 0.5,
            valid_pixel_count: if a_p > 0.0 { 100 } else { 0 },
        }
    }

    #[test]
    fn all_open_ignores_features() {
        let cfg = ControllerConfig::default();
        for f in [feat(0.0, f64::INFINITY), feat(1.0, 1.2), feat(0.05, 1.3)] {
            assert_eq!(all_open(&f, &cfg).duty, 100.0);
        }
    }

    #[test]
    fn on_off_threshold_boundary_is_off() {
        let cfg = ControllerConfig::default();
        assert_eq!(on_off(&feat(0.05, 1.0), &cfg).duty, 0.0);
        assert_eq!(on_off(&feat(0.10, 1.0), &cfg).duty, 0.0);
        assert_eq!(on_off(&feat(0.50, 1.0), &cfg).duty, 100.0);
    }

    #[test]
    fn variable_rate_branches() {
        let cfg = ControllerConfig::default();
        assert_eq!(variable_rate(&feat(0.50, 0.8), &cfg).duty, 75.0);
        assert_eq!(variable_rate(&feat(0.05, 1.2), &cfg).duty, 0.0);
        // 0.8 * 100 * 1.6 = 128 -> ceiling
        assert_eq!(variable_rate(&feat(1.0, 1.6), &cfg).duty, 100.0);
        // 0.8 * 80 * 1.3 = 83.2
        assert!((variable_rate(&feat(0.8, 1.3), &cfg).duty - 83.2).abs() < 1e-9);
    }

    #[test]
    fn near_distance_boundary_uses_floor() {
        let cfg = ControllerConfig::default();
        assert_eq!(variable_rate(&feat(1.0, 0.9), &cfg).duty, 75.0);
    }

    #[test]
    fn non_finite_distance_reports_diagnostic() {
        let cfg = ControllerConfig::default();
        let cmd = variable_rate(&feat(0.5, f64::INFINITY), &cfg);
        assert_eq!(cmd.duty, 0.0);
        assert_eq!(cmd.diagnostic, Some(Diagnostic::NonFiniteDistance));
    }

    #[test]
    fn gate_can_be_disabled() {
        let cfg = ControllerConfig {
            variable_gate_by_threshold: false,
            ..Default::default()
        };
        assert_eq!(variable_rate(&feat(0.05, 1.2), &cfg).duty, 75.0);
        assert_eq!(variable_rate(&feat(0.0, f64::INFINITY), &cfg).duty, 0.0);
    }

    #[test]
    fn dead_zone_offset_shifts_output() {
        let cfg = ControllerConfig {
            c_v: 5.0,
            ..Default::default()
        };
        assert!((variable_rate(&feat(0.8, 1.3), &cfg).duty - 88.2).abs() < 1e-9);
    }

    #[test]
    fn frame_commands_for_mixed_zones() {
        let cfg = ControllerConfig::default();
        let zones: Vec<_> = [0.05, 0.40, 0.90, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &a)| ZoneFeatures {
                zone_index: i,
                ..feat(a, 1.2)
            })
            .collect();
        let duties: Vec<f64> = command_frame(&zones, &cfg, 3)
            .unwrap()
            .iter()
            .map(|c| c.duty)
            .collect();
        // 0.8*40*1.2 = 38.4 -> floor 75; 0.8*90*1.2 = 86.4
        assert_eq!(duties[0], 0.0);
        assert_eq!(duties[1], 75.0);
        assert!((duties[2] - 86.4).abs() < 1e-9);
        assert_eq!(duties[3], 0.0);
    }

    #[test]
    fn frame_requires_four_zones_per_side() {
        let cfg = ControllerConfig::default();
        let zones = vec![feat(0.5, 1.0); 3];
        assert!(command_frame(&zones, &cfg, 0).is_err());
        let zones = vec![feat(0.5, 1.0); 8];
        assert_eq!(command_frame(&zones, &cfg, 0).unwrap().len(), 8);
    }

    #[test]
    fn mode_parsing_lists_valid_modes() {
        assert_eq!("variable".parse::<ControlMode>().unwrap(), ControlMode::VariableFlow);
        let msg = "bogus".parse::<ControlMode>().unwrap_err().to_string();
        assert!(msg.contains("all, onoff, variable"));
    }

    #[test]
    fn config_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        let bad = ControllerConfig {
            duty_floor: 100.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ControllerConfig {
            thres_nozzle: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

//! PWM-driven proportional valves and nozzle flow.
//!
//! Each nozzle owns a plunger whose normalised opening `x_n` follows its
//! target through a first-order lag. Flow through an open nozzle is
//! `C_n * A_n * x_n * sqrt(2 P_n / rho)`, the boom total is the plain sum
//! over nozzles, and dispensed volume is the trapezoidal integral of that
//! total.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of one valve/nozzle pair. The defaults are
/// engineering placeholders, not measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValveParams {
    /// Discharge coefficient.
    pub c_n: f64,
    /// Orifice throat area, m².
    pub a_n: f64,
    /// Gauge pressure, Pa.
    pub p_n: f64,
    /// Fluid density, kg/m³.
    pub rho: f64,
    /// Plunger time constant, s.
    pub plunger_tau: f64,
}

impl Default for ValveParams {
    fn default() -> Self {
        Self {
            c_n: 0.6,
            a_n: 1e-5,
            p_n: 3e5,
            rho: 1000.0,
            plunger_tau: 0.020,
        }
    }
}

impl ValveParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.c_n, self.a_n, self.p_n, self.rho, self.plunger_tau]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if positive && self.c_n <= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("valve parameters out of range: {self:?}")))
        }
    }

    /// Flow of a fully open valve, m³/s.
    pub fn full_flow(&self) -> f64 {
        self.c_n * self.a_n * (2.0 * self.p_n / self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmSignal {
    pub frequency: f64,
    /// Percent, `0..=100`.
    pub duty: f64,
    /// Start of the first period, s.
    pub phase: f64,
}

/// Drive level at time `t`: on for the first `duty` percent of each period.
/// An instant exactly on a period boundary starts the new period.
pub fn pwm_waveform(signal: &PwmSignal, t: f64) -> bool {
    if signal.duty >= 100.0 {
        return true;
    }
    if signal.duty <= 0.0 {
        return false;
    }
    let cycles = (t - signal.phase) * signal.frequency;
    let mut frac = cycles - cycles.floor();
    // `0.3 * 10.0` lands a hair under 3.0 in binary; treat it as the boundary.
    // The falling edge gets the same slack.
    if 1.0 - frac < 1e-9 {
        frac = 0.0;
    }
    frac + 1e-9 < signal.duty / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlungerState {
    /// Normalised opening in `[0, 1]`.
    pub x_n: f64,
    pub t: f64,
}

/// Advances the plunger by `dt` towards `target` with time constant
/// `params.plunger_tau`. The update is the exact solution of the lag for a
/// target held constant over the step.
pub fn plunger_step(state: PlungerState, target: f64, dt: f64, params: &ValveParams) -> PlungerState {
    debug_assert!(dt > 0.0, "plunger_step needs dt > 0");
    let target = target.clamp(0.0, 1.0);
    let decay = (-dt / params.plunger_tau).exp();
    PlungerState {
        x_n: (target + (state.x_n - target) * decay).clamp(0.0, 1.0),
        t: state.t + dt,
    }
}

/// Instantaneous nozzle flow, m³/s.
pub fn nozzle_flow(state: &PlungerState, params: &ValveParams) -> f64 {
    params.c_n * params.a_n * state.x_n * (2.0 * params.p_n / params.rho).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PwmMode {
    /// Explicit on/off waveform; the plunger chases 1 while the drive is
    /// on and 0 while it is off, so its mean opening is `duty/100`.
    Waveform,
    /// Time-averaged drive; the plunger chases `duty/100` directly.
    #[default]
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PwmSettings {
    pub mode: PwmMode,
    pub frequency_hz: f64,
    pub dt_waveform: f64,
    pub dt_averaged: f64,
}

impl Default for PwmSettings {
    fn default() -> Self {
        Self {
            mode: PwmMode::Averaged,
            frequency_hz: 10.0,
            dt_waveform: 0.001,
            dt_averaged: 0.010,
        }
    }
}

impl PwmSettings {
    pub fn dt(&self) -> f64 {
        match self.mode {
            PwmMode::Waveform => self.dt_waveform,
            PwmMode::Averaged => self.dt_averaged,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequency_hz > 0.0 && self.dt_waveform > 0.0 && self.dt_averaged > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("pwm settings out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub duty: Vec<f64>,
    pub x_n: Vec<f64>,
    /// Per-nozzle flow, m³/s.
    pub q_n: Vec<f64>,
    /// Boom flow, m³/s.
    pub q_total: f64,
    /// Litres dispensed since start.
    pub volume_accum: f64,
}

/// A bank of valves advanced in lock step.
#[derive(Debug, Clone)]
pub struct ValveBank {
    params: ValveParams,
    pwm: PwmSettings,
    dt: f64,
    plungers: Vec<PlungerState>,
    q_total: f64,
    volume_l: f64,
    t: f64,
    step_count: u64,
}

impl ValveBank {
    pub fn new(n_nozzles: usize, params: ValveParams, pwm: PwmSettings) -> Result<Self> {
        Self::with_dt(n_nozzles, params, pwm, pwm.dt())
    }

    pub fn with_dt(n_nozzles: usize, params: ValveParams, pwm: PwmSettings, dt: f64) -> Result<Self> {
        params.validate()?;
        pwm.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            params,
            pwm,
            dt,
            plungers: vec![PlungerState::default(); n_nozzles],
            q_total: 0.0,
            volume_l: 0.0,
            t: 0.0,
            step_count: 0,
        })
    }

    /// Starts every plunger at `x_n` (e.g. fully open and settled).
    pub fn preset_opening(&mut self, x_n: f64) {
        for p in &mut self.plungers {
            p.x_n = x_n.clamp(0.0, 1.0);
        }
        self.q_total = self.plungers.iter().map(|p| nozzle_flow(p, &self.params)).sum();
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn volume_litres(&self) -> f64 {
        self.volume_l
    }

    pub fn q_total(&self) -> f64 {
        self.q_total
    }

    pub fn len(&self) -> usize {
        self.plungers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plungers.is_empty()
    }

    fn target(&self, duty: f64) -> f64 {
        match self.pwm.mode {
            PwmMode::Averaged => duty / 100.0,
            PwmMode::Waveform => {
                let signal = PwmSignal {
                    frequency: self.pwm.frequency_hz,
                    duty,
                    phase: 0.0,
                };
                if pwm_waveform(&signal, self.t) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Advances one step under `duties` (percent per nozzle). The drive level
    /// is sampled at the start of the step.
    pub fn step(&mut self, duties: &[f64]) -> Result<FlowSample> {
        if duties.len() != self.plungers.len() {
            return Err(Error::Runtime(format!(
                "command for {} nozzles sent to a bank of {}",
                duties.len(),
                self.plungers.len()
            )));
        }
        let mut q_n = Vec::with_capacity(duties.len());
        let mut x_n = Vec::with_capacity(duties.len());
        for (i, &duty) in duties.iter().enumerate() {
            let target = self.target(duty);
            self.plungers[i] = plunger_step(self.plungers[i], target, self.dt, &self.params);
            x_n.push(self.plungers[i].x_n);
            q_n.push(nozzle_flow(&self.plungers[i], &self.params));
        }
        let q_total: f64 = q_n.iter().sum();
        self.volume_l += 0.5 * (self.q_total + q_total) * self.dt * 1000.0;
        self.q_total = q_total;
        self.step_count += 1;
        self.t = self.step_count as f64 * self.dt;
        Ok(FlowSample {
            t: self.t,
            duty: duties.to_vec(),
            x_n,
            q_n,
            q_total,
            volume_accum: self.volume_l,
        })
    }
}

/// Runs a bank over a duty schedule, one row of duties per step.
pub fn integrate_volume(
    schedule: &[Vec<f64>],
    dt: f64,
    params: &ValveParams,
    pwm: &PwmSettings,
) -> Result<Vec<FlowSample>> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let n = schedule.first().map_or(0, Vec::len);
    if let Some(bad) = schedule.iter().position(|row| row.len() != n) {
        return Err(Error::Runtime(format!(
            "step {bad} carries {} duties, expected {n}",
            schedule[bad].len()
        )));
    }
    let mut bank = ValveBank::with_dt(n, *params, *pwm, dt)?;
    schedule.iter().map(|row| bank.step(row)).collect()
}

/// Appends `t,nozzle,duty,x_n,q_n,q_total,volume_accum` rows for one sample.
pub fn push_trace_rows(out: &mut String, sample: &FlowSample) {
    for (i, q) in sample.q_n.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:.4},{},{:.3},{:.6},{:.9e},{:.9e},{:.9}",
            sample.t, i, sample.duty[i], sample.x_n[i], q, sample.q_total, sample.volume_accum
        );
    }
}

pub const TRACE_HEADER: &str = "t,nozzle,duty,x_n,q_n,q_total,volume_accum\n";

pub fn trace_csv(samples: &[FlowSample]) -> String {
    let mut out = String::from(TRACE_HEADER);
    for s in samples {
        push_trace_rows(&mut out, s);
    }
    out
}

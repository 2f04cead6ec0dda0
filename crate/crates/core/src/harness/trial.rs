//! One pass of the sprayer down the row under one control mode.

use serde::{Deserialize, Serialize};

use super::generate::generate_frames;
use super::scenario::{Scenario, Tag};
use crate::control::{command_frame, ControlMode, ControllerConfig, MAX_NOZZLES, NOZZLES_PER_SIDE};
use crate::error::{Error, Result};
use crate::perception::{frame_features, load_depth, load_mask, FrameSequence, PerceptionConfig, ZoneFeatures};
use crate::spray::{adhesion_rate, DepositionSim, NozzleEmission, PlumeModel, SprayBounds, WaterSensitivePaper};
use crate::valve::{FlowSample, PwmSettings, ValveBank, ValveParams};

/// Settings shared by every trial of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialConfig {
    pub controller: ControllerConfig,
    pub perception: PerceptionConfig,
    pub valve: ValveParams,
    pub pwm: PwmSettings,
    pub plume: PlumeModel,
    /// Keep every valve sample in the result.
    pub keep_trace: bool,
}

/// Per-frame features, computed once and shared by all modes and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFrames {
    pub alongs: Vec<f64>,
    pub features: Vec<Vec<ZoneFeatures>>,
}

impl PreparedFrames {
    /// Index of the frame in force at `along`.
    pub fn frame_at(&self, along: f64) -> Option<usize> {
        match self.alongs.partition_point(|&a| a <= along) {
            0 => None,
            n => Some(n - 1),
        }
    }

    pub fn len(&self) -> usize {
        self.alongs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alongs.is_empty()
    }
}

/// Runs perception on every frame and checks each one against its
/// segment's tag: tree frames need at least one zone above the threshold,
/// gap frames must stay at or below it everywhere.
pub fn prepare_frames(scenario: &Scenario, cfg: &TrialConfig) -> Result<PreparedFrames> {
    scenario.validate()?;
    let thres = cfg.controller.thres_nozzle;
    let pairs = match &scenario.generator {
        Some(spec) => generate_frames(scenario, spec)?,
        None => scenario
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let read_err = |e: Error| {
                    Error::Scenario(format!("frame {i}: {e}"))
                };
                let seg = load_mask(&scenario.resolve_path(&f.mask)).map_err(read_err)?;
                let depth = load_depth(&scenario.resolve_path(&f.depth)).map_err(read_err)?;
                Ok((f.along, seg.with_id(i as u64, f.along / scenario.v_p), depth))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let mut seq = FrameSequence::default();
    let mut alongs = Vec::with_capacity(pairs.len());
    let mut features = Vec::with_capacity(pairs.len());
    for (i, (along, seg, depth)) in pairs.iter().enumerate() {
        seq.accept(seg)?;
        let zones = frame_features(seg, depth, scenario.v_p, &cfg.perception)
            .map_err(|e| Error::Scenario(format!("frame {i}: {e}")))?;
        if zones.len() != NOZZLES_PER_SIDE {
            return Err(Error::Config(format!(
                "perception yields {} zones, the boom has {NOZZLES_PER_SIDE} nozzles per side",
                zones.len()
            )));
        }
        let next = pairs.get(i + 1).map_or(scenario.row_length, |p| p.0);
        let mid = 0.5 * (along + next);
        if let Some(s) = scenario.segment_at(mid) {
            let above = zones.iter().filter(|z| z.a_p > thres).count();
            match scenario.segments[s].tag {
                Tag::T if above == 0 => {
                    return Err(Error::Scenario(format!(
                        "frame {i} at {along} m lies in tree segment {s} but no zone exceeds the threshold"
                    )))
                }
                Tag::NT if above > 0 => {
                    return Err(Error::Scenario(format!(
                        "frame {i} at {along} m lies in gap segment {s} but {above} zone(s) exceed the threshold"
                    )))
                }
                _ => {}
            }
        }
        alongs.push(*along);
        features.push(zones);
    }
    Ok(PreparedFrames { alongs, features })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperResult {
    pub index: usize,
    pub segment: usize,
    pub zone: u32,
    pub tag: Tag,
    pub r_p: f64,
}

/// Duties commanded for one frame, all eight nozzles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDuty {
    pub frame_id: u64,
    pub along: f64,
    pub duties: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub mode: ControlMode,
    pub seed: u64,
    pub papers: Vec<PaperResult>,
    /// Final paper rasters, same order as `papers`.
    pub rasters: Vec<WaterSensitivePaper>,
    pub volume_l: f64,
    /// Litres sprayed while the boom was inside each segment.
    pub segment_volume_l: Vec<f64>,
    pub frame_duties: Vec<FrameDuty>,
    pub emitted: u64,
    pub deposited: u64,
    /// Valve samples, when requested.
    pub trace: Vec<FlowSample>,
}

impl TrialResult {
    pub fn values(&self, tag: Tag) -> Vec<f64> {
        self.papers.iter().filter(|p| p.tag == tag).map(|p| p.r_p).collect()
    }
}

fn mirrored(side: &[f64]) -> Vec<f64> {
    let mut all = Vec::with_capacity(MAX_NOZZLES);
    all.extend_from_slice(side);
    all.extend_from_slice(side);
    all
}

/// Drives the boom down the row at `v_p`. At every valve step the nozzles
/// follow the most recent frame; both sides receive the same duties, and
/// only side 0 faces papers. Deposition uses `seed`.
pub fn run_trial(
    scenario: &Scenario,
    frames: &PreparedFrames,
    mode: ControlMode,
    cfg: &TrialConfig,
    seed: u64,
) -> Result<TrialResult> {
    let controller = cfg.controller.with_mode(mode);
    controller.validate()?;
    let capacity_lps = cfg.valve.full_flow() * 1000.0;
    let mut bank = ValveBank::new(MAX_NOZZLES, cfg.valve, cfg.pwm)?;
    let dt = bank.dt();
    let mut sim = DepositionSim::new(
        scenario.build_papers(),
        cfg.plume,
        capacity_lps,
        &SprayBounds::unbounded(),
        seed,
    )?;

    let duties_per_frame: Vec<Vec<f64>> = frames
        .features
        .iter()
        .enumerate()
        .map(|(i, zones)| {
            let cmds = command_frame(zones, &controller, i as u64)?;
            Ok(mirrored(&cmds.iter().map(|c| c.duty).collect::<Vec<_>>()))
        })
        .collect::<Result<_>>()?;
    let idle = {
        let empty: Vec<ZoneFeatures> = (0..NOZZLES_PER_SIDE)
            .map(|k| ZoneFeatures::empty(k, scenario.v_p))
            .collect();
        let cmds = command_frame(&empty, &controller, 0)?;
        mirrored(&cmds.iter().map(|c| c.duty).collect::<Vec<_>>())
    };

    let steps = (scenario.duration() / dt).round() as u64;
    let mut segment_volume_l = vec![0.0; scenario.segments.len()];
    let mut trace = Vec::new();
    let mut prev_volume = 0.0;
    for k in 0..steps {
        let along = (k as f64 + 0.5) * dt * scenario.v_p;
        let duties = frames
            .frame_at(along)
            .map_or(&idle, |f| &duties_per_frame[f]);
        let sample = bank.step(duties)?;
        for (n, &height) in scenario.nozzle_heights.iter().enumerate() {
            sim.emit(
                k,
                &NozzleEmission {
                    nozzle: n,
                    along,
                    height,
                    duty: duties[n],
                    flow_lps: (sample.q_n[n] * 1000.0).min(capacity_lps),
                },
                dt,
            )?;
        }
        let step_volume = sample.volume_accum - prev_volume;
        prev_volume = sample.volume_accum;
        if let Some(s) = scenario.segment_at(along) {
            segment_volume_l[s] += step_volume;
        }
        if cfg.keep_trace {
            trace.push(sample);
        }
    }

    let volume_l = bank.volume_litres();
    if !(volume_l >= 0.0 && volume_l.is_finite()) {
        return Err(Error::Runtime(format!("volume integration produced {volume_l}")));
    }
    let field = sim.finish();
    let papers = field
        .papers
        .iter()
        .enumerate()
        .map(|(i, paper)| {
            let segment = scenario.papers[i].segment;
            Ok(PaperResult {
                index: i,
                segment,
                zone: scenario.segments[segment].zone,
                tag: scenario.segments[segment].tag,
                r_p: adhesion_rate(paper)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let frame_duties = duties_per_frame
        .into_iter()
        .enumerate()
        .map(|(i, duties)| FrameDuty {
            frame_id: i as u64,
            along: frames.alongs[i],
            duties,
        })
        .collect();
    Ok(TrialResult {
        mode,
        seed,
        papers,
        rasters: field.papers,
        volume_l,
        segment_volume_l,
        frame_duties,
        emitted: field.emitted,
        deposited: field.deposited,
        trace,
    })
}

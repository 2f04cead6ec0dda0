//! Procedural camera frames for a scenario.
//!
//! Image columns run top to bottom of the boom, so the default width split
//! gives nozzle 0 the top strip. In tree segments every strip gets a canopy
//! share drawn from `target_ap`; in gaps only sparse near clutter survives
//! the depth gate. Both carry background trees placed beyond the gate.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{FrameRef, Scenario, Tag};
use crate::error::{Error, Result};
use crate::perception::{save_depth, save_mask, DepthFrame, SegClass, SegmentedFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Distance between frames along the row, m.
    pub frame_spacing: f64,
    /// Canopy share band per strip in tree segments.
    pub target_ap: [f64; 2],
    /// Per-strip canopy distance band, m.
    pub canopy_depth: [f64; 2],
    /// Per-pixel depth noise around the strip distance, m.
    pub depth_jitter: f64,
    /// Share of canopy pixels labelled fruit.
    pub fruit_share: f64,
    /// Share of non-canopy pixels showing the next row's trees.
    pub background_share: f64,
    pub background_depth: [f64; 2],
    /// Upper bound of near canopy-class clutter per strip in gaps.
    pub clutter_max: f64,
    /// Gate and threshold the frames must respect.
    pub max_depth: f64,
    pub thres: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            seed: 2021,
            width: 160,
            height: 128,
            frame_spacing: 0.25,
            target_ap: [0.3, 1.0],
            canopy_depth: [0.6, 1.2],
            depth_jitter: 0.08,
            fruit_share: 0.12,
            background_share: 0.3,
            background_depth: [2.5, 4.0],
            clutter_max: 0.06,
            max_depth: 2.0,
            thres: 0.10,
        }
    }
}

fn unsat(msg: String) -> Error {
    Error::Scenario(format!("unsatisfiable generator spec: {msg}"))
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let n = crate::control::NOZZLES_PER_SIDE;
        if self.width < n || self.height == 0 {
            return Err(unsat(format!("frame {}x{} too small", self.width, self.height)));
        }
        if !(self.frame_spacing > 0.0) {
            return Err(unsat(format!("frame spacing {}", self.frame_spacing)));
        }
        let [lo, hi] = self.target_ap;
        if !(lo > self.thres && lo <= hi && hi <= 1.0) {
            return Err(unsat(format!(
                "tree band [{lo}, {hi}] must sit above the threshold {}",
                self.thres
            )));
        }
        if !(self.clutter_max >= 0.0 && self.clutter_max <= self.thres) {
            return Err(unsat(format!(
                "gap clutter {} must not exceed the threshold {}",
                self.clutter_max, self.thres
            )));
        }
        let [d0, d1] = self.canopy_depth;
        if !(d0 - self.depth_jitter > 0.0 && d0 <= d1 && d1 + self.depth_jitter <= self.max_depth) {
            return Err(unsat(format!("canopy depth band [{d0}, {d1}] leaves the gate")));
        }
        let [b0, b1] = self.background_depth;
        if !(b0 > self.max_depth && b0 <= b1) {
            return Err(unsat(format!("background band [{b0}, {b1}] would pass the gate")));
        }
        let shares = [self.fruit_share, self.background_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(unsat("shares must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn frame_count(&self, row_length: f64) -> usize {
        (row_length / self.frame_spacing).ceil() as usize
    }
}

fn strip_columns(width: usize, strips: usize, k: usize) -> (usize, usize) {
    let base = width / strips;
    let x0 = k * base;
    let x1 = if k + 1 == strips { width } else { x0 + base };
    (x0, x1)
}

/// Frame `index` of a scenario. Deterministic in `(spec.seed, index, tag)`.
pub fn generate_frame(spec: &GeneratorSpec, index: usize, tag: Tag) -> (SegmentedFrame, DepthFrame) {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut seg = SegmentedFrame::filled(w, h, SegClass::Sky);
    let mut depth = DepthFrame::filled(w, h, 0.0);
    let strips = crate::control::NOZZLES_PER_SIDE;
    for k in 0..strips {
        let (x0, x1) = strip_columns(w, strips, k);
        let n = (x1 - x0) * h;
        let near = match tag {
            Tag::T => {
                let [lo, hi] = spec.target_ap;
                let a = rng.random_range(lo..=hi);
                let min = (lo * n as f64).ceil() as usize;
                let max = (hi * n as f64).floor() as usize;
                ((a * n as f64).round() as usize).clamp(min, max)
            }
            Tag::NT => {
                let a = rng.random_range(0.0..=spec.clutter_max);
                ((a * n as f64).floor() as usize).min((spec.thres * n as f64).floor() as usize)
            }
        };
        let [d0, d1] = spec.canopy_depth;
        let strip_depth = rng.random_range(d0..=d1);
        let order = sample(&mut rng, n, n);
        for (rank, idx) in order.into_iter().enumerate() {
            let x = x0 + idx % (x1 - x0);
            let y = idx / (x1 - x0);
            if rank < near {
                let class = if rng.random::<f64>() < spec.fruit_share {
                    SegClass::Fruit
                } else {
                    SegClass::Tree
                };
                let d = strip_depth + rng.random_range(-spec.depth_jitter..=spec.depth_jitter);
                seg.set(x, y, class);
                depth.set(x, y, d as f32);
            } else if rng.random::<f64>() < spec.background_share {
                let [b0, b1] = spec.background_depth;
                seg.set(x, y, SegClass::Tree);
                depth.set(x, y, rng.random_range(b0..=b1) as f32);
            } else {
                // Lower rows see ground, a few see the irrigation pipe.
                let (class, d) = if y * 3 > h * 2 {
                    if rng.random::<f64>() < 0.05 {
                        (SegClass::Pipe, rng.random_range(1.0..1.5))
                    } else {
                        (SegClass::Ground, rng.random_range(0.8..3.0))
                    }
                } else {
                    (SegClass::Sky, 0.0)
                };
                seg.set(x, y, class);
                depth.set(x, y, d as f32);
            }
        }
    }
    (seg.with_id(index as u64, 0.0), depth)
}

/// Tag of the frame starting at `along`: the segment holding its midpoint,
/// gaps between segments count as NT.
pub fn frame_tag(scenario: &Scenario, along: f64, spacing: f64) -> Tag {
    scenario
        .segment_at(along + 0.5 * spacing)
        .map_or(Tag::NT, |i| scenario.segments[i].tag)
}

/// All frames of a generated scenario, in order, with their start positions.
pub fn generate_frames(
    scenario: &Scenario,
    spec: &GeneratorSpec,
) -> Result<Vec<(f64, SegmentedFrame, DepthFrame)>> {
    spec.validate()?;
    Ok((0..spec.frame_count(scenario.row_length))
        .map(|i| {
            let along = i as f64 * spec.frame_spacing;
            let tag = frame_tag(scenario, along, spec.frame_spacing);
            let (seg, depth) = generate_frame(spec, i, tag);
            (along, seg, depth)
        })
        .collect())
}

/// Writes a generated scenario's rasters under `dir/frames/` and a manifest
/// `dir/scenario.toml` listing them. Returns the file-backed scenario.
pub fn generate_scenario(template: &Scenario, spec: &GeneratorSpec, dir: &Path) -> Result<Scenario> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut out = template.clone();
    out.generator = None;
    out.frames.clear();
    out.base_dir = dir.to_path_buf();
    for (i, (along, seg, depth)) in generate_frames(template, spec)?.into_iter().enumerate() {
        let mask = format!("frames/{i:04}.seg");
        let dep = format!("frames/{i:04}.depth");
        save_mask(&dir.join(&mask), &seg)?;
        save_depth(&dir.join(&dep), &depth)?;
        out.frames.push(FrameRef {
            along,
            mask: mask.into(),
            depth: dep.into(),
        });
    }
    out.validate()?;
    crate::io::write_atomic_str(&dir.join("scenario.toml"), &out.to_toml()?)?;
    Ok(out)
}

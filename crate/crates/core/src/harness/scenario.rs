//! Field scenarios: a row split into tagged segments, papers placed along
//! it, and the camera frames the sprayer sees while driving it.
//!
//! Manifests are TOML with `scenario_version = 1`. Raster paths are relative
//! to the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::GeneratorSpec;
use crate::error::{Error, Result};
use crate::spray::{PaperPlacement, WaterSensitivePaper};

pub const SCENARIO_VERSION: u32 = 1;
pub const BUILTIN_DEFAULT: &str = "naju_default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    /// A tree is present; spraying is wanted.
    T,
    /// No tree; spraying is waste.
    NT,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::T => "T",
            Tag::NT => "NT",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stretch of row `[start, end)` belonging to one field zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Field zone number, 1-based.
    pub zone: u32,
    pub tag: Tag,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn contains(&self, along: f64) -> bool {
        along >= self.start && along < self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperSpec {
    /// Index into `segments`.
    pub segment: usize,
    /// Position along the row, m.
    pub along: f64,
    /// Height above ground, m.
    pub height: f64,
    /// Horizontal distance from the boom, m.
    pub distance: f64,
}

/// One camera frame pair, used from `along` until the next frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRef {
    pub along: f64,
    pub mask: PathBuf,
    pub depth: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_version: u32,
    pub name: String,
    /// Row length, m.
    pub row_length: f64,
    /// Platform speed, m/s.
    pub v_p: f64,
    pub seed: u64,
    /// Heights of one side's nozzles, top first, m.
    pub nozzle_heights: Vec<f64>,
    pub segments: Vec<Segment>,
    pub papers: Vec<PaperSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<FrameRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Directory raster paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: Scenario =
            toml::from_str(text).map_err(|e| bad(format!("cannot parse manifest: {e}")))?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read scenario {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, dir).map_err(|e| match e {
            Error::Scenario(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads a manifest, or the builtin scenario when `name` is its name and
    /// no such file exists.
    pub fn resolve(name: &str) -> Result<Self> {
        let path = Path::new(name);
        if name == BUILTIN_DEFAULT && !path.exists() {
            return Ok(naju_default());
        }
        Self::load(path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Runtime(format!("cannot encode manifest: {e}")))
    }

    /// Structural checks; frame contents are checked when frames are
    /// prepared.
    pub fn validate(&self) -> Result<()> {
        if self.scenario_version != SCENARIO_VERSION {
            return Err(bad(format!(
                "unsupported scenario_version {}, expected {SCENARIO_VERSION}",
                self.scenario_version
            )));
        }
        if !(self.row_length > 0.0 && self.row_length.is_finite()) {
            return Err(bad(format!("row_length must be positive, got {}", self.row_length)));
        }
        if !(self.v_p > 0.0 && self.v_p.is_finite()) {
            return Err(bad(format!("v_p must be positive, got {}", self.v_p)));
        }
        if self.nozzle_heights.len() != crate::control::NOZZLES_PER_SIDE
            || self.nozzle_heights.iter().any(|h| !h.is_finite())
        {
            return Err(bad(format!(
                "nozzle_heights needs {} finite values",
                crate::control::NOZZLES_PER_SIDE
            )));
        }
        if self.segments.is_empty() {
            return Err(bad("no segments"));
        }
        let mut prev_end = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start >= prev_end && seg.end > seg.start && seg.end <= self.row_length) {
                return Err(bad(format!(
                    "segment {i} [{}, {}) must be ordered, non-empty and inside the row",
                    seg.start, seg.end
                )));
            }
            prev_end = seg.end;
        }
        for (i, p) in self.papers.iter().enumerate() {
            if p.segment >= self.segments.len() {
                return Err(bad(format!("paper {i} names missing segment {}", p.segment)));
            }
            let finite = p.along.is_finite() && p.height.is_finite() && p.distance.is_finite();
            if !finite || p.distance <= 0.0 || p.along < 0.0 || p.along > self.row_length {
                return Err(bad(format!("paper {i} has an impossible placement {p:?}")));
            }
        }
        match (self.frames.is_empty(), &self.generator) {
            (true, None) => return Err(bad("scenario lists no frames and no generator")),
            (false, Some(_)) => return Err(bad("scenario lists both frames and a generator")),
            (true, Some(g)) => g.validate()?,
            (false, None) => {
                let mut last = f64::NEG_INFINITY;
                for (i, f) in self.frames.iter().enumerate() {
                    if !(f.along > last && f.along >= 0.0 && f.along <= self.row_length) {
                        return Err(bad(format!(
                            "frame {i} at {} m is out of order or outside the row",
                            f.along
                        )));
                    }
                    last = f.along;
                }
            }
        }
        Ok(())
    }

    /// Index of the segment containing `along`, if any.
    pub fn segment_at(&self, along: f64) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(along))
    }

    pub fn paper_tag(&self, paper: usize) -> Tag {
        self.segments[self.papers[paper].segment].tag
    }

    /// Fresh papers; the placement's zone is the segment index. Heights are
    /// taken relative to the ground.
    pub fn build_papers(&self) -> Vec<WaterSensitivePaper> {
        self.papers
            .iter()
            .map(|p| {
                WaterSensitivePaper::new(PaperPlacement {
                    zone: p.segment,
                    along: p.along,
                    height: p.height,
                    distance: p.distance,
                })
            })
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.row_length / self.v_p
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Even spread of `n` points over `[a, b]`, endpoints included.
fn spread(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Three field zones, each a 12.5 m tree stretch followed by a 4.25 m gap
/// (the last tree stretch is 12.25 m so the row ends at 50 m). Nine papers
/// hang on the canopy face of every tree stretch and nine on poles along
/// every gap.
pub fn naju_default() -> Scenario {
    let bounds = [(0.0, 12.5, 16.75), (16.75, 29.25, 33.5), (33.5, 45.75, 50.0)];
    let mut segments = Vec::new();
    let mut papers = Vec::new();
    for (z, &(start, mid, end)) in bounds.iter().enumerate() {
        let t = segments.len();
        segments.push(Segment {
            zone: z as u32 + 1,
            tag: Tag::T,
            start,
            end: mid,
        });
        segments.push(Segment {
            zone: z as u32 + 1,
            tag: Tag::NT,
            start: mid,
            end,
        });
        for (i, along) in spread(start + 2.0, mid - 2.0, 3).into_iter().enumerate() {
            for (j, height) in [2.0, 1.5, 1.0].into_iter().enumerate() {
                papers.push(PaperSpec {
                    segment: t,
                    along,
                    height,
                    distance: 0.7 + 0.05 * ((i + j) % 3) as f64,
                });
            }
        }
        for (i, along) in spread(mid + 0.5, end - 0.5, 9).into_iter().enumerate() {
            papers.push(PaperSpec {
                segment: t + 1,
                along,
                height: [2.0, 1.5, 1.0][i % 3],
                distance: 1.2,
            });
        }
    }
    Scenario {
        scenario_version: SCENARIO_VERSION,
        name: BUILTIN_DEFAULT.to_string(),
        row_length: 50.0,
        v_p: 0.5,
        seed: 2021,
        nozzle_heights: vec![2.25, 1.75, 1.25, 0.75],
        segments,
        papers,
        frames: Vec::new(),
        generator: Some(GeneratorSpec::default()),
        base_dir: PathBuf::from("."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_layout() {
        let s = naju_default();
        s.validate().unwrap();
        assert_eq!(s.papers.len(), 54);
        assert_eq!(s.segments.len(), 6);
        for tag in [Tag::T, Tag::NT] {
            for zone in 1..=3 {
                let n = s
                    .papers
                    .iter()
                    .filter(|p| {
                        let seg = s.segments[p.segment];
                        seg.tag == tag && seg.zone == zone
                    })
                    .count();
                assert_eq!(n, 9, "zone {zone} {tag}");
            }
        }
        for (i, p) in s.papers.iter().enumerate() {
            assert!(s.segments[p.segment].contains(p.along), "paper {i} outside its segment");
        }
        assert_eq!(s.duration(), 100.0);
    }

    #[test]
    fn manifest_round_trips() {
        let s = naju_default();
        let text = s.to_toml().unwrap();
        assert!(text.starts_with("scenario_version = 1\n"));
        let back = Scenario::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn structural_errors() {
        let mut s = naju_default();
        s.scenario_version = 2;
        assert!(matches!(s.validate(), Err(Error::Scenario(_))));

        let mut s = naju_default();
        s.segments.swap(0, 1);
        assert!(s.validate().is_err());

        let mut s = naju_default();
        s.papers[0].segment = 99;
        assert!(s.validate().is_err());

        let mut s = naju_default();
        s.generator = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn missing_manifest_is_a_scenario_error_naming_the_path() {
        let err = Scenario::resolve("/no/such/scenario.toml").unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
        assert!(err.to_string().contains("/no/such/scenario.toml"));
    }
}

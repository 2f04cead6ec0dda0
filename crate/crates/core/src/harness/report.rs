//! Per-mode, per-tag statistics and volume accounting across trials.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, Tag};
use super::trial::{run_trial, PreparedFrames, TrialConfig, TrialResult};
use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::stats::Summary;

pub const MODES: [ControlMode; 3] = [ControlMode::AllOpen, ControlMode::OnOff, ControlMode::VariableFlow];
pub const REPORT_HEADER: &str = "mode,tag,mean,sd,max,min,volume_l,reduction_pct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRow {
    pub tag: Tag,
    pub summary: Summary,
    /// Raw per-paper values over all seeds, seed-major.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: ControlMode,
    pub seeds: Vec<u64>,
    pub rows: Vec<TagRow>,
    /// Mean volume per trial, L.
    pub volume_l: f64,
    /// Reduction against all-open, percent; absent without an all-open run.
    pub reduction_pct: Option<f64>,
}

impl ModeReport {
    pub fn row(&self, tag: Tag) -> Option<&TagRow> {
        self.rows.iter().find(|r| r.tag == tag)
    }

    pub fn mean(&self, tag: Tag) -> Option<f64> {
        self.row(tag).map(|r| r.summary.mean)
    }
}

/// Mean gap-paper R_p per gap segment for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleedCheck {
    pub mode: ControlMode,
    pub segment: usize,
    pub mean_rp: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub modes: Vec<ModeReport>,
    #[serde(default)]
    pub bleed_tolerance: f64,
    #[serde(default)]
    pub bleed: Vec<BleedCheck>,
}

/// Groups trials by mode (in all-open, on/off, variable order) and computes
/// sample statistics per tag.
pub fn summarize(scenario: &str, results: &[TrialResult]) -> Result<Report> {
    if results.is_empty() {
        return Err(Error::Runtime("nothing to summarise: no trial results".into()));
    }
    let mut modes = Vec::new();
    for mode in MODES {
        let trials: Vec<&TrialResult> = results.iter().filter(|r| r.mode == mode).collect();
        if trials.is_empty() {
            continue;
        }
        let rows = [Tag::T, Tag::NT]
            .into_iter()
            .filter_map(|tag| {
                let values: Vec<f64> = trials.iter().flat_map(|t| t.values(tag)).collect();
                Summary::of(&values).map(|summary| TagRow { tag, summary, values })
            })
            .collect();
        let volume_l = trials.iter().map(|t| t.volume_l).sum::<f64>() / trials.len() as f64;
        modes.push(ModeReport {
            mode,
            seeds: trials.iter().map(|t| t.seed).collect(),
            rows,
            volume_l,
            reduction_pct: None,
        });
    }
    let baseline = modes
        .iter()
        .find(|m| m.mode == ControlMode::AllOpen)
        .map(|m| m.volume_l);
    if let Some(v0) = baseline.filter(|v| *v > 0.0) {
        for m in &mut modes {
            m.reduction_pct = Some(100.0 * (v0 - m.volume_l) / v0);
        }
    }
    Ok(Report {
        scenario: scenario.to_string(),
        modes,
        bleed_tolerance: 0.0,
        bleed: Vec::new(),
    })
}

/// Mean R_p of each gap segment's papers under on/off and variable control.
/// Validation guarantees every gap frame is below threshold, so whatever
/// lands there drifted in from neighbouring trees.
pub fn nt_bleed(scenario: &Scenario, results: &[TrialResult], tolerance: f64) -> Vec<BleedCheck> {
    let mut out = Vec::new();
    for mode in [ControlMode::OnOff, ControlMode::VariableFlow] {
        for (s, seg) in scenario.segments.iter().enumerate() {
            if seg.tag != Tag::NT {
                continue;
            }
            let values: Vec<f64> = results
                .iter()
                .filter(|r| r.mode == mode)
                .flat_map(|r| r.papers.iter().filter(|p| p.segment == s).map(|p| p.r_p))
                .collect();
            if let Some(sum) = Summary::of(&values) {
                out.push(BleedCheck {
                    mode,
                    segment: s,
                    mean_rp: sum.mean,
                    within_tolerance: sum.mean <= tolerance,
                });
            }
        }
    }
    out
}

/// Runs all three modes for every seed over the same frames. Trials run in
/// parallel on up to `jobs` threads; the returned order is mode-major then
/// seed, independent of scheduling.
pub fn run_all(
    scenario: &Scenario,
    frames: &PreparedFrames,
    cfg: &TrialConfig,
    modes: &[ControlMode],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<TrialResult>> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let work: Vec<(ControlMode, u64)> = modes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let run = || {
        work.par_iter()
            .map(|&(mode, seed)| run_trial(scenario, frames, mode, cfg, seed))
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// All three modes on every seed, summarised, with the gap bleed check.
pub fn compare_controls(
    scenario: &Scenario,
    frames: &PreparedFrames,
    cfg: &TrialConfig,
    seeds: &[u64],
    bleed_tolerance: f64,
    jobs: Option<usize>,
) -> Result<(Report, Vec<TrialResult>)> {
    let results = run_all(scenario, frames, cfg, &MODES, seeds, jobs)?;
    let mut report = summarize(&scenario.name, &results)?;
    report.bleed_tolerance = bleed_tolerance;
    report.bleed = nt_bleed(scenario, &results, bleed_tolerance);
    report.verify()?;
    Ok((report, results))
}

fn naive_stats(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &v in values {
        sum += v;
        if v > max {
            max = v;
        }
        if v < min {
            min = v;
        }
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for &v in values {
        ss += (v - mean) * (v - mean);
    }
    let sd = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd, max, min)
}

impl Report {
    pub fn mode(&self, mode: ControlMode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// Recomputes every statistic from the raw values and fails on any
    /// difference.
    pub fn verify(&self) -> Result<()> {
        for m in &self.modes {
            for r in &m.rows {
                let (mean, sd, max, min) = naive_stats(&r.values);
                let s = &r.summary;
                if s.n != r.values.len() || s.mean != mean || s.sd != sd || s.max != max || s.min != min {
                    return Err(Error::Runtime(format!(
                        "report statistics for {} {} disagree with raw values",
                        m.mode, r.tag
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for m in &self.modes {
            let reduction = m
                .reduction_pct
                .map_or_else(|| "NA".to_string(), |r| format!("{r:.2}"));
            for r in &m.rows {
                let s = &r.summary;
                let _ = writeln!(
                    out,
                    "{},{},{:.2},{:.2},{:.2},{:.2},{:.3},{}",
                    m.mode, r.tag, s.mean, s.sd, s.max, s.min, m.volume_l, reduction
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Runtime(format!("cannot encode report: {e}")))
    }
}

/// `along duty_0 .. duty_3` per frame for side 0, one block per trial.
pub fn duty_plot_data(results: &[TrialResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "# mode {} seed {}\n# along_m duty_0 duty_1 duty_2 duty_3", r.mode, r.seed);
        for f in &r.frame_duties {
            let _ = write!(out, "{:.3}", f.along);
            for d in &f.duties[..crate::control::NOZZLES_PER_SIDE] {
                let _ = write!(out, " {d:.2}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trial::PaperResult;

    fn trial(mode: ControlMode, seed: u64, t: &[f64], nt: &[f64], volume_l: f64) -> TrialResult {
        let mut papers = Vec::new();
        for (tag, vals) in [(Tag::T, t), (Tag::NT, nt)] {
            for &r_p in vals {
                papers.push(PaperResult {
                    index: papers.len(),
                    segment: 0,
                    zone: 1,
                    tag,
                    r_p,
                });
            }
        }
        TrialResult {
            mode,
            seed,
            papers,
            rasters: Vec::new(),
            volume_l,
            segment_volume_l: Vec::new(),
            frame_duties: Vec::new(),
            emitted: 0,
            deposited: 0,
            trace: Vec::new(),
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(summarize("x", &[]).is_err());
    }

    #[test]
    fn reductions_against_all_open() {
        let results = [
            trial(ControlMode::AllOpen, 1, &[50.0], &[60.0], 25.0),
            trial(ControlMode::OnOff, 1, &[55.0], &[10.0], 19.6),
            trial(ControlMode::VariableFlow, 1, &[52.0], &[2.0], 12.7),
        ];
        let r = summarize("x", &results).unwrap();
        r.verify().unwrap();
        assert_eq!(r.modes[0].reduction_pct, Some(0.0));
        assert!((r.modes[1].reduction_pct.unwrap() - 21.6).abs() < 1e-9);
        assert!((r.modes[2].reduction_pct.unwrap() - 49.2).abs() < 1e-9);
        let csv = r.to_csv();
        assert!(csv.starts_with(REPORT_HEADER));
        assert!(csv.contains("all,T,50.00,0.00,50.00,50.00,25.000,0.00\n"));
        assert_eq!(csv.lines().count(), 1 + 6);
    }

    #[test]
    fn seeds_pool_into_one_sample() {
        let results = [
            trial(ControlMode::OnOff, 1, &[14.85], &[], 1.0),
            trial(ControlMode::OnOff, 2, &[72.37], &[], 1.0),
        ];
        let r = summarize("x", &results).unwrap();
        let s = r.modes[0].row(Tag::T).unwrap().summary;
        assert!((s.mean - 43.61).abs() < 1e-12);
        assert_eq!(s.n, 2);
        assert!(r.modes[0].row(Tag::NT).is_none());
        assert_eq!(r.modes[0].reduction_pct, None);
        assert!(r.to_csv().contains(",NA\n"));
    }

    #[test]
    fn tampered_report_fails_verification() {
        let results = [trial(ControlMode::AllOpen, 1, &[10.0, 20.0], &[5.0], 3.0)];
        let mut r = summarize("x", &results).unwrap();
        r.modes[0].rows[0].summary.mean += 1e-9;
        assert!(r.verify().is_err());
    }
}

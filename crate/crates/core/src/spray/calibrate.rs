//! Replays of the two preliminary sprayer experiments.
//!
//! * Coverage sweep: four papers spread over the canopy share of one nozzle
//!   zone (30..100 %) while the nozzle passes at fixed distance, for duties
//!   75..100 %.
//! * Distance sweep: a small artificial target at 0.7..1.6 m, same duties.
//!
//! Both tables report the mean and sample SD of R_p over papers and trials.
//! Trial `i` of every cell uses seed `rng_seed + i`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    adhesion_rate, deposit, sweep_timeline, PaperPlacement, PlumeModel, SprayBounds,
    WaterSensitivePaper,
};
use crate::error::Result;
use crate::stats::Summary;
use crate::valve::ValveParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Pe1,
    Pe2,
}

impl std::str::FromStr for Experiment {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pe1" => Ok(Experiment::Pe1),
            "pe2" => Ok(Experiment::Pe2),
            other => Err(crate::error::Error::Config(format!(
                "unknown experiment {other:?}; expected pe1 or pe2"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSetup {
    pub duties: Vec<f64>,
    /// Canopy share in percent (coverage sweep) or distance in m (distance sweep).
    pub keys: Vec<f64>,
    /// Nozzle-to-paper distance for the coverage sweep, m.
    pub distance: f64,
    /// Half height of one nozzle zone at `distance`, m.
    pub zone_half_height: f64,
    /// Vertical paper offsets for the distance sweep, m.
    pub target_offsets: Vec<f64>,
    pub speed: f64,
    pub run_up: f64,
    pub dt: f64,
    pub trials: usize,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    // Snap to the decimal grid so 0.7 + 2 * 0.3 prints as 1.3.
    (0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl SweepSetup {
    pub fn pe1() -> Self {
        Self {
            duties: steps(75.0, 100.0, 5.0),
            keys: steps(30.0, 100.0, 10.0),
            distance: 1.0,
            zone_half_height: 0.6,
            target_offsets: Vec::new(),
            speed: 0.5,
            run_up: 1.5,
            dt: 0.01,
            trials: 8,
        }
    }

    pub fn pe2() -> Self {
        Self {
            duties: steps(75.0, 100.0, 5.0),
            keys: steps(0.7, 1.6, 0.3),
            distance: 0.0,
            zone_half_height: 0.0,
            target_offsets: vec![-0.15, -0.05, 0.05, 0.15],
            speed: 0.5,
            run_up: 1.5,
            dt: 0.01,
            trials: 8,
        }
    }

    pub fn for_experiment(which: Experiment) -> Self {
        match which {
            Experiment::Pe1 => Self::pe1(),
            Experiment::Pe2 => Self::pe2(),
        }
    }
}

impl Default for SweepSetup {
    fn default() -> Self {
        Self::pe1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub duty: f64,
    pub key: f64,
    pub mean_rp: f64,
    pub sd_rp: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub experiment: Experiment,
    pub duties: Vec<f64>,
    pub keys: Vec<f64>,
    /// Row-major by duty, then key.
    pub cells: Vec<CoverageCell>,
}

impl CoverageTable {
    pub fn cell(&self, duty_index: usize, key_index: usize) -> &CoverageCell {
        &self.cells[duty_index * self.keys.len() + key_index]
    }

    pub fn mean(&self, duty: f64, key: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| (c.duty - duty).abs() < 1e-9 && (c.key - key).abs() < 1e-9)
            .map(|c| c.mean_rp)
    }

    /// Largest drop in mean R_p when moving to the next higher duty in any
    /// column (0 when every column is non-decreasing).
    pub fn worst_duty_decrease(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.keys.len() {
            for d in 1..self.duties.len() {
                worst = worst.max(self.cell(d - 1, k).mean_rp - self.cell(d, k).mean_rp);
            }
        }
        worst
    }

    /// Largest rise in mean R_p when moving to the next larger key in any
    /// row (0 when every row is non-increasing).
    pub fn worst_key_increase(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in 0..self.duties.len() {
            for k in 1..self.keys.len() {
                worst = worst.max(self.cell(d, k).mean_rp - self.cell(d, k - 1).mean_rp);
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("duty,area_or_distance,mean_rp,sd_rp\n");
        for c in &self.cells {
            let _ = writeln!(out, "{:.1},{:.2},{:.4},{:.4}", c.duty, c.key, c.mean_rp, c.sd_rp);
        }
        out
    }

    /// One `x y` block per duty, blocks separated by a blank line.
    pub fn plot_data(&self) -> String {
        let x_label = match self.experiment {
            Experiment::Pe1 => "area_pct",
            Experiment::Pe2 => "distance_m",
        };
        let mut out = String::new();
        for (d, duty) in self.duties.iter().enumerate() {
            let _ = writeln!(out, "# duty {duty:.0}\n# {x_label} mean_rp");
            for k in 0..self.keys.len() {
                let c = self.cell(d, k);
                let _ = writeln!(out, "{:.2} {:.4}", c.key, c.mean_rp);
            }
            out.push('\n');
        }
        out
    }
}

fn pe1_papers(area_pct: f64, setup: &SweepSetup) -> Vec<WaterSensitivePaper> {
    let half_span = setup.zone_half_height * area_pct / 100.0;
    (0..4)
        .map(|k| {
            let offset = half_span * (-1.0 + (2 * k + 1) as f64 / 4.0);
            WaterSensitivePaper::new(PaperPlacement {
                zone: 0,
                along: 0.0,
                height: offset,
                distance: setup.distance,
            })
        })
        .collect()
}

fn pe2_papers(distance: f64, setup: &SweepSetup) -> Vec<WaterSensitivePaper> {
    setup
        .target_offsets
        .iter()
        .map(|&h| {
            WaterSensitivePaper::new(PaperPlacement {
                zone: 0,
                along: 0.0,
                height: h,
                distance,
            })
        })
        .collect()
}

fn run_cell(
    papers: Vec<WaterSensitivePaper>,
    duty: f64,
    setup: &SweepSetup,
    model: &PlumeModel,
    capacity_lps: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let timeline = sweep_timeline(
        0.0,
        -setup.run_up,
        setup.run_up,
        setup.speed,
        setup.dt,
        duty,
        capacity_lps * duty / 100.0,
    );
    let field = deposit(
        &timeline,
        papers,
        model,
        capacity_lps,
        &SprayBounds::unbounded(),
        setup.dt,
        seed,
    )?;
    field.papers.iter().map(adhesion_rate).collect()
}

/// Runs one sweep. Steady flow per duty is `duty/100` of the fully open
/// valve flow.
pub fn replicate(
    which: Experiment,
    setup: &SweepSetup,
    model: &PlumeModel,
    valve: &ValveParams,
) -> Result<CoverageTable> {
    model.validate()?;
    valve.validate()?;
    let capacity_lps = valve.full_flow() * 1000.0;
    let grid: Vec<(f64, f64)> = setup
        .duties
        .iter()
        .flat_map(|&d| setup.keys.iter().map(move |&k| (d, k)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(duty, key)| {
            let mut values = Vec::new();
            for trial in 0..setup.trials {
                let papers = match which {
                    Experiment::Pe1 => pe1_papers(key, setup),
                    Experiment::Pe2 => pe2_papers(key, setup),
                };
                let seed = model.rng_seed.wrapping_add(trial as u64);
                values.extend(run_cell(papers, duty, setup, model, capacity_lps, seed)?);
            }
            let s = Summary::of(&values).unwrap_or(Summary {
                n: 0,
                mean: 0.0,
                sd: 0.0,
                max: 0.0,
                min: 0.0,
                single_sample: false,
            });
            Ok(CoverageCell {
                duty,
                key,
                mean_rp: s.mean,
                sd_rp: s.sd,
                n: s.n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageTable {
        experiment: which,
        duties: setup.duties.clone(),
        keys: setup.keys.clone(),
        cells,
    })
}

pub fn replicate_pe1(setup: &SweepSetup, model: &PlumeModel, valve: &ValveParams) -> Result<CoverageTable> {
    replicate(Experiment::Pe1, setup, model, valve)
}

pub fn replicate_pe2(setup: &SweepSetup, model: &PlumeModel, valve: &ValveParams) -> Result<CoverageTable> {
    replicate(Experiment::Pe2, setup, model, valve)
}

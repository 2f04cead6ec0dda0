//! Spray plume, water-sensitive papers and Monte Carlo deposition.
//!
//! The plume of a nozzle running at duty `d` is a cone around the spray axis
//! (the boom normal). Directions are parameterised by their intersection
//! `(a, b)` with the plane one metre in front of the nozzle; inside the cone's
//! tangent radius `T(d)` the droplet density falls off as `1 - (r / T)^2`.
//! Every droplet also carries a range: at least the nominal reach of the duty
//! and up to `range_tail` beyond it, with linearly thinning density. A droplet
//! stains the first paper its ray meets, provided that paper lies within its
//! range.
//!
//! Sampling is done against one dominating reference plume (fully open
//! valve, widest cone, longest range) which is thinned to the actual duty and
//! flow. Each (step, nozzle) pair draws from its own RNG stream, so runs that
//! differ only in duty or flow see the same reference droplets and a weaker
//! plume always stains a subset of what a stronger one stains.

pub mod calibrate;

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::format::ClassRaster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlumeModel {
    /// Nominal reach at 100% duty, m.
    pub full_reach: f64,
    /// Lowest duty the plume model accepts, percent.
    pub min_reach_duty: f64,
    /// Nominal reach at `min_reach_duty`, m.
    pub near_full_coverage_distance: f64,
    /// Duty at and above which the cone has its full width, percent.
    pub full_coverage_duty: f64,
    pub cone_half_angle_at_100: f64,
    /// Fraction of the nominal reach that the longest droplets overshoot.
    pub range_tail: f64,
    /// Droplets emitted per litre.
    pub droplet_rate: f64,
    pub rng_seed: u64,
}

impl Default for PlumeModel {
    fn default() -> Self {
        Self {
            full_reach: 1.6,
            min_reach_duty: 75.0,
            near_full_coverage_distance: 0.9,
            full_coverage_duty: 90.0,
            cone_half_angle_at_100: 30.0,
            range_tail: 0.25,
            droplet_rate: 5.0e6,
            rng_seed: 2021,
        }
    }
}

impl PlumeModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.full_reach > self.near_full_coverage_distance
            && self.near_full_coverage_distance > 0.0
            && self.full_coverage_duty > 0.0
            && self.full_coverage_duty <= 100.0
            && self.min_reach_duty > 0.0
            && self.min_reach_duty < 100.0
            && self.cone_half_angle_at_100 > 0.0
            && self.cone_half_angle_at_100 < 90.0
            && self.range_tail >= 0.0
            && self.droplet_rate > 0.0
            && self.droplet_rate.is_finite()
            && self.full_reach.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("plume model out of range: {self:?}")))
        }
    }

    fn check_duty(&self, duty: f64) -> Result<()> {
        if duty < self.min_reach_duty || duty > 100.0 || duty.is_nan() {
            return Err(Error::Config(format!(
                "duty {duty} outside the plume model's range [{}, 100]; send 0 for off",
                self.min_reach_duty
            )));
        }
        Ok(())
    }

    /// Tangent of the cone half-angle at `duty`. The cone's cross-section
    /// area grows in proportion to duty up to `full_coverage_duty` and stays
    /// at its full width above it.
    pub fn cone_tan(&self, duty: f64) -> f64 {
        let full = self.cone_half_angle_at_100.to_radians().tan();
        let frac = (duty.min(self.full_coverage_duty) / self.full_coverage_duty).clamp(0.0, 1.0);
        full * frac.sqrt()
    }

    pub fn max_range(&self, duty: f64) -> Result<f64> {
        Ok(plume_reach(duty, self)? * (1.0 + self.range_tail))
    }

    /// Upper bound of actual over reference droplet density, used to build
    /// the dominating reference plume.
    fn dominance(&self) -> f64 {
        (self.full_coverage_duty / self.min_reach_duty).max(1.0)
    }
}

/// Nominal reach at `duty`: linear between `(min_reach_duty,
/// near_full_coverage_distance)` and `(100, full_reach)`.
pub fn plume_reach(duty: f64, model: &PlumeModel) -> Result<f64> {
    model.check_duty(duty)?;
    let t = (duty - model.min_reach_duty) / (100.0 - model.min_reach_duty);
    Ok(model.near_full_coverage_distance
        + t * (model.full_reach - model.near_full_coverage_distance))
}

/// Where a paper hangs. `along` and `height` locate the paper centre in the
/// target plane; `distance` is measured from the boom along the spray axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperPlacement {
    pub zone: usize,
    pub along: f64,
    pub height: f64,
    pub distance: f64,
}

pub const PAPER_ROWS: usize = 76;
pub const PAPER_COLS: usize = 26;
/// Raster resolution, pixels per metre (1 px/mm).
pub const PAPER_PX_PER_M: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterSensitivePaper {
    pub placement: PaperPlacement,
    rows: usize,
    cols: usize,
    stained: Vec<bool>,
}

impl WaterSensitivePaper {
    pub fn new(placement: PaperPlacement) -> Self {
        Self::with_size(placement, PAPER_ROWS, PAPER_COLS)
    }

    pub fn with_size(placement: PaperPlacement, rows: usize, cols: usize) -> Self {
        Self {
            placement,
            rows,
            cols,
            stained: vec![false; rows * cols],
        }
    }

    pub fn from_raster(placement: PaperPlacement, rows: usize, cols: usize, stained: Vec<bool>) -> Result<Self> {
        if stained.len() != rows * cols {
            return Err(Error::dims((cols, rows), (stained.len(), 1)));
        }
        Ok(Self {
            placement,
            rows,
            cols,
            stained,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn width_m(&self) -> f64 {
        self.cols as f64 / PAPER_PX_PER_M
    }

    pub fn height_m(&self) -> f64 {
        self.rows as f64 / PAPER_PX_PER_M
    }

    pub fn is_stained(&self, row: usize, col: usize) -> bool {
        self.stained[row * self.cols + col]
    }

    pub fn stained(&self) -> &[bool] {
        &self.stained
    }

    pub fn stained_count(&self) -> usize {
        self.stained.iter().filter(|&&s| s).count()
    }

    /// Marks the pixel under target-plane point `(along, height)`.
    /// Returns false when the point misses the paper.
    pub fn stain_at(&mut self, along: f64, height: f64) -> bool {
        let p = &self.placement;
        let col = ((along - (p.along - 0.5 * self.width_m())) * PAPER_PX_PER_M).floor();
        let row = (((p.height + 0.5 * self.height_m()) - height) * PAPER_PX_PER_M).floor();
        if col < 0.0 || row < 0.0 || col >= self.cols as f64 || row >= self.rows as f64 {
            return false;
        }
        self.stained[row as usize * self.cols + col as usize] = true;
        true
    }

    pub fn stain_pixel(&mut self, row: usize, col: usize) {
        self.stained[row * self.cols + col] = true;
    }

    /// Stain raster in the `SEGMASK1` layout, `classes 2`: 1 = stained.
    pub fn to_raster(&self) -> ClassRaster {
        ClassRaster {
            width: self.cols,
            height: self.rows,
            classes: 2,
            data: self.stained.iter().map(|&s| s as u8).collect(),
        }
    }
}

/// Stained share of the paper, percent.
pub fn adhesion_rate(paper: &WaterSensitivePaper) -> Result<f64> {
    let area = paper.rows * paper.cols;
    if area == 0 {
        return Err(Error::Config("water-sensitive paper has zero area".into()));
    }
    Ok(100.0 * paper.stained_count() as f64 / area as f64)
}

/// Axis-aligned region papers must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprayBounds {
    pub along_min: f64,
    pub along_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub max_distance: f64,
}

impl SprayBounds {
    pub fn unbounded() -> Self {
        Self {
            along_min: f64::NEG_INFINITY,
            along_max: f64::INFINITY,
            height_min: f64::NEG_INFINITY,
            height_max: f64::INFINITY,
            max_distance: f64::INFINITY,
        }
    }

    fn check(&self, p: &PaperPlacement) -> Result<()> {
        let finite = p.along.is_finite() && p.height.is_finite() && p.distance.is_finite();
        let inside = finite
            && p.distance > 0.0
            && p.distance <= self.max_distance
            && (self.along_min..=self.along_max).contains(&p.along)
            && (self.height_min..=self.height_max).contains(&p.height);
        if inside {
            Ok(())
        } else {
            Err(Error::Config(format!("paper {p:?} lies outside the simulated volume")))
        }
    }
}

/// One nozzle's output over one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NozzleEmission {
    pub nozzle: usize,
    /// Nozzle position along the row, m.
    pub along: f64,
    pub height: f64,
    /// Commanded duty, percent. Zero emits nothing.
    pub duty: f64,
    /// Mean flow over the step, litres per second.
    pub flow_lps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepositionField {
    pub papers: Vec<WaterSensitivePaper>,
    /// Litres sprayed while the boom was inside each zone.
    pub zone_volume_l: Vec<f64>,
    pub emitted: u64,
    pub deposited: u64,
}

impl DepositionField {
    pub fn adhesion_rates(&self) -> Vec<f64> {
        self.papers
            .iter()
            .map(|p| adhesion_rate(p).expect("papers have non-zero area"))
            .collect()
    }
}

// Radial CDF of the `1 - u^2` disc density, u = r / T in [0, 1].
fn radial_cdf(u: f64) -> f64 {
    let w = (u * u).min(1.0);
    2.0 * w - w * w
}

fn radial_inverse(v: f64) -> f64 {
    (1.0 - (1.0 - v).max(0.0).sqrt()).sqrt()
}

/// Polar box `[u0, u1] x [psi0, psi0 + span]` in normalised tangent-plane
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sector {
    u0: f64,
    u1: f64,
    psi0: f64,
    span: f64,
}

impl Sector {
    fn full(&self) -> bool {
        self.span >= TAU
    }

    fn probability(&self) -> f64 {
        (radial_cdf(self.u1) - radial_cdf(self.u0)) * self.span.min(TAU) / TAU
    }

    fn arcs_overlap(&self, other: &Sector) -> bool {
        if self.full() || other.full() {
            return true;
        }
        let d = (other.psi0 - self.psi0).rem_euclid(TAU);
        d <= self.span || (TAU - d) <= other.span
    }

    fn overlaps(&self, other: &Sector) -> bool {
        self.u0 <= other.u1 && other.u0 <= self.u1 && self.arcs_overlap(other)
    }

    fn merge(&self, other: &Sector) -> Sector {
        let (u0, u1) = (self.u0.min(other.u0), self.u1.max(other.u1));
        if self.full() || other.full() {
            return Sector {
                u0,
                u1,
                psi0: 0.0,
                span: TAU,
            };
        }
        // Try both orders of walking anticlockwise; keep the tighter cover.
        let cover = |a: &Sector, b: &Sector| {
            let d = (b.psi0 - a.psi0).rem_euclid(TAU);
            (a.psi0, a.span.max(d + b.span))
        };
        let (p1, s1) = cover(self, other);
        let (p2, s2) = cover(other, self);
        let (psi0, span) = if s1 <= s2 { (p1, s1) } else { (p2, s2) };
        Sector {
            u0,
            u1,
            psi0,
            span: if span >= TAU - 1e-12 { TAU } else { span },
        }
    }
}

/// Tangent-plane rectangle of a paper as seen from one nozzle position.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    paper: usize,
    distance: f64,
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
}

impl Candidate {
    fn contains(&self, a: f64, b: f64) -> bool {
        a >= self.a0 && a < self.a1 && b > self.b0 && b <= self.b1
    }

    fn sector(&self, cone_tan: f64) -> Option<Sector> {
        let cx = 0.0f64.clamp(self.a0, self.a1);
        let cy = 0.0f64.clamp(self.b0, self.b1);
        let r_min = cx.hypot(cy);
        if r_min >= cone_tan {
            return None;
        }
        let corners = [
            (self.a0, self.b0),
            (self.a1, self.b0),
            (self.a0, self.b1),
            (self.a1, self.b1),
        ];
        let r_max = corners
            .iter()
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
            .min(cone_tan);
        let (u0, u1) = (r_min / cone_tan, r_max / cone_tan);
        if r_min == 0.0 {
            return Some(Sector {
                u0: 0.0,
                u1,
                psi0: 0.0,
                span: TAU,
            });
        }
        let centre = (0.5 * (self.b0 + self.b1)).atan2(0.5 * (self.a0 + self.a1));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in corners {
            let d = (b.atan2(a) - centre + PI).rem_euclid(TAU) - PI;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Some(Sector {
            u0,
            u1,
            psi0: (centre + lo).rem_euclid(TAU),
            span: hi - lo,
        })
    }
}

/// Accumulates droplets on a set of papers over a sequence of steps.
#[derive(Debug, Clone)]
pub struct DepositionSim {
    model: PlumeModel,
    /// Flow of a fully open valve, L/s; bounds every emission's flow.
    flow_capacity_lps: f64,
    papers: Vec<WaterSensitivePaper>,
    zone_volume_l: Vec<f64>,
    seed: u64,
    emitted: u64,
    deposited: u64,
    candidates: Vec<Candidate>,
    sectors: Vec<Sector>,
}

impl DepositionSim {
    pub fn new(
        papers: Vec<WaterSensitivePaper>,
        model: PlumeModel,
        flow_capacity_lps: f64,
        bounds: &SprayBounds,
        seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        if !(flow_capacity_lps > 0.0 && flow_capacity_lps.is_finite()) {
            return Err(Error::Config(format!(
                "flow capacity must be positive, got {flow_capacity_lps}"
            )));
        }
        for p in &papers {
            bounds.check(&p.placement)?;
        }
        let zones = papers.iter().map(|p| p.placement.zone + 1).max().unwrap_or(0);
        Ok(Self {
            model,
            flow_capacity_lps,
            papers,
            zone_volume_l: vec![0.0; zones],
            seed,
            emitted: 0,
            deposited: 0,
            candidates: Vec::new(),
            sectors: Vec::new(),
        })
    }

    pub fn papers(&self) -> &[WaterSensitivePaper] {
        &self.papers
    }

    pub fn record_volume(&mut self, zone: usize, litres: f64) {
        if zone >= self.zone_volume_l.len() {
            self.zone_volume_l.resize(zone + 1, 0.0);
        }
        self.zone_volume_l[zone] += litres;
    }

    fn stream_rng(&self, step: u64, nozzle: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step.wrapping_mul(64).wrapping_add(nozzle as u64));
        rng
    }

    /// Emits one nozzle's droplets for time step `step` of length `dt`.
    pub fn emit(&mut self, step: u64, e: &NozzleEmission, dt: f64) -> Result<()> {
        if e.duty <= 0.0 || e.flow_lps <= 0.0 {
            return Ok(());
        }
        let m = self.model;
        let reach = plume_reach(e.duty, &m)?;
        if e.flow_lps > self.flow_capacity_lps * (1.0 + 1e-9) {
            return Err(Error::Runtime(format!(
                "nozzle {} flow {} L/s exceeds capacity {} L/s",
                e.nozzle, e.flow_lps, self.flow_capacity_lps
            )));
        }

        let t_ref = m.cone_tan(100.0);
        let range_ref = m.full_reach * (1.0 + m.range_tail);
        let t_act = m.cone_tan(e.duty);
        let dominance = m.dominance();
        let lambda_ref = dominance * self.flow_capacity_lps * dt * m.droplet_rate;
        let lambda_act = e.flow_lps * dt * m.droplet_rate;
        let flow_ratio = e.flow_lps / self.flow_capacity_lps;
        let area_ratio = (t_ref / t_act).powi(2);

        // Papers the reference plume can touch from here, nearest first.
        self.candidates.clear();
        for (i, paper) in self.papers.iter().enumerate() {
            let p = &paper.placement;
            if p.distance > range_ref {
                continue;
            }
            let half_w = 0.5 * paper.width_m();
            if (p.along - e.along).abs() > p.distance * t_ref + half_w {
                continue;
            }
            let half_h = 0.5 * paper.height_m();
            let c = Candidate {
                paper: i,
                distance: p.distance,
                a0: (p.along - half_w - e.along) / p.distance,
                a1: (p.along + half_w - e.along) / p.distance,
                b0: (p.height - half_h - e.height) / p.distance,
                b1: (p.height + half_h - e.height) / p.distance,
            };
            if c.sector(t_ref).is_some() {
                self.candidates.push(c);
            }
        }
        self.candidates
            .sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.paper.cmp(&y.paper)));

        self.sectors.clear();
        for c in &self.candidates {
            let mut s = c.sector(t_ref).expect("filtered above");
            // Fold in every sector it touches until the set is disjoint.
            while let Some(j) = self.sectors.iter().position(|o| o.overlaps(&s)) {
                s = s.merge(&self.sectors.swap_remove(j));
            }
            self.sectors.push(s);
        }
        self.sectors
            .sort_by(|x, y| x.psi0.total_cmp(&y.psi0).then(x.u0.total_cmp(&y.u0)));

        let mut rng = self.stream_rng(step, e.nozzle);
        let mut covered_act = 0.0;
        for si in 0..self.sectors.len() {
            let s = self.sectors[si];
            let lam = lambda_ref * s.probability();
            let count = if lam > 0.0 {
                Poisson::new(lam).expect("positive rate").sample(&mut rng) as u64
            } else {
                0
            };
            let k = t_ref / t_act;
            covered_act += (radial_cdf((s.u1 * k).min(1.0)) - radial_cdf((s.u0 * k).min(1.0)))
                * s.span.min(TAU)
                / TAU;
            let (f0, f1) = (radial_cdf(s.u0), radial_cdf(s.u1));
            for _ in 0..count {
                let u = radial_inverse(f0 + (f1 - f0) * rng.random::<f64>());
                let psi = s.psi0 + s.span.min(TAU) * rng.random::<f64>();
                let tail: f64 = rng.random();
                let accept: f64 = rng.random();

                let r = u * t_ref;
                let g_act = (1.0 - (r / t_act).powi(2)).max(0.0);
                let g_ref = 1.0 - u * u;
                let ratio = if g_ref > 0.0 {
                    flow_ratio * area_ratio * g_act / g_ref / dominance
                } else {
                    0.0
                };
                if accept >= ratio {
                    continue;
                }
                self.emitted += 1;
                let (a, b) = (r * psi.cos(), r * psi.sin());
                let Some(hit) = self.candidates.iter().find(|c| c.contains(a, b)) else {
                    continue;
                };
                let range = reach * (1.0 + m.range_tail * (1.0 - (1.0 - tail).sqrt()));
                let slant = hit.distance * (1.0 + a * a + b * b).sqrt();
                if slant > range {
                    continue;
                }
                let along = e.along + hit.distance * a;
                let height = e.height + hit.distance * b;
                if self.papers[hit.paper].stain_at(along, height) {
                    self.deposited += 1;
                }
            }
        }
        // Droplets of the actual plume that fly outside every sector.
        let rest = lambda_act * (1.0 - covered_act).max(0.0);
        if rest > 0.0 {
            self.emitted += Poisson::new(rest).expect("positive rate").sample(&mut rng) as u64;
        }
        Ok(())
    }

    pub fn finish(self) -> DepositionField {
        DepositionField {
            papers: self.papers,
            zone_volume_l: self.zone_volume_l,
            emitted: self.emitted,
            deposited: self.deposited,
        }
    }
}

/// One step of a spray timeline: which zone the boom is in and what each
/// nozzle emits.
#[derive(Debug, Clone, PartialEq)]
pub struct SprayStep {
    pub zone: Option<usize>,
    pub emissions: Vec<NozzleEmission>,
}

/// Runs a whole timeline through a fresh [`DepositionSim`].
pub fn deposit(
    timeline: &[SprayStep],
    papers: Vec<WaterSensitivePaper>,
    model: &PlumeModel,
    flow_capacity_lps: f64,
    bounds: &SprayBounds,
    dt: f64,
    seed: u64,
) -> Result<DepositionField> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut sim = DepositionSim::new(papers, *model, flow_capacity_lps, bounds, seed)?;
    for (k, step) in timeline.iter().enumerate() {
        for e in &step.emissions {
            sim.emit(k as u64, e, dt)?;
            if let Some(z) = step.zone {
                sim.record_volume(z, e.flow_lps * dt);
            }
        }
    }
    Ok(sim.finish())
}

/// A single nozzle at `height` sweeping along the row from `start` to `end`
/// at `speed`, with steady flow `flow_lps` at `duty`.
pub fn sweep_timeline(
    nozzle_height: f64,
    start: f64,
    end: f64,
    speed: f64,
    dt: f64,
    duty: f64,
    flow_lps: f64,
) -> Vec<SprayStep> {
    let steps = ((end - start) / (speed * dt)).ceil().max(0.0) as usize;
    (0..steps)
        .map(|k| SprayStep {
            zone: None,
            emissions: vec![NozzleEmission {
                nozzle: 0,
                along: start + speed * dt * (k as f64 + 0.5),
                height: nozzle_height,
                duty,
                flow_lps,
            }],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placement(along: f64, height: f64, distance: f64) -> PaperPlacement {
        PaperPlacement {
            zone: 0,
            along,
            height,
            distance,
        }
    }

    fn run_sweep(distance: f64, duty: f64, seed: u64, model: &PlumeModel) -> DepositionField {
        let flow_cap = 0.147;
        let timeline = sweep_timeline(1.0, -1.5, 1.5, 0.2, 0.01, duty, flow_cap * duty / 100.0);
        deposit(
            &timeline,
            vec![WaterSensitivePaper::new(placement(0.0, 1.0, distance))],
            model,
            flow_cap,
            &SprayBounds::unbounded(),
            0.01,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn reach_anchors_and_interpolation() {
        let m = PlumeModel::default();
        assert!((plume_reach(100.0, &m).unwrap() - 1.6).abs() < 1e-12);
        assert!((plume_reach(75.0, &m).unwrap() - 0.9).abs() < 1e-12);
        assert!((plume_reach(87.5, &m).unwrap() - 1.25).abs() < 1e-12);
        assert!(plume_reach(50.0, &m).is_err());
        assert!(plume_reach(0.0, &m).is_err());
        assert!(plume_reach(100.5, &m).is_err());
    }

    #[test]
    fn cone_widens_up_to_full_coverage_duty() {
        let m = PlumeModel::default();
        let full = 30f64.to_radians().tan();
        assert!((m.cone_tan(100.0) - full).abs() < 1e-15);
        assert!((m.cone_tan(90.0) - full).abs() < 1e-15);
        assert!((m.cone_tan(75.0) - full * (75.0f64 / 90.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adhesion_rate_exact_cases() {
        let mut p = WaterSensitivePaper::with_size(placement(0.0, 0.0, 1.0), 4, 6);
        assert_eq!(adhesion_rate(&p).unwrap(), 0.0);
        for r in 0..4 {
            for c in 0..6 {
                if (r + c) % 2 == 0 {
                    p.stain_pixel(r, c);
                }
            }
        }
        assert_eq!(adhesion_rate(&p).unwrap(), 50.0);
        for r in 0..4 {
            for c in 0..6 {
                p.stain_pixel(r, c);
            }
        }
        assert_eq!(adhesion_rate(&p).unwrap(), 100.0);
        let empty = WaterSensitivePaper::with_size(placement(0.0, 0.0, 1.0), 0, 5);
        assert!(adhesion_rate(&empty).is_err());
    }

    #[test]
    fn stain_maps_plane_points_to_pixels() {
        let mut p = WaterSensitivePaper::new(placement(2.0, 1.0, 1.0));
        // Top-left corner pixel.
        assert!(p.stain_at(2.0 - 0.013 + 1e-4, 1.0 + 0.038 - 1e-4));
        assert!(p.is_stained(0, 0));
        assert!(p.stain_at(2.0 + 0.013 - 1e-4, 1.0 - 0.038 + 1e-4));
        assert!(p.is_stained(PAPER_ROWS - 1, PAPER_COLS - 1));
        assert!(!p.stain_at(2.5, 1.0));
        assert_eq!(p.stained_count(), 2);
    }

    #[test]
    fn zero_duty_leaves_papers_blank() {
        let f = run_sweep(0.8, 0.0, 1, &PlumeModel::default());
        assert_eq!(f.adhesion_rates(), vec![0.0]);
        assert_eq!(f.emitted, 0);
    }

    #[test]
    fn close_paper_saturates_at_floor_duty() {
        let f = run_sweep(0.8, 75.0, 1, &PlumeModel::default());
        let rp = f.adhesion_rates()[0];
        assert!(rp > 90.0, "R_p {rp}");
    }

    #[test]
    fn paper_beyond_reach_stays_blank() {
        let f = run_sweep(1.5, 75.0, 1, &PlumeModel::default());
        assert_eq!(f.papers[0].stained_count(), 0);
        assert!(f.emitted > 0);
    }

    #[test]
    fn deposition_is_reproducible() {
        let m = PlumeModel::default();
        let a = run_sweep(1.0, 85.0, 9, &m);
        let b = run_sweep(1.0, 85.0, 9, &m);
        assert_eq!(a, b);
        let c = run_sweep(1.0, 85.0, 10, &m);
        assert_ne!(a.papers[0].stained(), c.papers[0].stained());
    }

    #[test]
    fn higher_duty_stains_a_superset() {
        let m = PlumeModel {
            droplet_rate: 1e6,
            ..Default::default()
        };
        let mut prev: Option<DepositionField> = None;
        for duty in [75.0, 80.0, 85.0, 90.0, 95.0, 100.0] {
            let f = run_sweep(1.2, duty, 3, &m);
            if let Some(p) = &prev {
                let lo = p.papers[0].stained();
                let hi = f.papers[0].stained();
                assert!(lo.iter().zip(hi).all(|(l, h)| !*l || *h), "duty {duty}");
            }
            prev = Some(f);
        }
    }

    #[test]
    fn deposited_never_exceeds_emitted() {
        let f = run_sweep(0.7, 100.0, 4, &PlumeModel::default());
        assert!(f.deposited <= f.emitted);
        assert!(f.deposited as usize >= f.papers[0].stained_count());
    }

    #[test]
    fn papers_outside_bounds_are_rejected() {
        let bounds = SprayBounds {
            along_min: 0.0,
            along_max: 10.0,
            height_min: 0.0,
            height_max: 3.0,
            max_distance: 2.0,
        };
        for bad in [placement(-1.0, 1.0, 1.0), placement(1.0, 1.0, 0.0), placement(1.0, 1.0, 5.0)] {
            let r = DepositionSim::new(
                vec![WaterSensitivePaper::new(bad)],
                PlumeModel::default(),
                0.1,
                &bounds,
                0,
            );
            assert!(matches!(r, Err(Error::Config(_))));
        }
    }

    #[test]
    fn sector_probabilities_cover_the_disc() {
        let full = Sector {
            u0: 0.0,
            u1: 1.0,
            psi0: 0.0,
            span: TAU,
        };
        assert!((full.probability() - 1.0).abs() < 1e-15);
        let a = Sector {
            u0: 0.2,
            u1: 0.4,
            psi0: 6.0,
            span: 0.5,
        };
        let b = Sector {
            u0: 0.3,
            u1: 0.6,
            psi0: 0.1,
            span: 0.2,
        };
        assert!(a.overlaps(&b));
        let m = a.merge(&b);
        assert!((m.psi0 - 6.0).abs() < 1e-12);
        assert!((m.span - ((0.1 - 6.0f64).rem_euclid(TAU) + 0.2)).abs() < 1e-12);
        assert_eq!((m.u0, m.u1), (0.2, 0.6));
    }

    #[test]
    fn candidate_sector_bounds_its_rectangle() {
        let c = Candidate {
            paper: 0,
            distance: 1.0,
            a0: 0.1,
            a1: 0.2,
            b0: -0.05,
            b1: 0.03,
        };
        let s = c.sector(0.5).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let a = 0.1 + 0.1 * i as f64 / 20.0;
                let b = -0.05 + 0.08 * j as f64 / 20.0;
                let u = a.hypot(b) / 0.5;
                let d = (b.atan2(a) - s.psi0).rem_euclid(TAU);
                assert!(u >= s.u0 - 1e-12 && u <= s.u1 + 1e-12);
                assert!(d <= s.span + 1e-12);
            }
        }
    }

    #[test]
    fn stain_raster_dump_uses_two_classes() {
        let mut p = WaterSensitivePaper::with_size(placement(0.0, 0.0, 1.0), 2, 2);
        p.stain_pixel(1, 0);
        let r = p.to_raster();
        assert_eq!((r.classes, r.data.clone()), (2, vec![0, 0, 1, 0]));
    }
}

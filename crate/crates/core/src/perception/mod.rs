//! Segmentation and depth ingestion.
//!
//! Frames arrive as a class-index raster plus a depth raster of the same
//! size. Pixels that are out of range (beyond the gating depth, or without a
//! depth reading) are voided to [`SegClass::Sky`], the frame is cut into one
//! region per nozzle, and each region is reduced to the control inputs
//! carried by [`ZoneFeatures`].

pub mod format;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use format::{ClassRaster, DepthRaster};

pub const DEFAULT_WIDTH: usize = 1280;
pub const DEFAULT_HEIGHT: usize = 256;
pub const DEFAULT_MAX_DEPTH_M: f32 = 2.0;
pub const NUM_CLASSES: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SegClass {
    Tree = 0,
    Fruit = 1,
    Ground = 2,
    Sky = 3,
    Pipe = 4,
}

impl SegClass {
    pub fn from_u8(value: u8) -> Option<Self> {
        match value {
            0 => Some(SegClass::Tree),
            1 => Some(SegClass::Fruit),
            2 => Some(SegClass::Ground),
            3 => Some(SegClass::Sky),
            4 => Some(SegClass::Pipe),
            _ => None,
        }
    }

    /// Classes that count as sprayable canopy.
    pub fn is_canopy(self) -> bool {
        matches!(self, SegClass::Tree | SegClass::Fruit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedFrame {
    width: usize,
    height: usize,
    classes: Vec<SegClass>,
    pub frame_id: u64,
    pub timestamp: f64,
}

impl SegmentedFrame {
    pub fn new(width: usize, height: usize, classes: Vec<SegClass>) -> Result<Self> {
        if width == 0 || height == 0 || classes.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels for {width}x{height}", width * height),
                actual: format!("{} pixels", classes.len()),
            });
        }
        Ok(Self {
            width,
            height,
            classes,
            frame_id: 0,
            timestamp: 0.0,
        })
    }

    pub fn filled(width: usize, height: usize, class: SegClass) -> Self {
        Self::new(width, height, vec![class; width * height]).expect("consistent dimensions")
    }

    pub fn with_id(mut self, frame_id: u64, timestamp: f64) -> Self {
        self.frame_id = frame_id;
        self.timestamp = timestamp;
        self
    }

    pub fn from_raster(raster: &ClassRaster) -> Result<Self> {
        if raster.classes != NUM_CLASSES {
            return Err(Error::Format(format!(
                "mask declares {} classes, expected {NUM_CLASSES}",
                raster.classes
            )));
        }
        let classes = raster
            .data
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                SegClass::from_u8(value).ok_or(Error::ClassOutOfRange { value, index })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raster.width, raster.height, classes)
    }

    pub fn to_raster(&self) -> ClassRaster {
        ClassRaster {
            width: self.width,
            height: self.height,
            classes: NUM_CLASSES,
            data: self.classes.iter().map(|&c| c as u8).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> &[SegClass] {
        &self.classes
    }

    pub fn get(&self, x: usize, y: usize) -> SegClass {
        self.classes[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: SegClass) {
        self.classes[y * self.width + x] = class;
    }

    pub fn count(&self, class: SegClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}

/// Per-pixel range in metres; `0.0` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    depth: Vec<f32>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || depth.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels for {width}x{height}", width * height),
                actual: format!("{} pixels", depth.len()),
            });
        }
        if let Some(i) = depth.iter().position(|d| d.is_finite() && *d < 0.0) {
            return Err(Error::Format(format!("negative depth {} at pixel {i}", depth[i])));
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn filled(width: usize, height: usize, metres: f32) -> Self {
        Self::new(width, height, vec![metres; width * height]).expect("consistent dimensions")
    }

    pub fn from_raster(raster: &DepthRaster) -> Result<Self> {
        let depth = raster
            .millimetres
            .iter()
            .map(|&mm| mm as f32 / 1000.0)
            .collect();
        Self::new(raster.width, raster.height, depth)
    }

    /// Depths are rounded to whole millimetres; values beyond the `u16`
    /// range saturate and non-finite values become the invalid sentinel.
    pub fn to_raster(&self) -> DepthRaster {
        DepthRaster {
            width: self.width,
            height: self.height,
            millimetres: self
                .depth
                .iter()
                .map(|&m| {
                    if m.is_finite() {
                        (m * 1000.0).round().clamp(0.0, u16::MAX as f32) as u16
                    } else {
                        0
                    }
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn depths(&self) -> &[f32] {
        &self.depth
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.depth[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, metres: f32) {
        self.depth[y * self.width + x] = metres;
    }
}

fn depth_is_valid(d: f32, max_depth: f32) -> bool {
    d.is_finite() && d > 0.0 && d <= max_depth
}

pub fn load_mask(path: &Path) -> Result<SegmentedFrame> {
    SegmentedFrame::from_raster(&format::read_class_raster(path)?)
}

pub fn load_depth(path: &Path) -> Result<DepthFrame> {
    DepthFrame::from_raster(&format::read_depth_raster(path)?)
}

pub fn save_mask(path: &Path, frame: &SegmentedFrame) -> Result<()> {
    format::write_class_raster(path, &frame.to_raster())
}

pub fn save_depth(path: &Path, depth: &DepthFrame) -> Result<()> {
    format::write_depth_raster(path, &depth.to_raster())
}

/// Voids every pixel with no depth reading or a reading beyond `max_depth`.
pub fn fuse_depth_gate(
    seg: &SegmentedFrame,
    depth: &DepthFrame,
    max_depth: f32,
) -> Result<SegmentedFrame> {
    if seg.dims() != depth.dims() {
        return Err(Error::dims(seg.dims(), depth.dims()));
    }
    let mut out = seg.clone();
    for (class, &d) in out.classes.iter_mut().zip(&depth.depth) {
        if !depth_is_valid(d, max_depth) {
            *class = SegClass::Sky;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitAxis {
    /// Zones are vertical strips stacked along the image width.
    #[default]
    Width,
    Height,
}

/// Pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneRect {
    pub index: usize,
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl ZoneRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn pixels(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }
}

/// Splits a `width × height` frame into `n_zones` contiguous bands along
/// `axis`. Every band gets `len / n_zones` pixels and the last one also takes
/// the remainder.
pub fn zone_rects(
    width: usize,
    height: usize,
    n_zones: usize,
    axis: SplitAxis,
) -> Result<Vec<ZoneRect>> {
    if n_zones < 1 {
        return Err(Error::Config("n_zones must be at least 1".into()));
    }
    let len = match axis {
        SplitAxis::Width => width,
        SplitAxis::Height => height,
    };
    if len < n_zones {
        return Err(Error::Config(format!(
            "cannot split {len} pixels into {n_zones} zones"
        )));
    }
    let step = len / n_zones;
    Ok((0..n_zones)
        .map(|i| {
            let a = i * step;
            let b = if i + 1 == n_zones { len } else { a + step };
            match axis {
                SplitAxis::Width => ZoneRect {
                    index: i,
                    x0: a,
                    x1: b,
                    y0: 0,
                    y1: height,
                },
                SplitAxis::Height => ZoneRect {
                    index: i,
                    x0: 0,
                    x1: width,
                    y0: a,
                    y1: b,
                },
            }
        })
        .collect())
}

/// Borrowed view of one nozzle region of a frame.
#[derive(Debug, Clone, Copy)]
pub struct ZoneView<'a> {
    pub frame: &'a SegmentedFrame,
    pub rect: ZoneRect,
}

impl ZoneView<'_> {
    pub fn iter(&self) -> impl Iterator<Item = SegClass> + '_ {
        let r = self.rect;
        (r.y0..r.y1).flat_map(move |y| (r.x0..r.x1).map(move |x| self.frame.get(x, y)))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DepthView<'a> {
    pub depth: &'a DepthFrame,
    pub rect: ZoneRect,
}

impl DepthView<'_> {
    pub fn iter(&self) -> impl Iterator<Item = f32> + '_ {
        let r = self.rect;
        (r.y0..r.y1).flat_map(move |y| (r.x0..r.x1).map(move |x| self.depth.get(x, y)))
    }
}

pub fn partition_zones(
    frame: &SegmentedFrame,
    n_zones: usize,
    axis: SplitAxis,
) -> Result<Vec<ZoneView<'_>>> {
    Ok(zone_rects(frame.width, frame.height, n_zones, axis)?
        .into_iter()
        .map(|rect| ZoneView { frame, rect })
        .collect())
}

/// How per-pixel depth collapses to the single distance `d_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceStat {
    #[default]
    Median,
    Mean,
}

/// Control inputs for one nozzle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneFeatures {
    pub zone_index: usize,
    /// Canopy (tree + fruit) fraction of the zone, in `[0, 1]`.
    pub a_p: f64,
    /// Representative canopy distance in metres; `+inf` when the zone is empty.
    pub d_c: f64,
    /// Platform speed, m/s.
    pub v_p: f64,
    pub valid_pixel_count: usize,
}

impl ZoneFeatures {
    pub fn empty(zone_index: usize, v_p: f64) -> Self {
        Self {
            zone_index,
            a_p: 0.0,
            d_c: f64::INFINITY,
            v_p,
            valid_pixel_count: 0,
        }
    }
}

fn median(values: &mut [f32]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    let upper = *upper as f64;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        0.5 * (lower_max + upper)
    }
}

/// Reduces a gated zone to `a_p` and `d_c`. Pixels are assumed already gated:
/// any canopy pixel counts, and its depth contributes to `d_c`.
pub fn compute_zone_features(
    zone: &ZoneView<'_>,
    depth: &DepthView<'_>,
    v_p: f64,
    stat: DistanceStat,
) -> Result<ZoneFeatures> {
    let (zr, dr) = (zone.rect, depth.rect);
    if (zr.width(), zr.height()) != (dr.width(), dr.height()) {
        return Err(Error::dims((zr.width(), zr.height()), (dr.width(), dr.height())));
    }
    let total = zr.pixels();
    let mut depths: Vec<f32> = zone
        .iter()
        .zip(depth.iter())
        .filter(|(c, _)| c.is_canopy())
        .map(|(_, d)| d)
        .collect();
    let count = depths.len();
    if count == 0 {
        return Ok(ZoneFeatures::empty(zr.index, v_p));
    }
    let d_c = match stat {
        DistanceStat::Median => median(&mut depths),
        DistanceStat::Mean => depths.iter().map(|&d| d as f64).sum::<f64>() / count as f64,
    };
    Ok(ZoneFeatures {
        zone_index: zr.index,
        a_p: count as f64 / total as f64,
        d_c,
        v_p,
        valid_pixel_count: count,
    })
}

/// Settings for turning a raw frame pair into per-nozzle features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub max_depth_m: f32,
    pub n_zones: usize,
    pub axis: SplitAxis,
    pub distance_stat: DistanceStat,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            max_depth_m: DEFAULT_MAX_DEPTH_M,
            n_zones: 4,
            axis: SplitAxis::Width,
            distance_stat: DistanceStat::Median,
        }
    }
}

/// Gate, partition and reduce one frame pair.
pub fn frame_features(
    seg: &SegmentedFrame,
    depth: &DepthFrame,
    v_p: f64,
    cfg: &PerceptionConfig,
) -> Result<Vec<ZoneFeatures>> {
    let gated = fuse_depth_gate(seg, depth, cfg.max_depth_m)?;
    partition_zones(&gated, cfg.n_zones, cfg.axis)?
        .iter()
        .map(|zone| {
            let dv = DepthView {
                depth,
                rect: zone.rect,
            };
            compute_zone_features(zone, &dv, v_p, cfg.distance_stat)
        })
        .collect()
}

/// Rejects frames whose id does not strictly increase.
#[derive(Debug, Default, Clone)]
pub struct FrameSequence {
    last: Option<u64>,
}

impl FrameSequence {
    pub fn accept(&mut self, frame: &SegmentedFrame) -> Result<()> {
        if let Some(prev) = self.last {
            if frame.frame_id <= prev {
                return Err(Error::Runtime(format!(
                    "frame id {} does not follow {prev}",
                    frame.frame_id
                )));
            }
        }
        self.last = Some(frame.frame_id);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_split(w: usize, h: usize, left: SegClass, right: SegClass) -> SegmentedFrame {
        let classes = (0..h)
            .flat_map(|_| (0..w).map(move |x| if x < w / 2 { left } else { right }))
            .collect();
        SegmentedFrame::new(w, h, classes).unwrap()
    }

    #[test]
    fn class_values_are_validated() {
        let raster = ClassRaster {
            width: 2,
            height: 2,
            classes: 5,
            data: vec![0, 1, 7, 3],
        };
        let err = SegmentedFrame::from_raster(&raster).unwrap_err();
        assert!(matches!(err, Error::ClassOutOfRange { value: 7, index: 2 }));
        assert!(err.to_string().contains("class out of range"));
    }

    #[test]
    fn mask_must_declare_five_classes() {
        let raster = ClassRaster {
            width: 1,
            height: 1,
            classes: 2,
            data: vec![0],
        };
        assert!(matches!(
            SegmentedFrame::from_raster(&raster),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn all_sky_frame_has_no_canopy() {
        let f = SegmentedFrame::filled(DEFAULT_WIDTH, DEFAULT_HEIGHT, SegClass::Sky);
        let d = DepthFrame::filled(DEFAULT_WIDTH, DEFAULT_HEIGHT, 1.2);
        let feats = frame_features(&f, &d, 0.5, &PerceptionConfig::default()).unwrap();
        assert!(feats.iter().all(|z| z.a_p == 0.0 && z.valid_pixel_count == 0));
        assert!(feats.iter().all(|z| z.d_c.is_infinite()));
    }

    #[test]
    fn gate_keeps_near_tree_and_voids_far_tree() {
        let f = SegmentedFrame::filled(8, 4, SegClass::Tree);
        let near = fuse_depth_gate(&f, &DepthFrame::filled(8, 4, 1.2), 2.0).unwrap();
        assert_eq!(near, f);
        let far = fuse_depth_gate(&f, &DepthFrame::filled(8, 4, 2.5), 2.0).unwrap();
        assert_eq!(far.count(SegClass::Sky), 32);
    }

    #[test]
    fn gate_voids_missing_depth_and_keeps_exact_limit() {
        let f = SegmentedFrame::filled(3, 1, SegClass::Fruit);
        let d = DepthFrame::new(3, 1, vec![0.0, 2.0, f32::NAN]).unwrap();
        let g = fuse_depth_gate(&f, &d, 2.0).unwrap();
        assert_eq!(g.classes(), &[SegClass::Sky, SegClass::Fruit, SegClass::Sky]);
    }

    #[test]
    fn gate_rejects_mismatched_dimensions() {
        let f = SegmentedFrame::filled(4, 4, SegClass::Tree);
        let d = DepthFrame::filled(4, 3, 1.0);
        assert!(matches!(
            fuse_depth_gate(&f, &d, 2.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negative_depth_rejected() {
        assert!(DepthFrame::new(1, 1, vec![-0.5]).is_err());
    }

    #[test]
    fn default_partition_is_four_strips_of_320() {
        let rects = zone_rects(1280, 256, 4, SplitAxis::Width).unwrap();
        let bounds: Vec<_> = rects.iter().map(|r| (r.x0, r.x1, r.y0, r.y1)).collect();
        assert_eq!(
            bounds,
            vec![(0, 320, 0, 256), (320, 640, 0, 256), (640, 960, 0, 256), (960, 1280, 0, 256)]
        );
    }

    #[test]
    fn single_zone_is_whole_frame() {
        let rects = zone_rects(1280, 256, 1, SplitAxis::Width).unwrap();
        assert_eq!(
            rects,
            vec![ZoneRect {
                index: 0,
                x0: 0,
                x1: 1280,
                y0: 0,
                y1: 256
            }]
        );
    }

    #[test]
    fn remainder_goes_to_last_zone() {
        let rects = zone_rects(1281, 256, 4, SplitAxis::Width).unwrap();
        let widths: Vec<_> = rects.iter().map(ZoneRect::width).collect();
        assert_eq!(widths, vec![320, 320, 320, 321]);
        let rects = zone_rects(10, 7, 3, SplitAxis::Height).unwrap();
        let heights: Vec<_> = rects.iter().map(ZoneRect::height).collect();
        assert_eq!(heights, vec![2, 2, 3]);
    }

    #[test]
    fn zero_zones_is_an_error() {
        assert!(zone_rects(16, 16, 0, SplitAxis::Width).is_err());
    }

    #[test]
    fn saturated_and_empty_zones() {
        let f = SegmentedFrame::filled(10, 10, SegClass::Tree);
        let d = DepthFrame::filled(10, 10, 1.2);
        let z = ZoneView {
            frame: &f,
            rect: zone_rects(10, 10, 1, SplitAxis::Width).unwrap()[0],
        };
        let dv = DepthView {
            depth: &d,
            rect: z.rect,
        };
        let feat = compute_zone_features(&z, &dv, 0.5, DistanceStat::Median).unwrap();
        assert_eq!(feat.a_p, 1.0);
        assert!((feat.d_c - 1.2).abs() < 1e-6);

        let sky = SegmentedFrame::filled(10, 10, SegClass::Sky);
        let z = ZoneView {
            frame: &sky,
            rect: z.rect,
        };
        let feat = compute_zone_features(&z, &dv, 0.5, DistanceStat::Median).unwrap();
        assert_eq!((feat.a_p, feat.valid_pixel_count), (0.0, 0));
    }

    #[test]
    fn mean_distance_option() {
        let f = half_split(4, 1, SegClass::Tree, SegClass::Fruit);
        let d = DepthFrame::new(4, 1, vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let rect = zone_rects(4, 1, 1, SplitAxis::Width).unwrap()[0];
        let z = ZoneView { frame: &f, rect };
        let dv = DepthView { depth: &d, rect };
        let med = compute_zone_features(&z, &dv, 0.0, DistanceStat::Median).unwrap();
        let mean = compute_zone_features(&z, &dv, 0.0, DistanceStat::Mean).unwrap();
        assert_eq!(med.d_c, 1.0);
        assert_eq!(mean.d_c, 1.25);
    }

    #[test]
    fn feature_views_must_match() {
        let f = SegmentedFrame::filled(8, 8, SegClass::Tree);
        let d = DepthFrame::filled(8, 8, 1.0);
        let rects = zone_rects(8, 8, 2, SplitAxis::Width).unwrap();
        let z = ZoneView {
            frame: &f,
            rect: rects[0],
        };
        let dv = DepthView {
            depth: &d,
            rect: zone_rects(8, 8, 1, SplitAxis::Width).unwrap()[0],
        };
        assert!(compute_zone_features(&z, &dv, 0.0, DistanceStat::Median).is_err());
    }

    #[test]
    fn frame_ids_must_increase() {
        let mut seq = FrameSequence::default();
        let f = SegmentedFrame::filled(1, 1, SegClass::Sky);
        seq.accept(&f.clone().with_id(1, 0.0)).unwrap();
        seq.accept(&f.clone().with_id(2, 0.1)).unwrap();
        assert!(seq.accept(&f.clone().with_id(2, 0.2)).is_err());
    }
}

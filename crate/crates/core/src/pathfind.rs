//! Walking-path extraction: restricted zones, the maximum-area free-space
//! region, and room segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{
    dilate, label_regions, BinaryImage, BoundingBox, Connectivity, LabelImage, Target,
};

/// Restricted area drawn on the plan. Level 0 is full public access; higher
/// levels restrict more.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub polygon: Vec<[f64; 2]>,
    pub level: u32,
}

impl Zone {
    pub fn new(polygon: Vec<[f64; 2]>, level: u32) -> Self {
        Self { polygon, level }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64, level: u32) -> Self {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], level)
    }

    /// Checks vertex count, bounds and simplicity. `index` is only used for
    /// the error report.
    pub fn validate(&self, index: usize, width: usize, height: usize) -> Result<()> {
        let invalid = |reason: String| Error::InvalidZone { index, reason };
        if self.polygon.len() < 3 {
            return Err(invalid(format!("{} vertices, need at least 3", self.polygon.len())));
        }
        for &[x, y] in &self.polygon {
            if !x.is_finite() || !y.is_finite() {
                return Err(invalid("non-finite vertex".into()));
            }
            if x < 0.0 || y < 0.0 || x > width as f64 || y > height as f64 {
                return Err(invalid(format!("vertex ({x}, {y}) outside {width}x{height} image")));
            }
        }
        if self.is_self_intersecting() {
            return Err(invalid("polygon is self-intersecting".into()));
        }
        Ok(())
    }

    pub fn is_self_intersecting(&self) -> bool {
        let n = self.polygon.len();
        let seg = |i: usize| (self.polygon[i], self.polygon[(i + 1) % n]);
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }

    /// Even-odd crossings of the horizontal line through `py`, sorted.
    fn crossings(&self, py: f64) -> Vec<f64> {
        let n = self.polygon.len();
        let mut xs = Vec::new();
        for i in 0..n {
            let [x0, y0] = self.polygon[i];
            let [x1, y1] = self.polygon[(i + 1) % n];
            // half-open rule on y avoids double-counting shared vertices
            if (y0 <= py) != (y1 <= py) {
                xs.push(x0 + (py - y0) / (y1 - y0) * (x1 - x0));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Whether the centre of pixel (x, y) lies inside the polygon.
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        let px = x as f64 + 0.5;
        self.crossings(y as f64 + 0.5).iter().filter(|&&cx| cx < px).count() % 2 == 1
    }

    /// Calls `f` for every pixel whose centre is inside the polygon.
    pub fn for_each_pixel(&self, width: usize, height: usize, mut f: impl FnMut(usize, usize)) {
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &[_, y] in &self.polygon {
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        if !ymin.is_finite() || height == 0 {
            return;
        }
        let y0 = (ymin - 0.5).floor().max(0.0) as usize;
        let y1 = ((ymax - 0.5).ceil().max(0.0) as usize).min(height - 1);
        for y in y0..=y1 {
            let xs = self.crossings(y as f64 + 0.5);
            for pair in xs.chunks_exact(2) {
                // centres with pair[0] < x + 0.5 <= pair[1], matching `contains_pixel`
                let mut x = (pair[0] - 0.5).floor().max(0.0) as usize;
                while (x as f64 + 0.5) <= pair[0] {
                    x += 1;
                }
                while x < width && (x as f64 + 0.5) <= pair[1] {
                    f(x, y);
                    x += 1;
                }
            }
        }
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

pub fn validate_zones(zones: &[Zone], width: usize, height: usize) -> Result<()> {
    zones.iter().enumerate().try_for_each(|(i, z)| z.validate(i, width, height))
}

/// Blocks free space inside every zone whose level is at least `cutoff`.
/// Zones below the cutoff leave the mask untouched.
pub fn apply_zones(bin: &BinaryImage, zones: &[Zone], cutoff: u32) -> Result<BinaryImage> {
    validate_zones(zones, bin.width(), bin.height())?;
    let mut out = bin.clone();
    for zone in zones.iter().filter(|z| z.level >= cutoff) {
        zone.for_each_pixel(bin.width(), bin.height(), |x, y| out.set(x, y, true));
    }
    Ok(out)
}

/// Per-pixel maximum restriction level of the zones below the cutoff, used to
/// annotate edges that run through partially restricted areas.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoneLevels {
    width: usize,
    levels: Vec<u32>,
}

impl ZoneLevels {
    pub fn new(width: usize, height: usize, zones: &[Zone], cutoff: u32) -> Self {
        let mut levels = vec![0u32; width * height];
        for zone in zones.iter().filter(|z| z.level < cutoff) {
            zone.for_each_pixel(width, height, |x, y| {
                let l = &mut levels[y * width + x];
                *l = (*l).max(zone.level);
            });
        }
        Self { width, levels }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, levels: vec![0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.levels.get(y * self.width + x).copied().unwrap_or(0)
    }
}

/// The walkable corridor network of a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct IndoorPath {
    pub mask: BinaryImage,
    pub source_label: u32,
    pub area: usize,
}

impl IndoorPath {
    pub fn from_mask(mask: BinaryImage) -> Self {
        let area = mask.count();
        Self { mask, source_label: 1, area }
    }
}

/// Picks the free-space region with maximum area. Regions touching the image
/// border are page margin and never qualify; equal areas go to the lowest
/// label.
pub fn extract_indoor_path(labels: &LabelImage) -> Result<IndoorPath> {
    let best = labels
        .regions
        .iter()
        .filter(|r| !labels.touches_border(r.label))
        .fold(None::<&crate::imagecore::RegionStats>, |best, r| match best {
            Some(b) if b.area >= r.area => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::NoWalkableArea)?;
    Ok(IndoorPath { mask: labels.mask(best.label), source_label: best.label, area: best.area })
}

/// Phase 1 in one call: mask zones, label 4-connected free space, take the
/// largest interior region.
pub fn find_indoor_path(bin: &BinaryImage, zones: &[Zone], cutoff: u32) -> Result<IndoorPath> {
    let masked = apply_zones(bin, zones, cutoff)?;
    extract_indoor_path(&label_regions(&masked, Target::FreeSpace, Connectivity::Four))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoomSegment {
    pub mask: BinaryImage,
    pub area: usize,
    pub bbox: BoundingBox,
}

/// 0.25 % of the image area.
pub fn default_min_room_area(width: usize, height: usize) -> usize {
    (width * height).div_ceil(400)
}

/// Thickens line work to close door gaps, then labels enclosed free space.
/// The indoor path, the page margin and regions below `min_area` are dropped.
pub fn segment_rooms(
    bin: &BinaryImage,
    path: &IndoorPath,
    min_area: usize,
    dilation_radius: usize,
) -> Vec<RoomSegment> {
    let mut closed = dilate(bin, dilation_radius);
    for (x, y) in path.mask.foreground() {
        closed.set(x, y, true);
    }
    let labels = label_regions(&closed, Target::FreeSpace, Connectivity::Four);
    labels
        .regions
        .iter()
        .filter(|r| r.area >= min_area && !labels.touches_border(r.label))
        .map(|r| RoomSegment { mask: labels.mask(r.label), area: r.area, bbox: r.bbox })
        .collect()
}

//! Skeleton graph: thinning the walking path, snapping beacons onto it,
//! tracing edges with direction-character counts, spacer insertion and
//! merging of nearby points of interest.
//!
//! Direction characters are expressed in the image frame (up = `N`).
//! [`orientation_code`] rotates them by the map orientation, so the counts
//! stored on an edge never depend on which way the plan faces.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{label_regions, thin, BinaryImage, Connectivity, Target, NEIGHBORS8};
use crate::pathfind::{IndoorPath, ZoneLevels};

pub const METERS_PER_FOOT: f64 = 0.3048;

/// Compass direction of image-up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compass {
    #[default]
    N,
    E,
    S,
    W,
}

impl Compass {
    pub fn quarter_turns(self) -> u8 {
        match self {
            Compass::N => 0,
            Compass::E => 1,
            Compass::S => 2,
            Compass::W => 3,
        }
    }
}

impl FromStr for Compass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" | "NORTH" => Ok(Compass::N),
            "E" | "EAST" => Ok(Compass::E),
            "S" | "SOUTH" => Ok(Compass::S),
            "W" | "WEST" => Ok(Compass::W),
            other => Err(Error::Invalid(format!("unknown orientation {other:?}"))),
        }
    }
}

impl fmt::Display for Compass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Step direction between 8-neighbours. The discriminant is the compass code
/// (0 = N, clockwise).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    N = 0,
    NE = 1,
    E = 2,
    SE = 3,
    S = 4,
    SW = 5,
    W = 6,
    NW = 7,
}

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl Dir {
    pub const ALL: [Dir; 8] = [Dir::N, Dir::NE, Dir::E, Dir::SE, Dir::S, Dir::SW, Dir::W, Dir::NW];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Dir {
        Self::ALL[(code % 8) as usize]
    }

    /// Direction of an image-space move (y grows downwards).
    pub fn from_step(dx: i64, dy: i64) -> Option<Dir> {
        Some(match (dx, dy) {
            (0, -1) => Dir::N,
            (1, -1) => Dir::NE,
            (1, 0) => Dir::E,
            (1, 1) => Dir::SE,
            (0, 1) => Dir::S,
            (-1, 1) => Dir::SW,
            (-1, 0) => Dir::W,
            (-1, -1) => Dir::NW,
            _ => return None,
        })
    }

    pub fn offset(self) -> (i64, i64) {
        match self {
            Dir::N => (0, -1),
            Dir::NE => (1, -1),
            Dir::E => (1, 0),
            Dir::SE => (1, 1),
            Dir::S => (0, 1),
            Dir::SW => (-1, 1),
            Dir::W => (-1, 0),
            Dir::NW => (-1, -1),
        }
    }

    pub fn reverse(self) -> Dir {
        Dir::from_code(self.code() + 4)
    }

    pub fn is_diagonal(self) -> bool {
        self.code() % 2 == 1
    }

    pub fn name(self) -> &'static str {
        ["N", "NE", "E", "SE", "S", "SW", "W", "NW"][self as usize]
    }

    /// Unit vector as (east, north).
    fn unit(self) -> (f64, f64) {
        [(0.0, 1.0), (H, H), (1.0, 0.0), (H, -H), (0.0, -1.0), (-H, -H), (-1.0, 0.0), (-H, H)]
            [self as usize]
    }
}

/// Step tallies per direction character.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "DirCountsRepr", into = "DirCountsRepr")]
pub struct DirCounts([u32; 8]);

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct DirCountsRepr {
    #[serde(default)]
    E: u32,
    #[serde(default)]
    W: u32,
    #[serde(default)]
    N: u32,
    #[serde(default)]
    S: u32,
    #[serde(default)]
    NE: u32,
    #[serde(default)]
    NW: u32,
    #[serde(default)]
    SE: u32,
    #[serde(default)]
    SW: u32,
}

impl From<DirCountsRepr> for DirCounts {
    fn from(r: DirCountsRepr) -> Self {
        DirCounts([r.N, r.NE, r.E, r.SE, r.S, r.SW, r.W, r.NW])
    }
}

impl From<DirCounts> for DirCountsRepr {
    fn from(c: DirCounts) -> Self {
        let [n, ne, e, se, s, sw, w, nw] = c.0;
        DirCountsRepr { E: e, W: w, N: n, S: s, NE: ne, NW: nw, SE: se, SW: sw }
    }
}

impl DirCounts {
    pub fn from_pairs(pairs: &[(Dir, u32)]) -> Self {
        let mut c = Self::default();
        for &(d, n) in pairs {
            c.0[d as usize] += n;
        }
        c
    }

    pub fn get(&self, d: Dir) -> u32 {
        self.0[d as usize]
    }

    pub fn add(&mut self, d: Dir) {
        self.0[d as usize] += 1;
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn diagonal(&self) -> u32 {
        Dir::ALL.iter().filter(|d| d.is_diagonal()).map(|&d| self.get(d)).sum()
    }

    pub fn axial(&self) -> u32 {
        self.total() - self.diagonal()
    }

    /// Axial steps count 1, diagonal steps √2.
    pub fn pixel_length(&self) -> f64 {
        self.axial() as f64 + self.diagonal() as f64 * std::f64::consts::SQRT_2
    }

    /// Counts of the same path walked backwards.
    pub fn reversed(&self) -> Self {
        let mut r = Self::default();
        for d in Dir::ALL {
            r.0[d.reverse() as usize] = self.get(d);
        }
        r
    }

    pub fn scaled(&self, k: u32) -> Self {
        DirCounts(self.0.map(|c| c * k))
    }

    pub fn merged(&self, other: &Self) -> Self {
        let mut r = *self;
        for i in 0..8 {
            r.0[i] += other.0[i];
        }
        r
    }
}

/// Compass code (0 = N, 1 = NE, ... 7 = NW) of the resultant of the unit
/// step vectors, after rotating image-up onto `orientation`. Angles exactly
/// on a sector boundary go to the cardinal side. A zero resultant falls back
/// to the most frequent character.
pub fn orientation_code(counts: &DirCounts, orientation: Compass) -> Result<u8> {
    if counts.total() == 0 {
        return Err(Error::ZeroCounts);
    }
    let (mut east, mut north) = (0.0, 0.0);
    for d in Dir::ALL {
        let (ue, un) = d.unit();
        let n = counts.get(d) as f64;
        east += n * ue;
        north += n * un;
    }
    let image_code = if east.hypot(north) < 1e-9 {
        // Ties go to the lowest code.
        Dir::ALL.iter().max_by_key(|&&d| (counts.get(d), std::cmp::Reverse(d.code()))).unwrap().code()
    } else {
        let t = east.atan2(north).to_degrees().rem_euclid(360.0) / 45.0;
        let lo = t.floor();
        let frac = t - lo;
        let sector = if (frac - 0.5).abs() < 1e-9 {
            // Boundary: the even neighbour is the cardinal one.
            if (lo as i64) % 2 == 0 { lo as i64 } else { lo as i64 + 1 }
        } else {
            t.round() as i64
        };
        sector.rem_euclid(8) as u8
    };
    // Quarter turns shift sectors by exactly two, so binning in the image
    // frame and rotating afterwards is equivalent to rotating the vector.
    Ok((image_code + 2 * orientation.quarter_turns()) % 8)
}

/// Converts a pixel length to feet. `scale` is drawing inches per foot
/// (1/16" = 1' gives 1/16).
pub fn to_physical(pixel_length: f64, dpi: f64, scale: f64) -> Result<f64> {
    if !(dpi > 0.0 && dpi.is_finite()) {
        return Err(Error::InvalidScale(format!("dpi must be positive, got {dpi}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidScale(format!("scale must be positive, got {scale}")));
    }
    Ok(pixel_length / dpi / scale)
}

/// Parses a drawing scale into inches per foot.
///
/// Accepted forms: `1/16=1ft`, `1/16"=1'`, `1/8in=1ft`, `3/32`, `0.0625`
/// and ratios such as `1:192`.
pub fn parse_scale(s: &str) -> Result<f64> {
    let bad = || Error::InvalidScale(format!("cannot parse scale {s:?}"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let number = |v: &str| -> Result<f64> {
        let v = v.trim_end_matches("in").trim_end_matches('"');
        let x = match v.split_once('/') {
            Some((n, d)) => n.parse::<f64>().map_err(|_| bad())? / d.parse::<f64>().map_err(|_| bad())?,
            None => v.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(x)
    };
    let value = if let Some((a, b)) = t.split_once(':') {
        let (a, b) = (number(a)?, number(b)?);
        // 1:192 means one drawing unit per 192 real units.
        12.0 * a / b
    } else if let Some((lhs, rhs)) = t.split_once('=') {
        let feet = rhs
            .trim_end_matches("-0\"")
            .trim_end_matches("ft")
            .trim_end_matches('\'')
            .parse::<f64>()
            .map_err(|_| bad())?;
        number(lhs)? / feet
    } else {
        number(&t)?
    };
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidScale(format!("scale must be positive, got {s:?}")))
    }
}

/// Spacer count and spacing for an edge of length `y` with maximum beacon
/// spacing `x`: ⌈y/x⌉ − 1 spacers every y/⌈y/x⌉.
pub fn spacer_plan(y: f64, x: f64) -> (usize, f64) {
    if !(x > 0.0) || !(y > x) {
        return (0, y);
    }
    let parts = (y / x).ceil();
    (parts as usize - 1, y / parts)
}

/// One-pixel-wide medial line of the walking path.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub mask: BinaryImage,
    /// Pixels with three or more skeleton neighbours.
    pub junctions: Vec<[u32; 2]>,
    /// Pixels with exactly one skeleton neighbour.
    pub endpoints: Vec<[u32; 2]>,
}

impl Skeleton {
    /// Wraps an already thinned mask and classifies its pixels.
    pub fn from_mask(mask: BinaryImage) -> Self {
        let mut junctions = Vec::new();
        let mut endpoints = Vec::new();
        for (x, y) in mask.foreground() {
            match mask.neighbor_count(x, y) {
                1 => endpoints.push([x as u32, y as u32]),
                n if n >= 3 => junctions.push([x as u32, y as u32]),
                _ => {}
            }
        }
        Self { mask, junctions, endpoints }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (x as usize) < self.mask.width() && (y as usize) < self.mask.height() && self.mask.get(x as usize, y as usize)
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.count()
    }

    /// Junction pixels grouped into 8-connected clusters, in raster order of
    /// each cluster's first pixel.
    pub fn junction_clusters(&self) -> Vec<Vec<[u32; 2]>> {
        let mut jmask = BinaryImage::new(self.mask.width(), self.mask.height());
        for &[x, y] in &self.junctions {
            jmask.set(x as usize, y as usize, true);
        }
        let labels = label_regions(&jmask, Target::Foreground, Connectivity::Eight);
        let mut clusters = vec![Vec::new(); labels.regions.len()];
        for &[x, y] in &self.junctions {
            let l = labels.get(x as usize, y as usize);
            clusters[l as usize - 1].push([x, y]);
        }
        clusters
    }

    fn neighbors(&self, x: u32, y: u32) -> impl Iterator<Item = ([u32; 2], Dir)> + '_ {
        NEIGHBORS8.iter().filter_map(move |&(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if self.mask.get_or_false(nx, ny) {
                Some(([nx as u32, ny as u32], Dir::from_step(dx as i64, dy as i64).unwrap()))
            } else {
                None
            }
        })
    }
}

/// Thins the walking path.
pub fn skeletonize(path: &IndoorPath) -> Result<Skeleton> {
    if path.mask.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(Skeleton::from_mask(thin(&path.mask)))
}

/// Removes short side branches left by thinning at corridor corners, dead
/// ends and door recesses.
///
/// A branch running from an endpoint to a junction is dropped when its length
/// is at most the corridor half-width at the junction (`clearance`, the
/// distance transform of the non-walkable pixels) plus `extra` pixels.
/// Branches that end at another endpoint are never removed, so no component
/// disappears. The mask is re-thinned after every round.
pub fn prune_spurs(skel: &Skeleton, clearance: &[f64], extra: f64) -> Skeleton {
    let w = skel.mask.width();
    let mut current = skel.clone();
    for _ in 0..4 {
        let mut doomed: Vec<[u32; 2]> = Vec::new();
        for &end in &current.endpoints {
            let mut branch = vec![end];
            let mut length = 0.0;
            let mut cur = end;
            let mut prev: Option<[u32; 2]> = None;
            let junction = loop {
                let next: Vec<([u32; 2], Dir)> = current
                    .neighbors(cur[0], cur[1])
                    .filter(|(p, _)| Some(*p) != prev && !branch.contains(p))
                    .collect();
                if next.is_empty() {
                    break None;
                }
                // Prefer axial moves so a kink does not skip a pixel.
                let &(p, d) = next.iter().find(|(_, d)| !d.is_diagonal()).unwrap_or(&next[0]);
                length += if d.is_diagonal() { std::f64::consts::SQRT_2 } else { 1.0 };
                if current.mask.neighbor_count(p[0] as usize, p[1] as usize) >= 3 {
                    break Some(p);
                }
                prev = Some(cur);
                branch.push(p);
                cur = p;
                if branch.len() > 4 * (w + skel.mask.height()) {
                    break None;
                }
            };
            if let Some(j) = junction {
                let limit = clearance[j[1] as usize * w + j[0] as usize] + extra;
                if length <= limit {
                    doomed.extend(branch);
                }
            }
        }
        if doomed.is_empty() {
            break;
        }
        let mut mask = current.mask.clone();
        for [x, y] in doomed {
            mask.set(x as usize, y as usize, false);
        }
        current = Skeleton::from_mask(thin(&mask));
    }
    current
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Poi,
    Intersection,
    Spacer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Detected,
    Manual,
}

/// A planned beacon location on the skeleton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeaconNode {
    pub id: u32,
    pub x: u32,
    pub y: u32,
    pub kind: NodeKind,
    pub block_class: Option<String>,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub origin: Origin,
}

impl BeaconNode {
    pub fn new(id: u32, x: u32, y: u32, kind: NodeKind) -> Self {
        Self { id, x, y, kind, block_class: None, label: String::new(), origin: Origin::Detected }
    }

    pub fn pixel(&self) -> [u32; 2] {
        [self.x, self.y]
    }
}

/// Anything that can be snapped onto the skeleton as a point of interest.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapInput {
    pub x: f64,
    pub y: f64,
    pub block_class: Option<String>,
}

/// Nearest skeleton pixel to `(x, y)` by Euclidean distance, ties to the
/// smaller y and then the smaller x.
pub fn nearest_skeleton_pixel(skel: &Skeleton, x: f64, y: f64) -> Option<[u32; 2]> {
    let mut best: Option<(f64, [u32; 2])> = None;
    // Raster order plus a strict comparison implements the tie-break.
    for (px, py) in skel.mask.foreground() {
        let d = (px as f64 - x).powi(2) + (py as f64 - y).powi(2);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, [px as u32, py as u32]));
        }
    }
    best.map(|(_, p)| p)
}

/// Snaps candidates to their nearest skeleton pixels as PoI nodes with ids
/// starting at `first_id`.
pub fn map_to_skeleton(cands: &[SnapInput], skel: &Skeleton, first_id: u32) -> Result<Vec<BeaconNode>> {
    if skel.mask.is_empty() {
        return Err(Error::EmptySkeleton);
    }
    let pixels: Vec<(usize, usize)> = skel.mask.foreground().collect();
    Ok(cands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut best = (f64::INFINITY, pixels[0]);
            for &(px, py) in &pixels {
                let d = (px as f64 - c.x).powi(2) + (py as f64 - c.y).powi(2);
                if d < best.0 {
                    best = (d, (px, py));
                }
            }
            let mut node = BeaconNode::new(first_id + i as u32, best.1 .0 as u32, best.1 .1 as u32, NodeKind::Poi);
            node.block_class = c.block_class.clone();
            node
        })
        .collect())
}

/// One intersection node per junction cluster, at the cluster pixel nearest
/// the cluster centroid.
pub fn find_intersections(skel: &Skeleton, first_id: u32) -> Vec<BeaconNode> {
    skel.junction_clusters()
        .iter()
        .enumerate()
        .map(|(i, cluster)| {
            let n = cluster.len() as f64;
            let cx = cluster.iter().map(|p| p[0] as f64).sum::<f64>() / n;
            let cy = cluster.iter().map(|p| p[1] as f64).sum::<f64>() / n;
            let best = cluster
                .iter()
                .min_by(|a, b| {
                    let da = (a[0] as f64 - cx).powi(2) + (a[1] as f64 - cy).powi(2);
                    let db = (b[0] as f64 - cx).powi(2) + (b[1] as f64 - cy).powi(2);
                    da.total_cmp(&db).then(a[1].cmp(&b[1])).then(a[0].cmp(&b[0]))
                })
                .unwrap();
            BeaconNode::new(first_id + i as u32, best[0], best[1], NodeKind::Intersection)
        })
        .collect()
}

/// A traced skeleton arc between two beacon nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    /// Skeleton pixels from `a` to `b`, both ends included.
    pub path: Vec<[u32; 2]>,
    pub pixel_length: f64,
    /// Feet; zero until physical scaling is applied.
    pub physical_length: f64,
    pub dir_counts: DirCounts,
    pub code: u8,
    pub max_zone_level: u32,
}

impl Edge {
    /// Builds an edge from a pixel path, deriving counts, length, code and
    /// zone level.
    pub fn from_path(a: u32, b: u32, path: Vec<[u32; 2]>, orientation: Compass, levels: &ZoneLevels) -> Result<Self> {
        let dir_counts = path_counts(&path)?;
        let code = orientation_code(&dir_counts, orientation)?;
        let max_zone_level = path.iter().map(|p| levels.get(p[0] as usize, p[1] as usize)).max().unwrap_or(0);
        Ok(Self {
            a,
            b,
            pixel_length: dir_counts.pixel_length(),
            physical_length: 0.0,
            dir_counts,
            code,
            path,
            max_zone_level,
        })
    }

    pub fn steps(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    /// Step directions as a string of characters separated by spaces.
    pub fn dir_string(&self) -> String {
        self.path
            .windows(2)
            .filter_map(|w| step_dir(w[0], w[1]))
            .map(Dir::name)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The same arc walked from `b` to `a`.
    pub fn reversed(&self, orientation: Compass) -> Self {
        let dir_counts = self.dir_counts.reversed();
        let mut path = self.path.clone();
        path.reverse();
        Self {
            a: self.b,
            b: self.a,
            path,
            pixel_length: self.pixel_length,
            physical_length: self.physical_length,
            dir_counts,
            code: orientation_code(&dir_counts, orientation).unwrap_or((self.code + 4) % 8),
            max_zone_level: self.max_zone_level,
        }
    }

    pub fn touches(&self, id: u32) -> bool {
        self.a == id || self.b == id
    }

    pub fn other(&self, id: u32) -> u32 {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }
}

fn step_dir(p: [u32; 2], q: [u32; 2]) -> Option<Dir> {
    Dir::from_step(q[0] as i64 - p[0] as i64, q[1] as i64 - p[1] as i64)
}

fn path_counts(path: &[[u32; 2]]) -> Result<DirCounts> {
    let mut c = DirCounts::default();
    for w in path.windows(2) {
        let d = step_dir(w[0], w[1])
            .ok_or_else(|| Error::Invalid(format!("path step {:?} -> {:?} is not an 8-neighbour move", w[0], w[1])))?;
        c.add(d);
    }
    Ok(c)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    pixel: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.pixel.cmp(&self.pixel))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Traces one edge per pair of adjacent nodes.
///
/// A shortest-path search (axial step 1, diagonal √2) runs from every node
/// and stops at the first other node on each branch. A junction cluster that
/// contains exactly one node belongs to that node: a search may enter it only
/// to finish at the node, so no edge slips past an intersection through the
/// cluster's corner pixels. Edges are keyed by their sorted endpoint pair;
/// `a` is always the smaller id.
pub fn trace_edges(skel: &Skeleton, nodes: &[BeaconNode], orientation: Compass, levels: &ZoneLevels) -> Result<Vec<Edge>> {
    let w = skel.mask.width();
    let idx = |p: [u32; 2]| p[1] as usize * w + p[0] as usize;

    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if !skel.contains(n.x, n.y) {
            return Err(Error::NodeOffSkeleton { id: n.id, x: n.x, y: n.y });
        }
        if let Some(&j) = owner.get(&idx(n.pixel())) {
            return Err(Error::Invalid(format!("nodes {} and {} share pixel ({}, {})", nodes[j].id, n.id, n.x, n.y)));
        }
        owner.insert(idx(n.pixel()), i);
    }
    let node_pixels: HashMap<usize, usize> = owner.clone();
    for cluster in skel.junction_clusters() {
        let inside: Vec<usize> = cluster.iter().filter_map(|&p| node_pixels.get(&idx(p)).copied()).collect();
        if inside.len() == 1 {
            for &p in &cluster {
                owner.entry(idx(p)).or_insert(inside[0]);
            }
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| nodes[i].id);

    for &si in &order {
        let source = &nodes[si];
        let start = idx(source.pixel());
        let mut dist: HashMap<usize, f64> = HashMap::new();
        let mut pred: HashMap<usize, usize> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(start, 0.0);
        heap.push(HeapItem { cost: 0.0, pixel: start as u32 });
        let mut reached: Vec<(usize, usize)> = Vec::new();

        while let Some(HeapItem { cost, pixel }) = heap.pop() {
            let p = pixel as usize;
            if cost > dist[&p] {
                continue;
            }
            let here = owner.get(&p).copied();
            if let Some(o) = here {
                if o != si && node_pixels.get(&p) == Some(&o) {
                    reached.push((o, p));
                    continue;
                }
            }
            let (x, y) = ((p % w) as u32, (p / w) as u32);
            for (q, d) in skel.neighbors(x, y) {
                let qi = idx(q);
                let q_owner = owner.get(&qi).copied();
                // Inside another node's cluster only that node's pixels are
                // reachable, and the cluster is never left again.
                if let Some(o) = here.filter(|&o| o != si) {
                    if q_owner != Some(o) {
                        continue;
                    }
                }
                if q_owner == Some(si) && qi != start && here != Some(si) {
                    continue;
                }
                let step = if d.is_diagonal() { std::f64::consts::SQRT_2 } else { 1.0 };
                let nc = cost + step;
                if dist.get(&qi).map_or(true, |&old| nc < old) {
                    dist.insert(qi, nc);
                    pred.insert(qi, p);
                    heap.push(HeapItem { cost: nc, pixel: qi as u32 });
                }
            }
        }

        for (ti, tp) in reached {
            let target = &nodes[ti];
            if target.id < source.id {
                continue;
            }
            let key = (source.id, target.id);
            let mut path = vec![tp];
            let mut cur = tp;
            while cur != start {
                cur = pred[&cur];
                path.push(cur);
            }
            path.reverse();
            let path: Vec<[u32; 2]> = path.into_iter().map(|i| [(i % w) as u32, (i / w) as u32]).collect();
            let edge = Edge::from_path(source.id, target.id, path, orientation, levels)?;
            match seen.get(&key) {
                Some(&k) if edges[k].pixel_length <= edge.pixel_length => {}
                Some(&k) => edges[k] = edge,
                None => {
                    seen.insert(key, edges.len());
                    edges.push(edge);
                }
            }
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));
    Ok(edges)
}

/// Beacon nodes and the traced edges between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    pub nodes: Vec<BeaconNode>,
    pub edges: Vec<Edge>,
    pub map_orientation: Compass,
    /// Drawing inches per physical foot.
    pub scale: f64,
    pub dpi: Option<f64>,
}

impl ConnectivityGraph {
    pub fn new(map_orientation: Compass, scale: f64, dpi: Option<f64>) -> Self {
        Self { nodes: Vec::new(), edges: Vec::new(), map_orientation, scale, dpi }
    }

    pub fn node(&self, id: u32) -> Option<&BeaconNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: u32) -> Option<&mut BeaconNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn next_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0)
    }

    pub fn degree(&self, id: u32) -> usize {
        self.edges.iter().filter(|e| e.touches(id)).count()
    }

    /// Feet per pixel, if the graph has dpi and scale.
    pub fn feet_per_pixel(&self) -> Result<f64> {
        let dpi = self.dpi.ok_or(Error::MissingDpi)?;
        to_physical(1.0, dpi, self.scale)
    }

    /// Fills in `physical_length` for every edge.
    pub fn apply_physical(&mut self) -> Result<()> {
        let dpi = self.dpi.ok_or(Error::MissingDpi)?;
        for e in &mut self.edges {
            e.physical_length = to_physical(e.pixel_length, dpi, self.scale)?;
        }
        Ok(())
    }

    /// Recomputes every code after the map orientation changed.
    pub fn set_orientation(&mut self, orientation: Compass) -> Result<()> {
        self.map_orientation = orientation;
        for e in &mut self.edges {
            e.code = orientation_code(&e.dir_counts, orientation)?;
        }
        Ok(())
    }

    /// Whether every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let index: HashMap<u32, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if let (Some(&a), Some(&b)) = (index.get(&e.a), index.get(&e.b)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    fn make_edge(&self, a: u32, b: u32, path: Vec<[u32; 2]>, levels: &ZoneLevels) -> Result<Edge> {
        let mut e = Edge::from_path(a, b, path, self.map_orientation, levels)?;
        if let Some(dpi) = self.dpi {
            e.physical_length = to_physical(e.pixel_length, dpi, self.scale)?;
        }
        Ok(e)
    }
}

/// Splits every edge longer than `max_spacing_ft` with ⌈y/x⌉ − 1 spacer
/// nodes at equal arc-length intervals, each snapped to the path pixel
/// closest to its target arc length. Sub-edges partition the original step
/// sequence.
pub fn insert_spacers(g: &ConnectivityGraph, max_spacing_ft: f64, levels: &ZoneLevels) -> Result<ConnectivityGraph> {
    let fpp = g.feet_per_pixel()?;
    let mut out = ConnectivityGraph { edges: Vec::new(), ..g.clone() };
    let mut next_id = g.next_id();
    for e in &g.edges {
        let y = e.pixel_length * fpp;
        let (count, _) = spacer_plan(y, max_spacing_ft);
        let steps = e.steps();
        if count == 0 || steps < 2 {
            out.edges.push(e.clone());
            continue;
        }
        let mut cumulative = Vec::with_capacity(e.path.len());
        cumulative.push(0.0);
        for w in e.path.windows(2) {
            let d = step_dir(w[0], w[1]).expect("edge paths are 8-connected");
            let step = if d.is_diagonal() { std::f64::consts::SQRT_2 } else { 1.0 };
            cumulative.push(cumulative.last().unwrap() + step);
        }
        let count = count.min(steps - 1);
        let parts = count + 1;
        let mut cuts = Vec::with_capacity(count);
        let mut lo = 1;
        for k in 1..=count {
            let target = e.pixel_length * k as f64 / parts as f64;
            // Leave room for the remaining cuts.
            let hi = steps - (count - k) - 1;
            let mut best = lo;
            for i in lo..=hi {
                if (cumulative[i] - target).abs() < (cumulative[best] - target).abs() {
                    best = i;
                }
            }
            cuts.push(best);
            lo = best + 1;
        }
        let mut prev_node = e.a;
        let mut prev_cut = 0;
        for cut in cuts {
            let [x, yy] = e.path[cut];
            let node = BeaconNode::new(next_id, x, yy, NodeKind::Spacer);
            out.nodes.push(node);
            out.edges.push(out.make_edge(prev_node, next_id, e.path[prev_cut..=cut].to_vec(), levels)?);
            prev_node = next_id;
            prev_cut = cut;
            next_id += 1;
        }
        out.edges.push(out.make_edge(prev_node, e.b, e.path[prev_cut..].to_vec(), levels)?);
    }
    normalize(&mut out);
    Ok(out)
}

fn normalize(g: &mut ConnectivityGraph) {
    for e in &mut g.edges {
        if e.a > e.b {
            *e = e.reversed(g.map_orientation);
        }
    }
    g.edges.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)).then(x.pixel_length.total_cmp(&y.pixel_length)));
    g.nodes.sort_by_key(|n| n.id);
}

fn join_text(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ if a == b => a.to_string(),
        _ => format!("{a} / {b}"),
    }
}

fn join_class(a: &Option<String>, b: &Option<String>) -> Option<String> {
    match (a, b) {
        (Some(a), Some(b)) => Some(join_text(a, b)),
        (Some(a), None) | (None, Some(a)) => Some(a.clone()),
        (None, None) => None,
    }
}

/// Merges points of interest that sit within `radius_m` of each other along
/// the skeleton.
///
/// Nodes sharing a pixel collapse first (a PoI absorbs any other kind). Then
/// PoI-PoI edges no longer than the radius are contracted shortest first: the
/// survivor keeps the smaller id, moves to the arc midpoint, joins labels and
/// classes, and inherits the other node's edges, whose paths are extended
/// along the contracted arc. Idempotent.
pub fn merge_close(g: &ConnectivityGraph, radius_m: f64, levels: &ZoneLevels) -> Result<ConnectivityGraph> {
    let fpp = g.feet_per_pixel()?;
    let radius_ft = radius_m / METERS_PER_FOOT;
    let mut out = g.clone();

    // Same-pixel duplicates.
    let mut by_pixel: HashMap<[u32; 2], u32> = HashMap::new();
    let mut nodes = std::mem::take(&mut out.nodes);
    nodes.sort_by_key(|n| (n.kind != NodeKind::Poi, n.id));
    for n in nodes {
        match by_pixel.get(&n.pixel()) {
            Some(&keep) => {
                let survivor = out.nodes.iter_mut().find(|m| m.id == keep).unwrap();
                survivor.label = join_text(&survivor.label, &n.label);
                survivor.block_class = join_class(&survivor.block_class, &n.block_class);
                for e in &mut out.edges {
                    if e.a == n.id {
                        e.a = keep;
                    }
                    if e.b == n.id {
                        e.b = keep;
                    }
                }
            }
            None => {
                by_pixel.insert(n.pixel(), n.id);
                out.nodes.push(n);
            }
        }
    }
    out.edges.retain(|e| e.a != e.b);
    dedupe_edges(&mut out);

    loop {
        let kind = |id: u32| out.node(id).map(|n| n.kind);
        let candidate = out
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| kind(e.a) == Some(NodeKind::Poi) && kind(e.b) == Some(NodeKind::Poi))
            .filter(|(_, e)| e.pixel_length * fpp <= radius_ft + 1e-9)
            .min_by(|(_, x), (_, y)| x.pixel_length.total_cmp(&y.pixel_length).then((x.a, x.b).cmp(&(y.a, y.b))))
            .map(|(i, _)| i);
        let Some(ei) = candidate else { break };
        let contracted = out.edges.remove(ei);
        let (keep, gone) = (contracted.a.min(contracted.b), contracted.a.max(contracted.b));
        let arc = if contracted.a == keep { contracted.clone() } else { contracted.reversed(out.map_orientation) };

        // Arc midpoint by length.
        let half = arc.pixel_length / 2.0;
        let mut acc = 0.0;
        let mut mid = 0;
        let mut best = f64::INFINITY;
        for (i, w) in std::iter::once(None).chain(arc.path.windows(2).map(Some)).enumerate() {
            if let Some(w) = w {
                let d = step_dir(w[0], w[1]).unwrap();
                acc += if d.is_diagonal() { std::f64::consts::SQRT_2 } else { 1.0 };
            }
            if (acc - half).abs() < best {
                best = (acc - half).abs();
                mid = i;
            }
        }
        let to_keep: Vec<[u32; 2]> = arc.path[..=mid].iter().rev().copied().collect();
        let to_gone: Vec<[u32; 2]> = arc.path[mid..].to_vec();

        let gone_node = out.node(gone).cloned().unwrap();
        {
            let survivor = out.node_mut(keep).unwrap();
            survivor.x = arc.path[mid][0];
            survivor.y = arc.path[mid][1];
            survivor.label = join_text(&survivor.label, &gone_node.label);
            survivor.block_class = join_class(&survivor.block_class, &gone_node.block_class);
        }
        out.nodes.retain(|n| n.id != gone);

        let old = std::mem::take(&mut out.edges);
        for e in old {
            if !e.touches(keep) && !e.touches(gone) {
                out.edges.push(e);
                continue;
            }
            let (end, prefix) = if e.touches(keep) { (keep, &to_keep) } else { (gone, &to_gone) };
            let e = if e.a == end { e } else { e.reversed(out.map_orientation) };
            let other = e.b;
            if other == keep || other == gone {
                continue;
            }
            let mut path = prefix.clone();
            path.extend_from_slice(&e.path[1..]);
            let path = simplify_backtracks(path);
            if path.len() < 2 {
                continue;
            }
            let rebuilt = out.make_edge(keep, other, path, levels)?;
            out.edges.push(rebuilt);
        }
        dedupe_edges(&mut out);
    }
    normalize(&mut out);
    Ok(out)
}

/// Drops immediate reversals (`p q p`) left by concatenating arcs.
fn simplify_backtracks(path: Vec<[u32; 2]>) -> Vec<[u32; 2]> {
    let mut out: Vec<[u32; 2]> = Vec::with_capacity(path.len());
    for p in path {
        if out.len() >= 2 && out[out.len() - 2] == p {
            out.pop();
        } else if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

fn dedupe_edges(g: &mut ConnectivityGraph) {
    normalize(g);
    g.edges.dedup_by(|later, earlier| (later.a, later.b) == (earlier.a, earlier.b));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::component_count;
    use proptest::prelude::*;

    fn levels(w: usize, h: usize) -> ZoneLevels {
        ZoneLevels::empty(w, h)
    }

    fn line_skeleton(w: usize, h: usize, pixels: &[[u32; 2]]) -> Skeleton {
        let mut m = BinaryImage::new(w, h);
        for p in pixels {
            m.set(p[0] as usize, p[1] as usize, true);
        }
        Skeleton::from_mask(m)
    }

    fn graph_from(skel: &Skeleton, nodes: Vec<BeaconNode>, dpi: f64, scale: f64) -> ConnectivityGraph {
        let lv = levels(skel.mask.width(), skel.mask.height());
        let mut g = ConnectivityGraph::new(Compass::N, scale, Some(dpi));
        g.edges = trace_edges(skel, &nodes, Compass::N, &lv).unwrap();
        g.nodes = nodes;
        g.apply_physical().unwrap();
        g
    }

    #[test]
    fn scale_conversion() {
        assert!((to_physical(200.0, 200.0, 1.0 / 16.0).unwrap() - 16.0).abs() < 1e-9);
        assert_eq!(to_physical(0.0, 200.0, 1.0 / 16.0).unwrap(), 0.0);
        assert!((to_physical(125.0, 200.0, 1.0 / 16.0).unwrap() - 10.0).abs() < 1e-9);
        assert!(to_physical(1.0, 0.0, 1.0).is_err());
        assert!(to_physical(1.0, 200.0, -1.0).is_err());
    }

    #[test]
    fn scale_parsing() {
        for s in ["1/16=1ft", "1/16\"=1'", "1/16in=1ft", "1/16\"=1'-0\"", "0.0625", "1:192", " 1/16 = 1 ft "] {
            assert!((parse_scale(s).unwrap() - 0.0625).abs() < 1e-12, "{s}");
        }
        assert!((parse_scale("1/8=1ft").unwrap() - 0.125).abs() < 1e-12);
        for s in ["0", "-1/16", "abc", "1/0", ""] {
            assert!(parse_scale(s).is_err(), "{s}");
        }
    }

    #[test]
    fn spacer_formula() {
        assert_eq!(spacer_plan(25.0, 10.0).0, 2);
        assert_eq!(spacer_plan(25.0, 10.0).1, 25.0 / 3.0);
        assert_eq!(spacer_plan(20.0, 10.0), (1, 10.0));
        assert_eq!(spacer_plan(8.0, 10.0), (0, 8.0));
        assert_eq!(spacer_plan(100.0, 33.0), (3, 25.0));
    }

    #[test]
    fn orientation_examples() {
        let east = DirCounts::from_pairs(&[(Dir::E, 99)]);
        assert_eq!(orientation_code(&east, Compass::N).unwrap(), 2);
        assert_eq!(orientation_code(&east, Compass::E).unwrap(), 4);
        let boundary = DirCounts::from_pairs(&[(Dir::N, 50), (Dir::NE, 50)]);
        assert_eq!(orientation_code(&boundary, Compass::N).unwrap(), 0);
        let boundary = DirCounts::from_pairs(&[(Dir::E, 50), (Dir::NE, 50)]);
        assert_eq!(orientation_code(&boundary, Compass::N).unwrap(), 2);
        assert!(matches!(orientation_code(&DirCounts::default(), Compass::N), Err(Error::ZeroCounts)));
        let cancel = DirCounts::from_pairs(&[(Dir::E, 3), (Dir::W, 3), (Dir::S, 1), (Dir::N, 1)]);
        assert_eq!(orientation_code(&cancel, Compass::N).unwrap(), 2);
    }

    /// Vector oracle: rotate every unit step explicitly, sum, bin by atan2.
    fn code_oracle(c: &DirCounts, o: Compass) -> u8 {
        let rot = o.quarter_turns() as f64 * 90.0;
        let (mut e, mut n) = (0.0, 0.0);
        for d in Dir::ALL {
            let ang = (d.code() as f64 * 45.0 + rot).to_radians();
            e += c.get(d) as f64 * ang.sin();
            n += c.get(d) as f64 * ang.cos();
        }
        let deg = e.atan2(n).to_degrees().rem_euclid(360.0);
        let t = deg / 45.0;
        let r = if ((t - t.floor()) - 0.5).abs() < 1e-7 {
            let lo = t.floor() as i64;
            if lo % 2 == 0 { lo } else { lo + 1 }
        } else {
            t.round() as i64
        };
        r.rem_euclid(8) as u8
    }

    fn counts_strategy() -> impl Strategy<Value = DirCounts> {
        proptest::array::uniform8(0u32..40).prop_filter("nonzero", |a| a.iter().sum::<u32>() > 0).prop_map(DirCounts)
    }

    fn compass_strategy() -> impl Strategy<Value = Compass> {
        prop_oneof![Just(Compass::N), Just(Compass::E), Just(Compass::S), Just(Compass::W)]
    }

    proptest! {
        #[test]
        fn code_matches_vector_oracle(c in counts_strategy(), o in compass_strategy()) {
            let (mut e, mut n) = (0.0f64, 0.0f64);
            for d in Dir::ALL {
                let (ue, un) = d.unit();
                e += c.get(d) as f64 * ue;
                n += c.get(d) as f64 * un;
            }
            prop_assume!(e.hypot(n) > 1e-6);
            prop_assert_eq!(orientation_code(&c, o).unwrap(), code_oracle(&c, o));
        }

        #[test]
        fn code_is_scale_invariant(c in counts_strategy(), k in 1u32..20, o in compass_strategy()) {
            prop_assert_eq!(orientation_code(&c, o).unwrap(), orientation_code(&c.scaled(k), o).unwrap());
        }

        #[test]
        fn reversal_maps_code_to_opposite(c in counts_strategy(), o in compass_strategy()) {
            let (mut e, mut n) = (0.0f64, 0.0f64);
            for d in Dir::ALL {
                let (ue, un) = d.unit();
                e += c.get(d) as f64 * ue;
                n += c.get(d) as f64 * un;
            }
            prop_assume!(e.hypot(n) > 1e-6);
            let c1 = orientation_code(&c, o).unwrap();
            let c2 = orientation_code(&c.reversed(), o).unwrap();
            prop_assert_eq!(c2, (c1 + 4) % 8);
            prop_assert_eq!(c.reversed().reversed(), c);
        }
    }

    #[test]
    fn dir_counts_json_uses_character_keys() {
        let c = DirCounts::from_pairs(&[(Dir::E, 3), (Dir::SW, 1)]);
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["E"], 3);
        assert_eq!(v["SW"], 1);
        assert_eq!(v["N"], 0);
        let back: DirCounts = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    fn bar(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> IndoorPath {
        IndoorPath::from_mask(BinaryImage::from_fn(w, h, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1))
    }

    #[test]
    fn straight_corridor_skeleton() {
        let skel = skeletonize(&bar(60, 9, 5, 2, 54, 6)).unwrap();
        assert_eq!(skel.endpoints.len(), 2);
        assert!(skel.junctions.is_empty());
        for (x, y) in skel.mask.foreground() {
            assert!(skel.mask.neighbor_count(x, y) <= 2);
        }
    }

    #[test]
    fn plus_corridor_has_one_junction_cluster() {
        let mask = BinaryImage::from_fn(61, 61, |x, y| {
            ((28..=32).contains(&x) && (5..=55).contains(&y)) || ((28..=32).contains(&y) && (5..=55).contains(&x))
        });
        let path = IndoorPath::from_mask(mask);
        let skel = skeletonize(&path).unwrap();
        let clearance = crate::imagecore::distance_transform(&path.mask.invert());
        let skel = prune_spurs(&skel, &clearance, 2.0);
        assert_eq!(skel.junction_clusters().len(), 1);
        let nodes = find_intersections(&skel, 0);
        assert_eq!(nodes.len(), 1);
        assert!((nodes[0].x as i64 - 30).abs() <= 1 && (nodes[0].y as i64 - 30).abs() <= 1);
    }

    #[test]
    fn disconnected_corridors_keep_two_components() {
        let mask = BinaryImage::from_fn(60, 30, |x, y| (5..=54).contains(&x) && ((3..=7).contains(&y) || (20..=24).contains(&y)));
        let skel = skeletonize(&IndoorPath::from_mask(mask)).unwrap();
        assert_eq!(component_count(&skel.mask, Connectivity::Eight), 2);
    }

    #[test]
    fn empty_path_is_rejected() {
        assert!(matches!(skeletonize(&IndoorPath::from_mask(BinaryImage::new(4, 4))), Err(Error::EmptyPath)));
    }

    #[test]
    fn pruning_removes_corner_stub_but_keeps_long_branch() {
        // Horizontal line with a 2-px stub and a 20-px branch.
        let mut px: Vec<[u32; 2]> = (2..40).map(|x| [x, 20]).collect();
        px.extend([[10, 19], [10, 18]]);
        px.extend((21..41).map(|y| [30, y]));
        let skel = line_skeleton(45, 45, &px);
        let clearance = vec![1.0; 45 * 45];
        let pruned = prune_spurs(&skel, &clearance, 2.0);
        assert!(!pruned.mask.get(10, 18));
        assert!(pruned.mask.get(30, 40));
        assert!(pruned.mask.get(2, 20) && pruned.mask.get(39, 20));
        assert_eq!(component_count(&pruned.mask, Connectivity::Eight), 1);
    }

    #[test]
    fn snapping_and_tie_break() {
        let px: Vec<[u32; 2]> = (0..20).map(|x| [x, 10]).collect();
        let skel = line_skeleton(20, 21, &px);
        let on = map_to_skeleton(&[SnapInput { x: 7.0, y: 10.0, block_class: None }], &skel, 0).unwrap();
        assert_eq!(on[0].pixel(), [7, 10]);
        // Two vertical lines 10 px apart, candidate midway: distance 5 each.
        let mut px: Vec<[u32; 2]> = (0..20).map(|y| [2, y]).collect();
        px.extend((0..20).map(|y| [12, y]));
        let skel = line_skeleton(20, 20, &px);
        let n = map_to_skeleton(&[SnapInput { x: 7.0, y: 9.0, block_class: Some("door".into()) }], &skel, 4).unwrap();
        let oracle = skel
            .mask
            .foreground()
            .min_by_key(|&(x, y)| ((x as i64 - 7).pow(2) + (y as i64 - 9).pow(2), y, x))
            .unwrap();
        assert_eq!(n[0].pixel(), [oracle.0 as u32, oracle.1 as u32]);
        assert_eq!(n[0].pixel(), [2, 9]);
        assert_eq!(n[0].id, 4);
        assert_eq!(n[0].kind, NodeKind::Poi);
        assert_eq!(n[0].block_class.as_deref(), Some("door"));
    }

    #[test]
    fn intersections_for_t_and_h() {
        // T: horizontal bar with a stem.
        let mut t: Vec<[u32; 2]> = (0..21).map(|x| [x, 5]).collect();
        t.extend((6..20).map(|y| [10, y]));
        assert_eq!(find_intersections(&line_skeleton(21, 21, &t), 0).len(), 1);
        // H: two verticals joined by a horizontal.
        let mut h: Vec<[u32; 2]> = (0..21).map(|y| [2, y]).collect();
        h.extend((0..21).map(|y| [18, y]));
        h.extend((3..18).map(|x| [x, 10]));
        let nodes = find_intersections(&line_skeleton(21, 21, &h), 0);
        assert_eq!(nodes.len(), 2);
        assert!(find_intersections(&line_skeleton(21, 21, &(0..21).map(|x| [x, 3]).collect::<Vec<_>>()), 0).is_empty());
    }

    #[test]
    fn straight_edge() {
        let px: Vec<[u32; 2]> = (0..100).map(|x| [x, 3]).collect();
        let skel = line_skeleton(100, 7, &px);
        let nodes = vec![BeaconNode::new(0, 0, 3, NodeKind::Poi), BeaconNode::new(1, 99, 3, NodeKind::Poi)];
        let edges = trace_edges(&skel, &nodes, Compass::N, &levels(100, 7)).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].steps(), 99);
        assert_eq!(edges[0].dir_counts, DirCounts::from_pairs(&[(Dir::E, 99)]));
        assert_eq!(edges[0].pixel_length, 99.0);
        assert_eq!(edges[0].code, 2);
    }

    #[test]
    fn diagonal_edge() {
        let px: Vec<[u32; 2]> = (0..=50).map(|i| [i, 50 - i]).collect();
        let skel = line_skeleton(51, 51, &px);
        let nodes = vec![BeaconNode::new(0, 0, 50, NodeKind::Poi), BeaconNode::new(1, 50, 0, NodeKind::Poi)];
        let edges = trace_edges(&skel, &nodes, Compass::N, &levels(51, 51)).unwrap();
        assert!((edges[0].pixel_length - 50.0 * std::f64::consts::SQRT_2).abs() < 1e-6);
        assert_eq!(edges[0].dir_counts, DirCounts::from_pairs(&[(Dir::NE, 50)]));
        assert_eq!(edges[0].dir_string().split(' ').count(), 50);
    }

    #[test]
    fn plus_with_five_nodes_gives_four_edges() {
        let mut px: Vec<[u32; 2]> = (0..41).map(|x| [x, 20]).collect();
        px.extend((0..41).filter(|&y| y != 20).map(|y| [20, y]));
        let skel = line_skeleton(41, 41, &px);
        let mut nodes = find_intersections(&skel, 0);
        assert_eq!(nodes.len(), 1);
        for (i, &[x, y]) in skel.endpoints.iter().enumerate() {
            nodes.push(BeaconNode::new(1 + i as u32, x, y, NodeKind::Poi));
        }
        let edges = trace_edges(&skel, &nodes, Compass::N, &levels(41, 41)).unwrap();
        assert_eq!(edges.len(), 4);
        assert!(edges.iter().all(|e| e.touches(nodes[0].id)));
        assert!(edges.iter().all(|e| e.pixel_length == 20.0));
    }

    #[test]
    fn no_edge_passes_through_a_third_node() {
        let px: Vec<[u32; 2]> = (0..30).map(|x| [x, 1]).collect();
        let skel = line_skeleton(30, 3, &px);
        let nodes = vec![
            BeaconNode::new(0, 0, 1, NodeKind::Poi),
            BeaconNode::new(1, 15, 1, NodeKind::Spacer),
            BeaconNode::new(2, 29, 1, NodeKind::Poi),
        ];
        let edges = trace_edges(&skel, &nodes, Compass::N, &levels(30, 3)).unwrap();
        let pairs: Vec<(u32, u32)> = edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn off_skeleton_and_duplicate_nodes_are_rejected() {
        let px: Vec<[u32; 2]> = (0..10).map(|x| [x, 1]).collect();
        let skel = line_skeleton(10, 3, &px);
        let off = vec![BeaconNode::new(7, 3, 0, NodeKind::Poi)];
        assert!(matches!(
            trace_edges(&skel, &off, Compass::N, &levels(10, 3)),
            Err(Error::NodeOffSkeleton { id: 7, .. })
        ));
        let dup = vec![BeaconNode::new(0, 3, 1, NodeKind::Poi), BeaconNode::new(1, 3, 1, NodeKind::Poi)];
        assert!(trace_edges(&skel, &dup, Compass::N, &levels(10, 3)).is_err());
    }

    #[test]
    fn zone_level_is_recorded_on_edges() {
        use crate::pathfind::Zone;
        let px: Vec<[u32; 2]> = (0..40).map(|x| [x, 5]).collect();
        let skel = line_skeleton(40, 10, &px);
        let lv = ZoneLevels::new(40, 10, &[Zone::rect(10.0, 0.0, 20.0, 10.0, 1)], 2);
        let nodes = vec![
            BeaconNode::new(0, 0, 5, NodeKind::Poi),
            BeaconNode::new(1, 25, 5, NodeKind::Poi),
            BeaconNode::new(2, 39, 5, NodeKind::Poi),
        ];
        let edges = trace_edges(&skel, &nodes, Compass::N, &lv).unwrap();
        assert_eq!(edges[0].max_zone_level, 1);
        assert_eq!(edges[1].max_zone_level, 0);
    }

    #[test]
    fn spacers_split_edges_and_conserve_counts() {
        // 250 px at 200 dpi, 1/16 scale: 20 ft.
        let px: Vec<[u32; 2]> = (0..251).map(|x| [x, 2]).collect();
        let skel = line_skeleton(251, 5, &px);
        let nodes = vec![BeaconNode::new(0, 0, 2, NodeKind::Poi), BeaconNode::new(1, 250, 2, NodeKind::Poi)];
        let g = graph_from(&skel, nodes, 200.0, 1.0 / 16.0);
        assert!((g.edges[0].physical_length - 20.0).abs() < 1e-9);

        let lv = levels(251, 5);
        let one = insert_spacers(&g, 10.0, &lv).unwrap();
        assert_eq!(one.nodes.len(), 3);
        let spacer = one.nodes.iter().find(|n| n.kind == NodeKind::Spacer).unwrap();
        assert_eq!(spacer.pixel(), [125, 2]);
        assert!(one.edges.iter().all(|e| (e.physical_length - 10.0).abs() < 1e-9));

        let two = insert_spacers(&g, 8.0, &lv).unwrap();
        assert_eq!(two.nodes.len(), 4);
        let total: f64 = two.edges.iter().map(|e| e.pixel_length).sum();
        assert!((total - 250.0).abs() < 1e-9);
        // Walk the sub-edges in the parent's direction.
        let counts = two.edges.iter().fold(DirCounts::default(), |acc, e| {
            let forward = e.path[0][0] < e.path[e.path.len() - 1][0];
            acc.merged(&if forward { e.dir_counts } else { e.dir_counts.reversed() })
        });
        assert_eq!(counts, g.edges[0].dir_counts);
        assert!(two.is_connected());

        let none = insert_spacers(&g, 25.0, &lv).unwrap();
        assert_eq!(none, g);
    }

    #[test]
    fn spacers_need_dpi() {
        let g = ConnectivityGraph::new(Compass::N, 1.0 / 16.0, None);
        assert!(matches!(insert_spacers(&g, 10.0, &levels(1, 1)), Err(Error::MissingDpi)));
    }

    fn two_doors(distance_m: f64) -> (ConnectivityGraph, ZoneLevels) {
        // 200 dpi, 1/16 scale: 12.5 px per foot.
        let px_per_m = 12.5 / METERS_PER_FOOT;
        let gap = (distance_m * px_per_m).round() as u32;
        let len = gap + 80;
        let px: Vec<[u32; 2]> = (0..len).map(|x| [x, 2]).collect();
        let skel = line_skeleton(len as usize, 5, &px);
        let mut a = BeaconNode::new(1, 40, 2, NodeKind::Poi);
        a.label = "Door 1".into();
        let mut b = BeaconNode::new(2, 40 + gap, 2, NodeKind::Poi);
        b.label = "Door 2".into();
        let nodes = vec![BeaconNode::new(0, 0, 2, NodeKind::Intersection), a, b, BeaconNode::new(3, len - 1, 2, NodeKind::Intersection)];
        (graph_from(&skel, nodes, 200.0, 1.0 / 16.0), levels(len as usize, 5))
    }

    #[test]
    fn merge_within_two_meters() {
        let (g, lv) = two_doors(1.5);
        let merged = merge_close(&g, 2.0, &lv).unwrap();
        assert_eq!(merged.nodes.len(), 3);
        let poi = merged.nodes.iter().find(|n| n.kind == NodeKind::Poi).unwrap();
        assert_eq!(poi.label, "Door 1 / Door 2");
        let gap = (1.5 * 12.5 / METERS_PER_FOOT).round() as u32;
        assert!((poi.x as i64 - (40 + gap / 2) as i64).abs() <= 1);
        assert!(merged.is_connected());
        assert_eq!(merged.edges.len(), 2);
        let total: f64 = merged.edges.iter().map(|e| e.pixel_length).sum();
        let before: f64 = g.edges.iter().map(|e| e.pixel_length).sum();
        assert!((total - before).abs() < 1e-9);
        assert_eq!(merge_close(&merged, 2.0, &lv).unwrap(), merged);
    }

    #[test]
    fn no_merge_beyond_two_meters() {
        let (g, lv) = two_doors(2.5);
        let merged = merge_close(&g, 2.0, &lv).unwrap();
        assert_eq!(merged.nodes.len(), 4);
        assert_eq!(merged, g);
    }

    #[test]
    fn same_pixel_duplicates_collapse() {
        let px: Vec<[u32; 2]> = (0..20).map(|x| [x, 1]).collect();
        let skel = line_skeleton(20, 3, &px);
        let mut g = graph_from(&skel, vec![BeaconNode::new(0, 0, 1, NodeKind::Poi), BeaconNode::new(1, 19, 1, NodeKind::Poi)], 200.0, 1.0 / 16.0);
        g.nodes.push(BeaconNode::new(2, 19, 1, NodeKind::Intersection));
        let merged = merge_close(&g, 0.0, &levels(20, 3)).unwrap();
        assert_eq!(merged.nodes.len(), 2);
        assert_eq!(merged.nodes[1].kind, NodeKind::Poi);
    }

    #[test]
    fn reversed_edge_swaps_characters() {
        let px: Vec<[u32; 2]> = vec![[0, 5], [1, 5], [2, 4], [3, 3], [3, 2]];
        let skel = line_skeleton(6, 6, &px);
        let nodes = vec![BeaconNode::new(0, 0, 5, NodeKind::Poi), BeaconNode::new(1, 3, 2, NodeKind::Poi)];
        let e = &trace_edges(&skel, &nodes, Compass::N, &levels(6, 6)).unwrap()[0];
        let r = e.reversed(Compass::N);
        assert_eq!(r.dir_counts.get(Dir::W), e.dir_counts.get(Dir::E));
        assert_eq!(r.dir_counts.get(Dir::SW), e.dir_counts.get(Dir::NE));
        assert_eq!(r.dir_counts.get(Dir::S), e.dir_counts.get(Dir::N));
        assert_eq!(r.code, (e.code + 4) % 8);
        assert_eq!(r.reversed(Compass::N), *e);
    }
}

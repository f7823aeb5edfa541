//! Raster data model and low-level image operations.
//!
//! Foreground is always the dark (ink) class. Free space, the walkable area
//! of a plan, is the complement of the foreground.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution in pixels per inch along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dpi {
    pub x: f64,
    pub y: f64,
}

impl Dpi {
    pub fn uniform(dpi: f64) -> Self {
        Self { x: dpi, y: dpi }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.x > 0.0 && self.y > 0.0
    }
}

/// 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub dpi: Option<Dpi>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("{width}x{height} image is empty")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels, dpi: None })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn with_dpi(mut self, dpi: Dpi) -> Self {
        self.dpi = Some(dpi);
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel lookup with coordinates clamped to the image border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    /// Bilinear sample at a real-valued position, clamped at the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi) as f64;
        let p10 = self.get_clamped(xi + 1, yi) as f64;
        let p01 = self.get_clamped(xi, yi + 1) as f64;
        let p11 = self.get_clamped(xi + 1, yi + 1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    /// Loads any supported raster file and converts it to luminance.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?;
        Self::from_dynamic(&img)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?;
        Self::from_dynamic(&img)
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self> {
        let gray = img.to_luma8();
        let (w, h) = gray.dimensions();
        Self::new(w as usize, h as usize, gray.into_raw())
    }

    pub fn to_gray_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length matches dimensions")
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_gray_image().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    /// Resamples to the given size with bilinear interpolation.
    pub fn resize(&self, width: usize, height: usize) -> Result<Self> {
        let sx = self.width as f64 / width.max(1) as f64;
        let sy = self.height as f64 / height.max(1) as f64;
        let mut out = Self::from_fn(width, height, |x, y| {
            let v = self.sample_bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5);
            v.round().clamp(0.0, 255.0) as u8
        })?;
        out.dpi = self.dpi.map(|d| Dpi { x: d.x / sx, y: d.y / sy });
        Ok(out)
    }

    /// Area-averaging reduction by an integer factor.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        let factor = factor.max(1);
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        let mut out = Self::from_fn(w, h, |x, y| {
            let mut sum = 0u32;
            let mut n = 0u32;
            for yy in y * factor..((y + 1) * factor).min(self.height) {
                for xx in x * factor..((x + 1) * factor).min(self.width) {
                    sum += self.get(xx, yy) as u32;
                    n += 1;
                }
            }
            ((sum + n / 2) / n) as u8
        })?;
        out.dpi = self.dpi.map(|d| Dpi { x: d.x / factor as f64, y: d.y / factor as f64 });
        Ok(out)
    }

    /// Rotates clockwise by `quarter_turns` × 90°.
    pub fn rotate90(&self, quarter_turns: u8) -> Self {
        let mut cur = self.clone();
        for _ in 0..quarter_turns % 4 {
            let (w, h) = (cur.width, cur.height);
            let mut pixels = vec![0u8; w * h];
            for y in 0..h {
                for x in 0..w {
                    // (x, y) -> (h - 1 - y, x) in a h-wide image
                    pixels[x * h + (h - 1 - y)] = cur.pixels[y * w + x];
                }
            }
            cur = Self { width: h, height: w, pixels, dpi: cur.dpi.map(|d| Dpi { x: d.y, y: d.x }) };
        }
        cur
    }

    /// Mirrors left-right.
    pub fn mirror(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.pixels[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// Boolean raster; `true` marks foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} bits supplied for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    /// Parses an ASCII-art mask; `#` and `1` are foreground.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        Self::from_fn(width, height, |x, y| {
            matches!(rows[y].as_bytes().get(x), Some(b'#') | Some(b'1'))
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }

    pub fn invert(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Number of foreground pixels among the 8 neighbours.
    pub fn neighbor_count(&self, x: usize, y: usize) -> usize {
        let mut n = 0;
        for (dx, dy) in NEIGHBORS8 {
            if self.get_or_false(x as isize + dx, y as isize + dy) {
                n += 1;
            }
        }
        n
    }

    /// Ink rendering: foreground black on white.
    pub fn to_raster(&self) -> RasterImage {
        RasterImage::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 0 } else { 255 }).collect(),
        )
        .expect("mask dimensions are nonzero")
    }

    /// Mask rendering: foreground white on black.
    pub fn to_mask_raster(&self) -> RasterImage {
        RasterImage::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        )
        .expect("mask dimensions are nonzero")
    }

    pub fn from_mask_raster(img: &RasterImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().iter().map(|&v| v >= 128).collect(),
        }
    }
}

/// 8-neighbour offsets, counter-clockwise from east (image y grows down).
pub const NEIGHBORS8: [(isize, isize); 8] =
    [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

const NEIGHBORS4: [(isize, isize); 4] = [(1, 0), (0, -1), (-1, 0), (0, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Pixels strictly darker than the level are foreground.
    Fixed(u8),
    /// Otsu's between-class variance maximiser.
    Otsu,
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Fixed(128)
    }
}

/// Otsu level: pixels `< level` are the dark class.
pub fn otsu_level(img: &RasterImage) -> u8 {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut best = (f64::MIN, 128u8);
    let mut w_dark = 0.0;
    let mut sum_dark = 0.0;
    // candidate level t: dark class = values < t
    for t in 1..256usize {
        w_dark += hist[t - 1] as f64;
        sum_dark += (t - 1) as f64 * hist[t - 1] as f64;
        let w_light = total - w_dark;
        if w_dark == 0.0 || w_light == 0.0 {
            continue;
        }
        let mu_d = sum_dark / w_dark;
        let mu_l = (sum_all - sum_dark) / w_light;
        let between = w_dark * w_light * (mu_d - mu_l) * (mu_d - mu_l);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    best.1
}

pub fn binarize(img: &RasterImage, threshold: Threshold) -> BinaryImage {
    let level = match threshold {
        Threshold::Fixed(t) => t,
        Threshold::Otsu => otsu_level(img),
    };
    BinaryImage {
        width: img.width(),
        height: img.height(),
        bits: img.pixels().iter().map(|&p| p < level).collect(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &NEIGHBORS4,
            Connectivity::Eight => &NEIGHBORS8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Foreground,
    FreeSpace,
}

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    fn point(x: usize, y: usize) -> Self {
        Self { x0: x, y0: y, x1: x, y1: y }
    }

    fn include(&mut self, x: usize, y: usize) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionStats {
    pub label: u32,
    pub area: usize,
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    pub regions: Vec<RegionStats>,
}

impl LabelImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region(&self, label: u32) -> Option<&RegionStats> {
        self.regions.get(label.checked_sub(1)? as usize).filter(|r| r.label == label)
    }

    pub fn mask(&self, label: u32) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Whether the region touches the outer frame of the image.
    pub fn touches_border(&self, label: u32) -> bool {
        self.region(label).is_some_and(|r| {
            r.bbox.x0 == 0 || r.bbox.y0 == 0 || r.bbox.x1 + 1 == self.width || r.bbox.y1 + 1 == self.height
        })
    }
}

/// Labels connected components of the selected pixel class. Labels start at
/// 1 and follow raster order of each component's first pixel.
pub fn label_regions(bin: &BinaryImage, target: Target, connectivity: Connectivity) -> LabelImage {
    let (w, h) = (bin.width, bin.height);
    let want = matches!(target, Target::Foreground);
    let mut labels = vec![0u32; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    let offsets = connectivity.offsets();

    for start in 0..w * h {
        if bin.bits[start] != want || labels[start] != 0 {
            continue;
        }
        let label = regions.len() as u32 + 1;
        let mut stats = RegionStats { label, area: 0, bbox: BoundingBox::point(start % w, start / w) };
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            stats.area += 1;
            stats.bbox.include(x, y);
            for &(dx, dy) in offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bin.bits[j] == want && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        regions.push(stats);
    }
    LabelImage { width: w, height: h, labels, regions }
}

/// Number of connected components of the foreground.
pub fn component_count(bin: &BinaryImage, connectivity: Connectivity) -> usize {
    label_regions(bin, Target::Foreground, connectivity).regions.len()
}

/// Dilation with a (2r+1)×(2r+1) square structuring element.
pub fn dilate(bin: &BinaryImage, radius: usize) -> BinaryImage {
    if radius == 0 {
        return bin.clone();
    }
    let (w, h) = (bin.width, bin.height);
    // separable: a square element is the product of two line segments
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &bin.bits[y * w..(y + 1) * w];
        let mut count = 0usize;
        // sliding window [x - r, x + r]
        for x in 0..radius.min(w) {
            count += row[x] as usize;
        }
        for x in 0..w {
            if x + radius < w {
                count += row[x + radius] as usize;
            }
            if x > radius {
                count -= row[x - radius - 1] as usize;
            }
            horiz[y * w + x] = count > 0;
        }
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        let mut count = 0usize;
        for y in 0..radius.min(h) {
            count += horiz[y * w + x] as usize;
        }
        for y in 0..h {
            if y + radius < h {
                count += horiz[(y + radius) * w + x] as usize;
            }
            if y > radius {
                count -= horiz[(y - radius - 1) * w + x] as usize;
            }
            bits[y * w + x] = count > 0;
        }
    }
    BinaryImage { width: w, height: h, bits }
}

/// 8-bit code of the 3×3 neighbourhood, bit k set when `NEIGHBORS8[k]` is foreground.
#[inline]
fn neighborhood_code(bits: &[bool], w: usize, h: usize, i: usize) -> u8 {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    let mut code = 0u8;
    for (k, (dx, dy)) in NEIGHBORS8.iter().enumerate() {
        let nx = x + dx;
        let ny = y + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && bits[ny as usize * w + nx as usize] {
            code |= 1 << k;
        }
    }
    code
}

/// Simple-point table for (8, 4) topology: deleting the centre keeps one
/// 8-connected foreground component in the ring and one 4-connected
/// background component adjacent to the centre.
fn simple_table() -> &'static [bool; 256] {
    static TABLE: OnceLock<[bool; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [false; 256];
        for (code, slot) in table.iter_mut().enumerate() {
            let fg = |k: usize| code & (1 << k) != 0;
            let count = |want: bool, four: bool, need_center_adjacent: bool| {
                let mut seen = [false; 8];
                let mut comps = 0;
                for s in 0..8 {
                    if fg(s) != want || seen[s] {
                        continue;
                    }
                    let mut stack = vec![s];
                    seen[s] = true;
                    let mut touches = false;
                    while let Some(a) = stack.pop() {
                        let (ax, ay) = NEIGHBORS8[a];
                        touches |= ax == 0 || ay == 0;
                        for b in 0..8 {
                            if seen[b] || fg(b) != want {
                                continue;
                            }
                            let (bx, by) = NEIGHBORS8[b];
                            let (ddx, ddy) = ((ax - bx).abs(), (ay - by).abs());
                            let adjacent = if four { ddx + ddy == 1 } else { ddx.max(ddy) == 1 };
                            if adjacent {
                                seen[b] = true;
                                stack.push(b);
                            }
                        }
                    }
                    if !need_center_adjacent || touches {
                        comps += 1;
                    }
                }
                comps
            };
            *slot = count(true, false, false) == 1 && count(false, true, true) == 1;
        }
        table
    })
}

/// Whether the centre pixel with this neighbourhood code can be removed
/// without changing topology and without shortening a line end.
#[inline]
fn deletable(code: u8) -> bool {
    code.count_ones() >= 2 && simple_table()[code as usize]
}

/// Whether a pixel of a thinned mask could still be removed.
pub fn is_deletable(bin: &BinaryImage, x: usize, y: usize) -> bool {
    bin.get(x, y) && deletable(neighborhood_code(&bin.bits, bin.width, bin.height, y * bin.width + x))
}

/// Connectivity-preserving thinning to a one-pixel-wide medial line.
///
/// Border pixels are peeled in four directional sub-passes (N, S, E, W).
/// Each sub-pass collects its candidates first, then deletes them one at a
/// time with the simple-point test re-evaluated against the current mask,
/// which keeps every deletion topology-preserving. Line ends (pixels with a
/// single neighbour) are kept. Iterates to a fixed point, so the result is
/// idempotent.
pub fn thin(bin: &BinaryImage) -> BinaryImage {
    let (w, h) = (bin.width, bin.height);
    let mut bits = bin.bits.clone();
    let mut in_border = vec![false; w * h];
    let mut border = Vec::new();

    let bg4 = |bits: &[bool], i: usize, dir: (isize, isize)| -> bool {
        let nx = (i % w) as isize + dir.0;
        let ny = (i / w) as isize + dir.1;
        nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize || !bits[ny as usize * w + nx as usize]
    };

    for i in 0..w * h {
        if bits[i] && NEIGHBORS4.iter().any(|&d| bg4(&bits, i, d)) {
            in_border[i] = true;
            border.push(i);
        }
    }

    let directions = [(0isize, -1isize), (0, 1), (1, 0), (-1, 0)];
    loop {
        let mut changed = false;
        for dir in directions {
            let mut candidates: Vec<usize> = border
                .iter()
                .copied()
                .filter(|&i| bits[i] && bg4(&bits, i, dir) && deletable(neighborhood_code(&bits, w, h, i)))
                .collect();
            candidates.sort_unstable();
            for i in candidates {
                if !deletable(neighborhood_code(&bits, w, h, i)) {
                    continue;
                }
                bits[i] = false;
                changed = true;
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for (dx, dy) in NEIGHBORS4 {
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if bits[j] && !in_border[j] {
                        in_border[j] = true;
                        border.push(j);
                    }
                }
            }
            border.retain(|&i| {
                let keep = bits[i];
                if !keep {
                    in_border[i] = false;
                }
                keep
            });
        }
        if !changed {
            break;
        }
    }
    BinaryImage { width: w, height: h, bits }
}

/// Euclidean distance from every pixel to the nearest foreground pixel
/// (exact, separable lower-envelope transform). Pixels of an image with no
/// foreground get `f64::INFINITY`.
pub fn distance_transform(bin: &BinaryImage) -> Vec<f64> {
    let (w, h) = (bin.width, bin.height);
    const INF: f64 = 1e20;
    let mut grid: Vec<f64> = bin.bits.iter().map(|&b| if b { 0.0 } else { INF }).collect();
    let mut f = vec![0.0; w.max(h)];
    let mut d = vec![0.0; w.max(h)];
    let mut v = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    grid.into_iter().map(|sq| if sq >= INF / 2.0 { f64::INFINITY } else { sq.sqrt() }).collect()
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let intersect = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

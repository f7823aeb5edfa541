//! Building-block detection: Shi-Tomasi corner features and feature-guided
//! template matching with a mean-removed sum of squared differences.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{distance_transform, RasterImage};
use crate::pathfind::IndoorPath;

/// A symbol from the building-block library.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub id: String,
    pub kind: String,
    pub patch: RasterImage,
    pub group: u32,
    /// Typical symbol size (larger side) in drawing inches.
    pub physical_hint: Option<f64>,
}

impl Template {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, patch: RasterImage) -> Self {
        Self { id: id.into(), kind: kind.into(), patch, group: 0, physical_hint: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.trim().is_empty() {
            return Err(Error::InvalidTemplate(format!("template {} has a blank kind", self.id)));
        }
        if self.patch.pixels().iter().all(|&p| p == self.patch.pixels()[0]) {
            return Err(Error::InvalidTemplate(format!("template {} has no contrast", self.id)));
        }
        Ok(())
    }

    /// Side lengths at scale 1 for the given plan resolution.
    pub fn base_size(&self, dpi: Option<f64>) -> (usize, usize) {
        let (w, h) = (self.patch.width(), self.patch.height());
        match (self.physical_hint, dpi) {
            (Some(hint), Some(dpi)) if hint > 0.0 && dpi > 0.0 => {
                let f = hint * dpi / w.max(h) as f64;
                (((w as f64 * f).round() as usize).max(3), ((h as f64 * f).round() as usize).max(3))
            }
            _ => (w, h),
        }
    }

    /// Door symbols swing either way, so they are also matched mirrored.
    pub fn mirrored_variants(&self) -> bool {
        self.kind.eq_ignore_ascii_case("door")
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    kind: String,
    #[serde(default)]
    group: u32,
    #[serde(default)]
    physical_hint: Option<f64>,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct TemplateManifest {
    templates: Vec<ManifestEntry>,
}

/// Reads a template directory: `manifest.json` plus one image per entry.
pub fn load_templates(dir: impl AsRef<Path>) -> Result<Vec<Template>> {
    let dir = dir.as_ref();
    let manifest: TemplateManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let mut out = Vec::with_capacity(manifest.templates.len());
    for e in manifest.templates {
        let t = Template {
            patch: RasterImage::load(dir.join(&e.file))?,
            id: e.id,
            kind: e.kind,
            group: e.group,
            physical_hint: e.physical_hint,
        };
        t.validate()?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::EmptyTemplates);
    }
    Ok(out)
}

pub fn save_templates(dir: impl AsRef<Path>, templates: &[Template]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for t in templates {
        let file = format!("{}.png", t.id);
        t.patch.save_png(dir.join(&file))?;
        entries.push(ManifestEntry {
            id: t.id.clone(),
            kind: t.kind.clone(),
            group: t.group,
            physical_hint: t.physical_hint,
            file,
        });
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&TemplateManifest { templates: entries })?)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub x: u32,
    pub y: u32,
    /// Minimum eigenvalue of the local structure tensor.
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "FDM")]
    Fdm,
    #[serde(rename = "FDM+SML")]
    FdmSml,
    #[serde(rename = "FD+SML")]
    FdSml,
}

/// A detected building-block site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub x: u32,
    pub y: u32,
    pub kind: String,
    /// Match distance, lower is better.
    pub score: f64,
    pub source: Source,
    /// Larger side of the matched template variant in pixels.
    pub size: u32,
    pub template: String,
}

const WINDOW: isize = 2;

/// Minimum-eigenvalue corner response with 3×3 Sobel gradients and a 5×5
/// structure-tensor window. Borders are replicated.
pub fn corner_response(img: &RasterImage) -> Vec<f32> {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let at = |x: isize, y: isize| -> i32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        px[y * w + x] as i32
    };
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }

    // Horizontal window sums of the three tensor products for one row.
    let hsum = |y: usize| -> [Vec<i64>; 3] {
        let mut out = [vec![0i64; w], vec![0i64; w], vec![0i64; w]];
        for x in 0..w as isize {
            let (mut a, mut b, mut c) = (0i64, 0i64, 0i64);
            for d in -WINDOW..=WINDOW {
                let i = y * w + (x + d).clamp(0, w as isize - 1) as usize;
                let (u, v) = (gx[i] as i64, gy[i] as i64);
                a += u * u;
                b += u * v;
                c += v * v;
            }
            out[0][x as usize] = a;
            out[1][x as usize] = b;
            out[2][x as usize] = c;
        }
        out
    };

    let mut rows: HashMap<usize, [Vec<i64>; 3]> = HashMap::new();
    let mut response = vec![0f32; w * h];
    for y in 0..h as isize {
        let needed: Vec<usize> = (-WINDOW..=WINDOW).map(|d| (y + d).clamp(0, h as isize - 1) as usize).collect();
        rows.retain(|r, _| needed.contains(r));
        for &r in &needed {
            rows.entry(r).or_insert_with(|| hsum(r));
        }
        for x in 0..w {
            let (mut a, mut b, mut c) = (0i64, 0i64, 0i64);
            for &r in &needed {
                let row = &rows[&r];
                a += row[0][x];
                b += row[1][x];
                c += row[2][x];
            }
            let (a, b, c) = (a as f64, b as f64, c as f64);
            let lambda = (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt();
            response[y as usize * w + x] = lambda.max(0.0) as f32;
        }
    }
    response
}

/// Shi-Tomasi features: 3×3 local maxima of the corner response above
/// `quality` × the global maximum, thinned greedily so no two kept features
/// are closer than `min_spacing`. Sorted by descending score, then (y, x).
pub fn detect_features(img: &RasterImage, quality: f64, min_spacing: f64) -> Vec<FeaturePoint> {
    let (w, h) = (img.width(), img.height());
    let r = corner_response(img);
    let max = r.iter().copied().fold(0f32, f32::max) as f64;
    if max <= 0.0 {
        return Vec::new();
    }
    let threshold = quality * max;
    let mut peaks = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = r[y * w + x];
            if (v as f64) <= threshold || v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'n: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if r[ny as usize * w + nx as usize] > v {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                peaks.push(FeaturePoint { x: x as u32, y: y as u32, score: v as f64 });
            }
        }
    }
    peaks.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x)));
    space_out(peaks, min_spacing)
}

fn space_out(sorted: Vec<FeaturePoint>, min_spacing: f64) -> Vec<FeaturePoint> {
    if min_spacing <= 1.0 {
        return sorted;
    }
    let cell = min_spacing.ceil() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept: Vec<FeaturePoint> = Vec::new();
    let min2 = min_spacing * min_spacing;
    for f in sorted {
        let (cx, cy) = (f.x as i64 / cell, f.y as i64 / cell);
        let mut clear = true;
        'g: for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                for &k in grid.get(&(gx, gy)).map(|v| v.as_slice()).unwrap_or(&[]) {
                    let o = kept[k];
                    let d2 = (o.x as f64 - f.x as f64).powi(2) + (o.y as f64 - f.y as f64).powi(2);
                    if d2 < min2 {
                        clear = false;
                        break 'g;
                    }
                }
            }
        }
        if clear {
            grid.entry((cx, cy)).or_default().push(kept.len());
            kept.push(f);
        }
    }
    kept
}

/// Mean-removed sum of squared differences between equally sized patches.
pub fn ssd(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "patch sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = a.pixels().len() as i128;
    let (mut sd, mut sd2) = (0i128, 0i128);
    for (&p, &q) in a.pixels().iter().zip(b.pixels()) {
        let d = p as i128 - q as i128;
        sd += d;
        sd2 += d * d;
    }
    Ok((n * sd2 - sd * sd) as f64 / n as f64)
}

/// Matching parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Largest accepted normalised score (0 is a perfect match, a blank
    /// window scores 1).
    pub max_score: f64,
    /// Largest accepted descriptor distance when pairing an image feature
    /// with a template keypoint (unit-norm descriptors, range 0 to 4).
    pub descriptor_max: f64,
    /// Placement search radius around each hypothesis, in pixels.
    pub slack: u32,
    pub scales: Vec<f64>,
    pub max_keypoints: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { max_score: 0.5, descriptor_max: 0.8, slack: 1, scales: vec![0.75, 1.0, 1.25], max_keypoints: 16 }
    }
}

/// One oriented, scaled rendering of a template.
#[derive(Clone, Debug)]
pub struct Variant {
    pub template: String,
    pub kind: String,
    pub patch: RasterImage,
    pub rotation: u8,
    pub mirrored: bool,
    pub scale: f64,
    n: i64,
    sum_t: i64,
    sum_t2: i64,
    energy_n: i64,
    /// Non-white pixels as (x, y, value − 255).
    sparse: Vec<(u32, u32, i64)>,
    keypoints: Vec<(u32, u32, Vec<f32>)>,
}

impl Variant {
    pub fn new(template: &Template, patch: RasterImage, rotation: u8, mirrored: bool, scale: f64) -> Result<Self> {
        let px = patch.pixels();
        let n = px.len() as i64;
        let sum_t: i64 = px.iter().map(|&v| v as i64).sum();
        let sum_t2: i64 = px.iter().map(|&v| (v as i64).pow(2)).sum();
        let energy_n = n * sum_t2 - sum_t * sum_t;
        if energy_n <= 0 {
            return Err(Error::InvalidTemplate(format!("template {} has no contrast", template.id)));
        }
        let w = patch.width();
        let sparse = px
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 255)
            .map(|(i, &v)| ((i % w) as u32, (i / w) as u32, v as i64 - 255))
            .collect();
        let mut v = Self {
            template: template.id.clone(),
            kind: template.kind.clone(),
            patch,
            rotation,
            mirrored,
            scale,
            n,
            sum_t,
            sum_t2,
            energy_n,
            sparse,
            keypoints: Vec::new(),
        };
        v.keypoints = v.find_keypoints(usize::MAX);
        Ok(v)
    }

    pub fn width(&self) -> usize {
        self.patch.width()
    }

    pub fn height(&self) -> usize {
        self.patch.height()
    }

    pub fn size(&self) -> u32 {
        self.width().max(self.height()) as u32
    }

    fn find_keypoints(&self, limit: usize) -> Vec<(u32, u32, Vec<f32>)> {
        const PAD: usize = 6;
        let (w, h) = (self.width(), self.height());
        let padded = RasterImage::from_fn(w + 2 * PAD, h + 2 * PAD, |x, y| {
            if x >= PAD && y >= PAD && x < w + PAD && y < h + PAD {
                self.patch.get(x - PAD, y - PAD)
            } else {
                255
            }
        })
        .expect("padded size is nonzero");
        detect_features(&padded, 0.05, 2.0)
            .into_iter()
            .filter(|f| (f.x as usize) >= PAD && (f.y as usize) >= PAD && (f.x as usize) < w + PAD && (f.y as usize) < h + PAD)
            .filter_map(|f| descriptor(&padded, f.x, f.y).map(|d| (f.x - PAD as u32, f.y - PAD as u32, d)))
            .take(limit)
            .collect()
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoints.len()
    }

    /// Normalised score of this variant placed with its top-left corner at
    /// (x, y): mean-removed SSD divided by the template's own mean-removed
    /// energy. Exactly 0 for an identical window.
    pub fn score_at(&self, integral: &Integral, img: &RasterImage, x: usize, y: usize) -> f64 {
        let (w, h) = (self.width(), self.height());
        let (sum_i, sum_i2) = integral.window(x, y, w, h);
        let iw = img.width();
        let px = img.pixels();
        let mut cross = 0i64;
        for &(tx, ty, t) in &self.sparse {
            cross += px[(y + ty as usize) * iw + x + tx as usize] as i64 * t;
        }
        let sum_it = cross + 255 * sum_i;
        // n·SSD = n(ΣI² − 2ΣIT + ΣT²) − (ΣI − ΣT)²
        let ssd_n = self.n as i128 * (sum_i2 as i128 - 2 * sum_it as i128 + self.sum_t2 as i128)
            - (sum_i as i128 - self.sum_t as i128).pow(2);
        ssd_n.max(0) as f64 / self.energy_n as f64
    }
}

/// All rotations (and mirror images for doors) at every configured scale.
pub fn template_variants(template: &Template, dpi: Option<f64>, scales: &[f64]) -> Result<Vec<Variant>> {
    template.validate()?;
    let (bw, bh) = template.base_size(dpi);
    let mut out = Vec::new();
    for &s in scales {
        let w = ((bw as f64 * s).round() as usize).max(3);
        let h = ((bh as f64 * s).round() as usize).max(3);
        let scaled = if (w, h) == (template.patch.width(), template.patch.height()) {
            template.patch.clone()
        } else {
            template.patch.resize(w, h)?
        };
        let mirrors: &[bool] = if template.mirrored_variants() { &[false, true] } else { &[false] };
        for &m in mirrors {
            let base = if m { scaled.mirror() } else { scaled.clone() };
            for rot in 0..4u8 {
                out.push(Variant::new(template, base.rotate90(rot), rot, m, s)?);
            }
        }
    }
    Ok(out)
}

/// Summed-area tables of intensity and squared intensity.
pub struct Integral {
    w1: usize,
    sum: Vec<u32>,
    sq: Vec<u64>,
}

impl Integral {
    pub fn new(img: &RasterImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let w1 = w + 1;
        let mut sum = vec![0u32; w1 * (h + 1)];
        let mut sq = vec![0u64; w1 * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0u32, 0u64);
            for x in 0..w {
                let v = img.get(x, y);
                rs += v as u32;
                rq += (v as u64) * (v as u64);
                sum[(y + 1) * w1 + x + 1] = sum[y * w1 + x + 1] + rs;
                sq[(y + 1) * w1 + x + 1] = sq[y * w1 + x + 1] + rq;
            }
        }
        Self { w1, sum, sq }
    }

    /// (ΣI, ΣI²) over the w×h window at (x, y).
    pub fn window(&self, x: usize, y: usize, w: usize, h: usize) -> (i64, i64) {
        let (a, b, c, d) = (y * self.w1 + x, y * self.w1 + x + w, (y + h) * self.w1 + x, (y + h) * self.w1 + x + w);
        let s = self.sum[d] as i64 - self.sum[b] as i64 - self.sum[c] as i64 + self.sum[a] as i64;
        let q = self.sq[d] as i64 - self.sq[b] as i64 - self.sq[c] as i64 + self.sq[a] as i64;
        (s, q)
    }
}

const DESC_RADIUS: i64 = 5;

/// Zero-mean, unit-norm 11×11 neighbourhood around (x, y); `None` when flat.
fn descriptor(img: &RasterImage, x: u32, y: u32) -> Option<Vec<f32>> {
    let mut v = Vec::with_capacity(121);
    for dy in -DESC_RADIUS..=DESC_RADIUS {
        for dx in -DESC_RADIUS..=DESC_RADIUS {
            v.push(img.get_clamped(x as isize + dx as isize, y as isize + dy as isize) as f32);
        }
    }
    let mean = v.iter().sum::<f32>() / v.len() as f32;
    v.iter_mut().for_each(|p| *p -= mean);
    let norm = v.iter().map(|p| p * p).sum::<f32>().sqrt();
    if norm < 1e-3 {
        return None;
    }
    v.iter_mut().for_each(|p| *p /= norm);
    Some(v)
}

fn descriptor_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(p, q)| ((p - q) * (p - q)) as f64).sum()
}

/// Prepared template variants for one plan resolution.
pub struct Matcher {
    pub variants: Vec<Variant>,
    pub config: MatchConfig,
}

impl Matcher {
    pub fn new(templates: &[Template], dpi: Option<f64>, config: MatchConfig) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::EmptyTemplates);
        }
        let mut variants = Vec::new();
        for t in templates {
            let mut vs = template_variants(t, dpi, &config.scales)?;
            for v in &mut vs {
                v.keypoints.truncate(config.max_keypoints);
            }
            variants.extend(vs);
        }
        Ok(Self { variants, config })
    }

    /// Smallest side over all variants.
    pub fn min_dimension(&self) -> usize {
        self.variants.iter().map(|v| v.width().min(v.height())).min().unwrap_or(1)
    }

    /// Larger side of the unscaled variants of `kind`.
    pub fn nominal_size(&self, kind: &str) -> Option<u32> {
        self.variants
            .iter()
            .filter(|v| v.kind == kind)
            .min_by(|a, b| (a.scale - 1.0).abs().total_cmp(&(b.scale - 1.0).abs()))
            .map(|v| v.size())
    }

    /// Runs the matcher over `img`.
    pub fn run(&self, img: &RasterImage, features: &[FeaturePoint]) -> Result<Vec<MatchCandidate>> {
        for v in &self.variants {
            if v.width() > img.width() || v.height() > img.height() {
                return Err(Error::TemplateTooLarge { id: v.template.clone(), width: v.width(), height: v.height() });
            }
        }
        let integral = Integral::new(img);
        let descriptors: Vec<Option<Vec<f32>>> = features.iter().map(|f| descriptor(img, f.x, f.y)).collect();
        let slack = self.config.slack as i64;
        let per_variant: Vec<Vec<MatchCandidate>> = self
            .variants
            .par_iter()
            .map(|v| {
                let mut tried: HashSet<(usize, usize)> = HashSet::new();
                let mut found = Vec::new();
                let max_x = (img.width() - v.width()) as i64;
                let max_y = (img.height() - v.height()) as i64;
                for (f, desc) in features.iter().zip(&descriptors) {
                    let Some(desc) = desc else { continue };
                    for (kx, ky, kd) in &v.keypoints {
                        if descriptor_distance(desc, kd) > self.config.descriptor_max {
                            continue;
                        }
                        for dy in -slack..=slack {
                            for dx in -slack..=slack {
                                let x = f.x as i64 - *kx as i64 + dx;
                                let y = f.y as i64 - *ky as i64 + dy;
                                if x < 0 || y < 0 || x > max_x || y > max_y {
                                    continue;
                                }
                                let (x, y) = (x as usize, y as usize);
                                if !tried.insert((x, y)) {
                                    continue;
                                }
                                let score = v.score_at(&integral, img, x, y);
                                if score <= self.config.max_score {
                                    found.push(MatchCandidate {
                                        x: (x + v.width() / 2) as u32,
                                        y: (y + v.height() / 2) as u32,
                                        kind: v.kind.clone(),
                                        score,
                                        source: Source::Fdm,
                                        size: v.size(),
                                        template: v.template.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
                found
            })
            .collect();
        Ok(suppress(per_variant.into_iter().flatten().collect(), true))
    }
}

/// Feature-guided template matching. Every image feature is paired with the
/// template keypoints whose 11×11 descriptors agree, each pairing proposes a
/// placement (searched within `slack` pixels), and placements scoring at most
/// `max_score` become candidates. Overlapping candidates of one kind are then
/// reduced to the best.
pub fn match_templates(
    img: &RasterImage,
    features: &[FeaturePoint],
    templates: &[Template],
    config: &MatchConfig,
) -> Result<Vec<MatchCandidate>> {
    let matcher = Matcher::new(templates, img.dpi.map(|d| d.x), config.clone())?;
    matcher.run(img, features)
}

/// Greedy suppression by (score, y, x): a candidate is dropped when a better
/// one lies closer than the smaller of their two template widths. With `per_kind` only candidates
/// of the same kind suppress each other.
pub fn suppress(mut cands: Vec<MatchCandidate>, per_kind: bool) -> Vec<MatchCandidate> {
    cands.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x)).then(a.kind.cmp(&b.kind)));
    let cell = cands.iter().map(|c| c.size).max().unwrap_or(1).max(1) as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept: Vec<MatchCandidate> = Vec::new();
    for c in cands {
        let (cx, cy) = (c.x as i64 / cell, c.y as i64 / cell);
        let reach = c.size as f64;
        let mut clear = true;
        'g: for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                for &k in grid.get(&(gx, gy)).map(|v| v.as_slice()).unwrap_or(&[]) {
                    let o = &kept[k];
                    if per_kind && o.kind != c.kind {
                        continue;
                    }
                    let d = (o.x as f64 - c.x as f64).hypot(o.y as f64 - c.y as f64);
                    if d < reach.min(o.size as f64) {
                        clear = false;
                        break 'g;
                    }
                }
            }
        }
        if clear {
            grid.entry((cx, cy)).or_default().push(kept.len());
            kept.push(c);
        }
    }
    kept
}

/// Distance from every pixel to the walkable area, for repeated filtering.
pub struct RegionFilter {
    width: usize,
    distance: Vec<f64>,
}

impl RegionFilter {
    pub fn new(path: &IndoorPath) -> Self {
        Self { width: path.mask.width(), distance: distance_transform(&path.mask) }
    }

    pub fn distance(&self, x: u32, y: u32) -> f64 {
        self.distance.get(y as usize * self.width + x as usize).copied().unwrap_or(f64::INFINITY)
    }

    pub fn keep(&self, x: u32, y: u32, proximity: f64) -> bool {
        proximity.is_infinite() || self.distance(x, y) <= proximity
    }
}

/// Keeps candidates within `proximity` pixels of the walkable area, in
/// order. An infinite proximity keeps everything.
pub fn filter_by_region(cands: &[MatchCandidate], path: &IndoorPath, proximity: f64) -> Vec<MatchCandidate> {
    if proximity.is_infinite() {
        return cands.to_vec();
    }
    let filter = RegionFilter::new(path);
    cands.iter().filter(|c| filter.keep(c.x, c.y, proximity)).cloned().collect()
}

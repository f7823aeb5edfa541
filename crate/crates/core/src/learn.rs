//! Patch classification, feature clustering and the detection pipelines.
//!
//! Three detection options share the same front end:
//!
//! 1. feature detection, then template matching (FDM);
//! 2. option 1 with an SVM veto on every candidate (FDM+SML);
//! 3. feature detection, K-Means reduction of the features and an SVM
//!    search around every cluster centre, with no templates (FD+SML).
//!
//! Classifiers are one-vs-all linear SVMs over 24×24 patches in canonical
//! symbol orientation. At detection time a patch is tried in all eight
//! orientations and the best margin counts.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    detect_features, suppress, FeaturePoint, MatchCandidate, MatchConfig, Matcher, RegionFilter, Source, Template,
};
use crate::error::{Error, Result};
use crate::imagecore::RasterImage;
use crate::pathfind::IndoorPath;
use crate::synth::{generate_plan, PlanConfig, Style};

/// Side of the classifier input in cells.
pub const PATCH_SIZE: usize = 24;

/// Crop side relative to the symbol size.
pub const CONTEXT: f64 = 1.5;

/// Resolution assumed for images without DPI metadata.
pub const DEFAULT_DPI: f64 = 200.0;

/// Square grayscale grid with real-valued intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    side: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if side == 0 || values.len() != side * side {
            return Err(Error::PatchSize { expected: side * side, found: values.len() });
        }
        Ok(Self { side, values })
    }

    /// Whole image as a patch; non-square images are resampled.
    pub fn from_raster(img: &RasterImage) -> Self {
        if img.width() == img.height() {
            return Self { side: img.width(), values: img.pixels().iter().map(|&p| p as f64).collect() };
        }
        let side = img.width().max(img.height());
        crop(img, img.width() as f64 / 2.0, img.height() as f64 / 2.0, side as f64, side)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { side: self.side, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Resamples to `side` cells by area averaging.
    pub fn resized(&self, side: usize) -> Self {
        if side == self.side {
            return self.clone();
        }
        let n = self.side as f64;
        let f = n / side as f64;
        let mut values = Vec::with_capacity(side * side);
        for y in 0..side {
            for x in 0..side {
                let mut acc = 0.0;
                let k = 4;
                for sy in 0..k {
                    for sx in 0..k {
                        let px = ((x as f64 + (sx as f64 + 0.5) / k as f64) * f).floor().min(n - 1.0) as usize;
                        let py = ((y as f64 + (sy as f64 + 0.5) / k as f64) * f).floor().min(n - 1.0) as usize;
                        acc += self.values[py * self.side + px];
                    }
                }
                values.push(acc / (k * k) as f64);
            }
        }
        Self { side, values }
    }

    /// Mirrors left-right when `mirrored`, then turns clockwise.
    pub fn transformed(&self, quarter_turns: u8, mirrored: bool) -> Self {
        let map = orientation_map(self.side, quarter_turns, mirrored);
        Self { side: self.side, values: map.iter().map(|&i| self.values[i]).collect() }
    }
}

/// `out[k] = src[map[k]]` for the transform mirror-then-rotate.
fn orientation_map(side: usize, quarter_turns: u8, mirrored: bool) -> Vec<usize> {
    let mut map: Vec<usize> = (0..side * side).collect();
    if mirrored {
        map = (0..side * side).map(|k| map[(k / side) * side + (side - 1 - k % side)]).collect();
    }
    for _ in 0..quarter_turns % 4 {
        // Clockwise: out(x, y) = in(y, side - 1 - x).
        map = (0..side * side)
            .map(|k| {
                let (x, y) = (k % side, k / side);
                map[(side - 1 - x) * side + y]
            })
            .collect();
    }
    map
}

/// Zero mean and unit norm; a constant vector becomes all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-12 * n {
        return vec![0.0; values.len()];
    }
    centred.into_iter().map(|v| v / norm).collect()
}

/// Crop of side `side_px` centred at the continuous position (cx, cy),
/// averaged down to `cells`×`cells`. Pixel i covers [i, i+1).
pub fn crop(img: &RasterImage, cx: f64, cy: f64, side_px: f64, cells: usize) -> Patch {
    let cell = side_px / cells as f64;
    let x0 = cx - side_px / 2.0;
    let y0 = cy - side_px / 2.0;
    Patch { side: cells, values: sample_cells(img, x0, y0, cell, cells, cells) }
}

fn sample_cells(img: &RasterImage, x0: f64, y0: f64, cell: f64, nx: usize, ny: usize) -> Vec<f64> {
    let k = ((cell.ceil() as usize).clamp(1, 4)) as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for sy in 0..k as usize {
                for sx in 0..k as usize {
                    let px = x0 + (i as f64 + (sx as f64 + 0.5) / k) * cell;
                    let py = y0 + (j as f64 + (sy as f64 + 0.5) / k) * cell;
                    acc += img.sample_bilinear(px - 0.5, py - 0.5);
                }
            }
            out.push(acc / (k * k));
        }
    }
    out
}

/// Subgradient-descent settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub iterations: usize,
    /// Samples per step; the full set is used when it is not larger.
    pub batch: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { iterations: 1500, batch: 256, seed: 7 }
    }
}

/// Weights and bias of a linear soft-margin classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Minimises `reg/2 · |w|² + mean(hinge)` over raw vectors with labels ±1.
/// The bias is learned as the weight of a constant unit feature. Step `t`
/// uses rate 1/(reg·t) and, for large sets, a seeded random batch.
pub fn train_linear(xs: &[Vec<f64>], ys: &[i8], reg: f64, cfg: &SvmConfig) -> Result<LinearSvm> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Invalid("samples and labels differ in length".into()));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::Invalid(format!("regularisation must be positive, got {reg}")));
    }
    if ys.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::Invalid("labels must be +1 or -1".into()));
    }
    if !ys.contains(&1) || !ys.contains(&-1) {
        return Err(Error::SingleClass);
    }
    let d = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::PatchSize { expected: d, found: x.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let full = xs.len() <= cfg.batch.max(1);
    let mut grad = vec![0.0; d];
    for t in 1..=cfg.iterations.max(1) {
        let eta = 1.0 / (reg * t as f64);
        let batch: &[usize] = if full {
            &order
        } else {
            order.partial_shuffle(&mut rng, cfg.batch);
            &order[..cfg.batch]
        };
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for &i in batch {
            let y = ys[i] as f64;
            if y * (dot(&w, &xs[i]) + b) < 1.0 {
                for (g, v) in grad.iter_mut().zip(&xs[i]) {
                    *g += y * v;
                }
                gb += y;
            }
        }
        let m = batch.len() as f64;
        let shrink = 1.0 - eta * reg;
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi = shrink * *wi + eta * g / m;
        }
        b = shrink * b + eta * gb / m;
        // Projection onto the ball of radius 1/sqrt(reg).
        let norm = (dot(&w, &w) + b * b).sqrt();
        let radius = 1.0 / reg.sqrt();
        if norm > radius {
            let f = radius / norm;
            w.iter_mut().for_each(|v| *v *= f);
            b *= f;
        }
    }
    Ok(LinearSvm { weights: w, bias: b })
}

/// One-vs-all patch classifier for one building-block kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub positive_kind: String,
    pub patch_size: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trained: bool,
    /// Larger side of the symbol in drawing inches; sets the crop size.
    #[serde(default)]
    pub symbol_size: f64,
}

impl SvmModel {
    pub fn untrained(positive_kind: impl Into<String>, patch_size: usize) -> Self {
        Self {
            positive_kind: positive_kind.into(),
            patch_size,
            weights: vec![0.0; patch_size * patch_size],
            bias: 0.0,
            trained: false,
            symbol_size: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.trained {
            return Err(Error::UntrainedModel);
        }
        if self.patch_size == 0 || self.weights.len() != self.patch_size * self.patch_size {
            return Err(Error::PatchSize { expected: self.patch_size * self.patch_size, found: self.weights.len() });
        }
        Ok(())
    }

    /// Crop side in pixels at `dpi`.
    pub fn crop_side(&self, dpi: f64) -> f64 {
        CONTEXT * self.symbol_size * dpi
    }
}

pub fn train_svm(samples: &[(Patch, i8)], positive_kind: &str, reg: f64) -> Result<SvmModel> {
    train_svm_with(samples, positive_kind, reg, &SvmConfig::default())
}

/// Trains on patches normalised to zero mean and unit norm.
pub fn train_svm_with(samples: &[(Patch, i8)], positive_kind: &str, reg: f64, cfg: &SvmConfig) -> Result<SvmModel> {
    let Some(first) = samples.first() else {
        return Err(Error::SingleClass);
    };
    let side = first.0.side;
    if let Some((p, _)) = samples.iter().find(|(p, _)| p.side != side) {
        return Err(Error::PatchSize { expected: side, found: p.side });
    }
    let xs: Vec<Vec<f64>> = samples.iter().map(|(p, _)| normalize(&p.values)).collect();
    let ys: Vec<i8> = samples.iter().map(|&(_, y)| y).collect();
    let svm = train_linear(&xs, &ys, reg, cfg)?;
    Ok(SvmModel {
        positive_kind: positive_kind.to_string(),
        patch_size: side,
        weights: svm.weights,
        bias: svm.bias,
        trained: true,
        symbol_size: 0.0,
    })
}

/// Label and margin `w·x + b` of the normalised patch, resampled to the
/// model's patch size when needed.
pub fn classify_patch(model: &SvmModel, patch: &Patch) -> Result<(i8, f64)> {
    model.validate()?;
    let p = patch.resized(model.patch_size);
    let margin = dot(&model.weights, &normalize(&p.values)) + model.bias;
    Ok((if margin > 0.0 { 1 } else { -1 }, margin))
}

/// Best margin over the eight orientations of `patch`.
pub fn best_orientation_margin(model: &SvmModel, patch: &Patch) -> Result<f64> {
    model.validate()?;
    let rotated = OrientedWeights::new(model);
    let p = patch.resized(model.patch_size);
    Ok(rotated.best(&normalize(&p.values)))
}

/// The weight vector pulled back through each of the eight orientations,
/// so that `w · transform(x) == w_o · x`.
struct OrientedWeights {
    bias: f64,
    weights: Vec<Vec<f64>>,
}

impl OrientedWeights {
    fn new(model: &SvmModel) -> Self {
        let s = model.patch_size;
        let mut weights = Vec::with_capacity(8);
        for o in 0..8u8 {
            let map = orientation_map(s, o % 4, o >= 4);
            let mut w = vec![0.0; s * s];
            for (k, &src) in map.iter().enumerate() {
                w[src] = model.weights[k];
            }
            weights.push(w);
        }
        Self { bias: model.bias, weights }
    }

    fn best(&self, x: &[f64]) -> f64 {
        self.weights.iter().map(|w| dot(w, x)).fold(f64::NEG_INFINITY, f64::max) + self.bias
    }
}

/// Result of K-Means reduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub centroids: Vec<[f64; 2]>,
    /// Cluster index per input feature.
    pub assignments: Vec<usize>,
    pub k: usize,
}

/// K-Means starting size: half of the features, rounded up.
pub fn initial_k(n: usize) -> usize {
    n.div_ceil(2)
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(c: &[[f64; 2]], p: [f64; 2]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &q) in c.iter().enumerate() {
        let d = d2(p, q);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// k-means++ seeding.
pub fn seed_centroids(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let k = k.clamp(1, points.len().max(1));
    let mut c = vec![points[rng.gen_range(0..points.len())]];
    let mut dist: Vec<f64> = points.iter().map(|&p| d2(p, c[0])).collect();
    while c.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // Remaining points coincide with centroids.
            match dist.iter().position(|&d| d > 0.0) {
                Some(i) => i,
                None => break,
            }
        } else {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        };
        c.push(points[next]);
        for (d, &p) in dist.iter_mut().zip(points) {
            *d = d.min(d2(p, points[next]));
        }
    }
    c
}

/// Lloyd iterations to convergence. Returns the centroids, assignments and
/// the within-cluster sum of squares after every assignment step. Empty
/// clusters keep their previous centroid.
pub fn lloyd(points: &[[f64; 2]], mut centroids: Vec<[f64; 2]>, max_iter: usize) -> (Vec<[f64; 2]>, Vec<usize>, Vec<f64>) {
    let mut assign: Vec<usize> = points.iter().map(|&p| nearest(&centroids, p)).collect();
    let sse = |c: &[[f64; 2]], a: &[usize]| points.iter().zip(a).map(|(&p, &i)| d2(p, c[i])).sum::<f64>();
    let mut history = vec![sse(&centroids, &assign)];
    for _ in 0..max_iter {
        let mut sum = vec![[0.0, 0.0]; centroids.len()];
        let mut count = vec![0usize; centroids.len()];
        for (&p, &i) in points.iter().zip(&assign) {
            sum[i][0] += p[0];
            sum[i][1] += p[1];
            count[i] += 1;
        }
        for (i, c) in centroids.iter_mut().enumerate() {
            if count[i] > 0 {
                *c = [sum[i][0] / count[i] as f64, sum[i][1] / count[i] as f64];
            }
        }
        let next: Vec<usize> = points
            .iter()
            .zip(&assign)
            .map(|(&p, &cur)| {
                // Keep the current cluster on ties so the loop terminates.
                let n = nearest(&centroids, p);
                if d2(p, centroids[n]) < d2(p, centroids[cur]) {
                    n
                } else {
                    cur
                }
            })
            .collect();
        let changed = next != assign;
        assign = next;
        history.push(sse(&centroids, &assign));
        if !changed {
            break;
        }
    }
    (centroids, assign, history)
}

/// K-Means with a separation-driven revision of k. Starts from half the
/// features; centroids closer than `separation` are merged (closest pairs
/// first, count-weighted) and clusters with a member farther than
/// `separation` from their centre are split at that member, with Lloyd
/// re-run after each step. Merging runs last, so every final pair is at
/// least `separation` apart.
pub fn kmeans_reduce(features: &[FeaturePoint], separation: f64) -> ClusterSet {
    kmeans_reduce_seeded(features, separation, 0)
}

pub fn kmeans_reduce_seeded(features: &[FeaturePoint], separation: f64, seed: u64) -> ClusterSet {
    let points: Vec<[f64; 2]> = features.iter().map(|f| [f.x as f64, f.y as f64]).collect();
    kmeans_points(&points, separation, seed)
}

/// Merges centroid pairs closer than `separation`, closest first and
/// weighted by cluster size, re-running Lloyd after every pass.
fn merge_close_centroids(
    points: &[[f64; 2]],
    mut c: Vec<[f64; 2]>,
    mut a: Vec<usize>,
    separation: f64,
) -> (Vec<[f64; 2]>, Vec<usize>) {
    let sep2 = separation * separation;
    loop {
        let mut pairs = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                let d = d2(c[i], c[j]);
                if d < sep2 {
                    pairs.push((d, i, j));
                }
            }
        }
        if pairs.is_empty() {
            return (c, a);
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
        let mut count = vec![0usize; c.len()];
        for &i in &a {
            count[i] += 1;
        }
        let mut touched = vec![false; c.len()];
        let mut gone = vec![false; c.len()];
        let mut merged = c.clone();
        for (_, i, j) in pairs {
            if touched[i] || touched[j] {
                continue;
            }
            let (ni, nj) = (count[i].max(1) as f64, count[j].max(1) as f64);
            merged[i] = [(c[i][0] * ni + c[j][0] * nj) / (ni + nj), (c[i][1] * ni + c[j][1] * nj) / (ni + nj)];
            touched[i] = true;
            touched[j] = true;
            gone[j] = true;
        }
        let next: Vec<[f64; 2]> = merged.into_iter().zip(&gone).filter(|(_, &g)| !g).map(|(p, _)| p).collect();
        (c, a, _) = lloyd(points, next, 100);
    }
}

fn kmeans_points(points: &[[f64; 2]], separation: f64, seed: u64) -> ClusterSet {
    if points.is_empty() {
        return ClusterSet { centroids: Vec::new(), assignments: Vec::new(), k: 0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centroids(points, initial_k(points.len()), &mut rng);
    let (mut c, mut a, _) = lloyd(points, init, 100);
    for round in 0..64 {
        (c, a) = merge_close_centroids(points, c, a, separation);
        if round == 63 {
            break;
        }
        // Split clusters that still reach farther than the separation.
        let mut far: Vec<(f64, usize)> = vec![(0.0, usize::MAX); c.len()];
        for (i, (&p, &ci)) in points.iter().zip(&a).enumerate() {
            let d = d2(p, c[ci]);
            if d > far[ci].0 {
                far[ci] = (d, i);
            }
        }
        let sep2 = separation * separation;
        let mut added = false;
        for &(d, i) in &far {
            if d > sep2 && c.iter().all(|&q| d2(points[i], q) >= sep2) {
                c.push(points[i]);
                added = true;
            }
        }
        if !added {
            break;
        }
        (c, a, _) = lloyd(points, c, 100);
    }
    // Drop clusters that ended empty and renumber.
    let mut used = vec![false; c.len()];
    for &i in &a {
        used[i] = true;
    }
    let mut remap = vec![usize::MAX; c.len()];
    let mut centroids = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = centroids.len();
            centroids.push(c[i]);
        }
    }
    let assignments: Vec<usize> = a.iter().map(|&i| remap[i]).collect();
    ClusterSet { k: centroids.len(), centroids, assignments }
}

/// Single-linkage groups of features with links shorter than `link`, each
/// sorted, in order of their first member.
pub fn spatial_groups(features: &[FeaturePoint], link: f64) -> Vec<Vec<usize>> {
    let n = features.len();
    let cell = link.max(1.0);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, f) in features.iter().enumerate() {
        grid.entry(((f.x as f64 / cell) as i64, (f.y as f64 / cell) as i64)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let l2 = link * link;
    for (i, f) in features.iter().enumerate() {
        let (gx, gy) = ((f.x as f64 / cell) as i64, (f.y as f64 / cell) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                for &j in grid.get(&(gx + dx, gy + dy)).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if j <= i {
                        continue;
                    }
                    let g = &features[j];
                    if (f.x as f64 - g.x as f64).powi(2) + (f.y as f64 - g.y as f64).powi(2) < l2 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let g = *index.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Cluster centres over all spatial groups, each group reduced on its own.
pub fn cluster_sites(features: &[FeaturePoint], separation: f64, seed: u64) -> Vec<[f64; 2]> {
    let groups = spatial_groups(features, separation);
    let per_group: Vec<Vec<[f64; 2]>> = groups
        .par_iter()
        .map(|g| {
            let pts: Vec<[f64; 2]> = g.iter().map(|&i| [features[i].x as f64, features[i].y as f64]).collect();
            if pts.len() == 1 {
                return pts;
            }
            kmeans_points(&pts, separation, seed).centroids
        })
        .collect();
    per_group.into_iter().flatten().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PathOnly,
    FullPlan,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "path-only" | "path" => Ok(Mode::PathOnly),
            "full-plan" | "full" => Ok(Mode::FullPlan),
            other => Err(Error::Invalid(format!("unknown detection mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// 1 = FDM, 2 = FDM+SML, 3 = FD+SML.
    pub option: u8,
    pub mode: Mode,
    /// Corner quality relative to the strongest response.
    pub quality: f64,
    /// Minimum distance between features in pixels; by default half the
    /// smallest template (or classifier symbol) side.
    pub min_spacing: Option<f64>,
    pub matching: MatchConfig,
    /// Path-only proximity as a multiple of each candidate's size.
    pub proximity: f64,
    /// Search step for option 3 in crop cells.
    pub search_step: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            option: 1,
            mode: Mode::PathOnly,
            quality: 0.05,
            min_spacing: None,
            matching: MatchConfig { max_score: 0.6, ..MatchConfig::default() },
            proximity: 1.0,
            search_step: 1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.option) {
            return Err(Error::InvalidOption(self.option));
        }
        if !(self.quality > 0.0 && self.quality <= 1.0) {
            return Err(Error::Invalid(format!("quality must be in (0, 1], got {}", self.quality)));
        }
        if !(self.proximity >= 0.0) {
            return Err(Error::Invalid(format!("proximity must be nonnegative, got {}", self.proximity)));
        }
        Ok(())
    }
}

fn image_dpi(img: &RasterImage) -> f64 {
    img.dpi.filter(|d| d.is_valid()).map(|d| d.x).unwrap_or(DEFAULT_DPI)
}

/// Runs one detection option. `path` is used in path-only mode to keep
/// candidates within `proximity` × their own size of the walkable area.
/// `models` holds at most one classifier per kind.
pub fn run_pipeline(
    plan: &RasterImage,
    path: &IndoorPath,
    cfg: &PipelineConfig,
    templates: &[Template],
    models: &[SvmModel],
) -> Result<Vec<MatchCandidate>> {
    cfg.validate()?;
    if cfg.option >= 2 && models.is_empty() {
        return Err(Error::ModelRequired(cfg.option));
    }
    for m in models {
        m.validate()?;
    }
    if cfg.option <= 2 && templates.is_empty() {
        return Err(Error::EmptyTemplates);
    }
    if cfg.mode == Mode::PathOnly && (path.mask.width(), path.mask.height()) != (plan.width(), plan.height()) {
        return Err(Error::Dimension("indoor path and plan differ in size".into()));
    }
    let dpi = image_dpi(plan);
    let region = (cfg.mode == Mode::PathOnly).then(|| RegionFilter::new(path));
    let matcher = if cfg.option <= 2 {
        Some(Matcher::new(templates, plan.dpi.map(|d| d.x), cfg.matching.clone())?)
    } else {
        None
    };
    let spacing = cfg.min_spacing.unwrap_or_else(|| match &matcher {
        Some(m) => m.min_dimension() as f64 / 2.0,
        None => models.iter().map(|m| m.crop_side(dpi) / CONTEXT).fold(f64::INFINITY, f64::min) / 2.0,
    });
    let mut features = detect_features(plan, cfg.quality, spacing);
    if features.is_empty() {
        return Ok(Vec::new());
    }

    let out = match matcher {
        Some(matcher) => {
            if let Some(r) = &region {
                // Symbols farther than their own size from the path cannot
                // survive the filter; neither can features beyond that.
                let reach = matcher.variants.iter().map(|v| v.size()).max().unwrap_or(0) as f64;
                features.retain(|f| r.distance(f.x, f.y) <= cfg.proximity * reach + reach);
            }
            let mut cands = matcher.run(plan, &features)?;
            if let Some(r) = &region {
                cands.retain(|c| r.keep(c.x, c.y, cfg.proximity * c.size as f64));
            }
            let mut cands = suppress(cands, false);
            if cfg.option == 2 {
                cands = sml_veto(plan, cands, models, &matcher, dpi)?;
            }
            cands
        }
        None => {
            let side_max = models.iter().map(|m| m.crop_side(dpi) / CONTEXT).fold(0.0, f64::max);
            if let Some(r) = &region {
                features.retain(|f| r.distance(f.x, f.y) <= (cfg.proximity + 1.0) * side_max);
            }
            let mut cands = sml_search(plan, &features, models, dpi, cfg)?;
            if let Some(r) = &region {
                cands.retain(|c| r.keep(c.x, c.y, cfg.proximity * c.size as f64));
            }
            suppress(cands, false)
        }
    };
    Ok(out)
}

/// Option 2: candidates of a kind with a classifier survive only with a
/// positive margin; other kinds pass through.
fn sml_veto(
    plan: &RasterImage,
    cands: Vec<MatchCandidate>,
    models: &[SvmModel],
    matcher: &Matcher,
    dpi: f64,
) -> Result<Vec<MatchCandidate>> {
    let oriented: HashMap<&str, (OrientedWeights, &SvmModel)> =
        models.iter().map(|m| (m.positive_kind.as_str(), (OrientedWeights::new(m), m))).collect();
    let keep: Vec<bool> = cands
        .par_iter()
        .map(|c| match oriented.get(c.kind.as_str()) {
            None => true,
            Some((w, m)) => {
                let side = if m.symbol_size > 0.0 {
                    m.crop_side(dpi)
                } else {
                    CONTEXT * matcher.nominal_size(&c.kind).unwrap_or(c.size) as f64
                };
                let p = crop(plan, c.x as f64 + 0.5, c.y as f64 + 0.5, side, m.patch_size);
                w.best(&normalize(&p.values)) > 0.0
            }
        })
        .collect();
    Ok(cands
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(mut c, _)| {
            c.source = Source::FdmSml;
            c
        })
        .collect())
}

/// Option 3: cluster the features, then search ±half a symbol around each
/// centre for the best-scoring crop of every classifier.
fn sml_search(
    plan: &RasterImage,
    features: &[FeaturePoint],
    models: &[SvmModel],
    dpi: f64,
    cfg: &PipelineConfig,
) -> Result<Vec<MatchCandidate>> {
    let mut out = Vec::new();
    for m in models {
        if !(m.symbol_size > 0.0) {
            return Err(Error::Invalid(format!("model for {:?} has no symbol size", m.positive_kind)));
        }
        let side = m.crop_side(dpi);
        let symbol = side / CONTEXT;
        let s = m.patch_size;
        let cell = side / s as f64;
        let sites = cluster_sites(features, symbol, cfg.seed);
        let w = OrientedWeights::new(m);
        // Offsets up to half a symbol, in whole cells.
        let reach = ((symbol / 2.0) / cell).round() as usize;
        let step = cfg.search_step.max(1);
        let found: Vec<MatchCandidate> = sites
            .par_iter()
            .filter_map(|&[fx, fy]| {
                let n = s + 2 * reach;
                let (cx, cy) = (fx + 0.5, fy + 0.5);
                let x0 = cx - side / 2.0 - reach as f64 * cell;
                let y0 = cy - side / 2.0 - reach as f64 * cell;
                let grid = sample_cells(plan, x0, y0, cell, n, n);
                let mut best: Option<(f64, usize, usize)> = None;
                let mut window = vec![0.0; s * s];
                for oy in (0..=2 * reach).step_by(step) {
                    for ox in (0..=2 * reach).step_by(step) {
                        for r in 0..s {
                            window[r * s..(r + 1) * s].copy_from_slice(&grid[(oy + r) * n + ox..(oy + r) * n + ox + s]);
                        }
                        let margin = w.best(&normalize(&window));
                        // Prefer the offset closest to the centre on ties.
                        let better = match best {
                            None => true,
                            Some((bm, _, _)) => margin > bm,
                        };
                        if better {
                            best = Some((margin, ox, oy));
                        }
                    }
                }
                let (margin, ox, oy) = best?;
                if margin <= 0.0 {
                    return None;
                }
                let x = cx + (ox as f64 - reach as f64) * cell;
                let y = cy + (oy as f64 - reach as f64) * cell;
                if x < 0.0 || y < 0.0 || x >= plan.width() as f64 || y >= plan.height() as f64 {
                    return None;
                }
                Some(MatchCandidate {
                    x: x.floor() as u32,
                    y: y.floor() as u32,
                    kind: m.positive_kind.clone(),
                    score: 1.0 / (1.0 + margin),
                    source: Source::FdSml,
                    size: symbol.round() as u32,
                    template: format!("svm:{}", m.positive_kind),
                })
            })
            .collect();
        out.extend(found);
    }
    Ok(out)
}

/// Training patches for `kind` from synthetic plans at full and half
/// resolution: symbol crops turned into canonical orientation with small
/// offsets as positives; crops at other features, at near misses and at
/// other symbols as negatives.
pub fn synthetic_training_set(kind: &str, plans: usize, seed: u64) -> Result<Vec<(Patch, i8)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for p in 0..plans {
        let cfg = PlanConfig {
            width: 1400,
            height: 1800,
            doors: 40,
            stairs: 6,
            interior_doors: 6,
            seed: seed.wrapping_mul(1000).wrapping_add(p as u64),
            ..PlanConfig::default()
        };
        let plan = generate_plan(&cfg)?;
        let symbol_px = symbol_size_px(kind, cfg.dpi, cfg.scale);
        for factor in [1usize, 2] {
            let (img, truth) = if factor == 1 {
                (plan.image.clone(), plan.truth.clone())
            } else {
                (
                    crate::synth::degrade(&plan.image, 2, rng.gen_range(4.0..14.0), rng.gen())?,
                    crate::synth::scale_truth(&plan.truth, 2),
                )
            };
            let symbol = symbol_px / factor as f64;
            let side = CONTEXT * symbol;
            for t in truth.iter().filter(|t| t.kind == kind) {
                for _ in 0..3 {
                    let jitter = symbol * 0.05;
                    let k = 1.0 + rng.gen_range(-0.06..0.06);
                    let x = t.x + rng.gen_range(-jitter..=jitter);
                    let y = t.y + rng.gen_range(-jitter..=jitter);
                    let patch = crop(&img, x, y, side * k, PATCH_SIZE);
                    // Undo mirror-then-rotate: turn back, then mirror.
                    let canon = patch.transformed((4 - t.rotation % 4) % 4, false).transformed(0, t.mirrored);
                    samples.push((canon, 1));
                }
            }
            let features = detect_features(&img, 0.05, 3.0);
            let near = |x: f64, y: f64, r: f64| truth.iter().any(|t| t.kind == kind && (t.x - x).hypot(t.y - y) < r);
            let mut negatives = 0;
            let budget = truth.iter().filter(|t| t.kind == kind).count() * 6;
            let mut feats = features.clone();
            feats.shuffle(&mut rng);
            for f in feats {
                if negatives >= budget {
                    break;
                }
                let (x, y) = (f.x as f64 + 0.5, f.y as f64 + 0.5);
                if near(x, y, symbol * 0.4) {
                    continue;
                }
                let patch = crop(&img, x, y, side, PATCH_SIZE);
                let o = rng.gen_range(0..8u8);
                samples.push((patch.transformed(o % 4, o >= 4), -1));
                negatives += 1;
            }
            // Near misses around true symbols.
            for t in truth.iter().filter(|t| t.kind == kind) {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = symbol * rng.gen_range(0.45..0.8);
                let patch = crop(&img, t.x + r * a.cos(), t.y + r * a.sin(), side, PATCH_SIZE);
                let canon = patch.transformed((4 - t.rotation % 4) % 4, false).transformed(0, t.mirrored);
                samples.push((canon, -1));
            }
            // Other kinds at their own centres.
            for t in truth.iter().filter(|t| t.kind != kind) {
                let patch = crop(&img, t.x, t.y, side, PATCH_SIZE);
                let o = rng.gen_range(0..8u8);
                samples.push((patch.transformed(o % 4, o >= 4), -1));
            }
        }
    }
    Ok(samples)
}

/// Larger side of the synthetic symbol of `kind` in pixels.
pub fn symbol_size_px(kind: &str, dpi: f64, scale: f64) -> f64 {
    let s = Style::new(dpi, scale);
    match kind {
        "stair" => s.stair_length as f64,
        _ => (s.door + s.wall + 2 * s.pad) as f64,
    }
}

/// Trains the bundled door and stair classifiers on synthetic plans.
pub fn train_default_models(seed: u64) -> Result<Vec<SvmModel>> {
    let mut models = Vec::new();
    for kind in ["door", "stair"] {
        let samples = synthetic_training_set(kind, 4, seed)?;
        let mut m = train_svm_with(&samples, kind, 1e-4, &SvmConfig { iterations: 3000, batch: 512, seed })?;
        m.symbol_size = symbol_size_px(kind, DEFAULT_DPI, 1.0 / 16.0) / DEFAULT_DPI;
        models.push(m);
    }
    Ok(models)
}

/// File format for a set of classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub models: Vec<SvmModel>,
}

impl ModelSet {
    pub fn from_json(s: &str) -> Result<Self> {
        let set: ModelSet = serde_json::from_str(s)?;
        for m in &set.models {
            m.validate()?;
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

const DEFAULT_MODELS: &str = include_str!("../models/default.json");

/// The bundled door and stair classifiers.
pub fn default_models() -> Vec<SvmModel> {
    ModelSet::from_json(DEFAULT_MODELS).map(|s| s.models).unwrap_or_default()
}

//! Synthetic floor plans with known symbol locations.
//!
//! Plans are drawn as black line work on white: an exterior wall, a ring of
//! corridors with horizontal cross corridors, and rows of rooms facing them.
//! Every room opens onto a corridor through a swing door, or is a stair
//! alcove. The same drawing routines render the template library, so a
//! symbol at scale 1 matches its template exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::Template;
use crate::error::{Error, Result};
use crate::imagecore::{Dpi, RasterImage};

const INK: u8 = 0;
const PAPER: u8 = 255;

/// Drawing dimensions in feet and pixels for one plan resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Style {
    pub px_per_ft: f64,
    pub wall: usize,
    pub leaf: usize,
    pub pad: usize,
    pub door: usize,
    pub stair_width: usize,
    pub stair_length: usize,
    pub tread: usize,
    pub corridor: usize,
}

impl Style {
    pub fn new(dpi: f64, scale: f64) -> Self {
        let f = dpi * scale;
        let px = |ft: f64| ((ft * f).round() as usize).max(3);
        Self {
            px_per_ft: f,
            wall: ((f / 3.0).round() as usize).max(3),
            leaf: ((f / 4.0).round() as usize).max(2),
            pad: ((f / 3.0).round() as usize).max(2),
            door: px(3.0),
            stair_width: px(4.0),
            stair_length: px(10.0),
            tread: ((f * 11.0 / 12.0).round() as usize).max(3),
            corridor: px(6.0),
        }
    }
}

/// Door symbol with the wall along the bottom edge and the room above: a
/// leaf standing on the hinge at the left jamb and a quarter arc from the
/// leaf tip down to the right jamb. `pad` pixels of wall stub and paper
/// surround the opening. Returns the patch and the rectangle of the wall
/// opening inside it as (x, y, w, h).
pub fn door_patch(door: usize, wall: usize, leaf: usize, pad: usize) -> (RasterImage, [usize; 4]) {
    let w = door + 2 * pad;
    let h = door + wall + 2 * pad;
    // Local frame: hinge at (0, 0) on the room face of the wall, y up.
    let (ox, oy) = (pad as f64, (pad + door) as f64);
    let r = door as f64 - 0.5;
    let img = RasterImage::from_fn(w, h, |x, y| {
        let u = x as f64 + 0.5 - ox;
        let v = oy - (y as f64 + 0.5);
        let in_wall = v <= 0.0 && v >= -(wall as f64);
        let stub = in_wall && (u < 0.0 || u > door as f64);
        let leaf_px = u >= 0.0 && u <= leaf as f64 && v >= 0.0 && v <= door as f64;
        let d = u.hypot(v);
        let arc = u >= 0.0 && v >= -0.5 && (d - r).abs() <= 1.0;
        if stub || leaf_px || arc {
            INK
        } else {
            PAPER
        }
    })
    .expect("door patch is nonempty");
    (img, [pad, pad + door, door + 1, wall])
}

/// Stair symbol: outlined run with treads across it and a direction arrow
/// along the centre line, long axis vertical, arrow pointing up.
pub fn stair_patch(width: usize, length: usize, tread: usize) -> RasterImage {
    let t = 2usize;
    let cx = width as f64 / 2.0;
    let head = (width as f64 * 0.3).max(3.0);
    RasterImage::from_fn(width, length, |x, y| {
        let outline = x < t || y < t || x >= width - t || y >= length - t;
        let tr = y >= t && y % tread == 0;
        let fx = x as f64 + 0.5;
        let fy = y as f64 + 0.5;
        let shaft = (fx - cx).abs() <= 1.0 && fy >= length as f64 * 0.15 && fy <= length as f64 * 0.85;
        let tip = length as f64 * 0.15;
        let dy = fy - tip;
        let wing = dy >= 0.0 && dy <= head && ((fx - cx).abs() - dy).abs() <= 1.0;
        if outline || tr || shaft || wing {
            INK
        } else {
            PAPER
        }
    })
    .expect("stair patch is nonempty")
}

/// Door and stair templates for plans drawn at `dpi` and `scale`.
pub fn template_library(dpi: f64, scale: f64) -> Vec<Template> {
    let s = Style::new(dpi, scale);
    let (door, _) = door_patch(s.door, s.wall, s.leaf, s.pad);
    let stair = stair_patch(s.stair_width, s.stair_length, s.tread);
    let hint = |p: &RasterImage| Some(p.width().max(p.height()) as f64 / dpi);
    vec![
        Template { id: "door".into(), kind: "door".into(), physical_hint: hint(&door), patch: door, group: 0 },
        Template { id: "stair".into(), kind: "stair".into(), physical_hint: hint(&stair), patch: stair, group: 1 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub width: usize,
    pub height: usize,
    pub dpi: f64,
    /// Drawing inches per foot.
    pub scale: f64,
    /// Doors opening onto corridors.
    pub doors: usize,
    pub stairs: usize,
    /// Doors between neighbouring rooms, away from corridors.
    pub interior_doors: usize,
    /// Relative door-size variation (uniform, ±).
    pub size_jitter: f64,
    /// Desks and room labels inside wide rooms.
    #[serde(default)]
    pub clutter: bool,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            width: 2200,
            height: 3400,
            dpi: 200.0,
            scale: 1.0 / 16.0,
            doors: 40,
            stairs: 4,
            interior_doors: 4,
            size_jitter: 0.04,
            clutter: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSymbol {
    pub x: f64,
    pub y: f64,
    pub kind: String,
    /// Whether the symbol opens onto the corridor network.
    pub on_path: bool,
    /// Quarter turns clockwise applied to the template after mirroring.
    #[serde(default)]
    pub rotation: u8,
    #[serde(default)]
    pub mirrored: bool,
}

#[derive(Clone, Debug)]
pub struct SyntheticPlan {
    pub image: RasterImage,
    pub truth: Vec<TruthSymbol>,
    pub config: PlanConfig,
}

impl SyntheticPlan {
    pub fn on_path(&self) -> impl Iterator<Item = &TruthSymbol> {
        self.truth.iter().filter(|t| t.on_path)
    }
}

struct Canvas {
    img: RasterImage,
}

impl Canvas {
    fn rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, v: u8) {
        let x1 = x1.min(self.img.width());
        let y1 = y1.min(self.img.height());
        for y in y0..y1 {
            for x in x0..x1 {
                self.img.set(x, y, v);
            }
        }
    }

    fn blit_ink(&mut self, patch: &RasterImage, x0: usize, y0: usize) {
        for y in 0..patch.height() {
            for x in 0..patch.width() {
                let (px, py) = (x0 + x, y0 + y);
                if px < self.img.width() && py < self.img.height() {
                    let v = patch.get(x, y).min(self.img.get(px, py));
                    self.img.set(px, py, v);
                }
            }
        }
    }
}

/// Rotates a rectangle given in a w×h patch by quarter turns clockwise and
/// optionally mirrors it first, matching `RasterImage::rotate90`/`mirror`.
fn transform_rect(r: [usize; 4], w: usize, h: usize, turns: u8, mirrored: bool) -> [usize; 4] {
    let [mut x, mut y, mut rw, mut rh] = r;
    let (mut pw, mut ph) = (w, h);
    if mirrored {
        x = pw - x - rw;
    }
    for _ in 0..turns % 4 {
        // (x, y) -> (ph - 1 - y, x) for pixels, so rectangles map to
        // (ph - y - rh, x) with swapped sides.
        let nx = ph - y - rh;
        let ny = x;
        x = nx;
        y = ny;
        std::mem::swap(&mut rw, &mut rh);
        std::mem::swap(&mut pw, &mut ph);
    }
    [x, y, rw, rh]
}

/// Which side of the wall the room lies on.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Facing {
    /// Room above a horizontal wall.
    Up,
    /// Room below a horizontal wall.
    Down,
    /// Room right of a vertical wall.
    Right,
    /// Room left of a vertical wall.
    Left,
}

impl Facing {
    fn turns(self) -> u8 {
        match self {
            Facing::Up => 0,
            Facing::Right => 1,
            Facing::Down => 2,
            Facing::Left => 3,
        }
    }
}

struct Row {
    x0: usize,
    x1: usize,
    /// Inner extent of the rooms (between walls).
    y0: usize,
    y1: usize,
    /// The wall carrying the doors is below the room row.
    door_wall_below: bool,
}

/// Draws a door whose opening starts at `along` on a wall, returning the
/// symbol centre.
fn place_door(canvas: &mut Canvas, style: &Style, door: usize, opening: [usize; 2], facing: Facing, mirrored: bool) -> (f64, f64) {
    let (patch, rect) = door_patch(door, style.wall, style.leaf, style.pad);
    let (w, h) = (patch.width(), patch.height());
    let mut p = if mirrored { patch.mirror() } else { patch };
    p = p.rotate90(facing.turns());
    let [rx, ry, rw, rh] = transform_rect(rect, w, h, facing.turns(), mirrored);
    // `opening` is the top-left corner of the wall opening on the plan.
    let x0 = opening[0] - rx;
    let y0 = opening[1] - ry;
    canvas.rect(opening[0], opening[1], opening[0] + rw, opening[1] + rh, PAPER);
    canvas.blit_ink(&p, x0, y0);
    (x0 as f64 + p.width() as f64 / 2.0, y0 as f64 + p.height() as f64 / 2.0)
}

fn outline(canvas: &mut Canvas, x0: usize, y0: usize, x1: usize, y1: usize, t: usize) {
    canvas.rect(x0, y0, x1, y0 + t, INK);
    canvas.rect(x0, y1 - t, x1, y1, INK);
    canvas.rect(x0, y0, x0 + t, y1, INK);
    canvas.rect(x1 - t, y0, x1, y1, INK);
}

/// A desk and a short label in rooms wide enough to keep them clear of
/// every door swing. `room` is the inner rectangle (x0, y0, x1, y1).
fn furnish(canvas: &mut Canvas, s: &Style, rng: &mut ChaCha8Rng, room: [usize; 4], doors_below: bool) {
    let [x0, y0, x1, y1] = room;
    let keep = s.door + 2 * s.pad + 4;
    if x1 - x0 < 2 * keep + s.door || y1 - y0 < 2 * keep + s.door {
        return;
    }
    let (ix0, ix1) = (x0 + keep, x1 - keep);
    let (iy0, iy1) = (y0 + keep, y1 - keep);
    // Label near the door side, desk towards the back.
    let glyph_h = (s.px_per_ft * 0.8).round().max(5.0) as usize;
    let glyph_w = glyph_h * 2 / 3;
    let label_y = if doors_below { iy1 - glyph_h } else { iy0 };
    let glyphs = rng.gen_range(2..=4usize);
    let lx = (ix0 + ix1) / 2 - glyphs * (glyph_w + 2) / 2;
    for g in 0..glyphs {
        let gx = lx + g * (glyph_w + 2);
        // Strokes on a 2×3 segment grid, like a seven-segment digit.
        let mask: u8 = rng.gen_range(1..=127);
        let segs = [
            (0, 0, glyph_w, 1),
            (0, glyph_h / 2, glyph_w, 1),
            (0, glyph_h - 1, glyph_w, 1),
            (0, 0, 1, glyph_h / 2 + 1),
            (glyph_w - 1, 0, 1, glyph_h / 2 + 1),
            (0, glyph_h / 2, 1, glyph_h - glyph_h / 2),
            (glyph_w - 1, glyph_h / 2, 1, glyph_h - glyph_h / 2),
        ];
        for (i, &(sx, sy, sw, sh)) in segs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                canvas.rect(gx + sx, label_y + sy, gx + sx + sw, label_y + sy + sh, INK);
            }
        }
    }
    let desk_w = ((s.px_per_ft * rng.gen_range(4.0..6.0)) as usize).min(ix1 - ix0);
    let desk_h = (s.px_per_ft * 2.5) as usize;
    let room_for_desk = (iy1 - iy0).saturating_sub(glyph_h + desk_h + s.door);
    if room_for_desk == 0 || desk_w < 8 {
        return;
    }
    let dx = rng.gen_range(ix0..=ix1 - desk_w);
    let dy = if doors_below { iy0 + rng.gen_range(0..=room_for_desk / 2) } else { iy1 - desk_h - rng.gen_range(0..=room_for_desk / 2) };
    outline(canvas, dx, dy, dx + desk_w, dy + desk_h, 2);
}

/// Generates a plan. Room widths are chosen so every room gets exactly one
/// corridor door or stair alcove.
pub fn generate_plan(cfg: &PlanConfig) -> Result<SyntheticPlan> {
    if !(cfg.dpi > 0.0 && cfg.scale > 0.0) {
        return Err(Error::InvalidScale(format!("dpi {} scale {}", cfg.dpi, cfg.scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = Style::new(cfg.dpi, cfg.scale);
    let (w, h) = (cfg.width, cfg.height);
    let ext = s.wall + 2;
    let margin = (w.min(h) / 18).max(20);
    let (bx0, by0, bx1, by1) = (margin, margin, w - margin, h - margin);
    let rooms_wanted = (cfg.doors + cfg.stairs).max(1);
    let min_room = (s.door + 2 * s.pad + 2 * s.wall + 12).max(s.stair_width + 2 * s.wall);
    let min_depth = (2 * s.door + 3 * s.pad + s.wall).max(s.stair_length + s.door);

    let xa = bx0 + ext + s.corridor;
    let xb = bx1 - ext - s.corridor;
    if xb <= xa + min_room + 2 * s.wall {
        return Err(Error::Dimension(format!("{w}x{h} is too small for a synthetic plan")));
    }
    let row_len = xb - xa - 2 * s.wall;
    let inner_h = by1 - by0 - 2 * ext;

    // Enough cross corridors that every room fits.
    let target_depth = (25.0 * s.px_per_ft) as usize;
    let mut hc = (inner_h / (2 * target_depth + s.corridor + 2 * s.wall)).max(2);
    let rows_for = |hc: usize| 2 * hc;
    while hc < 12 {
        let depth = (inner_h.saturating_sub(hc * (s.corridor + 2 * s.wall))) / rows_for(hc);
        let capacity = rows_for(hc) * (row_len / min_room);
        if capacity >= rooms_wanted || depth < min_depth + min_depth / 2 {
            break;
        }
        hc += 1;
    }
    let depth = (inner_h.saturating_sub(hc * (s.corridor + 2 * s.wall))) / rows_for(hc);
    if depth < min_depth {
        return Err(Error::Dimension(format!("{w}x{h} cannot hold {rooms_wanted} rooms")));
    }

    let mut canvas = Canvas { img: RasterImage::filled(w, h, PAPER)? };
    // Exterior wall.
    canvas.rect(bx0, by0, bx1, by0 + ext, INK);
    canvas.rect(bx0, by1 - ext, bx1, by1, INK);
    canvas.rect(bx0, by0, bx0 + ext, by1, INK);
    canvas.rect(bx1 - ext, by0, bx1, by1, INK);

    // Horizontal corridors and the room rows between them.
    let mut rows = Vec::new();
    let mut corridors = Vec::new();
    let mut y = by0 + ext;
    for k in 0..hc {
        let top_row = Row { x0: xa + s.wall, x1: xb - s.wall, y0: y, y1: y + depth, door_wall_below: true };
        y += depth;
        rows.push(top_row);
        let cy0 = y + s.wall;
        corridors.push(cy0);
        y = cy0 + s.corridor + s.wall;
        let bottom = if k + 1 == hc { by1 - ext } else { y + depth };
        rows.push(Row { x0: xa + s.wall, x1: xb - s.wall, y0: y, y1: bottom, door_wall_below: false });
        y = bottom + if k + 1 == hc { 0 } else { s.wall };
    }

    // Room block walls: everything between the ring corridors is ink, then
    // the rooms and cross corridors are cut out.
    canvas.rect(xa, by0 + ext, xb, by1 - ext, INK);
    for &cy in &corridors {
        canvas.rect(bx0 + ext, cy, bx1 - ext, cy + s.corridor, PAPER);
    }
    for r in &rows {
        canvas.rect(r.x0, r.y0, r.x1, r.y1, PAPER);
    }

    // Distribute rooms over rows.
    let mut per_row = vec![rooms_wanted / rows.len(); rows.len()];
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(rooms_wanted % rows.len()) {
        per_row[i] += 1;
    }

    let mut stair_slots: Vec<(usize, usize)> = Vec::new();
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for (ri, &n) in per_row.iter().enumerate() {
        for j in 0..n {
            slots.push((ri, j));
        }
    }
    slots.shuffle(&mut rng);
    stair_slots.extend(slots.iter().take(cfg.stairs).copied());

    let mut truth = Vec::new();
    let mut partitions: Vec<(usize, usize, usize, usize)> = Vec::new(); // (row, x, y0, y1)
    for (ri, r) in rows.iter().enumerate() {
        let n = per_row[ri];
        if n == 0 {
            // Closed storage space.
            continue;
        }
        let len = r.x1 - r.x0;
        // Random widths with a floor, summing to the row length.
        let spare = len.saturating_sub(n * min_room + (n - 1) * s.wall);
        let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let stairs_here: Vec<usize> = stair_slots.iter().filter(|(rr, _)| *rr == ri).map(|&(_, j)| j).collect();
        for &j in &stairs_here {
            weights[j] = 0.0;
        }
        let total: f64 = weights.iter().sum::<f64>().max(1e-9);
        let mut widths: Vec<usize> = weights
            .iter()
            .map(|wt| min_room + ((spare as f64) * wt / total).floor() as usize)
            .collect();
        for &j in &stairs_here {
            widths[j] = s.stair_width;
        }
        let used: usize = widths.iter().sum::<usize>() + (n - 1) * s.wall;
        let last = (0..n).rev().find(|j| !stairs_here.contains(j));
        match last {
            Some(j) => widths[j] += len - used.min(len),
            None => {
                // Only stairs in this row: close the remainder off as a store.
                let rest = len.saturating_sub(used);
                if rest > 0 {
                    canvas.rect(r.x1 - rest, r.y0, r.x1, r.y1, INK);
                }
            }
        }

        let mut x = r.x0;
        for j in 0..n {
            let rw = widths[j];
            let (rx0, rx1) = (x, x + rw);
            if j + 1 < n {
                canvas.rect(rx1, r.y0, rx1 + s.wall, r.y1, INK);
                partitions.push((ri, rx1, r.y0, r.y1));
            }
            let wall_y = if r.door_wall_below { r.y1 } else { r.y0 - s.wall };
            if stairs_here.contains(&j) {
                // Open alcove: the corridor wall is removed and the stair sits
                // against a closet wall behind it.
                let front = s.door / 3;
                canvas.rect(rx0, wall_y, rx1, wall_y + s.wall, PAPER);
                let patch = stair_patch(s.stair_width, s.stair_length, s.tread);
                let turns = if r.door_wall_below { 0 } else { 2 };
                let (patch, sy0) = if r.door_wall_below {
                    let sy0 = r.y1 - front - s.stair_length;
                    canvas.rect(rx0, sy0 - s.wall, rx1, sy0, INK);
                    (patch, sy0)
                } else {
                    let sy0 = r.y0 + front;
                    canvas.rect(rx0, sy0 + s.stair_length, rx1, sy0 + s.stair_length + s.wall, INK);
                    (patch.rotate90(2), sy0)
                };
                canvas.rect(rx0, sy0, rx1, sy0 + s.stair_length, PAPER);
                canvas.blit_ink(&patch, rx0, sy0);
                truth.push(TruthSymbol {
                    x: rx0 as f64 + s.stair_width as f64 / 2.0,
                    y: sy0 as f64 + s.stair_length as f64 / 2.0,
                    kind: "stair".into(),
                    on_path: true,
                    rotation: turns,
                    mirrored: false,
                });
            } else {
                let jitter = if cfg.size_jitter > 0.0 { rng.gen_range(-cfg.size_jitter..=cfg.size_jitter) } else { 0.0 };
                let door = ((s.door as f64 * (1.0 + jitter)).round() as usize).clamp(3, rw.saturating_sub(2 * s.pad + 4).max(3));
                let lo = rx0 + s.pad + 2;
                let hi = (rx1 - door - s.pad - 2).max(lo);
                let ox = rng.gen_range(lo..=hi);
                let facing = if r.door_wall_below { Facing::Up } else { Facing::Down };
                let mirrored = rng.gen_bool(0.5);
                let (cx, cy) = place_door(&mut canvas, &s, door, [ox, wall_y], facing, mirrored);
                truth.push(TruthSymbol { x: cx, y: cy, kind: "door".into(), on_path: true, rotation: facing.turns(), mirrored });
                if cfg.clutter {
                    furnish(&mut canvas, &s, &mut rng, [rx0, r.y0, rx1, r.y1], r.door_wall_below);
                }
            }
            x = rx1 + s.wall;
        }
    }

    // Interior doors in partition walls, deep inside the rows.
    partitions.shuffle(&mut rng);
    let mut placed = 0;
    for &(ri, px, y0, y1) in &partitions {
        if placed >= cfg.interior_doors {
            break;
        }
        let r = &rows[ri];
        let door = s.door;
        // Keep clear of the corridor door sectors and the back wall.
        let (lo, hi) = if r.door_wall_below {
            (y0 + s.pad + 2, y1.saturating_sub(2 * door + 3 * s.pad))
        } else {
            (y0 + door + 2 * s.pad + door / 2, y1.saturating_sub(door + s.pad + 2))
        };
        if hi <= lo {
            continue;
        }
        // The swing must fit in both neighbouring rooms.
        let stair_adjacent = truth.iter().any(|t| t.kind == "stair" && (t.x - px as f64).abs() < (s.stair_width + 2 * s.wall) as f64 && t.y >= y0 as f64 && t.y <= y1 as f64);
        if stair_adjacent {
            continue;
        }
        let oy = rng.gen_range(lo..=hi);
        let facing = if rng.gen_bool(0.5) { Facing::Right } else { Facing::Left };
        let mirrored = rng.gen_bool(0.5);
        let (cx, cy) = place_door(&mut canvas, &s, door, [px, oy], facing, mirrored);
        truth.push(TruthSymbol { x: cx, y: cy, kind: "door".into(), on_path: false, rotation: facing.turns(), mirrored });
        placed += 1;
    }

    let image = canvas.img.with_dpi(Dpi::uniform(cfg.dpi));
    Ok(SyntheticPlan { image, truth, config: cfg.clone() })
}

/// Square crops of isolated symbols in canonical orientation, centred on
/// the symbol with 1.5× its size of context. Drawing resolution, symbol
/// size, placement and sensor noise vary per sample.
pub fn symbol_samples(kind: &str, n: usize, seed: u64) -> Result<Vec<RasterImage>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let dpi = if rng.gen_bool(0.5) { 200.0 } else { 100.0 };
        let st = Style::new(dpi, 1.0 / 16.0);
        let k = 1.0 + rng.gen_range(-0.06..=0.06);
        let (sym, centre, side) = match kind {
            "door" => {
                let d = ((st.door as f64 * k).round() as usize).max(4);
                let (p, rect) = door_patch(d, st.wall, st.leaf, st.pad);
                let side = (1.5 * p.width().max(p.height()) as f64).round() as usize;
                let mut c = Canvas { img: RasterImage::filled(side, side, PAPER)? };
                let (px, py) = ((side - p.width()) / 2, (side - p.height()) / 2);
                // Wall through the canvas at the door's wall rows.
                c.rect(0, py + rect[1], side, py + rect[1] + rect[3], INK);
                c.rect(px + rect[0], py + rect[1], px + rect[0] + rect[2], py + rect[1] + rect[3], PAPER);
                c.blit_ink(&p, px, py);
                (c.img, (side as f64 / 2.0, side as f64 / 2.0), side)
            }
            "stair" => {
                let w = ((st.stair_width as f64 * k).round() as usize).max(6);
                let l = ((st.stair_length as f64 * k).round() as usize).max(8);
                let p = stair_patch(w, l, st.tread);
                let side = (1.5 * l as f64).round() as usize;
                let mut c = Canvas { img: RasterImage::filled(side, side, PAPER)? };
                let (px, py) = ((side - w) / 2, (side - l) / 2);
                c.rect(px.saturating_sub(st.wall), 0, px, py + l, INK);
                c.rect(px + w, 0, px + w + st.wall, py + l, INK);
                c.rect(px, py.saturating_sub(st.wall), px + w, py, INK);
                c.blit_ink(&p, px, py);
                (c.img, (side as f64 / 2.0, side as f64 / 2.0), side)
            }
            other => return Err(Error::Invalid(format!("no synthetic symbol for kind {other:?}"))),
        };
        // Small misplacement of the crop centre.
        let (ox, oy) = (rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let shifted = RasterImage::from_fn(side, side, |x, y| {
            sym.sample_bilinear(x as f64 + ox + centre.0 - side as f64 / 2.0, y as f64 + oy + centre.1 - side as f64 / 2.0).round() as u8
        })?;
        let sigma = rng.gen_range(0.0..12.0);
        let noise = Normal::new(0.0, sigma + 1e-9).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut noisy = shifted;
        for y in 0..side {
            for x in 0..side {
                let v = noisy.get(x, y) as f64 + noise.sample(&mut rng);
                noisy.set(x, y, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        out.push(noisy.with_dpi(Dpi::uniform(dpi)));
    }
    Ok(out)
}

/// Simulates a low-resolution scan: area downsampling, faded ink and
/// Gaussian sensor noise.
pub fn degrade(img: &RasterImage, factor: usize, noise_sigma: f64, seed: u64) -> Result<RasterImage> {
    let small = img.downsample(factor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(1e-9)).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut out = small.clone();
    for y in 0..small.height() {
        for x in 0..small.width() {
            let v = 40.0 + small.get(x, y) as f64 * (215.0 / 255.0) + noise.sample(&mut rng);
            out.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

/// Ground truth scaled into a degraded image's pixel frame.
pub fn scale_truth(truth: &[TruthSymbol], factor: usize) -> Vec<TruthSymbol> {
    truth
        .iter()
        .map(|t| TruthSymbol { x: t.x / factor as f64, y: t.y / factor as f64, ..t.clone() })
        .collect()
}

/// Detection counts against ground truth with a one-to-one greedy matching
/// by distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    pub truth: usize,
    pub correct: usize,
    pub missed: usize,
    pub redundant: usize,
}

impl Recall {
    pub fn rate(&self) -> f64 {
        if self.truth == 0 {
            1.0
        } else {
            self.correct as f64 / self.truth as f64
        }
    }

    pub fn redundant_per_truth(&self) -> f64 {
        self.redundant as f64 / self.truth.max(1) as f64
    }
}

pub fn score_detections(truth: &[TruthSymbol], found: &[(f64, f64)], tolerance: f64) -> Recall {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, f) in found.iter().enumerate() {
            let d = (t.x - f.0).hypot(t.y - f.1);
            if d <= tolerance {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_f = vec![false; found.len()];
    let mut correct = 0;
    for (_, i, j) in pairs {
        if !used_t[i] && !used_f[j] {
            used_t[i] = true;
            used_f[j] = true;
            correct += 1;
        }
    }
    Recall { truth: truth.len(), correct, missed: truth.len() - correct, redundant: found.len() - correct }
}

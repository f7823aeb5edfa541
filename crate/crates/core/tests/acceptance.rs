//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beaconplan::export::to_json;
use beaconplan::imagecore::{thin, BinaryImage, Dpi, RasterImage};
use beaconplan::learn::{default_models, run_pipeline, Mode, PipelineConfig, SvmModel};
use beaconplan::pathfind::{IndoorPath, Zone, ZoneLevels};
use beaconplan::planner::{indoor_path, initial_nodes, plan_beacons, PlanSettings};
use beaconplan::project::{load_project, save_project, EditOp, PlanMeta, Project};
use beaconplan::skelgraph::{
    insert_spacers, merge_close, parse_scale, skeletonize, spacer_plan, to_physical, trace_edges, BeaconNode, Compass,
    ConnectivityGraph, Dir, Edge, NodeKind, Skeleton, SnapInput, METERS_PER_FOOT,
};
use beaconplan::synth::{degrade, generate_plan, scale_truth, score_detections, template_library, PlanConfig, Recall};
use beaconplan::learn::symbol_size_px;
use beaconplan::export::ExportFormat;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("scale arithmetic", Duration::from_secs(1), scale_arithmetic),
        ("spacer formula", Duration::from_secs(1), spacer_formula),
        ("skeleton soundness", Duration::from_secs(30), skeleton_soundness),
        ("edge-length oracle", Duration::from_secs(60), edge_length_oracle),
        ("detection recall", Duration::from_secs(600), detection_recall),
        ("pipeline ordering", Duration::from_secs(300), pipeline_ordering),
        ("merge rule", Duration::from_secs(1), merge_rule),
        ("end-to-end runtime", Duration::from_secs(60), end_to_end_runtime),
        ("determinism", Duration::from_secs(120), determinism),
        ("project round-trip", Duration::from_secs(300), project_round_trip),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => {
                Err(format!("{detail}; took {:.1} s, budget {} s", elapsed.as_secs_f64(), budget.as_secs()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2} s]", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{:.2} s]", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------

fn scale_arithmetic() -> Outcome {
    let ft = to_physical(200.0, 200.0, 1.0 / 16.0).map_err(|e| e.to_string())?;
    ensure!((ft - 16.0).abs() <= 1e-9, "200 px -> {ft} ft");
    let parsed = parse_scale("1/16\"=1'").map_err(|e| e.to_string())?;
    let ft2 = to_physical(200.0, 200.0, parsed).map_err(|e| e.to_string())?;
    ensure!((ft2 - 16.0).abs() <= 1e-9, "parsed scale gives {ft2} ft");
    Ok(format!("200 px = {ft} ft"))
}

/// Straight skeleton with a node at each end; 10 px per foot.
fn straight_graph(len_px: u32) -> (ConnectivityGraph, ZoneLevels) {
    let w = len_px as usize + 3;
    let mask = BinaryImage::from_fn(w, 3, |x, y| y == 1 && (1..=len_px as usize + 1).contains(&x));
    let skel = Skeleton::from_mask(mask);
    let levels = ZoneLevels::empty(w, 3);
    let nodes = vec![BeaconNode::new(0, 1, 1, NodeKind::Poi), BeaconNode::new(1, len_px + 1, 1, NodeKind::Poi)];
    let mut g = ConnectivityGraph::new(Compass::N, 1.0 / 16.0, Some(160.0));
    g.edges = trace_edges(&skel, &nodes, Compass::N, &levels).unwrap();
    g.nodes = nodes;
    g.apply_physical().unwrap();
    (g, levels)
}

fn spacer_formula() -> Outcome {
    let mut notes = Vec::new();
    for (y, x) in [(25.0_f64, 10.0_f64), (20.0, 10.0), (8.0, 10.0), (100.0, 33.0)] {
        let parts = (y / x).ceil();
        let want_count = (parts as usize).saturating_sub(1);
        let want_spacing = y / parts;
        let (count, spacing) = spacer_plan(y, x);
        ensure!(count == want_count, "({y},{x}): count {count}, formula {want_count}");
        ensure!(spacing == want_spacing, "({y},{x}): spacing {spacing}, formula {want_spacing}");

        let (g, levels) = straight_graph((y * 10.0) as u32);
        let out = insert_spacers(&g, x, &levels).map_err(|e| e.to_string())?;
        let spacers = out.nodes.iter().filter(|n| n.kind == NodeKind::Spacer).count();
        ensure!(spacers == want_count, "({y},{x}): inserted {spacers}, formula {want_count}");
        for e in &out.edges {
            // Spacers sit on pixels, so sub-edges are within one pixel (0.1 ft).
            ensure!(
                (e.physical_length - want_spacing).abs() <= 0.1 + 1e-9,
                "({y},{x}): sub-edge {} ft vs {want_spacing}",
                e.physical_length
            );
        }
        notes.push(format!("({y},{x})->{count}@{spacing:.3}"));
    }
    Ok(notes.join(" "))
}

// ---------------------------------------------------------------------------

fn components8(bin: &BinaryImage) -> usize {
    let (w, h) = (bin.width(), bin.height());
    let mut seen = vec![false; w * h];
    let mut count = 0;
    for start in 0..w * h {
        if seen[start] || !bin.get(start % w, start / w) {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && bin.get(nx as usize, ny as usize) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count
}

/// True when no 2x2 window is entirely foreground.
fn width_one(bin: &BinaryImage) -> bool {
    for y in 0..bin.height().saturating_sub(1) {
        for x in 0..bin.width().saturating_sub(1) {
            if bin.get(x, y) && bin.get(x + 1, y) && bin.get(x, y + 1) && bin.get(x + 1, y + 1) {
                return false;
            }
        }
    }
    true
}

fn corridor_mask(rng: &mut ChaCha8Rng) -> BinaryImage {
    let w = rng.gen_range(16..=256);
    let h = rng.gen_range(16..=256);
    let mut bin = BinaryImage::new(w, h);
    for _ in 0..rng.gen_range(1..=8) {
        let thick = rng.gen_range(3..=14).min(w.min(h));
        if rng.gen_bool(0.5) {
            let y0 = rng.gen_range(0..=h - thick);
            let x0 = rng.gen_range(0..w);
            let x1 = rng.gen_range(x0..w);
            for y in y0..y0 + thick {
                for x in x0..=x1 {
                    bin.set(x, y, true);
                }
            }
        } else {
            let x0 = rng.gen_range(0..=w - thick);
            let y0 = rng.gen_range(0..h);
            let y1 = rng.gen_range(y0..h);
            for y in y0..=y1 {
                for x in x0..x0 + thick {
                    bin.set(x, y, true);
                }
            }
        }
    }
    // Occasional room blob.
    if rng.gen_bool(0.3) {
        let (cx, cy, r) = (rng.gen_range(0..w) as i64, rng.gen_range(0..h) as i64, rng.gen_range(4..20) as i64);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    bin.set(x as usize, y as usize, true);
                }
            }
        }
    }
    bin
}

fn skeleton_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..200 {
        let bin = corridor_mask(&mut rng);
        let out = thin(&bin);
        ensure!(out.foreground().all(|(x, y)| bin.get(x, y)), "mask {i}: output leaves the input");
        let (a, b) = (components8(&bin), components8(&out));
        ensure!(a == b, "mask {i} ({}x{}): {a} components became {b}", bin.width(), bin.height());
        ensure!(thin(&out) == out, "mask {i}: not idempotent");
        ensure!(width_one(&out), "mask {i}: 2x2 block survives thinning");
    }
    Ok("200 masks".into())
}

// ---------------------------------------------------------------------------

/// Braided maze on a cell grid: 3-px corridors, every cell reachable, about a
/// tenth of the remaining walls opened to make loops.
fn maze(rng: &mut ChaCha8Rng) -> IndoorPath {
    let (cw, ch) = (rng.gen_range(6..=18), rng.gen_range(6..=18));
    let pitch = 7;
    let (w, h) = (cw * pitch + 2, ch * pitch + 2);
    let mut bin = BinaryImage::new(w, h);
    let carve = |bin: &mut BinaryImage, x0: usize, y0: usize, x1: usize, y1: usize| {
        for y in y0..=y1 {
            for x in x0..=x1 {
                bin.set(x, y, true);
            }
        }
    };
    let centre = |c: usize| 1 + c * pitch + pitch / 2;
    let mut visited = vec![false; cw * ch];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    carve(&mut bin, centre(0) - 1, centre(0) - 1, centre(0) + 1, centre(0) + 1);
    let link = |bin: &mut BinaryImage, a: (usize, usize), b: (usize, usize)| {
        let (x0, x1) = (centre(a.0).min(centre(b.0)), centre(a.0).max(centre(b.0)));
        let (y0, y1) = (centre(a.1).min(centre(b.1)), centre(a.1).max(centre(b.1)));
        carve(bin, x0 - 1, y0 - 1, x1 + 1, y1 + 1);
    };
    while let Some(&(cx, cy)) = stack.last() {
        let mut next = Vec::new();
        if cx > 0 && !visited[cy * cw + cx - 1] {
            next.push((cx - 1, cy));
        }
        if cx + 1 < cw && !visited[cy * cw + cx + 1] {
            next.push((cx + 1, cy));
        }
        if cy > 0 && !visited[(cy - 1) * cw + cx] {
            next.push((cx, cy - 1));
        }
        if cy + 1 < ch && !visited[(cy + 1) * cw + cx] {
            next.push((cx, cy + 1));
        }
        if next.is_empty() {
            stack.pop();
            continue;
        }
        let n = next[rng.gen_range(0..next.len())];
        visited[n.1 * cw + n.0] = true;
        link(&mut bin, (cx, cy), n);
        stack.push(n);
    }
    for _ in 0..(cw * ch / 10) {
        let (cx, cy) = (rng.gen_range(0..cw - 1), rng.gen_range(0..ch - 1));
        if rng.gen_bool(0.5) {
            link(&mut bin, (cx, cy), (cx + 1, cy));
        } else {
            link(&mut bin, (cx, cy), (cx, cy + 1));
        }
    }
    IndoorPath::from_mask(bin)
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Grid Dijkstra over skeleton pixels from `a` to `b` that avoids `blocked`.
fn dijkstra(mask: &BinaryImage, a: [u32; 2], b: [u32; 2], blocked: &HashSet<[u32; 2]>) -> Option<f64> {
    let w = mask.width();
    let idx = |p: [u32; 2]| p[1] as usize * w + p[0] as usize;
    let mut dist = vec![f64::INFINITY; w * mask.height()];
    let mut heap = BinaryHeap::new();
    dist[idx(a)] = 0.0;
    heap.push(Item(0.0, idx(a)));
    while let Some(Item(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let p = [(i % w) as u32, (i / w) as u32];
        if p == b {
            return Some(d);
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (p[0] as i64 + dx, p[1] as i64 + dy);
                if !mask.get_or_false(nx as isize, ny as isize) {
                    continue;
                }
                let q = [nx as u32, ny as u32];
                if blocked.contains(&q) && q != b {
                    continue;
                }
                let nd = d + if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                if nd < dist[idx(q)] {
                    dist[idx(q)] = nd;
                    heap.push(Item(nd, idx(q)));
                }
            }
        }
    }
    None
}

fn edge_length_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut edges_checked = 0;
    for m in 0..50 {
        let path = maze(&mut rng);
        let skel = skeletonize(&path).map_err(|e| e.to_string())?;
        let pixels: Vec<(usize, usize)> = skel.mask.foreground().collect();
        let pois: Vec<SnapInput> = (0..rng.gen_range(2..12))
            .map(|_| {
                let (x, y) = pixels[rng.gen_range(0..pixels.len())];
                SnapInput { x: x as f64, y: y as f64, block_class: None }
            })
            .collect();
        let nodes = initial_nodes(&skel, &pois).map_err(|e| e.to_string())?;
        let o = [Compass::N, Compass::E, Compass::S, Compass::W][m % 4];
        let levels = ZoneLevels::empty(skel.mask.width(), skel.mask.height());
        let edges = trace_edges(&skel, &nodes, o, &levels).map_err(|e| e.to_string())?;
        ensure!(!edges.is_empty(), "maze {m}: no edges");

        let at: HashMap<[u32; 2], u32> = nodes.iter().map(|n| (n.pixel(), n.id)).collect();
        let clusters = skel.junction_clusters();
        for e in &edges {
            let pa = nodes.iter().find(|n| n.id == e.a).unwrap().pixel();
            let pb = nodes.iter().find(|n| n.id == e.b).unwrap().pixel();
            let mut blocked: HashSet<[u32; 2]> =
                at.iter().filter(|(_, &id)| id != e.a && id != e.b).map(|(p, _)| *p).collect();
            for c in &clusters {
                let owners: Vec<u32> = c.iter().filter_map(|p| at.get(p).copied()).collect();
                if owners.len() == 1 && owners[0] != e.a && owners[0] != e.b {
                    blocked.extend(c.iter().copied());
                }
            }
            let want = dijkstra(&skel.mask, pa, pb, &blocked).ok_or(format!("maze {m}: {}-{} unreachable", e.a, e.b))?;
            ensure!(
                (e.pixel_length - want).abs() <= 1e-6,
                "maze {m}: edge {}-{} length {} vs Dijkstra {want}",
                e.a,
                e.b,
                e.pixel_length
            );
            ensure!(e.dir_counts.total() as usize == e.steps(), "maze {m}: dir_counts do not sum to steps");
            let walked: f64 = e
                .path
                .windows(2)
                .map(|s| {
                    let (dx, dy) = (s[1][0] as i64 - s[0][0] as i64, s[1][1] as i64 - s[0][1] as i64);
                    if dx != 0 && dy != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    }
                })
                .sum();
            ensure!((walked - e.pixel_length).abs() <= 1e-9, "maze {m}: path length differs from stored length");
            let r: Edge = e.reversed(o);
            ensure!(r.code == (e.code + 4) % 8, "maze {m}: reversed code {} for {}", r.code, e.code);
            for d in 0..8 {
                let d = Dir::from_code(d);
                ensure!(r.dir_counts.get(d.reverse()) == e.dir_counts.get(d), "maze {m}: reversed counts");
            }
            edges_checked += 1;
        }
    }
    Ok(format!("{edges_checked} edges on 50 mazes"))
}

// ---------------------------------------------------------------------------

const SCALE: f64 = 1.0 / 16.0;

fn detect(
    img: &RasterImage,
    dpi: f64,
    option: u8,
    mode: Mode,
    models: &[SvmModel],
) -> Result<Vec<(f64, f64, String)>, String> {
    let img = img.clone().with_dpi(Dpi::uniform(dpi));
    let settings = PlanSettings::new(SCALE);
    let path = indoor_path(&img, &settings).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig { option, mode, ..PipelineConfig::default() };
    let templates = template_library(dpi, SCALE);
    let cands = run_pipeline(&img, &path, &cfg, &templates, models).map_err(|e| e.to_string())?;
    Ok(cands.into_iter().map(|c| (c.x as f64 + 0.5, c.y as f64 + 0.5, c.kind)).collect())
}

fn score(truth: &[beaconplan::synth::TruthSymbol], found: &[(f64, f64, String)], dpi: f64) -> Recall {
    let pts: Vec<(f64, f64)> = found.iter().map(|f| (f.0, f.1)).collect();
    score_detections(truth, &pts, 0.6 * symbol_size_px("door", dpi, SCALE))
}

fn detection_recall() -> Outcome {
    let models = default_models();
    let mut lines = Vec::new();
    for (i, (doors, stairs)) in [(8, 2), (36, 4), (74, 6), (112, 8)].into_iter().enumerate() {
        let cfg = PlanConfig { doors, stairs, seed: 100 + i as u64, ..PlanConfig::default() };
        let plan = generate_plan(&cfg).map_err(|e| e.to_string())?;
        ensure!(plan.image.width() >= 2200 && plan.image.height() >= 3400, "plan too small");
        let truth: Vec<_> = plan.on_path().cloned().collect();
        ensure!((10..=120).contains(&truth.len()), "plan {i}: {} symbols on the path", truth.len());

        let hi = score(&truth, &detect(&plan.image, 200.0, 1, Mode::PathOnly, &[])?, 200.0);
        ensure!(
            hi.rate() >= 0.9 && hi.redundant_per_truth() <= 0.5,
            "plan {i} ({} symbols): FDM recall {:.3}, redundant/PoI {:.3}",
            truth.len(),
            hi.rate(),
            hi.redundant_per_truth()
        );

        let low = degrade(&plan.image, 2, 10.0, 7 + i as u64).map_err(|e| e.to_string())?;
        let low_truth = scale_truth(&truth, 2);
        let fdm = score(&low_truth, &detect(&low, 100.0, 1, Mode::PathOnly, &[])?, 100.0);
        let fdsml = score(&low_truth, &detect(&low, 100.0, 3, Mode::PathOnly, &models)?, 100.0);
        ensure!(
            fdsml.rate() >= fdm.rate(),
            "plan {i}: low-res FD+SML recall {:.3} below FDM {:.3}",
            fdsml.rate(),
            fdm.rate()
        );
        lines.push(format!(
            "{}: FDM {}/{} +{} | low FDM {:.2} FD+SML {:.2}",
            truth.len(),
            hi.correct,
            hi.missed,
            hi.redundant,
            fdm.rate(),
            fdsml.rate()
        ));
    }
    Ok(lines.join("; "))
}

fn pipeline_ordering() -> Outcome {
    let models = default_models();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut total_fdm, mut total_both) = (0, 0);
    for i in 0..20 {
        let width = rng.gen_range(1200..=2200);
        let height = rng.gen_range(1600..=3400);
        let cfg = PlanConfig {
            width,
            height,
            doors: rng.gen_range(8..40),
            stairs: rng.gen_range(0..4),
            seed: 200 + i,
            ..PlanConfig::default()
        };
        let plan = generate_plan(&cfg).map_err(|e| e.to_string())?;
        let (img, dpi) = if i % 2 == 0 {
            (plan.image.clone(), 200.0)
        } else {
            (degrade(&plan.image, 2, 10.0, i).map_err(|e| e.to_string())?, 100.0)
        };
        let mode = if i % 3 == 0 { Mode::FullPlan } else { Mode::PathOnly };
        let fdm = detect(&img, dpi, 1, mode, &[])?;
        let both = detect(&img, dpi, 2, mode, &models)?;
        let set: HashSet<(u64, u64, String)> = fdm.iter().map(|c| (c.0.to_bits(), c.1.to_bits(), c.2.clone())).collect();
        for c in &both {
            ensure!(
                set.contains(&(c.0.to_bits(), c.1.to_bits(), c.2.clone())),
                "plan {i}: FDM+SML candidate {:?} not in FDM output",
                c
            );
        }
        total_fdm += fdm.len();
        total_both += both.len();
    }
    Ok(format!("20 plans, FDM {total_fdm} candidates, FDM+SML {total_both}"))
}

// ---------------------------------------------------------------------------

fn merge_rule() -> Outcome {
    // 10 px per foot.
    let px_per_m = 10.0 / METERS_PER_FOOT;
    for (metres, expect) in [(1.5, 1usize), (2.5, 2)] {
        let (g, levels) = straight_graph((metres * px_per_m).round() as u32);
        let span = g.edges[0].physical_length * METERS_PER_FOOT;
        let merged = merge_close(&g, 2.0, &levels).map_err(|e| e.to_string())?;
        let pois = merged.nodes.iter().filter(|n| n.kind == NodeKind::Poi).count();
        ensure!(pois == expect, "{span:.3} m apart: {pois} nodes after merge, expected {expect}");
        let again = merge_close(&merged, 2.0, &levels).map_err(|e| e.to_string())?;
        ensure!(again == merged, "merge is not idempotent at {metres} m");
    }
    // Idempotence on a planned graph.
    let plan = generate_plan(&PlanConfig { width: 1000, height: 1300, doors: 16, stairs: 1, seed: 9, ..PlanConfig::default() })
        .map_err(|e| e.to_string())?;
    let settings = PlanSettings { dpi: Some(200.0), merge_radius_m: None, max_spacing_ft: None, ..PlanSettings::new(SCALE) };
    let out = plan_beacons(&plan.image, &settings, &template_library(200.0, SCALE), &[]).map_err(|e| e.to_string())?;
    let levels = ZoneLevels::empty(plan.image.width(), plan.image.height());
    let once = merge_close(&out.graph, 2.0, &levels).map_err(|e| e.to_string())?;
    let twice = merge_close(&once, 2.0, &levels).map_err(|e| e.to_string())?;
    ensure!(once == twice, "merge is not idempotent on a planned graph");
    Ok(format!("1.5 m merged, 2.5 m kept, planned graph {} -> {} nodes", out.graph.nodes.len(), once.nodes.len()))
}

fn end_to_end_runtime() -> Outcome {
    let plan = generate_plan(&PlanConfig { doors: 60, stairs: 4, seed: 77, ..PlanConfig::default() })
        .map_err(|e| e.to_string())?;
    let settings = PlanSettings { dpi: Some(200.0), ..PlanSettings::new(SCALE) };
    let start = Instant::now();
    let out = plan_beacons(&plan.image, &settings, &template_library(200.0, SCALE), &[]).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    ensure!(out.graph.is_connected(), "graph is not connected");
    ensure!(out.graph.nodes.len() > 40, "only {} beacons", out.graph.nodes.len());
    Ok(format!(
        "{}x{} in {secs:.2} s ({} beacons, {} edges)",
        plan.image.width(),
        plan.image.height(),
        out.graph.nodes.len(),
        out.graph.edges.len()
    ))
}

fn determinism() -> Outcome {
    let plan = generate_plan(&PlanConfig { doors: 30, stairs: 3, seed: 5, ..PlanConfig::default() })
        .map_err(|e| e.to_string())?;
    let models = default_models();
    let mut sizes = Vec::new();
    for option in [1u8, 3] {
        let run = || -> Result<String, String> {
            let settings = PlanSettings {
                dpi: Some(200.0),
                orientation: Compass::E,
                pipeline: PipelineConfig { option, seed: 42, ..PipelineConfig::default() },
                ..PlanSettings::new(SCALE)
            };
            let out = plan_beacons(&plan.image, &settings, &template_library(200.0, SCALE), &models)
                .map_err(|e| e.to_string())?;
            to_json(&out.graph).map_err(|e| e.to_string())
        };
        let (a, b) = (run()?, run()?);
        ensure!(a.as_bytes() == b.as_bytes(), "option {option}: exports differ");
        sizes.push(format!("option {option}: {} bytes", a.len()));
    }
    Ok(sizes.join(", "))
}

fn project_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..20 {
        let (w, h) = (rng.gen_range(800..=1200), rng.gen_range(1000..=1400));
        let cfg = PlanConfig { width: w, height: h, doors: rng.gen_range(6..14), stairs: rng.gen_range(0..2), seed: 300 + i, ..PlanConfig::default() };
        let plan = generate_plan(&cfg).map_err(|e| e.to_string())?;
        let mut p = Project::new(format!("r{i}"));
        p.set_plan(plan.image, Some(format!("plan{i}.png")));
        let o = [Compass::N, Compass::E, Compass::S, Compass::W][rng.gen_range(0..4)];
        p.set_meta(PlanMeta { dpi: Some(200.0), scale: Some(SCALE), map_orientation: o }).map_err(|e| e.to_string())?;
        let mut zones = Vec::new();
        for _ in 0..rng.gen_range(0..3) {
            let (x, y) = (rng.gen_range(0.0..w as f64 - 60.0), rng.gen_range(0.0..h as f64 - 60.0));
            zones.push(Zone::rect(x, y, x + 50.0, y + 50.0, rng.gen_range(1..4)));
        }
        p.set_zones(zones).map_err(|e| e.to_string())?;
        if rng.gen_bool(0.5) {
            p.set_models(default_models()).map_err(|e| e.to_string())?;
        }
        if rng.gen_bool(0.5) {
            p.options.pipeline.mode = Mode::FullPlan;
        }
        p.detect().map_err(|e| e.to_string())?;
        let g = p.graph().unwrap().clone();
        let mut ops = Vec::new();
        if g.nodes.len() > 3 {
            ops.push(EditOp::RelabelBeacon { id: g.nodes[0].id, label: format!("Room {i}") });
            ops.push(EditOp::RemoveBeacon { id: g.nodes[rng.gen_range(1..g.nodes.len())].id });
        }
        let skel = &p.results.as_ref().unwrap().skeleton;
        let taken: HashSet<[u32; 2]> = g.nodes.iter().map(|n| n.pixel()).collect();
        let free: Vec<(usize, usize)> =
            skel.mask.foreground().filter(|&(x, y)| !taken.contains(&[x as u32, y as u32])).collect();
        let (x, y) = free[rng.gen_range(0..free.len())];
        ops.push(EditOp::AddBeacon { x: x as i64, y: y as i64, label: "Kiosk".into(), block_class: None });
        p.apply_edits(&ops).map_err(|e| format!("project {i}: {e}"))?;

        let dir = root.path().join(&p.id);
        let before = p.export(ExportFormat::JsonAdjacency).map_err(|e| e.to_string())?;
        save_project(&p, &dir).map_err(|e| e.to_string())?;
        let back = load_project(&dir).map_err(|e| e.to_string())?;
        let after = back.export(ExportFormat::JsonAdjacency).map_err(|e| e.to_string())?;
        ensure!(after == before, "project {i}: export changed after round trip");
        ensure!(back == p, "project {i}: loaded project differs");
        ensure!(back.replay().map_err(|e| e.to_string())? == *back.graph().unwrap(), "project {i}: replay differs");
    }
    Ok("20 projects".into())
}

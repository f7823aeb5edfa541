//! End-to-end beacon planning: indoor path, detection, skeleton mapping and
//! graph construction, with a wall-clock breakdown per phase.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detect::{MatchCandidate, Template};
use crate::error::{Error, Result};
use crate::imagecore::{binarize, distance_transform, RasterImage, Threshold};
use crate::learn::{run_pipeline, PipelineConfig, SvmModel};
use crate::pathfind::{find_indoor_path, IndoorPath, Zone, ZoneLevels};
use crate::skelgraph::{
    find_intersections, insert_spacers, map_to_skeleton, merge_close, prune_spurs, skeletonize, to_physical,
    trace_edges, BeaconNode, Compass, ConnectivityGraph, Skeleton, SnapInput,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSettings {
    /// Overrides the DPI stored in the image.
    pub dpi: Option<f64>,
    /// Drawing inches per physical foot.
    pub scale: f64,
    pub orientation: Compass,
    pub threshold: Threshold,
    pub zones: Vec<Zone>,
    /// Zones at or above this level are not walkable.
    pub zone_cutoff: u32,
    pub pipeline: PipelineConfig,
    /// Spur branches up to the corridor half-width plus this many feet are
    /// pruned from the skeleton.
    pub spur_extra_ft: f64,
    /// PoIs closer than this along the path share one beacon.
    pub merge_radius_m: Option<f64>,
    /// Largest gap between consecutive beacons before spacers are added.
    pub max_spacing_ft: Option<f64>,
}

impl PlanSettings {
    pub fn new(scale: f64) -> Self {
        Self {
            dpi: None,
            scale,
            orientation: Compass::N,
            threshold: Threshold::default(),
            zones: Vec::new(),
            zone_cutoff: 1,
            pipeline: PipelineConfig::default(),
            spur_extra_ft: 4.0,
            merge_radius_m: Some(2.0),
            max_spacing_ft: Some(30.0),
        }
    }

    /// DPI from the override or the image, validated.
    pub fn resolve_dpi(&self, img: &RasterImage) -> Result<f64> {
        let dpi = match self.dpi {
            Some(d) => d,
            None => img.dpi.ok_or(Error::MissingDpi)?.x,
        };
        to_physical(0.0, dpi, self.scale)?;
        Ok(dpi)
    }
}

/// Milliseconds spent in each phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub indoor_path_ms: f64,
    pub detection_ms: f64,
    pub mapping_ms: f64,
    pub graph_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug)]
pub struct PlanOutput {
    pub dpi: f64,
    pub path: IndoorPath,
    pub skeleton: Skeleton,
    pub candidates: Vec<MatchCandidate>,
    pub graph: ConnectivityGraph,
    pub timings: PhaseTimings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Walkable area of the plan after masking restricted zones.
pub fn indoor_path(img: &RasterImage, settings: &PlanSettings) -> Result<IndoorPath> {
    let bin = binarize(img, settings.threshold);
    find_indoor_path(&bin, &settings.zones, settings.zone_cutoff)
}

/// Skeleton of the path with door recesses and corner spurs pruned.
pub fn path_skeleton(path: &IndoorPath, dpi: f64, settings: &PlanSettings) -> Result<Skeleton> {
    let skel = skeletonize(path)?;
    let clearance = distance_transform(&path.mask.invert());
    let px_per_ft = dpi * settings.scale;
    Ok(prune_spurs(&skel, &clearance, settings.spur_extra_ft * px_per_ft))
}

/// Snapped PoIs plus one intersection per junction cluster. PoIs that land on
/// the same pixel become one node (labels joined); an intersection whose
/// junction cluster already holds a PoI is left out.
pub fn initial_nodes(skel: &Skeleton, pois: &[SnapInput]) -> Result<Vec<BeaconNode>> {
    let snapped = map_to_skeleton(pois, skel, 0)?;
    let mut nodes: Vec<BeaconNode> = Vec::new();
    let mut at: HashMap<[u32; 2], usize> = HashMap::new();
    for n in snapped {
        match at.get(&n.pixel()) {
            Some(&i) => {
                let keep = &mut nodes[i];
                if keep.block_class.is_none() {
                    keep.block_class = n.block_class.clone();
                }
            }
            None => {
                at.insert(n.pixel(), nodes.len());
                nodes.push(BeaconNode { id: nodes.len() as u32, ..n });
            }
        }
    }
    let clusters = skel.junction_clusters();
    let inters = find_intersections(skel, 0);
    for (cluster, node) in clusters.iter().zip(inters) {
        if cluster.iter().any(|p| at.contains_key(p)) {
            continue;
        }
        at.insert(node.pixel(), nodes.len());
        nodes.push(BeaconNode { id: nodes.len() as u32, ..node });
    }
    Ok(nodes)
}

/// Traces edges between fixed nodes and fills in physical lengths.
pub fn regenerate(
    skel: &Skeleton,
    nodes: Vec<BeaconNode>,
    orientation: Compass,
    scale: f64,
    dpi: f64,
    levels: &ZoneLevels,
) -> Result<ConnectivityGraph> {
    let edges = trace_edges(skel, &nodes, orientation, levels)?;
    let mut g = ConnectivityGraph::new(orientation, scale, Some(dpi));
    g.nodes = nodes;
    g.edges = edges;
    g.apply_physical()?;
    Ok(g)
}

/// Phases 3 and 4 from PoI sites: snap, add intersections, trace, convert
/// to feet, merge close PoIs and insert spacers.
pub fn build_graph(
    skel: &Skeleton,
    pois: &[SnapInput],
    settings: &PlanSettings,
    dpi: f64,
    levels: &ZoneLevels,
) -> Result<ConnectivityGraph> {
    let nodes = initial_nodes(skel, pois)?;
    let mut g = regenerate(skel, nodes, settings.orientation, settings.scale, dpi, levels)?;
    if let Some(r) = settings.merge_radius_m {
        g = merge_close(&g, r, levels)?;
    }
    if let Some(x) = settings.max_spacing_ft {
        g = insert_spacers(&g, x, levels)?;
    }
    Ok(g)
}

pub fn zone_levels(img: &RasterImage, settings: &PlanSettings) -> ZoneLevels {
    ZoneLevels::new(img.width(), img.height(), &settings.zones, settings.zone_cutoff)
}

pub fn snap_inputs(cands: &[MatchCandidate]) -> Vec<SnapInput> {
    cands
        .iter()
        .map(|c| SnapInput { x: c.x as f64, y: c.y as f64, block_class: Some(c.kind.clone()) })
        .collect()
}

/// Runs all four phases.
pub fn plan_beacons(
    img: &RasterImage,
    settings: &PlanSettings,
    templates: &[Template],
    models: &[SvmModel],
) -> Result<PlanOutput> {
    let start = Instant::now();
    let dpi = settings.resolve_dpi(img)?;
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let path = indoor_path(img, settings)?;
    timings.indoor_path_ms = ms(t);

    let t = Instant::now();
    let mut plan = img.clone();
    plan.dpi = Some(crate::imagecore::Dpi::uniform(dpi));
    let candidates = run_pipeline(&plan, &path, &settings.pipeline, templates, models)?;
    timings.detection_ms = ms(t);

    let t = Instant::now();
    let skeleton = path_skeleton(&path, dpi, settings)?;
    let levels = zone_levels(img, settings);
    let pois = snap_inputs(&candidates);
    let nodes = initial_nodes(&skeleton, &pois)?;
    timings.mapping_ms = ms(t);

    let t = Instant::now();
    let mut graph = regenerate(&skeleton, nodes, settings.orientation, settings.scale, dpi, &levels)?;
    if let Some(r) = settings.merge_radius_m {
        graph = merge_close(&graph, r, &levels)?;
    }
    if let Some(x) = settings.max_spacing_ft {
        graph = insert_spacers(&graph, x, &levels)?;
    }
    timings.graph_ms = ms(t);
    timings.total_ms = ms(start);
    log::info!(
        "planned {} beacons and {} edges from {} candidates in {:.0} ms",
        graph.nodes.len(),
        graph.edges.len(),
        candidates.len(),
        timings.total_ms
    );
    Ok(PlanOutput { dpi, path, skeleton, candidates, graph, timings })
}

//! Persisted planning sessions.
//!
//! A project bundles the floor plan, its metadata, restricted zones, pipeline
//! options, templates, models, detection results and the edit log. Manual
//! edits are event-sourced: the graph produced by detection is kept as the
//! base, and the current graph is the base with every logged edit replayed.
//!
//! On disk a project is a directory:
//!
//! ```text
//! manifest.json        schema, version, SHA-256 of every payload
//! blobs/<sha256>.png   plan raster, skeleton mask, template patches
//! blobs/<sha256>.json  the project document
//! .lock                present while a writer holds the archive
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detect::{MatchCandidate, Template};
use crate::error::{Error, Result};
use crate::export::{export_graph, ExportFormat};
use crate::imagecore::{BinaryImage, Dpi, RasterImage, Threshold};
use crate::learn::{PipelineConfig, SvmModel};
use crate::pathfind::{validate_zones, Zone, ZoneLevels};
use crate::planner::{plan_beacons, regenerate, PhaseTimings, PlanSettings};
use crate::skelgraph::{
    nearest_skeleton_pixel, to_physical, BeaconNode, Compass, ConnectivityGraph, NodeKind, Origin, Skeleton,
};
use crate::synth::template_library;

pub const SCHEMA: &str = "beaconplan-project";
pub const VERSION: u32 = 1;

/// Scale and orientation of the floor plan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    /// Overrides the DPI stored in the raster.
    pub dpi: Option<f64>,
    /// Drawing inches per foot.
    pub scale: Option<f64>,
    pub map_orientation: Compass,
}

impl PlanMeta {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.dpi {
            to_physical(0.0, d, 1.0)?;
        }
        if let Some(s) = self.scale {
            to_physical(0.0, 1.0, s)?;
        }
        Ok(())
    }
}

/// Pipeline options other than metadata and zones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub threshold: Threshold,
    pub zone_cutoff: u32,
    pub pipeline: PipelineConfig,
    pub spur_extra_ft: f64,
    pub merge_radius_m: Option<f64>,
    pub max_spacing_ft: Option<f64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        let s = PlanSettings::new(1.0);
        Self {
            threshold: s.threshold,
            zone_cutoff: s.zone_cutoff,
            pipeline: s.pipeline,
            spur_extra_ft: s.spur_extra_ft,
            merge_radius_m: s.merge_radius_m,
            max_spacing_ft: s.max_spacing_ft,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    RemoveBeacon {
        id: u32,
    },
    AddBeacon {
        x: i64,
        y: i64,
        #[serde(default)]
        label: String,
        #[serde(default)]
        block_class: Option<String>,
    },
    RelabelBeacon {
        id: u32,
        label: String,
    },
    MoveBeacon {
        id: u32,
        x: i64,
        y: i64,
    },
}

impl EditOp {
    pub fn is_structural(&self) -> bool {
        !matches!(self, EditOp::RelabelBeacon { .. })
    }
}

/// Output of the last detection run.
#[derive(Clone, Debug, PartialEq)]
pub struct Results {
    pub dpi: f64,
    pub candidates: Vec<MatchCandidate>,
    pub skeleton: Skeleton,
    /// Graph as produced by detection, before any edit.
    pub base: ConnectivityGraph,
    /// Base graph with the edit log applied.
    pub graph: ConnectivityGraph,
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Project {
    pub id: String,
    pub created: u64,
    pub updated: u64,
    /// File name the plan was uploaded as.
    pub source: Option<String>,
    pub plan: Option<RasterImage>,
    pub meta: PlanMeta,
    pub zones: Vec<Zone>,
    pub options: PlanOptions,
    /// Custom template library; the built-in door and stair symbols are used
    /// when absent.
    pub templates: Option<Vec<Template>>,
    pub models: Vec<SvmModel>,
    pub results: Option<Results>,
    pub edits: Vec<EditOp>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Project {
    pub fn new(id: impl Into<String>) -> Self {
        let t = now();
        Self {
            id: id.into(),
            created: t,
            updated: t,
            source: None,
            plan: None,
            meta: PlanMeta::default(),
            zones: Vec::new(),
            options: PlanOptions::default(),
            templates: None,
            models: Vec::new(),
            results: None,
            edits: Vec::new(),
        }
    }

    fn touch(&mut self) {
        self.updated = now().max(self.updated);
    }

    fn invalidate(&mut self) {
        self.results = None;
        self.edits.clear();
    }

    /// Replaces the floor plan and drops prior results.
    pub fn set_plan(&mut self, plan: RasterImage, source: Option<String>) {
        if self.meta.dpi.is_none() {
            self.meta.dpi = plan.dpi.map(|d| d.x);
        }
        self.plan = Some(plan);
        self.source = source;
        self.invalidate();
        self.touch();
    }

    /// Validates and stores metadata. Results are dropped if anything changed.
    pub fn set_meta(&mut self, meta: PlanMeta) -> Result<()> {
        meta.validate()?;
        if meta != self.meta {
            self.meta = meta;
            self.invalidate();
        }
        self.touch();
        Ok(())
    }

    /// Validates and stores restricted zones. Results are dropped if they
    /// changed; rerun detection to apply them.
    pub fn set_zones(&mut self, zones: Vec<Zone>) -> Result<()> {
        if let Some(p) = &self.plan {
            validate_zones(&zones, p.width(), p.height())?;
        }
        if zones != self.zones {
            self.zones = zones;
            self.invalidate();
        }
        self.touch();
        Ok(())
    }

    pub fn set_models(&mut self, models: Vec<SvmModel>) -> Result<()> {
        for m in &models {
            m.validate()?;
        }
        self.models = models;
        self.touch();
        Ok(())
    }

    pub fn settings(&self) -> Result<PlanSettings> {
        let scale = self.meta.scale.ok_or_else(|| Error::InvalidScale("scale is not set".into()))?;
        let o = &self.options;
        Ok(PlanSettings {
            dpi: self.meta.dpi,
            scale,
            orientation: self.meta.map_orientation,
            threshold: o.threshold,
            zones: self.zones.clone(),
            zone_cutoff: o.zone_cutoff,
            pipeline: o.pipeline.clone(),
            spur_extra_ft: o.spur_extra_ft,
            merge_radius_m: o.merge_radius_m,
            max_spacing_ft: o.max_spacing_ft,
        })
    }

    /// Checks everything detection needs with `pipeline` before running it.
    pub fn check_ready(&self, pipeline: &PipelineConfig) -> Result<()> {
        let plan = self.plan.as_ref().ok_or(Error::NoFloorPlan)?;
        pipeline.validate()?;
        let settings = self.settings()?;
        settings.resolve_dpi(plan)?;
        if pipeline.option >= 2 && self.models.is_empty() {
            return Err(Error::ModelRequired(pipeline.option));
        }
        Ok(())
    }

    /// Runs the full pipeline, replacing results and clearing the edit log.
    pub fn detect(&mut self) -> Result<PhaseTimings> {
        let plan = self.plan.as_ref().ok_or(Error::NoFloorPlan)?;
        let settings = self.settings()?;
        let dpi = settings.resolve_dpi(plan)?;
        let builtin;
        let templates = match &self.templates {
            Some(t) => t.as_slice(),
            None => {
                builtin = template_library(dpi, settings.scale);
                builtin.as_slice()
            }
        };
        let out = plan_beacons(plan, &settings, templates, &self.models)?;
        self.results = Some(Results {
            dpi: out.dpi,
            candidates: out.candidates,
            skeleton: out.skeleton,
            base: out.graph.clone(),
            graph: out.graph,
            timings: out.timings,
        });
        self.edits.clear();
        self.touch();
        Ok(out.timings)
    }

    pub fn graph(&self) -> Result<&ConnectivityGraph> {
        self.results.as_ref().map(|r| &r.graph).ok_or(Error::NoGraph)
    }

    fn levels(&self) -> Result<ZoneLevels> {
        let plan = self.plan.as_ref().ok_or(Error::NoFloorPlan)?;
        Ok(ZoneLevels::new(plan.width(), plan.height(), &self.zones, self.options.zone_cutoff))
    }

    /// Applies edits in order, all or nothing, and appends them to the log.
    pub fn apply_edits(&mut self, ops: &[EditOp]) -> Result<()> {
        let levels = self.levels()?;
        let results = self.results.as_ref().ok_or(Error::NoGraph)?;
        let mut graph = results.graph.clone();
        for op in ops {
            graph = apply_edit(&graph, &results.skeleton, &levels, op)?;
        }
        self.results.as_mut().unwrap().graph = graph;
        self.edits.extend_from_slice(ops);
        self.touch();
        Ok(())
    }

    /// The base graph with the whole edit log applied.
    pub fn replay(&self) -> Result<ConnectivityGraph> {
        let levels = self.levels()?;
        let results = self.results.as_ref().ok_or(Error::NoGraph)?;
        let mut graph = results.base.clone();
        for op in &self.edits {
            graph = apply_edit(&graph, &results.skeleton, &levels, op)?;
        }
        Ok(graph)
    }

    /// Drops the last `n` edits and rebuilds the graph.
    pub fn undo(&mut self, n: usize) -> Result<()> {
        let keep = self.edits.len().saturating_sub(n);
        self.edits.truncate(keep);
        let graph = self.replay()?;
        self.results.as_mut().ok_or(Error::NoGraph)?.graph = graph;
        self.touch();
        Ok(())
    }

    pub fn export(&self, format: ExportFormat) -> Result<String> {
        export_graph(self.graph()?, format)
    }
}

fn snap(skel: &Skeleton, x: i64, y: i64) -> Result<[u32; 2]> {
    let (w, h) = (skel.mask.width() as i64, skel.mask.height() as i64);
    if x < 0 || y < 0 || x >= w || y >= h {
        return Err(Error::OffPlan { x, y });
    }
    nearest_skeleton_pixel(skel, x as f64 + 0.5, y as f64 + 0.5).ok_or(Error::EmptySkeleton)
}

fn occupied(g: &ConnectivityGraph, p: [u32; 2], except: Option<u32>) -> Result<()> {
    match g.nodes.iter().find(|n| n.pixel() == p && Some(n.id) != except) {
        Some(n) => Err(Error::Occupied { id: n.id, x: p[0], y: p[1] }),
        None => Ok(()),
    }
}

/// One edit against a graph. Structural edits re-trace every edge over the
/// updated node set; spacers and merges are not re-run, so manual removals
/// stick.
pub fn apply_edit(g: &ConnectivityGraph, skel: &Skeleton, levels: &ZoneLevels, op: &EditOp) -> Result<ConnectivityGraph> {
    let mut nodes = g.nodes.clone();
    let index = |id: u32| nodes.iter().position(|n| n.id == id).ok_or(Error::UnknownNode(id));
    match op {
        EditOp::RemoveBeacon { id } => {
            let i = index(*id)?;
            nodes.remove(i);
        }
        EditOp::AddBeacon { x, y, label, block_class } => {
            let p = snap(skel, *x, *y)?;
            occupied(g, p, None)?;
            let mut n = BeaconNode::new(g.next_id(), p[0], p[1], NodeKind::Poi);
            n.label = label.clone();
            n.block_class = block_class.clone();
            n.origin = Origin::Manual;
            nodes.push(n);
        }
        EditOp::RelabelBeacon { id, label } => {
            if label.trim().is_empty() {
                return Err(Error::Invalid("label must not be empty".into()));
            }
            let mut out = g.clone();
            out.node_mut(*id).ok_or(Error::UnknownNode(*id))?.label = label.clone();
            return Ok(out);
        }
        EditOp::MoveBeacon { id, x, y } => {
            let i = index(*id)?;
            let p = snap(skel, *x, *y)?;
            occupied(g, p, Some(*id))?;
            nodes[i].x = p[0];
            nodes[i].y = p[1];
        }
    }
    let dpi = g.dpi.ok_or(Error::MissingDpi)?;
    regenerate(skel, nodes, g.map_orientation, g.scale, dpi, levels)
}

// ---------------------------------------------------------------------------
// Archive

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema: String,
    version: u32,
    project_id: String,
    document: String,
    /// Payload file name to SHA-256.
    files: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct TemplateDoc {
    id: String,
    kind: String,
    group: u32,
    physical_hint: Option<f64>,
    patch: String,
}

#[derive(Serialize, Deserialize)]
struct ResultsDoc {
    dpi: f64,
    candidates: Vec<MatchCandidate>,
    skeleton: String,
    base: ConnectivityGraph,
    graph: ConnectivityGraph,
    timings: PhaseTimings,
}

#[derive(Serialize, Deserialize)]
struct RasterDoc {
    blob: String,
    dpi: Option<Dpi>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    id: String,
    created: u64,
    updated: u64,
    source: Option<String>,
    plan: Option<RasterDoc>,
    meta: PlanMeta,
    zones: Vec<Zone>,
    options: PlanOptions,
    templates: Option<Vec<TemplateDoc>>,
    models: Vec<SvmModel>,
    results: Option<ResultsDoc>,
    edits: Vec<EditOp>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct BlobWriter {
    files: BTreeMap<String, String>,
    payloads: Vec<(String, Vec<u8>)>,
}

impl BlobWriter {
    fn add(&mut self, bytes: Vec<u8>, ext: &str) -> String {
        let sha = sha256_hex(&bytes);
        let name = format!("{sha}.{ext}");
        if self.files.insert(name.clone(), sha).is_none() {
            self.payloads.push((name.clone(), bytes));
        }
        name
    }
}

/// Exclusive writer lock on an archive directory, released on drop.
#[derive(Debug)]
pub struct ArchiveLock {
    path: PathBuf,
}

impl ArchiveLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for ArchiveLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes the project under `dir`. Payloads are written first and the
/// manifest is swapped in by rename, so readers see either the previous or
/// the new snapshot. Payloads no longer referenced are removed afterwards.
pub fn save_project(p: &Project, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let _lock = ArchiveLock::acquire(dir)?;
    let mut blobs = BlobWriter { files: BTreeMap::new(), payloads: Vec::new() };

    let plan = match &p.plan {
        Some(img) => Some(RasterDoc { blob: blobs.add(img.encode_png()?, "png"), dpi: img.dpi }),
        None => None,
    };
    let templates = match &p.templates {
        Some(ts) => {
            let mut docs = Vec::with_capacity(ts.len());
            for t in ts {
                docs.push(TemplateDoc {
                    id: t.id.clone(),
                    kind: t.kind.clone(),
                    group: t.group,
                    physical_hint: t.physical_hint,
                    patch: blobs.add(t.patch.encode_png()?, "png"),
                });
            }
            Some(docs)
        }
        None => None,
    };
    let results = match &p.results {
        Some(r) => Some(ResultsDoc {
            dpi: r.dpi,
            candidates: r.candidates.clone(),
            skeleton: blobs.add(r.skeleton.mask.to_mask_raster().encode_png()?, "png"),
            base: r.base.clone(),
            graph: r.graph.clone(),
            timings: r.timings,
        }),
        None => None,
    };
    let doc = Document {
        id: p.id.clone(),
        created: p.created,
        updated: p.updated,
        source: p.source.clone(),
        plan,
        meta: p.meta.clone(),
        zones: p.zones.clone(),
        options: p.options.clone(),
        templates,
        models: p.models.clone(),
        results,
        edits: p.edits.clone(),
    };
    let document = blobs.add(serde_json::to_vec_pretty(&doc)?, "json");

    let blob_dir = dir.join("blobs");
    fs::create_dir_all(&blob_dir)?;
    for (name, bytes) in &blobs.payloads {
        let target = blob_dir.join(name);
        if target.exists() && sha256_hex(&fs::read(&target)?) == blobs.files[name] {
            continue;
        }
        write_atomic(&target, bytes)?;
    }
    let manifest =
        Manifest { schema: SCHEMA.into(), version: VERSION, project_id: p.id.clone(), document, files: blobs.files };
    write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;

    let keep: HashSet<&String> = manifest.files.keys().collect();
    for entry in fs::read_dir(&blob_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !keep.contains(&name) {
            let _ = fs::remove_file(entry.path());
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a project, verifying every payload against the manifest.
pub fn load_project(dir: impl AsRef<Path>) -> Result<Project> {
    let dir = dir.as_ref();
    let manifest_bytes = fs::read(dir.join("manifest.json"))?;
    let manifest: Manifest =
        serde_json::from_slice(&manifest_bytes).map_err(|e| Error::Integrity(format!("manifest: {e}")))?;
    if manifest.schema != SCHEMA {
        return Err(Error::Integrity(format!("unknown schema {:?}", manifest.schema)));
    }
    if manifest.version > VERSION {
        return Err(Error::Integrity(format!("unsupported version {}", manifest.version)));
    }
    let read = |name: &str| -> Result<Vec<u8>> {
        let expected = manifest.files.get(name).ok_or_else(|| Error::Integrity(format!("{name} is not listed")))?;
        let bytes = fs::read(dir.join("blobs").join(name)).map_err(|e| Error::Integrity(format!("{name}: {e}")))?;
        if &sha256_hex(&bytes) != expected {
            return Err(Error::Integrity(format!("{name} does not match its checksum")));
        }
        Ok(bytes)
    };
    let image = |name: &str| -> Result<RasterImage> {
        RasterImage::decode(&read(name)?).map_err(|e| Error::Integrity(format!("{name}: {e}")))
    };
    let doc: Document =
        serde_json::from_slice(&read(&manifest.document)?).map_err(|e| Error::Integrity(format!("document: {e}")))?;
    if doc.id != manifest.project_id {
        return Err(Error::Integrity("project id does not match the manifest".into()));
    }

    let plan = match doc.plan {
        Some(r) => {
            let mut img = image(&r.blob)?;
            img.dpi = r.dpi;
            Some(img)
        }
        None => None,
    };
    let templates = match doc.templates {
        Some(ts) => {
            let mut out = Vec::with_capacity(ts.len());
            for t in ts {
                out.push(Template {
                    patch: image(&t.patch)?,
                    id: t.id,
                    kind: t.kind,
                    group: t.group,
                    physical_hint: t.physical_hint,
                });
            }
            Some(out)
        }
        None => None,
    };
    let results = match doc.results {
        Some(r) => {
            let mask: BinaryImage = BinaryImage::from_mask_raster(&image(&r.skeleton)?);
            Some(Results {
                dpi: r.dpi,
                candidates: r.candidates,
                skeleton: Skeleton::from_mask(mask),
                base: r.base,
                graph: r.graph,
                timings: r.timings,
            })
        }
        None => None,
    };
    Ok(Project {
        id: doc.id,
        created: doc.created,
        updated: doc.updated,
        source: doc.source,
        plan,
        meta: doc.meta,
        zones: doc.zones,
        options: doc.options,
        templates,
        models: doc.models,
        results,
        edits: doc.edits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::to_json;
    use crate::synth::{generate_plan, PlanConfig};

    fn small_project(seed: u64) -> Project {
        let plan = generate_plan(&PlanConfig {
            width: 800,
            height: 1000,
            doors: 8,
            stairs: 0,
            interior_doors: 1,
            seed,
            ..PlanConfig::default()
        })
        .unwrap();
        let mut p = Project::new(format!("p{seed}"));
        p.set_plan(plan.image, Some("plan.png".into()));
        p.set_meta(PlanMeta { dpi: Some(200.0), scale: Some(1.0 / 16.0), map_orientation: Compass::N }).unwrap();
        p.detect().unwrap();
        p
    }

    fn corridor_pixel(p: &Project) -> [u32; 2] {
        let r = p.results.as_ref().unwrap();
        let taken: HashSet<[u32; 2]> = r.graph.nodes.iter().map(|n| n.pixel()).collect();
        // A skeleton pixel well away from existing nodes.
        r.skeleton
            .mask
            .foreground()
            .map(|(x, y)| [x as u32, y as u32])
            .filter(|q| !taken.contains(q))
            .max_by_key(|q| {
                r.graph
                    .nodes
                    .iter()
                    .map(|n| (n.x as i64 - q[0] as i64).pow(2) + (n.y as i64 - q[1] as i64).pow(2))
                    .min()
                    .unwrap()
            })
            .unwrap()
    }

    #[test]
    fn empty_project_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::new("empty");
        save_project(&p, dir.path()).unwrap();
        let back = load_project(dir.path()).unwrap();
        assert_eq!(back, p);
        assert!(back.zones.is_empty());
        assert!(back.results.is_none());
    }

    #[test]
    fn detected_project_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = small_project(2);
        p.zones = vec![
            Zone::rect(0.0, 0.0, 30.0, 30.0, 1),
            Zone::rect(40.0, 0.0, 60.0, 30.0, 2),
            Zone::new(vec![[100.0, 100.0], [140.0, 100.0], [120.0, 140.0]], 3),
        ];
        p.templates = Some(template_library(200.0, 1.0 / 16.0));
        p.models = crate::learn::default_models();
        let target = corridor_pixel(&p);
        p.apply_edits(&[EditOp::AddBeacon { x: target[0] as i64, y: target[1] as i64, label: "Kiosk".into(), block_class: None }])
            .unwrap();
        save_project(&p, dir.path()).unwrap();
        let back = load_project(dir.path()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.export(ExportFormat::JsonAdjacency).unwrap(), p.export(ExportFormat::JsonAdjacency).unwrap());
        // Saving twice keeps one copy of each payload.
        save_project(&back, dir.path()).unwrap();
        let blobs = fs::read_dir(dir.path().join("blobs")).unwrap().count();
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(blobs, manifest.files.len());
    }

    #[test]
    fn corrupted_archive_fails_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Project::new("c");
        p.set_plan(RasterImage::filled(20, 20, 255).unwrap(), None);
        save_project(&p, dir.path()).unwrap();
        let blob = fs::read_dir(dir.path().join("blobs"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().unwrap() == "png")
            .unwrap();
        let mut bytes = fs::read(&blob).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load_project(dir.path()), Err(Error::Integrity(_))));

        fs::write(dir.path().join("manifest.json"), b"{not json").unwrap();
        assert!(matches!(load_project(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn lock_excludes_second_writer() {
        let dir = tempfile::tempdir().unwrap();
        let lock = ArchiveLock::acquire(dir.path()).unwrap();
        assert!(matches!(save_project(&Project::new("x"), dir.path()), Err(Error::Locked(_))));
        drop(lock);
        save_project(&Project::new("x"), dir.path()).unwrap();
        assert!(!dir.path().join(".lock").exists());
    }

    #[test]
    fn relabel_keeps_topology() {
        let mut p = small_project(3);
        let before = p.graph().unwrap().clone();
        let id = before.nodes[0].id;
        p.apply_edits(&[EditOp::RelabelBeacon { id, label: "Office 214".into() }]).unwrap();
        let after = p.graph().unwrap();
        assert_eq!(after.node(id).unwrap().label, "Office 214");
        assert_eq!(after.edges, before.edges);
        assert!(p.apply_edits(&[EditOp::RelabelBeacon { id, label: " ".into() }]).is_err());
    }

    #[test]
    fn removing_a_spacer_rewires_through_trace() {
        let mut p = small_project(4);
        let g = p.graph().unwrap().clone();
        let spacer = g.nodes.iter().find(|n| n.kind == NodeKind::Spacer).expect("plan has a spacer");
        let (a, b) = {
            let inc: Vec<u32> = g.edges.iter().filter(|e| e.touches(spacer.id)).map(|e| e.other(spacer.id)).collect();
            assert_eq!(inc.len(), 2);
            (inc[0].min(inc[1]), inc[0].max(inc[1]))
        };
        let joined: f64 = g.edges.iter().filter(|e| e.touches(spacer.id)).map(|e| e.pixel_length).sum();
        p.apply_edits(&[EditOp::RemoveBeacon { id: spacer.id }]).unwrap();
        let after = p.graph().unwrap();
        assert_eq!(after.nodes.len(), g.nodes.len() - 1);
        let e = after.edges.iter().find(|e| e.a == a && e.b == b).expect("neighbours joined");
        assert!((e.pixel_length - joined).abs() < 1e-9);
        assert!(after.is_connected());
    }

    #[test]
    fn added_beacon_snaps_and_stays_connected() {
        let mut p = small_project(5);
        let n0 = p.graph().unwrap().nodes.len();
        let q = corridor_pixel(&p);
        p.apply_edits(&[EditOp::AddBeacon { x: q[0] as i64 + 1, y: q[1] as i64, label: String::new(), block_class: None }])
            .unwrap();
        let g = p.graph().unwrap();
        assert_eq!(g.nodes.len(), n0 + 1);
        let added = g.nodes.last().unwrap();
        assert_eq!(added.origin, Origin::Manual);
        assert!(p.results.as_ref().unwrap().skeleton.contains(added.x, added.y));
        assert!(g.is_connected());
    }

    #[test]
    fn edit_errors_leave_project_unchanged() {
        let mut p = small_project(6);
        let before = p.clone();
        let err = p.apply_edits(&[EditOp::RelabelBeacon { id: 0, label: "a".into() }, EditOp::RemoveBeacon { id: 999 }]);
        assert!(matches!(err, Err(Error::UnknownNode(999))));
        let err = p.apply_edits(&[EditOp::AddBeacon { x: -1, y: 5, label: String::new(), block_class: None }]);
        assert!(matches!(err, Err(Error::OffPlan { .. })));
        let n = p.graph().unwrap().nodes[1].clone();
        let err = p.apply_edits(&[EditOp::MoveBeacon { id: p.graph().unwrap().nodes[0].id, x: n.x as i64, y: n.y as i64 }]);
        assert!(matches!(err, Err(Error::Occupied { .. })));
        assert_eq!(p, before);
    }

    #[test]
    fn replay_reproduces_current_graph() {
        let mut p = small_project(7);
        let g = p.graph().unwrap().clone();
        let q = corridor_pixel(&p);
        let ops = vec![
            EditOp::RemoveBeacon { id: g.nodes[2].id },
            EditOp::AddBeacon { x: q[0] as i64, y: q[1] as i64, label: "New".into(), block_class: Some("door".into()) },
            EditOp::RelabelBeacon { id: g.nodes[0].id, label: "Entrance".into() },
            EditOp::MoveBeacon { id: g.nodes[1].id, x: g.nodes[1].x as i64 + 3, y: g.nodes[1].y as i64 },
        ];
        p.apply_edits(&ops[..2]).unwrap();
        p.apply_edits(&ops[2..]).unwrap();
        assert_eq!(p.edits, ops);
        assert_eq!(&p.replay().unwrap(), p.graph().unwrap());
        assert_eq!(to_json(&p.replay().unwrap()).unwrap(), to_json(p.graph().unwrap()).unwrap());
        p.undo(4).unwrap();
        assert_eq!(p.graph().unwrap(), &g);
    }

    #[test]
    fn metadata_validation_and_invalidation() {
        let mut p = small_project(8);
        assert!(p.set_meta(PlanMeta { scale: Some(0.0), ..p.meta.clone() }).is_err());
        assert!(p.results.is_some());
        p.set_meta(PlanMeta { map_orientation: Compass::S, ..p.meta.clone() }).unwrap();
        assert!(p.results.is_none());
        assert!(matches!(p.export(ExportFormat::CsvEdgeList), Err(Error::NoGraph)));
    }

    #[test]
    fn option_three_requires_a_model() {
        let mut p = small_project(9);
        let cfg = PipelineConfig { option: 3, ..PipelineConfig::default() };
        assert!(matches!(p.check_ready(&cfg), Err(Error::ModelRequired(3))));
        p.options.pipeline = cfg;
        assert!(matches!(p.detect(), Err(Error::ModelRequired(3))));
    }
}

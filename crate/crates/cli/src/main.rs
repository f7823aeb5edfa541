use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ColorChoice, Parser, Subcommand};
use serde_json::json;

use beaconplan::detect::load_templates;
use beaconplan::export::{export_graph, ExportFormat};
use beaconplan::imagecore::RasterImage;
use beaconplan::learn::{default_models, train_default_models, Mode, ModelSet, PipelineConfig, SvmModel};
use beaconplan::overlay::{encode_png, render_overlay};
use beaconplan::pathfind::Zone;
use beaconplan::project::{load_project, save_project, PlanMeta, Project};
use beaconplan::skelgraph::{parse_scale, Compass};
use beaconplan::synth::{generate_plan, PlanConfig};
use beaconplan::Error;

#[derive(Parser)]
#[command(name = "beaconplan", version, about = "Plan beacon locations and a wayfinding graph from a floor plan")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a floor-plan image.
    Run(RunArgs),
    /// Draw a synthetic floor plan with known symbol locations.
    Synth(SynthArgs),
    /// Train door and stair classifiers on synthetic plans.
    Train(TrainArgs),
    /// Export the graph of a saved project.
    Export(ExportArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Floor-plan raster (PNG, PNM, BMP, JPEG or TIFF).
    input: PathBuf,
    /// Drawing scale, e.g. "1/16=1ft".
    #[arg(long)]
    scale: String,
    /// Overrides the resolution stored in the image.
    #[arg(long)]
    dpi: Option<f64>,
    /// Compass direction of image-up.
    #[arg(long, default_value = "N")]
    orientation: Compass,
    /// 1 = template matching, 2 = matching with classifier veto,
    /// 3 = features with classifier.
    #[arg(long, default_value_t = 1)]
    option: u8,
    #[arg(long, default_value = "path-only")]
    mode: Mode,
    /// Template directory with manifest.json; built-in symbols otherwise.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Classifier file, or "bundled" for the shipped door and stair models.
    #[arg(long)]
    model: Option<String>,
    /// Restricted zones as a JSON list of {polygon, level}.
    #[arg(long)]
    zones: Option<PathBuf>,
    /// Zones at or above this level are not walkable.
    #[arg(long, default_value_t = 1)]
    zone_cutoff: u32,
    /// Largest beacon spacing in feet before spacers are inserted; 0 disables.
    #[arg(long, default_value_t = 30.0)]
    spacing: f64,
    #[arg(long, default_value = "json-adjacency")]
    format: ExportFormat,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2200)]
    width: usize,
    #[arg(long, default_value_t = 3400)]
    height: usize,
    #[arg(long, default_value_t = 40)]
    doors: usize,
    #[arg(long, default_value_t = 4)]
    stairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the true symbol locations as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(clap::Args)]
struct ExportArgs {
    /// Project archive directory.
    project: PathBuf,
    #[arg(long, default_value = "json-adjacency")]
    format: ExportFormat,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn no_color() -> bool {
    std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty())
}

fn main() -> ExitCode {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if no_color() {
        builder.write_style(env_logger::WriteStyle::Never);
    }
    builder.target(env_logger::Target::Stderr).init();

    let color = if no_color() { ColorChoice::Never } else { ColorChoice::Auto };
    let matches = <Cli as clap::CommandFactory>::command().color(color).get_matches();
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let body = json!({"error": {"kind": f.error.kind(), "message": f.error.to_string()}});
            eprintln!("{body}");
            ExitCode::from(f.code)
        }
    }
}

fn load_models(spec: &str) -> Result<Vec<SvmModel>, Error> {
    if spec == "bundled" {
        return Ok(default_models());
    }
    let text = fs::read_to_string(spec)?;
    match ModelSet::from_json(&text) {
        Ok(set) => Ok(set.models),
        Err(_) => {
            let m: SvmModel = serde_json::from_str(&text)?;
            m.validate()?;
            Ok(vec![m])
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let scale = parse_scale(&a.scale).map_err(usage)?;
    if let Some(d) = a.dpi {
        if !(d > 0.0 && d.is_finite()) {
            return Err(usage(Error::InvalidScale(format!("dpi must be positive, got {d}"))));
        }
    }
    let pipeline = PipelineConfig { option: a.option, mode: a.mode, seed: a.seed, ..PipelineConfig::default() };
    pipeline.validate().map_err(usage)?;
    if a.option >= 2 && a.model.is_none() {
        return Err(usage(Error::ModelRequired(a.option)));
    }
    if !(a.spacing >= 0.0) {
        return Err(usage(Error::Invalid(format!("spacing must be non-negative, got {}", a.spacing))));
    }

    let plan = RasterImage::load(&a.input)?;
    let mut project = Project::new(
        a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plan".into()),
    );
    project.set_plan(plan, a.input.file_name().map(|s| s.to_string_lossy().into_owned()));
    let meta = PlanMeta { dpi: a.dpi.or(project.meta.dpi), scale: Some(scale), map_orientation: a.orientation };
    project.set_meta(meta)?;
    if let Some(z) = &a.zones {
        let zones: Vec<Zone> = serde_json::from_str(&fs::read_to_string(z)?).map_err(Error::from)?;
        project.set_zones(zones)?;
    }
    if let Some(dir) = &a.templates {
        project.templates = Some(load_templates(dir)?);
    }
    if let Some(m) = &a.model {
        project.set_models(load_models(m)?)?;
    }
    project.options.pipeline = pipeline;
    project.options.zone_cutoff = a.zone_cutoff;
    project.options.max_spacing_ft = (a.spacing > 0.0).then_some(a.spacing);

    let timings = project.detect()?;
    let results = project.results.as_ref().expect("detection stores results");
    let graph = &results.graph;
    log::info!(
        "indoor path {:.0} ms, detection {:.0} ms, mapping {:.0} ms, graph {:.0} ms",
        timings.indoor_path_ms,
        timings.detection_ms,
        timings.mapping_ms,
        timings.graph_ms
    );

    fs::create_dir_all(&a.out)?;
    let graph_path = a.out.join(format!("graph.{}", a.format.extension()));
    fs::write(&graph_path, export_graph(graph, a.format)?)?;
    let overlay = render_overlay(project.plan.as_ref().unwrap(), Some(&results.skeleton), graph, 0)?;
    fs::write(a.out.join("overlay.png"), encode_png(&overlay)?)?;
    let report = json!({
        "phases_ms": timings,
        "candidates": results.candidates.len(),
        "nodes": graph.nodes.len(),
        "edges": graph.edges.len(),
    });
    write_json(&a.out.join("timing.json"), &report)?;
    save_project(&project, a.out.join("project"))?;

    println!(
        "{}",
        json!({
            "graph": graph_path,
            "overlay": a.out.join("overlay.png"),
            "timing": a.out.join("timing.json"),
            "project": a.out.join("project"),
            "nodes": graph.nodes.len(),
            "edges": graph.edges.len(),
        })
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let cfg = PlanConfig {
        width: a.width,
        height: a.height,
        doors: a.doors,
        stairs: a.stairs,
        seed: a.seed,
        ..PlanConfig::default()
    };
    let plan = generate_plan(&cfg)?;
    plan.image.save_png(&a.out)?;
    if let Some(t) = &a.truth {
        write_json(t, &plan.truth)?;
    }
    log::info!("wrote {} ({} symbols)", a.out.display(), plan.truth.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let set = ModelSet { models: train_default_models(a.seed)? };
    fs::write(&a.out, set.to_json()?)?;
    log::info!("wrote {} models to {}", set.models.len(), a.out.display());
    Ok(())
}

fn export(a: ExportArgs) -> Result<(), Failure> {
    let project = load_project(&a.project)?;
    let text = project.export(a.format)?;
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

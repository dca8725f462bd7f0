//! Command-line front end: synthetic data generation, tile planning, the
//! full pipeline, standalone vectorization, evaluation, and size statistics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fieldmosaic_core::error::Error;
use fieldmosaic_core::geo::GeoTransform;
use fieldmosaic_core::grid;
use fieldmosaic_core::metrics::{self, ApMode, ScoredMask};
use fieldmosaic_core::pipeline::{run_pipeline, RunConfig};
use fieldmosaic_core::segment;
use fieldmosaic_core::synth::{self, OracleNoise, SynthParams};
use fieldmosaic_core::tile::{build_tile_plan, DEFAULT_OVERLAP, DEFAULT_TILE_SIZE};
use fieldmosaic_core::unify::FieldLabelRaster;
use fieldmosaic_core::vectorize;
use fieldmosaic_core::{geojson, Result};

/// Environment variable supplying the default worker count for `run`.
const WORKERS_ENV: &str = "FIELDMOSAIC_WORKERS";

#[derive(Parser)]
#[command(
    name = "fieldmosaic",
    about = "Field boundary delineation: per-tile instance masks to a topologically \
             consistent vector layer, plus evaluation tooling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic landscape: label raster bundle, ground-truth
    /// GeoJSON, and an oracle prediction file in the wire format.
    Synth(SynthArgs),
    /// Print the tile plan for an extent as JSON.
    Plan(PlanArgs),
    /// Run the full pipeline from a JSON config.
    Run(RunArgs),
    /// Convert a label raster bundle into validated GeoJSON polygons.
    Vectorize(VectorizeArgs),
    /// Evaluate predictions or polygons against ground-truth labels.
    Eval(EvalArgs),
    /// Field-size histogram of a GeoJSON layer.
    Stats(StatsArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    /// Number of parcel seed points.
    #[arg(long, default_value_t = 40)]
    sites: usize,
    /// Probability that a parcel is non-field background.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Pixel size in meters.
    #[arg(long, default_value_t = 10.0)]
    resolution: f64,
    #[arg(long, default_value_t = 500_000.0)]
    origin_x: f64,
    #[arg(long, default_value_t = 5_600_000.0)]
    origin_y: f64,
    #[arg(long, default_value_t = 32635)]
    epsg: u32,
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    tile_size: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    overlap: usize,
    /// Oracle noise: probability of uniting adjacent field pairs.
    #[arg(long, default_value_t = 0.0)]
    merge_prob: f64,
    /// Oracle noise: probability of dropping a field per tile.
    #[arg(long, default_value_t = 0.0)]
    drop_prob: f64,
    /// Oracle noise: boundary jitter half-width in pixels.
    #[arg(long, default_value_t = 0)]
    jitter: usize,
}

#[derive(Args)]
struct PlanArgs {
    /// Raster bundle supplying the extent (alternative to --width/--height).
    #[arg(long)]
    raster: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    tile_size: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    overlap: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's worker count (0 = automatic). Falls back to
    /// the FIELDMOSAIC_WORKERS environment variable.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VectorizeArgs {
    /// Label raster bundle (u32).
    #[arg(long)]
    labels: PathBuf,
    /// Output GeoJSON path.
    #[arg(long)]
    out: PathBuf,
    /// Simplification tolerance in meters; default half a pixel.
    #[arg(long)]
    tolerance_m: Option<f64>,
    /// Minimum field area in hectares; default from the resolution table.
    #[arg(long)]
    min_area_ha: Option<f64>,
    /// Minimum hole area in hectares; default a quarter of the field floor.
    #[arg(long)]
    min_hole_ha: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth label raster bundle (u32).
    #[arg(long)]
    gt_labels: PathBuf,
    /// Predicted polygons as GeoJSON (rasterized onto the ground-truth grid).
    #[arg(long, conflicts_with_all = ["pred_labels", "predictions"])]
    pred_geojson: Option<PathBuf>,
    /// Predicted label raster bundle (u32).
    #[arg(long, conflicts_with = "predictions")]
    pred_labels: Option<PathBuf>,
    /// Raw per-tile prediction file (pre-unification detections).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Average-precision mode: all-point or the 101-point protocol.
    #[arg(long, default_value = "all", value_parser = ["all", "coco101"])]
    ap_mode: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Field layer to summarize.
    #[arg(long)]
    geojson: PathBuf,
    /// Comma-separated bin edges in hectares; default decades 0.01..10000.
    #[arg(long)]
    edges: Option<String>,
    /// Comparison floor in hectares.
    #[arg(long, default_value_t = metrics::SIZE_FLOOR_HA)]
    floor: f64,
    /// Write the histogram here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with successful exit
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Run(args) => cmd_run(args),
        Command::Vectorize(args) => cmd_vectorize(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stats(args) => cmd_stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Io(_) => 1,
                Error::Data(_) | Error::Json(_) => 2,
                Error::Topology(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn emit(doc: &impl serde::Serialize, out: Option<&PathBuf>) -> Result<()> {
    let mut json = serde_json::to_string_pretty(doc)?;
    json.push('\n');
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let transform = GeoTransform::new(args.origin_x, args.origin_y, args.resolution, args.resolution)?;
    let params = SynthParams {
        width: args.width,
        height: args.height,
        n_sites: args.sites,
        non_field_fraction: args.fraction,
        transform,
        crs_epsg: args.epsg,
    };
    let land = synth::generate_landscape(args.seed, &params)?;
    std::fs::create_dir_all(&args.out)?;
    grid::save_bundle(&land.labels.grid, &args.out.join("labels"))?;
    geojson::write_geojson(&land.gt_polygons, args.epsg, &args.out.join("ground_truth.geojson"))?;

    let plan = build_tile_plan(args.width, args.height, args.tile_size, args.overlap)?;
    let noise = OracleNoise {
        merge_prob: args.merge_prob,
        drop_prob: args.drop_prob,
        jitter_px: args.jitter,
    };
    let sets = synth::perturb_oracle(&land.labels, &plan, noise, args.seed)?;
    let file = segment::PredictionFile::from_sets(args.tile_size, args.overlap, &sets);
    segment::save_predictions(&file, &args.out.join("predictions.json"))?;

    let instances: usize = sets.iter().map(|s| s.predictions.len()).sum();
    println!(
        "synthetic landscape: {} fields over {}x{} px, {} tiles, {} oracle instances -> {}",
        land.field_count(),
        args.width,
        args.height,
        plan.len(),
        instances,
        args.out.display()
    );
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let (width, height) = match (&args.raster, args.width, args.height) {
        (Some(path), None, None) => {
            let sidecar = grid::load_sidecar(path)?;
            (sidecar.width, sidecar.height)
        }
        (None, Some(w), Some(h)) => (w, h),
        _ => {
            return Err(Error::config(
                "pass either --raster or both --width and --height".to_string(),
            ));
        }
    };
    let plan = build_tile_plan(width, height, args.tile_size, args.overlap)?;
    emit(&plan, None)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    } else if config.workers == 0 {
        if let Ok(value) = std::env::var(WORKERS_ENV) {
            config.workers = value
                .parse()
                .map_err(|_| Error::config(format!("bad {WORKERS_ENV} value '{value}'")))?;
        }
    }
    let manifest = run_pipeline(&config)?;
    for failure in &manifest.failed_tiles {
        eprintln!("warning: tile {} failed: {}", failure.tile_index, failure.error);
    }
    println!(
        "{} fields ({:.2} ha) from {} tiles ({} failed) -> {}",
        manifest.field_count,
        manifest.total_area_ha,
        manifest.tile_count,
        manifest.failed_tiles.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn cmd_vectorize(args: VectorizeArgs) -> Result<()> {
    let grid = grid::load_bundle::<u32>(&args.labels)?;
    let resolution = grid.transform.pixel_size_x;
    let crs_epsg = grid.crs_epsg;
    let tolerance = args.tolerance_m.unwrap_or(0.5 * resolution);
    let min_area_ha = args
        .min_area_ha
        .unwrap_or_else(|| fieldmosaic_core::refine::min_area_ha_for_resolution(resolution));
    let min_hole_ha = args.min_hole_ha.unwrap_or(min_area_ha / 4.0);

    let raster = FieldLabelRaster::from_grid(grid);
    let (polygons, warnings) = vectorize::trace_polygons(&raster)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let (polygons, report) = vectorize::validate_and_clean(polygons, min_area_ha, min_hole_ha)?;
    let polygons: Vec<_> =
        polygons.iter().map(|p| vectorize::simplify_polygon(p, tolerance)).collect();
    geojson::write_geojson(&polygons, crs_epsg, &args.out)?;
    println!(
        "{} polygons ({} slivers dropped, {} holes filled) -> {}",
        polygons.len(),
        report.removed_polygons.len(),
        report.filled_holes.len(),
        args.out.display()
    );
    Ok(())
}

fn load_gt(path: &std::path::Path) -> Result<FieldLabelRaster> {
    Ok(FieldLabelRaster::from_grid(grid::load_bundle::<u32>(path)?))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let gt_raster = load_gt(&args.gt_labels)?;
    let gts: Vec<_> = gt_raster.to_instances().into_iter().map(|(_, m)| m).collect();
    let extent = (gt_raster.grid.width, gt_raster.grid.height);

    let preds: Vec<ScoredMask> = if let Some(path) = &args.pred_geojson {
        let layer = geojson::read_geojson(path)?;
        layer
            .polygons
            .iter()
            .filter_map(|p| {
                vectorize::rasterize_polygon(p, &gt_raster.grid.transform, extent)
                    .map(|mask| ScoredMask { mask, score: 1.0 })
            })
            .collect()
    } else if let Some(path) = &args.pred_labels {
        load_gt(path)?
            .to_instances()
            .into_iter()
            .map(|(_, mask)| ScoredMask { mask, score: 1.0 })
            .collect()
    } else if let Some(path) = &args.predictions {
        let (_, sets) = segment::load_predictions(path)?;
        let mut out = Vec::new();
        for set in &sets {
            for pred in &set.predictions {
                if let Some(mask) = pred.to_pixel_mask()? {
                    out.push(ScoredMask { mask, score: pred.score });
                }
            }
        }
        out
    } else {
        return Err(Error::config(
            "pass one of --pred-geojson, --pred-labels, --predictions".to_string(),
        ));
    };

    let mode = if args.ap_mode == "coco101" { ApMode::Coco101 } else { ApMode::AllPoint };
    let report = metrics::evaluate(&preds, &gts, mode)?;
    emit(&report, args.out.as_ref())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let layer = geojson::read_geojson(&args.geojson)?;
    let areas: Vec<f64> = layer.polygons.iter().map(|p| p.area_ha).collect();
    let edges = match &args.edges {
        None => metrics::default_size_edges(),
        Some(list) => {
            let parsed: std::result::Result<Vec<f64>, _> =
                list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            parsed.map_err(|_| Error::config(format!("bad --edges list '{list}'")))?
        }
    };
    let stats = metrics::size_stats(&areas, &edges, args.floor)?;
    emit(&stats, args.out.as_ref())
}

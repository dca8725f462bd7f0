//! End-to-end pipeline driver: configuration, stage orchestration, run
//! manifest.
//!
//! The five stages run in order: plan, segment, refine, unify, vectorize.
//! Per-tile segmentation, per-instance refinement and per-label tracing are
//! data-parallel; unification is a sequential deterministic reduction. For a
//! fixed config and seed the output bytes are identical for any worker
//! count, and identical reruns overwrite outputs with identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geo::GeoTransform;
use crate::grid::{self, Sidecar};
use crate::mask::{BoolGrid, MaskPair};
use crate::metrics;
use crate::morph::Connectivity;
use crate::refine::{
    self, min_area_ha_for_resolution, FilterDecision, RefineParams, RejectReason,
};
use crate::segment::{FileProvider, MaskProvider, PredictionFile, PredictionSet};
use crate::synth::{self, OracleNoise, SynthParams};
use crate::tile::{build_tile_plan, DEFAULT_OVERLAP, DEFAULT_TILE_SIZE};
use crate::unify::{self, FieldInstance, MergeParams};
use crate::vectorize::{self, FieldPolygon};
use crate::{geojson, Grid};

fn default_tile_size() -> usize {
    DEFAULT_TILE_SIZE
}
fn default_overlap() -> usize {
    DEFAULT_OVERLAP
}
fn default_context_radius() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_kernel_radius() -> usize {
    1
}
fn default_connectivity() -> Connectivity {
    Connectivity::Four
}
fn default_min_valid_fraction() -> f64 {
    0.9
}
fn default_iou_threshold() -> f64 {
    0.5
}
fn default_containment_threshold() -> f64 {
    0.8
}

/// Refinement section of the run config. `min_area_px` falls back to the
/// resolution-derived minimum field area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_kernel_radius")]
    pub kernel_radius: usize,
    #[serde(default = "default_connectivity")]
    pub connectivity: Connectivity,
    #[serde(default = "default_min_valid_fraction")]
    pub min_valid_fraction: f64,
    #[serde(default)]
    pub min_area_px: Option<u64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            enabled: true,
            kernel_radius: 1,
            connectivity: Connectivity::Four,
            min_valid_fraction: 0.9,
            min_area_px: None,
        }
    }
}

/// Merge section of the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeConfig {
    #[serde(default = "default_iou_threshold")]
    pub iou_threshold: f64,
    #[serde(default = "default_containment_threshold")]
    pub containment_threshold: f64,
    #[serde(default)]
    pub min_mosaic_area_px: Option<u64>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            iou_threshold: 0.5,
            containment_threshold: 0.8,
            min_mosaic_area_px: None,
        }
    }
}

/// Vectorization section of the run config. Unset values fall back to
/// resolution-derived defaults: tolerance half a pixel, minimum area from
/// the resolution table, minimum hole area a quarter of that.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VectorizeConfig {
    #[serde(default)]
    pub tolerance_m: Option<f64>,
    #[serde(default)]
    pub min_area_ha: Option<f64>,
    #[serde(default)]
    pub min_hole_ha: Option<f64>,
}

/// The run configuration. CLI flags override `workers` and `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Input raster bundle (stem, `.bin`, or `.json` path). Only the grid
    /// shape and geotransform are consumed; pixel values stay on disk.
    pub raster: PathBuf,
    /// Optional boolean quality-mask bundle (u8, 1 = valid).
    #[serde(default)]
    pub quality_mask: Option<PathBuf>,
    /// Optional boolean context-mask bundle; derived from the quality mask
    /// when absent.
    #[serde(default)]
    pub context_mask: Option<PathBuf>,
    #[serde(default = "default_context_radius")]
    pub context_expand_radius: usize,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    /// `file:<predictions.json>` or
    /// `synth:sites=<n>[,fraction=..][,seed=..][,merge=..][,drop=..][,jitter=..]`.
    pub provider: String,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub merge: MergeConfig,
    #[serde(default)]
    pub vectorize: VectorizeConfig,
    pub output_dir: PathBuf,
    /// Worker count; 0 means automatic.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("bad config {}: {e}", path.display())))
    }
}

/// Parsed provider field.
enum ProviderSpec {
    File(PathBuf),
    Synth { seed: Option<u64>, sites: usize, fraction: f64, noise: OracleNoise },
}

fn parse_provider(spec: &str) -> Result<ProviderSpec> {
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(ProviderSpec::File(PathBuf::from(path)));
    }
    let Some(body) = spec.strip_prefix("synth:") else {
        return Err(Error::config(format!(
            "provider must be 'file:<path>' or 'synth:<params>', got '{spec}'"
        )));
    };
    let mut seed = None;
    let mut sites = None;
    let mut fraction = 0.0;
    let mut noise = OracleNoise::default();
    for part in body.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::config(format!("bad synth parameter '{part}'")))?;
        let parse_f = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad synth value '{part}'")))
        };
        let parse_u = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::config(format!("bad synth value '{part}'")))
        };
        match key {
            "seed" => seed = Some(parse_u()?),
            "sites" => sites = Some(parse_u()? as usize),
            "fraction" => fraction = parse_f()?,
            "merge" => noise.merge_prob = parse_f()?,
            "drop" => noise.drop_prob = parse_f()?,
            "jitter" => noise.jitter_px = parse_u()? as usize,
            other => {
                return Err(Error::config(format!("unknown synth parameter '{other}'")));
            }
        }
    }
    let sites =
        sites.ok_or_else(|| Error::config("synth provider requires sites=<n>".to_string()))?;
    Ok(ProviderSpec::Synth { seed, sites, fraction, noise })
}

enum Provider {
    File(FileProvider),
    Synth(synth::SynthOracle),
}

impl MaskProvider for Provider {
    fn segment_tile(&self, tile_index: usize, window: crate::geo::Window) -> Result<PredictionSet> {
        match self {
            Provider::File(p) => p.segment_tile(tile_index, window),
            Provider::Synth(p) => p.segment_tile(tile_index, window),
        }
    }
}

/// A tile the provider could not serve; the run continues without it.
#[derive(Debug, Clone, Serialize)]
pub struct TileFailure {
    pub tile_index: usize,
    pub error: String,
}

/// Wall-clock seconds per stage. The only part of the manifest that varies
/// between reruns; `total_s` excludes input loading.
#[derive(Debug, Clone, Serialize)]
pub struct StageTimings {
    pub load_s: f64,
    pub plan_s: f64,
    pub segment_s: f64,
    pub refine_s: f64,
    pub unify_s: f64,
    pub vectorize_s: f64,
    pub write_s: f64,
    pub total_s: f64,
    /// Raster throughput of unify + vectorize.
    pub pixels_per_sec: f64,
}

/// Parameters after resolution-dependent defaults were applied.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    pub resolution_m: f64,
    pub min_area_px: u64,
    pub min_mosaic_area_px: u64,
    pub tolerance_m: f64,
    pub min_area_ha: f64,
    pub min_hole_ha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestOutputs {
    pub geojson: String,
    pub labels: String,
    pub report: String,
    pub predictions: String,
}

/// The run manifest written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub width: usize,
    pub height: usize,
    pub crs_epsg: u32,
    pub tile_count: usize,
    pub failed_tiles: Vec<TileFailure>,
    pub instances_in: usize,
    pub instances_kept: usize,
    pub rejected_valid_fraction: usize,
    pub rejected_min_area: usize,
    pub field_count: usize,
    pub total_area_ha: f64,
    pub params: ResolvedParams,
    pub outputs: ManifestOutputs,
    pub timings: StageTimings,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn seconds(since: Instant) -> f64 {
    since.elapsed().as_secs_f64()
}

fn load_bool_mask(path: &Path, sidecar: &Sidecar) -> Result<BoolGrid> {
    let mask = grid::load_bundle::<u8>(path)?;
    if mask.width != sidecar.width || mask.height != sidecar.height {
        return Err(Error::data(format!(
            "mask {} extent {}x{} does not match raster {}x{}",
            path.display(),
            mask.width,
            mask.height,
            sidecar.width,
            sidecar.height
        )));
    }
    Ok(mask)
}

/// Validates config and inputs, then executes the full pipeline. Returns the
/// manifest that was also written to the output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    // -- validation before any stage runs
    if config.tile_size == 0 || config.tile_size <= config.overlap {
        return Err(Error::config(format!(
            "tile_size ({}) must exceed overlap ({})",
            config.tile_size, config.overlap
        )));
    }
    if !(0.0..=1.0).contains(&config.refine.min_valid_fraction) {
        return Err(Error::config("min_valid_fraction must be in [0, 1]".to_string()));
    }
    for t in [config.merge.iou_threshold, config.merge.containment_threshold] {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::config(format!("merge thresholds must be in (0, 1], got {t}")));
        }
    }
    let provider_spec = parse_provider(&config.provider)?;
    if let ProviderSpec::File(path) = &provider_spec {
        if !path.exists() {
            return Err(Error::config(format!(
                "prediction file {} does not exist",
                path.display()
            )));
        }
    }

    let t_load = Instant::now();
    let sidecar = grid::load_sidecar(&config.raster)?;
    let transform = GeoTransform::new(
        sidecar.geotransform.origin_x,
        sidecar.geotransform.origin_y,
        sidecar.geotransform.pixel_size_x,
        sidecar.geotransform.pixel_size_y,
    )?;
    let (width, height) = (sidecar.width, sidecar.height);
    let template = Grid::<u8>::filled(width, height, 1, transform, sidecar.crs_epsg);

    let masks = match (&config.quality_mask, &config.context_mask) {
        (None, None) => MaskPair::all_valid(&template),
        (Some(q), None) => {
            MaskPair::from_quality(load_bool_mask(q, &sidecar)?, config.context_expand_radius)
        }
        (Some(q), Some(c)) => {
            MaskPair::new(load_bool_mask(q, &sidecar)?, load_bool_mask(c, &sidecar)?)?
        }
        (None, Some(_)) => {
            return Err(Error::config(
                "context_mask requires quality_mask to be set".to_string(),
            ));
        }
    };

    let provider = match provider_spec {
        ProviderSpec::File(path) => {
            let p = FileProvider::load(&path)?;
            if p.tile_size != config.tile_size || p.overlap != config.overlap {
                return Err(Error::config(format!(
                    "prediction file was produced for tile_size {} / overlap {}, config says {} / {}",
                    p.tile_size, p.overlap, config.tile_size, config.overlap
                )));
            }
            Provider::File(p)
        }
        ProviderSpec::Synth { seed, sites, fraction, noise } => {
            let synth_seed = seed.unwrap_or(config.seed);
            let land = synth::generate_landscape(
                synth_seed,
                &SynthParams {
                    width,
                    height,
                    n_sites: sites,
                    non_field_fraction: fraction,
                    transform,
                    crs_epsg: sidecar.crs_epsg,
                },
            )?;
            Provider::Synth(synth::SynthOracle::new(&land.labels, noise, synth_seed)?)
        }
    };

    // Resolution-dependent defaults.
    let resolution = transform.pixel_size_x;
    let min_area_ha_default = min_area_ha_for_resolution(resolution);
    let min_area_ha = config.vectorize.min_area_ha.unwrap_or(min_area_ha_default);
    let resolved = ResolvedParams {
        resolution_m: resolution,
        min_area_px: config
            .refine
            .min_area_px
            .unwrap_or_else(|| transform.ha_to_pixels(min_area_ha_default).max(1)),
        min_mosaic_area_px: config
            .merge
            .min_mosaic_area_px
            .unwrap_or_else(|| transform.ha_to_pixels(min_area_ha_default).max(1)),
        tolerance_m: config.vectorize.tolerance_m.unwrap_or(0.5 * resolution),
        min_area_ha,
        min_hole_ha: config.vectorize.min_hole_ha.unwrap_or(min_area_ha / 4.0),
    };
    let refine_params = RefineParams {
        kernel_radius: config.refine.kernel_radius.max(1),
        connectivity: config.refine.connectivity,
        min_valid_fraction: config.refine.min_valid_fraction,
        min_area_px: resolved.min_area_px,
    };
    let merge_params = MergeParams {
        iou_threshold: config.merge.iou_threshold,
        containment_threshold: config.merge.containment_threshold,
        min_mosaic_area_px: resolved.min_mosaic_area_px,
    };
    let load_s = seconds(t_load);

    exec::with_workers(config.workers, || {
        run_stages(
            config,
            &provider,
            &masks,
            transform,
            sidecar.crs_epsg,
            (width, height),
            refine_params,
            merge_params,
            resolved,
            load_s,
        )
    })
}

#[allow(clippy::too_many_arguments)]
fn run_stages(
    config: &RunConfig,
    provider: &Provider,
    masks: &MaskPair,
    transform: GeoTransform,
    crs_epsg: u32,
    extent: (usize, usize),
    refine_params: RefineParams,
    merge_params: MergeParams,
    resolved: ResolvedParams,
    load_s: f64,
) -> Result<Manifest> {
    let (width, height) = extent;

    // -- stage 1: tiling
    let t_plan = Instant::now();
    let plan = build_tile_plan(width, height, config.tile_size, config.overlap)?;
    let plan_s = seconds(t_plan);

    // -- stage 2: segmentation (parallel over tiles)
    let t_segment = Instant::now();
    let results: Vec<Result<PredictionSet>> = exec::map_indexed(&plan.tiles, |i, &window| {
        let set = provider.segment_tile(i, window)?;
        if set.tile_index != i || set.window != window {
            return Err(Error::data(format!(
                "provider returned tile {} for requested tile {i}",
                set.tile_index
            )));
        }
        set.validate_windows()?;
        Ok(set)
    });
    let mut sets: Vec<PredictionSet> = Vec::new();
    let mut failed_tiles: Vec<TileFailure> = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(set) => sets.push(set),
            Err(e) => failed_tiles.push(TileFailure { tile_index: i, error: e.to_string() }),
        }
    }
    let segment_s = seconds(t_segment);

    // -- stage 3: refinement (parallel over instances)
    let t_refine = Instant::now();
    struct Job {
        tile_index: usize,
        instance_index: usize,
        pred: crate::segment::InstancePrediction,
    }
    let jobs: Vec<Job> = sets
        .iter()
        .flat_map(|set| {
            set.predictions.iter().enumerate().map(|(j, p)| Job {
                tile_index: set.tile_index,
                instance_index: j,
                pred: p.clone(),
            })
        })
        .collect();
    let instances_in = jobs.len();

    enum JobOutcome {
        Kept(FieldInstance),
        Gone,
        Rejected(RejectReason),
    }
    let refine_enabled = config.refine.enabled;
    let outcomes: Vec<Result<JobOutcome>> = exec::map_ordered(jobs, |job| {
        let Some(mut mask) = job.pred.to_pixel_mask()? else {
            return Ok(JobOutcome::Gone);
        };
        if refine_enabled {
            let refined = refine::morphological_refine(&mask.mask, &refine_params);
            match (crate::mask::PixelMask { window: mask.window, mask: refined }).tighten() {
                Some(m) => mask = m,
                None => return Ok(JobOutcome::Gone),
            }
        }
        match refine::validity_filter(&mask, masks, &refine_params) {
            FilterDecision::Keep { mask, valid_fraction } => Ok(JobOutcome::Kept(FieldInstance {
                mask,
                score: job.pred.score,
                tile_index: job.tile_index,
                instance_index: job.instance_index,
                n_merged: 1,
                valid_fraction,
            })),
            FilterDecision::Reject(reason) => Ok(JobOutcome::Rejected(reason)),
        }
    });
    let mut instances: Vec<FieldInstance> = Vec::new();
    let mut rejected_valid_fraction = 0usize;
    let mut rejected_min_area = 0usize;
    for outcome in outcomes {
        match outcome? {
            JobOutcome::Kept(inst) => instances.push(inst),
            JobOutcome::Gone => {}
            JobOutcome::Rejected(RejectReason::ValidFraction) => rejected_valid_fraction += 1,
            JobOutcome::Rejected(RejectReason::MinArea) => rejected_min_area += 1,
        }
    }
    let refine_s = seconds(t_refine);

    // -- stage 4: unification (sequential deterministic reduction)
    let t_unify = Instant::now();
    refine::order_by_area(&mut instances, |i| (i.area(), i.tile_index, i.instance_index));
    let kept = unify::resolve_overlaps(instances, (width, height), &merge_params);
    let instances_kept = kept.len();
    let (mut raster, meta) = unify::mosaic(&kept, (width, height), transform, crs_epsg)?;
    unify::remove_small_labels(&mut raster, merge_params.min_mosaic_area_px);
    let unify_s = seconds(t_unify);

    // -- stage 5: vectorization
    let t_vectorize = Instant::now();
    let (polygons, trace_warnings) = vectorize::trace_polygons(&raster)?;
    let (mut polygons, mut report) =
        vectorize::validate_and_clean(polygons, resolved.min_area_ha, resolved.min_hole_ha)?;
    report.warnings.extend(trace_warnings);

    // Field attributes: merge lineage from the instance list, context-valid
    // fraction recomputed over the final mosaic.
    let meta_by_id: BTreeMap<u32, u32> = meta.iter().map(|m| (m.id, m.n_merged)).collect();
    let fractions = context_fractions(&raster, masks);
    for poly in polygons.iter_mut() {
        poly.n_merged = meta_by_id.get(&poly.id).copied().unwrap_or(1);
        poly.valid_fraction = fractions.get(&poly.id).copied().unwrap_or(1.0);
        poly.source_resolution_m = resolved.resolution_m;
    }

    let unsimplified = polygons.clone();
    let mut polygons: Vec<FieldPolygon> =
        exec::map_ordered(polygons, |p| vectorize::simplify_polygon(&p, resolved.tolerance_m));
    // Independent per-field simplification can in rare cases make two
    // neighbors cross inside the tolerance band; revert those fields to
    // their exact traced rings until the layer is crossing-free.
    loop {
        let mut reverted_any = false;
        let crossings = find_crossing_pairs(&polygons);
        if crossings.is_empty() {
            break;
        }
        for (i, j) in crossings {
            for k in [i, j] {
                if polygons[k].exterior != unsimplified[k].exterior
                    || polygons[k].holes != unsimplified[k].holes
                {
                    report.reverted_simplifications.push(polygons[k].id);
                    polygons[k] = unsimplified[k].clone();
                    reverted_any = true;
                }
            }
        }
        if !reverted_any {
            return Err(Error::topology(
                "unsimplified polygons cross; upstream mosaic bug".to_string(),
            ));
        }
    }
    report.reverted_simplifications.sort_unstable();
    report.reverted_simplifications.dedup();
    let field_count = polygons.len();
    let total_area_ha: f64 = polygons.iter().map(|p| p.area_ha).sum();
    let vectorize_s = seconds(t_vectorize);

    // -- outputs
    let t_write = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let geojson_path = config.output_dir.join("fields.geojson");
    geojson::write_geojson(&polygons, crs_epsg, &geojson_path)?;
    let labels_path = config.output_dir.join("labels");
    grid::save_bundle(&raster.grid, &labels_path)?;
    let report_path = config.output_dir.join("validation_report.json");
    let mut report_json = serde_json::to_string_pretty(&report)?;
    report_json.push('\n');
    std::fs::write(&report_path, report_json)?;
    let predictions_path = config.output_dir.join("predictions.json");
    let file = PredictionFile::from_sets(config.tile_size, config.overlap, &sets);
    crate::segment::save_predictions(&file, &predictions_path)?;
    let write_s = seconds(t_write);

    let total_s = plan_s + segment_s + refine_s + unify_s + vectorize_s + write_s;
    let uv = unify_s + vectorize_s;
    // The hash covers the fields that determine output content; worker
    // count and output location do not.
    let mut hashed_config = config.clone();
    hashed_config.workers = 0;
    hashed_config.output_dir = PathBuf::new();
    let manifest = Manifest {
        config_hash: format!("{:016x}", fnv1a64(serde_json::to_string(&hashed_config)?.as_bytes())),
        width,
        height,
        crs_epsg,
        tile_count: plan.len(),
        failed_tiles,
        instances_in,
        instances_kept,
        rejected_valid_fraction,
        rejected_min_area,
        field_count,
        total_area_ha,
        params: resolved,
        outputs: ManifestOutputs {
            geojson: "fields.geojson".to_string(),
            labels: "labels".to_string(),
            report: "validation_report.json".to_string(),
            predictions: "predictions.json".to_string(),
        },
        timings: StageTimings {
            load_s,
            plan_s,
            segment_s,
            refine_s,
            unify_s,
            vectorize_s,
            write_s,
            total_s,
            pixels_per_sec: if uv > 0.0 { (width * height) as f64 / uv } else { 0.0 },
        },
    };
    let manifest_path = config.output_dir.join("manifest.json");
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    std::fs::write(manifest_path, manifest_json)?;
    Ok(manifest)
}

/// Context-valid pixel fraction per label.
fn context_fractions(raster: &unify::FieldLabelRaster, masks: &MaskPair) -> BTreeMap<u32, f64> {
    let mut valid: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    let w = raster.grid.width;
    for (i, &v) in raster.grid.data.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let entry = valid.entry(v).or_insert((0, 0));
        entry.0 += masks.context_at(i % w, i / w) as u64;
        entry.1 += 1;
    }
    valid
        .into_iter()
        .map(|(id, (cv, n))| (id, cv as f64 / n as f64))
        .collect()
}

/// Indices of polygon pairs whose rings properly cross.
fn find_crossing_pairs(polygons: &[FieldPolygon]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..polygons.len() {
        for j in i + 1..polygons.len() {
            if vectorize::polygons_properly_cross(&polygons[i], &polygons[j]) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Builds evaluation inputs from a label raster: one scored mask per field,
/// unit confidence, in id order.
pub fn labels_to_scored_masks(raster: &unify::FieldLabelRaster) -> Vec<metrics::ScoredMask> {
    raster
        .to_instances()
        .into_iter()
        .map(|(_, mask)| metrics::ScoredMask { mask, score: 1.0 })
        .collect()
}

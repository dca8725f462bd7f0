//! Synthetic landscape generator and noisy oracle segmenter.
//!
//! Desk-scale runs need ground truth without real imagery or a trained
//! model: [`generate_landscape`] builds a reproducible parcel landscape from
//! a relaxed Voronoi partition, and [`SynthOracle`] plays the role of the
//! per-tile segmenter, optionally corrupting the ground truth with the
//! failure modes unification and refinement exist to fix (merged neighbors,
//! dropped detections, jittered boundaries).
//!
//! Everything is a pure function of `(seed, params)`. The draw order is
//! fixed: site coordinates (x then y per site), then per-cell drop flags;
//! per tile, drop flags in id order, merge flags per adjacent pair in id
//! order, then per candidate instance a jitter sign (only when jitter is
//! on) and, if it survives, a score. Sites are relaxed by two centroid
//! iterations before labels are assigned; ties in the nearest-site
//! assignment go to the lowest site index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::geo::{GeoTransform, Window};
use crate::grid::Grid;
use crate::mask::{Mask, PixelMask};
use crate::morph::{self, Connectivity};
use crate::rng::{derive_stream, Lcg64};
use crate::segment::{InstancePrediction, MaskProvider, PredictionSet};
use crate::tile::TilePlan;
use crate::unify::FieldLabelRaster;
use crate::vectorize::{self, FieldPolygon};

/// Number of centroid relaxation passes applied to the raw random sites.
/// Relaxation evens out parcel sizes, which is what real field mosaics look
/// like; it is part of the fixed recipe.
pub const LLOYD_ITERATIONS: usize = 2;

/// Landscape generation parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    pub n_sites: usize,
    /// Probability that a cell is non-field (background).
    pub non_field_fraction: f64,
    pub transform: GeoTransform,
    pub crs_epsg: u32,
}

/// A generated landscape: the ground-truth label raster and its traced
/// polygons, fully reproducible from `(seed, params)`.
#[derive(Debug, Clone)]
pub struct SyntheticLandscape {
    pub labels: FieldLabelRaster,
    pub gt_polygons: Vec<FieldPolygon>,
    pub seed: u64,
    pub params: SynthParams,
}

impl SyntheticLandscape {
    pub fn field_count(&self) -> usize {
        self.labels.field_count()
    }
}

/// Bucket grid over sites for nearest-site queries.
struct SiteIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl SiteIndex {
    fn new(sites: &[(f64, f64)], width: usize, height: usize) -> Self {
        let target = (sites.len() as f64).sqrt().ceil().max(1.0);
        let cell = (width.max(height) as f64 / target).max(4.0);
        let cols = (width as f64 / cell).ceil() as usize + 1;
        let rows = (height as f64 / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, &(x, y)) in sites.iter().enumerate() {
            let c = ((x / cell) as usize).min(cols - 1);
            let r = ((y / cell) as usize).min(rows - 1);
            buckets[r * cols + c].push(i as u32);
        }
        SiteIndex { cell, cols, rows, buckets }
    }

    /// Index of the closest site to `(px, py)` by squared Euclidean
    /// distance; ties go to the lowest site index. Expanding ring search:
    /// any site in an unexamined ring is at least `(ring - 1) * cell` away.
    fn nearest(&self, sites: &[(f64, f64)], px: f64, py: f64) -> u32 {
        let qc = ((px / self.cell) as isize).clamp(0, self.cols as isize - 1);
        let qr = ((py / self.cell) as isize).clamp(0, self.rows as isize - 1);
        let mut best = u32::MAX;
        let mut best_d2 = f64::MAX;
        let max_ring = self.cols.max(self.rows) as isize;
        for ring in 0..=max_ring {
            if best_d2.sqrt() <= (ring - 1).max(0) as f64 * self.cell && best != u32::MAX {
                break;
            }
            for r in (qr - ring).max(0)..=(qr + ring).min(self.rows as isize - 1) {
                for c in (qc - ring).max(0)..=(qc + ring).min(self.cols as isize - 1) {
                    let on_ring = (r - qr).abs() == ring || (c - qc).abs() == ring;
                    if !on_ring {
                        continue;
                    }
                    for &s in &self.buckets[r as usize * self.cols + c as usize] {
                        let (sx, sy) = sites[s as usize];
                        let d2 = (sx - px) * (sx - px) + (sy - py) * (sy - py);
                        if d2 < best_d2 || (d2 == best_d2 && s < best) {
                            best_d2 = d2;
                            best = s;
                        }
                    }
                }
            }
        }
        best
    }
}

/// Assigns every pixel to its nearest site. Parallel over rows; the result
/// is a pure per-pixel function, so worker count cannot change it.
fn assign_nearest(sites: &[(f64, f64)], width: usize, height: usize) -> Vec<u32> {
    let index = SiteIndex::new(sites, width, height);
    let rows: Vec<usize> = (0..height).collect();
    let assigned = exec::map_ordered(rows, |y| {
        let mut row = Vec::with_capacity(width);
        let py = y as f64 + 0.5;
        for x in 0..width {
            row.push(index.nearest(sites, x as f64 + 0.5, py));
        }
        row
    });
    assigned.into_iter().flatten().collect()
}

/// Generates the landscape. See the module docs for the exact recipe.
pub fn generate_landscape(seed: u64, params: &SynthParams) -> Result<SyntheticLandscape> {
    if params.n_sites == 0 {
        return Err(Error::config("n_sites must be at least 1".to_string()));
    }
    if !(0.0..1.0).contains(&params.non_field_fraction) {
        return Err(Error::config(format!(
            "non_field_fraction must be in [0, 1), got {}",
            params.non_field_fraction
        )));
    }
    let (width, height) = (params.width, params.height);
    let mut rng = Lcg64::new(seed);
    let mut sites: Vec<(f64, f64)> = (0..params.n_sites)
        .map(|_| {
            let x = rng.next_f64() * width as f64;
            let y = rng.next_f64() * height as f64;
            (x, y)
        })
        .collect();
    let dropped: Vec<bool> =
        (0..params.n_sites).map(|_| rng.next_bool(params.non_field_fraction)).collect();

    // Centroid relaxation. Accumulation runs sequentially in row-major
    // order so float sums never depend on the worker count.
    for _ in 0..LLOYD_ITERATIONS {
        let assigned = assign_nearest(&sites, width, height);
        let mut sx = vec![0.0f64; sites.len()];
        let mut sy = vec![0.0f64; sites.len()];
        let mut n = vec![0u64; sites.len()];
        for (i, &s) in assigned.iter().enumerate() {
            let s = s as usize;
            sx[s] += (i % width) as f64 + 0.5;
            sy[s] += (i / width) as f64 + 0.5;
            n[s] += 1;
        }
        for (i, site) in sites.iter_mut().enumerate() {
            if n[i] > 0 {
                *site = (sx[i] / n[i] as f64, sy[i] / n[i] as f64);
            }
        }
    }
    let assigned = assign_nearest(&sites, width, height);

    // Surviving cells keep their largest 4-connected fragment and receive
    // labels 1..K in row-major order of their relaxed site position.
    let mut order: Vec<u32> = (0..params.n_sites as u32).filter(|&s| !dropped[s as usize]).collect();
    order.sort_by(|&a, &b| {
        let (ax, ay) = sites[a as usize];
        let (bx, by) = sites[b as usize];
        (ay, ax, a).partial_cmp(&(by, bx, b)).expect("finite site coordinates")
    });

    let mut site_label = vec![0u32; params.n_sites];
    let mut next = 0u32;
    for &s in &order {
        next += 1;
        site_label[s as usize] = next;
    }

    let mut grid = Grid::<u32>::filled(width, height, 0, params.transform, params.crs_epsg);
    let mut bboxes: Vec<Option<Window>> = vec![None; params.n_sites];
    for (i, &s) in assigned.iter().enumerate() {
        let label = site_label[s as usize];
        if label == 0 {
            continue;
        }
        grid.data[i] = label;
        let px = Window::new(i % width, i / width, 1, 1);
        bboxes[s as usize] = Some(bboxes[s as usize].map_or(px, |b| b.union(&px)));
    }
    for &s in &order {
        let Some(bbox) = bboxes[s as usize] else { continue };
        let label = site_label[s as usize];
        let local = Mask::from_fn(bbox.w, bbox.h, |lx, ly| {
            grid.get(bbox.x0 + lx, bbox.y0 + ly) == label
        });
        let kept = morph::largest_component(&local, Connectivity::Four);
        if kept == local {
            continue;
        }
        for ly in 0..bbox.h {
            for lx in 0..bbox.w {
                if local.get(lx, ly) && !kept.get(lx, ly) {
                    grid.set(bbox.x0 + lx, bbox.y0 + ly, 0);
                }
            }
        }
    }

    // Renumber contiguously: fragment clearing may have emptied a cell.
    let mut raster = FieldLabelRaster::from_grid(grid);
    let present: Vec<u32> = raster.id_areas.keys().copied().collect();
    let mut remap = std::collections::BTreeMap::new();
    for (k, id) in present.iter().enumerate() {
        remap.insert(*id, (k + 1) as u32);
    }
    if remap.iter().any(|(from, to)| from != to) {
        for v in raster.grid.data.iter_mut() {
            if *v != 0 {
                *v = remap[v];
            }
        }
        raster = FieldLabelRaster::from_grid(raster.grid);
    }

    let (gt_polygons, _) = vectorize::trace_polygons(&raster)?;
    Ok(SyntheticLandscape { labels: raster, gt_polygons, seed, params: *params })
}

/// Noise knobs of the oracle segmenter.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct OracleNoise {
    /// Probability of uniting each adjacent pair of fields with a one-pixel
    /// bridge.
    pub merge_prob: f64,
    /// Probability of dropping each field on a tile.
    pub drop_prob: f64,
    /// Half-width of the random grow-or-shrink boundary perturbation.
    pub jitter_px: usize,
}

impl OracleNoise {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.merge_prob) || !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::config("oracle probabilities must be in [0, 1]".to_string()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.merge_prob == 0.0 && self.drop_prob == 0.0 && self.jitter_px == 0
    }
}

/// The oracle segmenter: clips ground-truth fields to each tile window and
/// optionally corrupts them. With all noise at zero it returns the exact
/// clipped ground truth.
pub struct SynthOracle {
    gt: Vec<(u32, PixelMask)>,
    noise: OracleNoise,
    seed: u64,
}

impl SynthOracle {
    pub fn new(labels: &FieldLabelRaster, noise: OracleNoise, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(SynthOracle { gt: labels.to_instances(), noise, seed })
    }

    fn tile_instances(&self, tile_index: usize, window: Window) -> Vec<InstancePrediction> {
        let mut rng = Lcg64::new(derive_stream(self.seed, tile_index as u64));

        // Clip in id order; empty clips vanish before any draw.
        let mut clipped: Vec<PixelMask> = Vec::new();
        for (_, mask) in &self.gt {
            if let Some(c) = mask.clip_to(&window) {
                clipped.push(c);
            }
        }

        let survivors: Vec<PixelMask> = clipped
            .into_iter()
            .filter(|_| !rng.next_bool(self.noise.drop_prob))
            .collect();

        // Union-find over adjacent pairs that the noise decides to merge.
        // Adjacency means 8-neighborhood contact: the one-pixel dilation of
        // one mask overlaps the other.
        let grown: Vec<PixelMask> = survivors
            .iter()
            .map(|s| {
                let p = s.padded(1, &window);
                PixelMask { mask: morph::dilate(&p.mask, 1), window: p.window }
            })
            .collect();
        let mut group: Vec<usize> = (0..survivors.len()).collect();
        fn root(group: &mut [usize], mut i: usize) -> usize {
            while group[i] != i {
                group[i] = group[group[i]];
                i = group[i];
            }
            i
        }
        for (i, grown_i) in grown.iter().enumerate() {
            for (j, other) in survivors.iter().enumerate().skip(i + 1) {
                if grown_i.intersection_area(other) == 0 {
                    continue;
                }
                if rng.next_bool(self.noise.merge_prob) {
                    let (ri, rj) = (root(&mut group, i), root(&mut group, j));
                    if ri != rj {
                        group[rj.max(ri)] = rj.min(ri);
                    }
                }
            }
        }

        let mut by_group: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        for i in 0..survivors.len() {
            by_group.entry(root(&mut group, i)).or_default().push(i);
        }

        let mut out = Vec::new();
        for (_, members) in by_group {
            // Boundary jitter applies to the member masks before they are
            // united, so a merged detection still leaks through a thin
            // connection rather than a solid front.
            let jitter_grow =
                (self.noise.jitter_px > 0).then(|| rng.next_bool(0.5));
            let jittered: Vec<PixelMask> = members
                .iter()
                .filter_map(|&m| match jitter_grow {
                    None => Some(survivors[m].clone()),
                    Some(grow) => {
                        let padded = survivors[m].padded(self.noise.jitter_px, &window);
                        let mask = if grow {
                            morph::dilate(&padded.mask, self.noise.jitter_px)
                        } else {
                            morph::erode(&padded.mask, self.noise.jitter_px)
                        };
                        PixelMask { window: padded.window, mask }.tighten()
                    }
                })
                .collect();
            let Some(first) = jittered.first() else {
                continue; // jitter erased the whole candidate
            };
            let mut merged = first.clone();
            for m in &jittered[1..] {
                merged = merged.union(m);
            }
            if jittered.len() > 1 {
                // The merged detection separates the fields almost
                // everywhere: carve the shared border band of every member
                // pair out of the union, then rejoin the pieces with
                // one-pixel bridges.
                let bands: Vec<PixelMask> = jittered
                    .iter()
                    .map(|m| {
                        let p = m.padded(1, &window);
                        PixelMask { mask: morph::dilate(&p.mask, 1), window: p.window }
                    })
                    .collect();
                for (i, a) in bands.iter().enumerate() {
                    for b in bands.iter().skip(i + 1) {
                        let Some(band) = a.window.intersect(&b.window) else { continue };
                        for y in band.y0..band.y1() {
                            for x in band.x0..band.x1() {
                                if a.get_global(x, y)
                                    && b.get_global(x, y)
                                    && merged.get_global(x, y)
                                {
                                    merged.mask.set(
                                        x - merged.window.x0,
                                        y - merged.window.y0,
                                        false,
                                    );
                                }
                            }
                        }
                    }
                }
                match merged.tighten() {
                    Some(m) => merged = bridge_components(m),
                    None => continue, // carving erased the whole group
                }
            }
            let score = 0.5 + rng.next_f64() / 2.0;
            // Re-anchor on the full tile window for the wire format.
            let mut tile_mask = Mask::new(window.w, window.h);
            merged.for_each_set(|x, y| tile_mask.set(x - window.x0, y - window.y0, true));
            out.push(
                InstancePrediction::from_mask(window, &tile_mask, score)
                    .expect("oracle masks are consistent by construction"),
            );
        }
        out
    }
}

/// Joins 4-disconnected parts of a merged mask with straight one-pixel
/// bridges between the closest boundary pixel pairs (row-major scan, so ties
/// are deterministic). Bridges stay inside the union window.
fn bridge_components(mask: PixelMask) -> PixelMask {
    let mut current = mask;
    loop {
        let (labels, count) = morph::label_components(&current.mask, Connectivity::Four);
        if count <= 1 {
            return current;
        }
        let rim = morph::boundary(&current.mask);
        let w = current.mask.w;
        let mut first: Vec<(usize, usize)> = Vec::new();
        let mut rest: Vec<(usize, usize)> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 || !rim.data[i] {
                continue;
            }
            let p = (i % w, i / w);
            if l == 1 {
                first.push(p);
            } else {
                rest.push(p);
            }
        }
        let mut best_d = u64::MAX;
        let mut best_pair = None;
        for &a in &first {
            for &b in &rest {
                let dx = a.0.abs_diff(b.0) as u64;
                let dy = a.1.abs_diff(b.1) as u64;
                let d = dx * dx + dy * dy;
                if d < best_d {
                    best_d = d;
                    best_pair = Some((a, b));
                }
            }
        }
        let (a, b) = best_pair.expect("multiple components imply a closest pair");
        for (x, y) in bresenham(a, b) {
            current.mask.set(x, y, true);
        }
    }
}

/// 4-connected one-pixel line: a Bresenham walk that inserts an orthogonal
/// step whenever both coordinates advance, so the painted path always joins
/// its endpoints under 4-connectivity.
fn bresenham(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        out.push((x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            return out;
        }
        let e2 = 2 * err;
        let step_x = e2 >= dy;
        let step_y = e2 <= dx;
        if step_x && step_y {
            out.push(((x0 + sx) as usize, y0 as usize));
        }
        if step_x {
            err += dy;
            x0 += sx;
        }
        if step_y {
            err += dx;
            y0 += sy;
        }
    }
}

impl MaskProvider for SynthOracle {
    fn segment_tile(&self, tile_index: usize, window: Window) -> Result<PredictionSet> {
        Ok(PredictionSet {
            tile_index,
            window,
            predictions: self.tile_instances(tile_index, window),
        })
    }
}

/// Runs the oracle over a whole tile plan.
pub fn perturb_oracle(
    labels: &FieldLabelRaster,
    plan: &TilePlan,
    noise: OracleNoise,
    seed: u64,
) -> Result<Vec<PredictionSet>> {
    let oracle = SynthOracle::new(labels, noise, seed)?;
    Ok(exec::map_indexed(&plan.tiles, |i, &window| {
        oracle
            .segment_tile(i, window)
            .expect("synthetic oracle cannot fail per tile")
    }))
}

//! Conversion of the label mosaic into vector polygons: pixel-edge contour
//! tracing, farthest-point simplification, topological validation and sliver
//! removal, plus the polygon rasterizer used for round-trip checks.
//!
//! Tracing follows pixel borders exactly (no sub-pixel interpolation), so
//! rasterizing an unsimplified polygon reproduces its label pixels
//! bit-exactly, and two adjacent fields share identical border vertex chains
//! by construction. Boundaries of a label are emitted as directed edges with
//! the field interior on the left (in world orientation), which makes
//! exterior rings counter-clockwise and holes clockwise in world coordinates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::geo::{GeoTransform, Window};
use crate::grid::Grid;
use crate::mask::{Mask, PixelMask};
use crate::unify::FieldLabelRaster;

/// One vector field: a closed exterior ring, optional hole rings, and the
/// attributes carried into the output layer. Coordinates are world units.
#[derive(Debug, Clone, Serialize)]
pub struct FieldPolygon {
    pub id: u32,
    /// Closed (first == last), counter-clockwise.
    pub exterior: Vec<(f64, f64)>,
    /// Closed, clockwise, strictly inside the exterior.
    pub holes: Vec<Vec<(f64, f64)>>,
    pub area_ha: f64,
    pub valid_fraction: f64,
    pub n_merged: u32,
    pub source_resolution_m: f64,
}

impl FieldPolygon {
    pub fn rings(&self) -> impl Iterator<Item = &Vec<(f64, f64)>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    /// Axis-aligned bounds over all rings.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for ring in self.rings() {
            for &(x, y) in ring {
                b.0 = b.0.min(x);
                b.1 = b.1.min(y);
                b.2 = b.2.max(x);
                b.3 = b.3.max(y);
            }
        }
        b
    }
}

/// Twice the signed area of a closed ring (shoelace).
pub fn shoelace2(ring: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for pair in ring.windows(2) {
        let (x1, y1) = pair[0];
        let (x2, y2) = pair[1];
        s += x1 * y2 - x2 * y1;
    }
    s
}

/// Signed ring area in hectares (positive counter-clockwise).
pub fn ring_area_ha(ring: &[(f64, f64)]) -> f64 {
    shoelace2(ring) / 2.0 / 10_000.0
}

/// Polygon area in hectares: exterior minus holes.
pub fn polygon_area_ha(exterior: &[(f64, f64)], holes: &[Vec<(f64, f64)>]) -> f64 {
    ring_area_ha(exterior) + holes.iter().map(|h| ring_area_ha(h)).sum::<f64>()
}

// ---------------------------------------------------------------------------
// Contour tracing
// ---------------------------------------------------------------------------

// Directions along pixel edges: E, S, W, N in pixel coordinates (y down).
const DX: [i64; 4] = [1, 0, -1, 0];
const DY: [i64; 4] = [0, 1, 0, -1];

/// One traced ring in global pixel-corner coordinates.
struct PixelRing {
    /// Closed vertex chain (first == last), turn points only.
    vertices: Vec<(i64, i64)>,
    /// Twice the signed pixel-space area. Negative for exteriors (the world
    /// transform flips orientation).
    shoelace2: i64,
}

/// Traces all boundary rings of a binary mask.
///
/// Emits the directed boundary edges of the set (interior on the left in
/// world orientation) and stitches them into closed rings. At a vertex where
/// two diagonal pixels of the set meet two diagonal background pixels, the
/// walk takes the turn that keeps the set connected through the vertex, so
/// rings stay simple; an exterior and a hole may share such a vertex.
fn trace_mask(mask: &Mask, offset: (usize, usize)) -> Vec<PixelRing> {
    let (w, h) = (mask.w, mask.h);
    let vw = w + 1;
    // Outgoing-direction bitmask per pixel corner.
    let mut edges = vec![0u8; vw * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            if y == 0 || !mask.get(x, y - 1) {
                edges[y * vw + (x + 1)] |= 1 << 2; // north side: head west
            }
            if y == h - 1 || !mask.get(x, y + 1) {
                edges[(y + 1) * vw + x] |= 1 << 0; // south side: head east
            }
            if x == 0 || !mask.get(x - 1, y) {
                edges[y * vw + x] |= 1 << 1; // west side: head south
            }
            if x == w - 1 || !mask.get(x + 1, y) {
                edges[(y + 1) * vw + (x + 1)] |= 1 << 3; // east side: head north
            }
        }
    }

    let mut rings = Vec::new();
    for start in 0..edges.len() {
        while edges[start] != 0 {
            let dir0 = edges[start].trailing_zeros() as usize;
            rings.push(follow_ring(&mut edges, vw, start, dir0, offset));
        }
    }
    rings
}

fn follow_ring(
    edges: &mut [u8],
    vw: usize,
    start: usize,
    dir0: usize,
    offset: (usize, usize),
) -> PixelRing {
    let (ox, oy) = (offset.0 as i64, offset.1 as i64);
    let at = |v: usize| ((v % vw) as i64 + ox, (v / vw) as i64 + oy);

    let mut vertices = vec![at(start)];
    let mut shoelace2 = 0i64;
    let mut v = start;
    let mut dir = dir0;
    loop {
        edges[v] &= !(1 << dir);
        let (x, y) = at(v);
        let next = ((y + DY[dir] - oy) as usize * vw) + (x + DX[dir] - ox) as usize;
        let (nx, ny) = at(next);
        shoelace2 += x * ny - nx * y;
        if next == start {
            vertices.push(at(start));
            break;
        }
        // Prefer the right turn: at a two-way corner this keeps the set
        // connected through the vertex; elsewhere exactly one choice exists.
        // The reverse direction never carries an edge.
        let mut next_dir = usize::MAX;
        for cand in [(dir + 1) % 4, dir, (dir + 3) % 4] {
            if edges[next] & (1 << cand) != 0 {
                next_dir = cand;
                break;
            }
        }
        debug_assert!(next_dir != usize::MAX, "boundary walk left the edge set");
        if next_dir != dir {
            vertices.push((nx, ny));
        }
        v = next;
        dir = next_dir;
    }
    PixelRing { vertices, shoelace2 }
}

/// Warnings produced while tracing (labels present in the area table but
/// absent from the grid).
pub type TraceWarnings = Vec<String>;

/// Traces every label of the mosaic into a polygon, sorted by id.
///
/// Labels must each form a single 4-connected component (the mosaic
/// guarantees this); a label tracing to more than one exterior ring is a
/// hard data error. Attributes other than id and area are filled with
/// defaults; the pipeline overwrites them from the field metadata.
pub fn trace_polygons(
    raster: &FieldLabelRaster,
) -> Result<(Vec<FieldPolygon>, TraceWarnings)> {
    let grid = &raster.grid;
    let mut bboxes: std::collections::BTreeMap<u32, Window> = std::collections::BTreeMap::new();
    for (i, &v) in grid.data.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let (x, y) = (i % grid.width, i / grid.width);
        let px = Window::new(x, y, 1, 1);
        bboxes.entry(v).and_modify(|b| *b = b.union(&px)).or_insert(px);
    }

    let mut warnings = Vec::new();
    for &id in raster.id_areas.keys() {
        if !bboxes.contains_key(&id) {
            warnings.push(format!("label {id} has zero pixels; skipped"));
        }
    }

    let jobs: Vec<(u32, Window)> = bboxes.into_iter().collect();
    let resolution = grid.transform.pixel_size_x;
    let traced = exec::map_ordered(jobs, |(id, bbox)| {
        let local = Mask::from_fn(bbox.w, bbox.h, |lx, ly| {
            grid.get(bbox.x0 + lx, bbox.y0 + ly) == id
        });
        let rings = trace_mask(&local, (bbox.x0, bbox.y0));
        polygon_from_rings(id, rings, &grid.transform, resolution)
    });

    let mut polygons = Vec::with_capacity(traced.len());
    for p in traced {
        polygons.push(p?);
    }
    Ok((polygons, warnings))
}

fn polygon_from_rings(
    id: u32,
    rings: Vec<PixelRing>,
    transform: &GeoTransform,
    resolution: f64,
) -> Result<FieldPolygon> {
    let mut exterior: Option<Vec<(f64, f64)>> = None;
    let mut holes = Vec::new();
    let mut n_exterior = 0usize;
    for ring in rings {
        let world: Vec<(f64, f64)> = ring
            .vertices
            .iter()
            .map(|&(x, y)| transform.pixel_corner_to_world(x as f64, y as f64))
            .collect();
        if ring.shoelace2 < 0 {
            n_exterior += 1;
            exterior = Some(world);
        } else {
            holes.push(world);
        }
    }
    if n_exterior != 1 {
        return Err(Error::data(format!(
            "label {id} traced {n_exterior} exterior rings; labels must be single components"
        )));
    }
    let exterior = exterior.expect("exactly one exterior ring");
    let area_ha = polygon_area_ha(&exterior, &holes);
    Ok(FieldPolygon {
        id,
        exterior,
        holes,
        area_ha,
        valid_fraction: 1.0,
        n_merged: 1,
        source_resolution_m: resolution,
    })
}

// ---------------------------------------------------------------------------
// Rasterization (round-trip checks, synthetic ground truth, evaluation)
// ---------------------------------------------------------------------------

/// Rasterizes a polygon onto the pixel grid of `transform`, clipped to
/// `extent`, using even-odd fill over all rings at pixel centers. Vertices
/// produced by tracing (and any subset of them, e.g. after simplification)
/// lie on pixel corners, so the center test is never ambiguous.
pub fn rasterize_polygon(
    poly: &FieldPolygon,
    transform: &GeoTransform,
    extent: (usize, usize),
) -> Option<PixelMask> {
    let rings: Vec<Vec<(f64, f64)>> = poly
        .rings()
        .map(|ring| {
            ring.iter()
                .map(|&(wx, wy)| transform.world_to_pixel(wx, wy))
                .collect()
        })
        .collect();

    let (mut minx, mut miny, mut maxx, mut maxy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for ring in &rings {
        for &(x, y) in ring {
            minx = minx.min(x);
            miny = miny.min(y);
            maxx = maxx.max(x);
            maxy = maxy.max(y);
        }
    }
    if minx >= maxx || miny >= maxy {
        return None;
    }
    let y0 = (miny.floor().max(0.0)) as usize;
    let y1 = (maxy.ceil() as usize).min(extent.1);
    let x0 = (minx.floor().max(0.0)) as usize;
    let x1 = (maxx.ceil() as usize).min(extent.0);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }

    let window = Window::new(x0, y0, x1 - x0, y1 - y0);
    let mut mask = Mask::new(window.w, window.h);
    let mut crossings: Vec<f64> = Vec::new();
    for y in y0..y1 {
        let cy = y as f64 + 0.5;
        crossings.clear();
        for ring in &rings {
            for seg in ring.windows(2) {
                let (ax, ay) = seg[0];
                let (bx, by) = seg[1];
                if (ay <= cy) == (by <= cy) {
                    continue; // no crossing (horizontal segments included)
                }
                crossings.push(ax + (cy - ay) * (bx - ax) / (by - ay));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        debug_assert!(crossings.len().is_multiple_of(2), "open ring while rasterizing");
        for pair in crossings.chunks_exact(2) {
            let fill_from = ((pair[0] - 0.5).floor() as i64 + 1).max(x0 as i64);
            let fill_to = (((pair[1] - 0.5).ceil()) as i64).min(x1 as i64);
            for x in fill_from..fill_to {
                mask.set(x as usize - x0, y - y0, true);
            }
        }
    }
    PixelMask::new(window, mask).ok()?.tighten()
}

/// Paints every polygon's pixels with its id onto a grid shaped like
/// `template`. Later ids overwrite on (unexpected) overlap.
pub fn rasterize_polygons(polygons: &[FieldPolygon], template: &Grid<u32>) -> Grid<u32> {
    let mut out = Grid::<u32>::filled(
        template.width,
        template.height,
        0,
        template.transform,
        template.crs_epsg,
    );
    for poly in polygons {
        if let Some(mask) =
            rasterize_polygon(poly, &template.transform, (template.width, template.height))
        {
            mask.for_each_set(|x, y| out.set(x, y, poly.id));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (px, py) = (p.0 - a.0, p.1 - a.1);
    let (bx, by) = (b.0 - a.0, b.1 - a.1);
    let len2 = bx * bx + by * by;
    if len2 == 0.0 {
        return (px * px + py * py).sqrt();
    }
    let t = ((px * bx + py * by) / len2).clamp(0.0, 1.0);
    let (dx, dy) = (px - t * bx, py - t * by);
    (dx * dx + dy * dy).sqrt()
}

fn dp_mark(pts: &[(f64, f64)], first: usize, last: usize, tol: f64, keep: &mut [bool]) {
    if last <= first + 1 {
        return;
    }
    let mut max_d = -1.0;
    let mut max_i = first;
    for (i, &p) in pts.iter().enumerate().take(last).skip(first + 1) {
        let d = point_segment_distance(p, pts[first], pts[last]);
        if d > max_d {
            max_d = d;
            max_i = i;
        }
    }
    if max_d > tol {
        keep[max_i] = true;
        dp_mark(pts, first, max_i, tol, keep);
        dp_mark(pts, max_i, last, tol, keep);
    }
}

/// Recursive farthest-point simplification of one closed ring. The first
/// vertex is always preserved. Returns the original ring when the result
/// would degenerate below a triangle.
fn simplify_ring(ring: &[(f64, f64)], tolerance: f64) -> Vec<(f64, f64)> {
    if tolerance <= 0.0 || ring.len() <= 4 {
        return ring.to_vec();
    }
    let pts = &ring[..ring.len() - 1]; // drop closing duplicate
    let closed: Vec<(f64, f64)> = pts.iter().copied().chain([pts[0]]).collect();
    let mut keep = vec![false; closed.len()];
    keep[0] = true;
    *keep.last_mut().unwrap() = true;
    dp_mark(&closed, 0, closed.len() - 1, tolerance, &mut keep);
    let kept: Vec<(f64, f64)> =
        closed[..closed.len() - 1]
            .iter()
            .zip(&keep)
            .filter_map(|(&p, &k)| k.then_some(p))
            .collect();
    if kept.len() < 3 {
        return ring.to_vec();
    }
    let mut out = kept;
    out.push(out[0]);
    out
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// True when the open segments cross at an interior point of both.
pub fn segments_properly_cross(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    d: (f64, f64),
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    (d1 > 0.0) != (d2 > 0.0)
        && d1 != 0.0
        && d2 != 0.0
        && (d3 > 0.0) != (d4 > 0.0)
        && d3 != 0.0
        && d4 != 0.0
}

/// True when the segments share any point at all (crossing, touching, or
/// collinear overlap).
fn segments_intersect_at_all(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    d: (f64, f64),
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// A closed ring is simple when no two non-adjacent segments share a point.
pub fn ring_is_simple(ring: &[(f64, f64)]) -> bool {
    let n = ring.len().saturating_sub(1); // segment count
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect_at_all(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return false;
            }
        }
    }
    true
}

/// True when any ring of `a` properly crosses any ring of `b`. Shared border
/// chains and isolated touch points do not count.
pub fn polygons_properly_cross(a: &FieldPolygon, b: &FieldPolygon) -> bool {
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
        return false;
    }
    for ra in a.rings() {
        for rb in b.rings() {
            for sa in ra.windows(2) {
                for sb in rb.windows(2) {
                    if segments_properly_cross(sa[0], sa[1], sb[0], sb[1]) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Simplifies every ring of the polygon with the given tolerance (world
/// units). Falls back to the unsimplified rings when any simplified ring
/// stops being simple or the rings of the polygon start crossing each other.
/// Area is recomputed from the final geometry.
pub fn simplify_polygon(poly: &FieldPolygon, tolerance: f64) -> FieldPolygon {
    if tolerance <= 0.0 {
        return poly.clone();
    }
    let exterior = simplify_ring(&poly.exterior, tolerance);
    let holes: Vec<Vec<(f64, f64)>> =
        poly.holes.iter().map(|h| simplify_ring(h, tolerance)).collect();

    let mut ok = ring_is_simple(&exterior) && holes.iter().all(|h| ring_is_simple(h));
    if ok {
        // Rings of one polygon must stay disjoint apart from touch points.
        let all: Vec<&Vec<(f64, f64)>> = std::iter::once(&exterior).chain(holes.iter()).collect();
        'outer: for i in 0..all.len() {
            for j in i + 1..all.len() {
                for sa in all[i].windows(2) {
                    for sb in all[j].windows(2) {
                        if segments_properly_cross(sa[0], sa[1], sb[0], sb[1]) {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    if !ok {
        return poly.clone();
    }
    let area_ha = polygon_area_ha(&exterior, &holes);
    FieldPolygon { exterior, holes, area_ha, ..poly.clone() }
}

// ---------------------------------------------------------------------------
// Validation and cleaning
// ---------------------------------------------------------------------------

/// Even-odd point-in-polygon over all rings. Points exactly on a boundary
/// segment are reported as outside.
pub fn point_in_polygon(p: (f64, f64), poly: &FieldPolygon) -> bool {
    let mut inside = false;
    for ring in poly.rings() {
        for seg in ring.windows(2) {
            let (ax, ay) = seg[0];
            let (bx, by) = seg[1];
            if (ay <= p.1) == (by <= p.1) {
                continue;
            }
            let x = ax + (p.1 - ay) * (bx - ax) / (by - ay);
            if x > p.0 {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Debug, Clone, Serialize)]
pub struct RemovedPolygon {
    pub id: u32,
    pub area_ha: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilledHole {
    pub id: u32,
    pub area_ha: f64,
}

/// What validation removed or repaired, for the run report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub removed_polygons: Vec<RemovedPolygon>,
    pub filled_holes: Vec<FilledHole>,
    /// Polygons whose simplification was reverted to keep the layer
    /// crossing-free (filled in by the pipeline).
    pub reverted_simplifications: Vec<u32>,
    pub warnings: Vec<String>,
}

/// Drops sliver polygons, fills sliver holes, and asserts the structural
/// guarantees of a traced layer: ring closure and orientation, and pairwise
/// interior disjointness. An interior overlap is a topology error naming
/// both ids — it indicates an upstream bug and is never repaired here.
pub fn validate_and_clean(
    polygons: Vec<FieldPolygon>,
    min_area_ha: f64,
    min_hole_ha: f64,
) -> Result<(Vec<FieldPolygon>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut kept: Vec<FieldPolygon> = Vec::with_capacity(polygons.len());

    for mut poly in polygons {
        for ring in poly.rings() {
            if ring.len() < 4 || ring.first() != ring.last() {
                return Err(Error::topology(format!("polygon {}: ring not closed", poly.id)));
            }
        }
        if shoelace2(&poly.exterior) <= 0.0 {
            return Err(Error::topology(format!(
                "polygon {}: exterior ring is not counter-clockwise",
                poly.id
            )));
        }
        let mut filled = Vec::new();
        poly.holes.retain(|h| {
            let a = -ring_area_ha(h); // holes are clockwise: positive magnitude
            if a < min_hole_ha {
                filled.push(a);
                false
            } else {
                true
            }
        });
        for a in filled {
            report.filled_holes.push(FilledHole { id: poly.id, area_ha: a });
        }
        poly.area_ha = polygon_area_ha(&poly.exterior, &poly.holes);
        if poly.area_ha < min_area_ha {
            report.removed_polygons.push(RemovedPolygon {
                id: poly.id,
                area_ha: poly.area_ha,
                reason: "sliver".to_string(),
            });
            continue;
        }
        kept.push(poly);
    }

    assert_disjoint_interiors(&kept)?;
    Ok((kept, report))
}

/// Hard check that no two polygons share interior points: no ring of one may
/// properly cross a ring of another, and no polygon's interior sample point
/// may fall inside another polygon.
pub fn assert_disjoint_interiors(polygons: &[FieldPolygon]) -> Result<()> {
    let bounds: Vec<(f64, f64, f64, f64)> = polygons.iter().map(|p| p.bounds()).collect();
    for i in 0..polygons.len() {
        for j in i + 1..polygons.len() {
            let (ax0, ay0, ax1, ay1) = bounds[i];
            let (bx0, by0, bx1, by1) = bounds[j];
            if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
                continue;
            }
            let (a, b) = (&polygons[i], &polygons[j]);
            if polygons_properly_cross(a, b) {
                return Err(Error::topology(format!(
                    "polygons {} and {} overlap (boundary crossing)",
                    a.id, b.id
                )));
            }
            if point_in_polygon(interior_sample(a), b) || point_in_polygon(interior_sample(b), a) {
                return Err(Error::topology(format!(
                    "polygons {} and {} overlap (containment)",
                    a.id, b.id
                )));
            }
        }
    }
    Ok(())
}

/// A point strictly inside a traced polygon.
///
/// Uses the exterior's top-left corner (max world y, then min x): the region
/// extends south-east of it, and no boundary line of the polygon lies closer
/// than the smallest coordinate gap of its own vertices, so half a gap into
/// that quadrant is interior.
fn interior_sample(poly: &FieldPolygon) -> (f64, f64) {
    let mut best = poly.exterior[0];
    for &(x, y) in &poly.exterior[..poly.exterior.len() - 1] {
        if y > best.1 || (y == best.1 && x < best.0) {
            best = (x, y);
        }
    }
    let min_gap = |pick: fn(&(f64, f64)) -> f64| -> f64 {
        let mut coords: Vec<f64> = poly.rings().flatten().map(pick).collect();
        coords.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        let mut gap = f64::MAX;
        for pair in coords.windows(2) {
            let d = pair[1] - pair[0];
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
        gap
    };
    let gx = min_gap(|p| p.0);
    let gy = min_gap(|p| p.1);
    (best.0 + gx / 2.0, best.1 - gy / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoTransform;
    use crate::unify::FieldLabelRaster;

    fn gt() -> GeoTransform {
        GeoTransform::new(0.0, 0.0, 10.0, 10.0).unwrap()
    }

    fn raster_from_rows(rows: &[&str]) -> FieldLabelRaster {
        let h = rows.len();
        let w = rows[0].len();
        let mut grid = Grid::<u32>::filled(w, h, 0, gt(), 32635);
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.bytes().enumerate() {
                if ch != b'.' {
                    grid.set(x, y, (ch - b'0') as u32);
                }
            }
        }
        FieldLabelRaster::from_grid(grid)
    }

    #[test]
    fn square_label_traces_to_square_ring() {
        let raster = raster_from_rows(&["111", "111", "111"]);
        let (polys, warnings) = trace_polygons(&raster).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert_eq!(p.exterior.len(), 5); // 4 corners + closure
        assert!(p.holes.is_empty());
        // 3x3 pixels at 10 m: 30 m sides, 0.09 ha.
        assert!((p.area_ha - 0.09).abs() < 1e-12);
        let (x0, y0, x1, y1) = p.bounds();
        assert_eq!((x1 - x0, y0 - y1), (30.0, -30.0));
        assert!(shoelace2(&p.exterior) > 0.0);
    }

    #[test]
    fn center_hole_is_traced_clockwise() {
        let raster = raster_from_rows(&[
            "11111",
            "11111",
            "11.11",
            "11111",
            "11111",
        ]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert_eq!(p.holes.len(), 1);
        assert_eq!(p.holes[0].len(), 5);
        assert!(shoelace2(&p.holes[0]) < 0.0);
        assert!((p.area_ha - 0.24).abs() < 1e-12); // 24 px * 0.01 ha
    }

    #[test]
    fn two_labels_sorted_by_id() {
        let raster = raster_from_rows(&["22.11", "22.11"]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        let ids: Vec<u32> = polys.iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn trace_rasterize_round_trip_is_exact() {
        let raster = raster_from_rows(&[
            "1122222..",
            "112222...",
            "1122.2233",
            "1122223..",
            "...22....",
        ]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        let back = rasterize_polygons(&polys, &raster.grid);
        assert_eq!(back.data, raster.grid.data);
    }

    #[test]
    fn round_trip_survives_random_label_fields() {
        for seed in 0..30u64 {
            let mut rng = crate::rng::Lcg64::new(seed);
            // random rectangles painted first-writer-wins, then fragment
            // cleanup through the mosaic path
            let mut instances = Vec::new();
            for i in 0..12 {
                let x0 = rng.next_below(28) as usize;
                let y0 = rng.next_below(28) as usize;
                let w = 2 + rng.next_below(10) as usize;
                let h = 2 + rng.next_below(10) as usize;
                let mask = Mask::from_fn(w.min(32 - x0), h.min(32 - y0), |_, _| true);
                instances.push(crate::unify::FieldInstance {
                    mask: PixelMask::new(
                        Window::new(x0, y0, mask.w, mask.h),
                        mask,
                    )
                    .unwrap(),
                    score: 1.0,
                    tile_index: 0,
                    instance_index: i,
                    n_merged: 1,
                    valid_fraction: 1.0,
                });
            }
            crate::refine::order_by_area(&mut instances, |i| {
                (i.area(), i.tile_index, i.instance_index)
            });
            let params = crate::unify::MergeParams {
                iou_threshold: 0.95,
                containment_threshold: 0.99,
                min_mosaic_area_px: 1,
            };
            let kept = crate::unify::resolve_overlaps(instances, (32, 32), &params);
            let (raster, _) = crate::unify::mosaic(&kept, (32, 32), gt(), 32635).unwrap();
            let (polys, _) = trace_polygons(&raster).unwrap();
            let back = rasterize_polygons(&polys, &raster.grid);
            assert_eq!(back.data, raster.grid.data, "seed {seed}");
        }
    }

    #[test]
    fn diagonal_pinch_produces_simple_rings() {
        // 4-connected label with a checkerboard corner and an enclosed
        // single-pixel pocket.
        let raster = raster_from_rows(&["11.", "1.1", "111"]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        assert_eq!(polys.len(), 1);
        let p = &polys[0];
        assert_eq!(p.holes.len(), 1);
        assert!(ring_is_simple(&p.exterior));
        assert!(ring_is_simple(&p.holes[0]));
        let back = rasterize_polygons(&polys, &raster.grid);
        assert_eq!(back.data, raster.grid.data);
    }

    #[test]
    fn simplify_zero_tolerance_is_identity() {
        let raster = raster_from_rows(&["111", "111", "111"]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        let s = simplify_polygon(&polys[0], 0.0);
        assert_eq!(s.exterior, polys[0].exterior);
    }

    #[test]
    fn collinear_vertices_collapse_at_any_positive_tolerance() {
        // A square ring with redundant collinear midpoints.
        let ring: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (0.0, -15.0),
            (0.0, -30.0),
            (15.0, -30.0),
            (30.0, -30.0),
            (30.0, -15.0),
            (30.0, 0.0),
            (15.0, 0.0),
            (0.0, 0.0),
        ];
        let poly = FieldPolygon {
            id: 1,
            exterior: ring,
            holes: vec![],
            area_ha: 0.09,
            valid_fraction: 1.0,
            n_merged: 1,
            source_resolution_m: 10.0,
        };
        let s = simplify_polygon(&poly, 0.001);
        assert_eq!(s.exterior.len(), 5);
        assert!((s.area_ha - 0.09).abs() < 1e-12);
    }

    #[test]
    fn staircase_collapses_within_tolerance_bound() {
        // Right triangle whose hypotenuse is a 1-px staircase at 10 m pixels.
        let n = 8usize;
        let mut grid = Grid::<u32>::filled(n, n, 0, gt(), 32635);
        for y in 0..n {
            for x in 0..n {
                if x <= y {
                    grid.set(x, y, 1);
                }
            }
        }
        let raster = FieldLabelRaster::from_grid(grid);
        let (polys, _) = trace_polygons(&raster).unwrap();
        let original = polys[0].clone();
        let tol = 7.5;
        let s = simplify_polygon(&original, tol);
        assert!(s.exterior.len() < original.exterior.len());
        // Every original vertex stays within tolerance of the simplified ring.
        for &p in &original.exterior {
            let mut min_d = f64::MAX;
            for seg in s.exterior.windows(2) {
                min_d = min_d.min(point_segment_distance(p, seg[0], seg[1]));
            }
            assert!(min_d <= tol + 1e-9, "vertex {p:?} deviates {min_d}");
        }
        // Area change bounded by perimeter * tolerance.
        let perimeter: f64 = original
            .exterior
            .windows(2)
            .map(|s| ((s[1].0 - s[0].0).powi(2) + (s[1].1 - s[0].1).powi(2)).sqrt())
            .sum();
        assert!((s.area_ha - original.area_ha).abs() * 10_000.0 <= perimeter * tol);
    }

    #[test]
    fn sliver_polygons_dropped_and_small_holes_filled() {
        let raster = raster_from_rows(&[
            "111111....",
            "111111.2..",
            "11.111....",
            "111111....",
        ]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        // label 1: 23 px = 0.23 ha with a 1-px hole; label 2: 1 px = 0.01 ha
        let (kept, report) = validate_and_clean(polys, 0.02, 0.0625).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, 1);
        assert!(kept[0].holes.is_empty());
        assert!((kept[0].area_ha - 0.24).abs() < 1e-12); // hole filled
        assert_eq!(report.removed_polygons.len(), 1);
        assert_eq!(report.removed_polygons[0].id, 2);
        assert_eq!(report.filled_holes.len(), 1);
    }

    #[test]
    fn disjoint_layer_passes_with_empty_report() {
        let raster = raster_from_rows(&["11.22", "11.22"]);
        let (polys, _) = trace_polygons(&raster).unwrap();
        let (kept, report) = validate_and_clean(polys, 0.0, 0.0).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(report.removed_polygons.is_empty());
        assert!(report.filled_holes.is_empty());
    }

    #[test]
    fn interior_overlap_is_a_topology_error() {
        let raster = raster_from_rows(&["111", "111", "111"]);
        let (mut polys, _) = trace_polygons(&raster).unwrap();
        let mut clone = polys[0].clone();
        clone.id = 2;
        // shift by half a pixel so boundaries properly cross
        for v in clone.exterior.iter_mut() {
            v.0 += 5.0;
            v.1 -= 5.0;
        }
        polys.push(clone);
        let err = validate_and_clean(polys, 0.0, 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('1') && msg.contains('2'), "{msg}");
        assert!(matches!(err, Error::Topology(_)));
    }
}

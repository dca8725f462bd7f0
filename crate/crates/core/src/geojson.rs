//! Deterministic GeoJSON output and a reader for the engine's own layers.
//!
//! The writer emits one RFC 7946 FeatureCollection with a `crs_epsg` foreign
//! member, features sorted by id, and coordinates at a fixed 6-decimal
//! precision. Serialization is hand-rolled string building so identical
//! input always produces identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vectorize::FieldPolygon;

fn push_coord(out: &mut String, (x, y): (f64, f64)) {
    let _ = write!(out, "[{x:.6},{y:.6}]");
}

fn push_ring(out: &mut String, ring: &[(f64, f64)]) {
    out.push('[');
    for (i, &p) in ring.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_coord(out, p);
    }
    out.push(']');
}

/// Renders the polygons as a FeatureCollection string.
pub fn to_geojson_string(polygons: &[FieldPolygon], crs_epsg: u32) -> String {
    let mut sorted: Vec<&FieldPolygon> = polygons.iter().collect();
    sorted.sort_by_key(|p| p.id);

    let mut out = String::new();
    let _ = write!(out, "{{\"type\":\"FeatureCollection\",\"crs_epsg\":{crs_epsg},\"features\":[");
    for (i, poly) in sorted.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "{{\"type\":\"Feature\",\"properties\":{{\"id\":{},\"area_ha\":{:.6},\"valid_fraction\":{:.6},\"n_merged\":{},\"source_resolution_m\":{}}},\"geometry\":{{\"type\":\"Polygon\",\"coordinates\":[",
            poly.id, poly.area_ha, poly.valid_fraction, poly.n_merged, poly.source_resolution_m
        );
        push_ring(&mut out, &poly.exterior);
        for hole in &poly.holes {
            out.push(',');
            push_ring(&mut out, hole);
        }
        out.push_str("]}}");
    }
    out.push_str("]}\n");
    out
}

/// Writes the FeatureCollection to `path`. Byte-identical for identical
/// input.
pub fn write_geojson(polygons: &[FieldPolygon], crs_epsg: u32, path: &Path) -> Result<()> {
    std::fs::write(path, to_geojson_string(polygons, crs_epsg))?;
    Ok(())
}

/// A layer read back from GeoJSON.
#[derive(Debug, Clone)]
pub struct GeoJsonLayer {
    pub crs_epsg: Option<u32>,
    pub polygons: Vec<FieldPolygon>,
}

fn ring_from_value(value: &serde_json::Value, what: &str) -> Result<Vec<(f64, f64)>> {
    let arr = value
        .as_array()
        .ok_or_else(|| Error::data(format!("{what}: ring is not an array")))?;
    let mut ring = Vec::with_capacity(arr.len());
    for pos in arr {
        let pair = pos
            .as_array()
            .filter(|p| p.len() >= 2)
            .ok_or_else(|| Error::data(format!("{what}: bad coordinate")))?;
        let x = pair[0].as_f64().ok_or_else(|| Error::data(format!("{what}: bad x")))?;
        let y = pair[1].as_f64().ok_or_else(|| Error::data(format!("{what}: bad y")))?;
        ring.push((x, y));
    }
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(Error::data(format!("{what}: ring not closed")));
    }
    Ok(ring)
}

/// Parses a FeatureCollection of Polygon features. Properties the engine
/// writes are recovered when present; missing ones fall back to defaults
/// (ids default to the feature's position, 1-based).
pub fn read_geojson(path: &Path) -> Result<GeoJsonLayer> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read geojson {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("bad geojson {}: {e}", path.display())))?;
    if doc["type"] != "FeatureCollection" {
        return Err(Error::data(format!("{}: not a FeatureCollection", path.display())));
    }
    let crs_epsg = doc["crs_epsg"].as_u64().map(|v| v as u32);
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::data(format!("{}: missing features array", path.display())))?;

    let mut polygons = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        let what = format!("feature {i}");
        let geometry = &feature["geometry"];
        if geometry["type"] != "Polygon" {
            return Err(Error::data(format!("{what}: only Polygon geometries are supported")));
        }
        let rings = geometry["coordinates"]
            .as_array()
            .ok_or_else(|| Error::data(format!("{what}: missing coordinates")))?;
        if rings.is_empty() {
            return Err(Error::data(format!("{what}: polygon has no rings")));
        }
        let exterior = ring_from_value(&rings[0], &what)?;
        let mut holes = Vec::new();
        for ring in &rings[1..] {
            holes.push(ring_from_value(ring, &what)?);
        }
        let props = &feature["properties"];
        let id = props["id"].as_u64().map(|v| v as u32).unwrap_or((i + 1) as u32);
        let area_ha = props["area_ha"]
            .as_f64()
            .unwrap_or_else(|| crate::vectorize::polygon_area_ha(&exterior, &holes));
        polygons.push(FieldPolygon {
            id,
            exterior,
            holes,
            area_ha,
            valid_fraction: props["valid_fraction"].as_f64().unwrap_or(1.0),
            n_merged: props["n_merged"].as_u64().unwrap_or(1) as u32,
            source_resolution_m: props["source_resolution_m"].as_f64().unwrap_or(0.0),
        });
    }
    Ok(GeoJsonLayer { crs_epsg, polygons })
}

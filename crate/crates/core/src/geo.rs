//! Geotransform arithmetic and pixel windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// North-up affine mapping between pixel indices and world coordinates.
///
/// `pixel_size_y` is positive and applied southward: row `y` maps to
/// `origin_y - y * pixel_size_y`. Rotated rasters are not supported and must
/// be resampled upstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    /// World X of the top-left corner of pixel (0, 0).
    pub origin_x: f64,
    /// World Y of the top-left corner of pixel (0, 0).
    pub origin_y: f64,
    /// Pixel width in CRS units (> 0).
    pub pixel_size_x: f64,
    /// Pixel height in CRS units (> 0, southward).
    pub pixel_size_y: f64,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size_x: f64, pixel_size_y: f64) -> Result<Self> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(pixel_size_x) || !valid(pixel_size_y) {
            return Err(Error::data(format!(
                "pixel sizes must be positive, got ({pixel_size_x}, {pixel_size_y})"
            )));
        }
        Ok(GeoTransform { origin_x, origin_y, pixel_size_x, pixel_size_y })
    }

    /// World coordinates of the top-left corner of pixel (x, y).
    pub fn pixel_corner_to_world(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.origin_x + x * self.pixel_size_x,
            self.origin_y - y * self.pixel_size_y,
        )
    }

    /// World coordinates of the center of pixel (x, y).
    pub fn pixel_center_to_world(&self, x: usize, y: usize) -> (f64, f64) {
        self.pixel_corner_to_world(x as f64 + 0.5, y as f64 + 0.5)
    }

    /// Fractional pixel coordinates (corner-based) of a world point.
    pub fn world_to_pixel(&self, wx: f64, wy: f64) -> (f64, f64) {
        (
            (wx - self.origin_x) / self.pixel_size_x,
            (self.origin_y - wy) / self.pixel_size_y,
        )
    }

    /// Nearest integer pixel the given world point is the corner of.
    pub fn world_to_pixel_index(&self, wx: f64, wy: f64) -> (i64, i64) {
        let (px, py) = self.world_to_pixel(wx, wy);
        (px.round() as i64, py.round() as i64)
    }

    /// Area of one pixel in hectares (1 ha = 10 000 m²).
    pub fn pixel_area_ha(&self) -> f64 {
        self.pixel_size_x * self.pixel_size_y / 10_000.0
    }

    /// Number of whole pixels needed to cover `area_ha` hectares, rounded to
    /// the nearest pixel.
    pub fn ha_to_pixels(&self, area_ha: f64) -> u64 {
        (area_ha / self.pixel_area_ha()).round() as u64
    }
}

/// Axis-aligned pixel window inside a parent raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Window {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Window { x0, y0, w, h }
    }

    /// Validates containment in a parent of the given dimensions.
    pub fn checked(self, parent_w: usize, parent_h: usize) -> Result<Self> {
        if self.x0 + self.w > parent_w || self.y0 + self.h > parent_h {
            return Err(Error::data(format!(
                "window {:?} exceeds parent extent {}x{}",
                self, parent_w, parent_h
            )));
        }
        Ok(self)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn x1(&self) -> usize {
        self.x0 + self.w
    }

    pub fn y1(&self) -> usize {
        self.y0 + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    /// Intersection of two windows, if non-empty.
    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        if x0 < x1 && y0 < y1 {
            Some(Window::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    /// Smallest window covering both.
    pub fn union(&self, other: &Window) -> Window {
        let x0 = self.x0.min(other.x0);
        let y0 = self.y0.min(other.y0);
        let x1 = self.x1().max(other.x1());
        let y1 = self.y1().max(other.y1());
        Window::new(x0, y0, x1 - x0, y1 - y0)
    }
}

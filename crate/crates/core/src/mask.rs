//! Binary masks: tile-local grids, instance masks in global pixel
//! coordinates, and the quality/context mask pair.

use crate::error::{Error, Result};
use crate::geo::Window;
use crate::grid::Grid;
use crate::morph;

/// A plain binary grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub w: usize,
    pub h: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(w: usize, h: usize) -> Self {
        Mask { w, h, data: vec![false; w * h] }
    }

    pub fn from_fn(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Mask { w, h, data }
    }

    pub fn from_data(w: usize, h: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != w * h {
            return Err(Error::data(format!(
                "mask data length {} does not match {w}x{h}",
                data.len()
            )));
        }
        Ok(Mask { w, h, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.w + x] = v;
    }

    /// Number of true pixels.
    pub fn area(&self) -> u64 {
        self.data.iter().filter(|&&v| v).count() as u64
    }

    pub fn none_set(&self) -> bool {
        self.data.iter().all(|&v| !v)
    }

    /// Tight bounding box of the true pixels, if any.
    pub fn bbox(&self) -> Option<Window> {
        let mut x0 = self.w;
        let mut y0 = self.h;
        let mut x1 = 0usize;
        let mut y1 = 0usize;
        let mut any = false;
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            for (x, &v) in row.iter().enumerate() {
                if v {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        if any {
            Some(Window::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
        } else {
            None
        }
    }
}

/// An instance mask anchored in global pixel coordinates: a window into the
/// full raster plus the local binary payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub window: Window,
    pub mask: Mask,
}

impl PixelMask {
    pub fn new(window: Window, mask: Mask) -> Result<Self> {
        if mask.w != window.w || mask.h != window.h {
            return Err(Error::data(format!(
                "mask dims {}x{} do not match window {:?}",
                mask.w, mask.h, window
            )));
        }
        Ok(PixelMask { window, mask })
    }

    pub fn area(&self) -> u64 {
        self.mask.area()
    }

    #[inline]
    pub fn get_global(&self, x: usize, y: usize) -> bool {
        self.window.contains(x, y) && self.mask.get(x - self.window.x0, y - self.window.y0)
    }

    /// Visits every set pixel in global coordinates, row-major.
    pub fn for_each_set(&self, mut f: impl FnMut(usize, usize)) {
        for ly in 0..self.mask.h {
            let base = ly * self.mask.w;
            for lx in 0..self.mask.w {
                if self.mask.data[base + lx] {
                    f(self.window.x0 + lx, self.window.y0 + ly);
                }
            }
        }
    }

    /// |self ∩ other| in pixels.
    pub fn intersection_area(&self, other: &PixelMask) -> u64 {
        let Some(overlap) = self.window.intersect(&other.window) else {
            return 0;
        };
        let mut n = 0u64;
        for y in overlap.y0..overlap.y1() {
            let a_row = (y - self.window.y0) * self.window.w;
            let b_row = (y - other.window.y0) * other.window.w;
            for x in overlap.x0..overlap.x1() {
                if self.mask.data[a_row + x - self.window.x0]
                    && other.mask.data[b_row + x - other.window.x0]
                {
                    n += 1;
                }
            }
        }
        n
    }

    /// Intersection over union; 0 when both masks are empty.
    pub fn iou(&self, other: &PixelMask) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// |self ∩ other| / min(|self|, |other|); 0 when either mask is empty.
    pub fn containment_over_smaller(&self, other: &PixelMask) -> f64 {
        let smaller = self.area().min(other.area());
        if smaller == 0 {
            0.0
        } else {
            self.intersection_area(other) as f64 / smaller as f64
        }
    }

    /// Union of the two masks over the joint window.
    pub fn union(&self, other: &PixelMask) -> PixelMask {
        let window = self.window.union(&other.window);
        let mut mask = Mask::new(window.w, window.h);
        for src in [self, other] {
            src.for_each_set(|x, y| mask.set(x - window.x0, y - window.y0, true));
        }
        PixelMask { window, mask }
    }

    /// Re-anchors the mask on a window grown by `radius` on every side,
    /// clamped to `clamp`. Gives morphology room to dilate without leaving
    /// the allowed extent.
    pub fn padded(&self, radius: usize, clamp: &Window) -> PixelMask {
        let x0 = self.window.x0.saturating_sub(radius).max(clamp.x0);
        let y0 = self.window.y0.saturating_sub(radius).max(clamp.y0);
        let x1 = (self.window.x1() + radius).min(clamp.x1());
        let y1 = (self.window.y1() + radius).min(clamp.y1());
        let window = Window::new(x0, y0, x1 - x0, y1 - y0);
        let mut mask = Mask::new(window.w, window.h);
        self.for_each_set(|x, y| {
            if window.contains(x, y) {
                mask.set(x - window.x0, y - window.y0, true);
            }
        });
        PixelMask { window, mask }
    }

    /// Restricts the mask to `clip`, dropping pixels outside. None when
    /// nothing remains.
    pub fn clip_to(&self, clip: &Window) -> Option<PixelMask> {
        let overlap = self.window.intersect(clip)?;
        let mut mask = Mask::new(overlap.w, overlap.h);
        for y in overlap.y0..overlap.y1() {
            for x in overlap.x0..overlap.x1() {
                if self.get_global(x, y) {
                    mask.set(x - overlap.x0, y - overlap.y0, true);
                }
            }
        }
        let out = PixelMask { window: overlap, mask };
        out.tighten()
    }

    /// Shrinks the window to the tight bounding box. None if the mask is empty.
    pub fn tighten(&self) -> Option<PixelMask> {
        let local = self.mask.bbox()?;
        if local.w == self.window.w && local.h == self.window.h {
            return Some(self.clone());
        }
        let window = Window::new(
            self.window.x0 + local.x0,
            self.window.y0 + local.y0,
            local.w,
            local.h,
        );
        let mut mask = Mask::new(local.w, local.h);
        for y in 0..local.h {
            for x in 0..local.w {
                mask.set(x, y, self.mask.get(local.x0 + x, local.y0 + y));
            }
        }
        Some(PixelMask { window, mask })
    }
}

/// Boolean raster stored as u8 (0/1).
pub type BoolGrid = Grid<u8>;

#[inline]
pub fn grid_true(grid: &BoolGrid, x: usize, y: usize) -> bool {
    grid.data[y * grid.width + x] != 0
}

/// The two spatial masks guiding refinement: `quality` marks valid
/// agricultural pixels and `context` is its conservative shrinkage around
/// exclusion zones. Context implies quality at every pixel.
#[derive(Debug, Clone)]
pub struct MaskPair {
    pub quality: BoolGrid,
    pub context: BoolGrid,
}

impl MaskPair {
    pub fn new(quality: BoolGrid, context: BoolGrid) -> Result<Self> {
        if quality.width != context.width || quality.height != context.height {
            return Err(Error::data(format!(
                "quality {}x{} and context {}x{} extents differ",
                quality.width, quality.height, context.width, context.height
            )));
        }
        for i in 0..quality.data.len() {
            if context.data[i] != 0 && quality.data[i] == 0 {
                return Err(Error::data(format!(
                    "context mask marks pixel {i} valid where quality does not"
                )));
            }
        }
        Ok(MaskPair { quality, context })
    }

    /// All-valid masks over the given extent.
    pub fn all_valid(template: &BoolGrid) -> Self {
        let all = Grid::filled(
            template.width,
            template.height,
            1,
            template.transform,
            template.crs_epsg,
        );
        MaskPair { quality: all.clone(), context: all }
    }

    /// Derives the context mask from the quality mask via
    /// [`build_context_mask`].
    pub fn from_quality(quality: BoolGrid, expand_radius: usize) -> Self {
        let context = build_context_mask(&quality, expand_radius);
        MaskPair { quality, context }
    }

    #[inline]
    pub fn quality_at(&self, x: usize, y: usize) -> bool {
        grid_true(&self.quality, x, y)
    }

    #[inline]
    pub fn context_at(&self, x: usize, y: usize) -> bool {
        grid_true(&self.context, x, y)
    }
}

/// Expands the excluded (invalid) set of a quality mask by a square
/// structuring element of half-width `expand_radius`. The result marks the
/// pixels that remain reliable; it is a subset of the quality-valid set.
pub fn build_context_mask(quality: &BoolGrid, expand_radius: usize) -> BoolGrid {
    let excluded = Mask::from_data(
        quality.width,
        quality.height,
        quality.data.iter().map(|&v| v == 0).collect(),
    )
    .expect("grid data length is consistent by construction");
    let grown = morph::dilate(&excluded, expand_radius);
    let mut out = quality.clone();
    for (slot, &ex) in out.data.iter_mut().zip(grown.data.iter()) {
        *slot = if ex { 0 } else { 1 };
    }
    out
}

//! Tiling planner: overlapping fixed-size windows covering a raster extent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Window;

/// Default tile edge in pixels.
pub const DEFAULT_TILE_SIZE: usize = 512;
/// Default overlap between adjacent tiles in pixels (25% of the tile edge).
pub const DEFAULT_OVERLAP: usize = 128;

/// Ordered set of overlapping windows covering an extent.
///
/// Tiles are sorted by `(y0, x0)` and the list is a pure function of the
/// inputs. Edge tiles slide back (clamp-to-edge) instead of padding, so every
/// tile carries full-size real content whenever the extent allows it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub tiles: Vec<Window>,
    pub tile_size: usize,
    pub overlap: usize,
    pub extent: (usize, usize),
}

impl TilePlan {
    pub fn window(&self, tile_index: usize) -> Option<Window> {
        self.tiles.get(tile_index).copied()
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

/// Start offsets along one axis: 0, stride, 2*stride, ... with the final
/// start clamped so the last tile ends exactly at the extent.
fn axis_starts(extent: usize, tile: usize, stride: usize) -> Vec<usize> {
    if extent <= tile {
        return vec![0];
    }
    let mut starts = Vec::new();
    let mut s = 0;
    loop {
        if s + tile >= extent {
            let clamped = extent - tile;
            if starts.last() != Some(&clamped) {
                starts.push(clamped);
            }
            break;
        }
        starts.push(s);
        s += stride;
    }
    starts
}

/// Plans the overlapping tile windows for a `width` x `height` extent.
///
/// Extents smaller than `tile_size` in a dimension yield windows of the full
/// dimension in that axis.
pub fn build_tile_plan(
    width: usize,
    height: usize,
    tile_size: usize,
    overlap: usize,
) -> Result<TilePlan> {
    if width == 0 || height == 0 {
        return Err(Error::config(format!("empty extent {width}x{height}")));
    }
    if tile_size == 0 || tile_size <= overlap {
        return Err(Error::config(format!(
            "tile_size ({tile_size}) must exceed overlap ({overlap})"
        )));
    }
    let stride = tile_size - overlap;
    let tile_w = tile_size.min(width);
    let tile_h = tile_size.min(height);
    let xs = axis_starts(width, tile_w, stride);
    let ys = axis_starts(height, tile_h, stride);
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for &y0 in &ys {
        for &x0 in &xs {
            tiles.push(Window::new(x0, y0, tile_w, tile_h));
        }
    }
    Ok(TilePlan { tiles, tile_size, overlap, extent: (width, height) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extent_equal_to_tile_yields_one_tile() {
        let plan = build_tile_plan(512, 512, 512, 128).unwrap();
        assert_eq!(plan.tiles, vec![Window::new(0, 0, 512, 512)]);
    }

    #[test]
    fn square_extent_with_clamping() {
        // stride 384; starts 0, 384, then 768 clamps to 512.
        let plan = build_tile_plan(1024, 1024, 512, 128).unwrap();
        assert_eq!(plan.len(), 9);
        let xs: Vec<usize> = plan.tiles.iter().take(3).map(|w| w.x0).collect();
        assert_eq!(xs, vec![0, 384, 512]);
        let ys: Vec<usize> = plan.tiles.iter().step_by(3).map(|w| w.y0).collect();
        assert_eq!(ys, vec![0, 384, 512]);
    }

    #[test]
    fn narrow_extent_clamps_second_start() {
        let plan = build_tile_plan(600, 512, 512, 128).unwrap();
        assert_eq!(
            plan.tiles,
            vec![Window::new(0, 0, 512, 512), Window::new(88, 0, 512, 512)]
        );
    }

    #[test]
    fn small_extent_yields_full_dimension_tile() {
        let plan = build_tile_plan(200, 300, 512, 128).unwrap();
        assert_eq!(plan.tiles, vec![Window::new(0, 0, 200, 300)]);
    }

    #[test]
    fn rejects_overlap_not_less_than_tile() {
        assert!(build_tile_plan(512, 512, 128, 128).is_err());
        assert!(build_tile_plan(512, 512, 128, 256).is_err());
    }

    proptest! {
        #[test]
        fn every_pixel_covered_and_windows_in_bounds(
            width in 1usize..1500,
            height in 1usize..1500,
            tile_size in 1usize..600,
            overlap_frac in 0.0f64..0.99,
        ) {
            let overlap = ((tile_size as f64) * overlap_frac) as usize;
            prop_assume!(tile_size > overlap);
            let plan = build_tile_plan(width, height, tile_size, overlap).unwrap();
            for w in &plan.tiles {
                prop_assert!(w.x1() <= width && w.y1() <= height);
                prop_assert_eq!(w.w, tile_size.min(width));
                prop_assert_eq!(w.h, tile_size.min(height));
            }
            // Coverage along each axis implies full 2D coverage because the
            // plan is a cross product of axis starts.
            let mut covered_x = vec![false; width];
            let mut covered_y = vec![false; height];
            for w in &plan.tiles {
                covered_x[w.x0..w.x1()].fill(true);
                covered_y[w.y0..w.y1()].fill(true);
            }
            prop_assert!(covered_x.iter().all(|&c| c));
            prop_assert!(covered_y.iter().all(|&c| c));
            // Sorted by (y0, x0), no duplicates.
            let keys: Vec<(usize, usize)> = plan.tiles.iter().map(|w| (w.y0, w.x0)).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(keys.len(), sorted.len());
            prop_assert_eq!(keys, sorted);
        }

        #[test]
        fn plan_is_deterministic(width in 1usize..800, height in 1usize..800) {
            let a = build_tile_plan(width, height, 256, 64).unwrap();
            let b = build_tile_plan(width, height, 256, 64).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

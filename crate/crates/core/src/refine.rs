//! Structured post-processing of raw instance masks: area-priority ordering,
//! the erode / largest-component / dilate sequence, and validity filtering
//! against the quality and context masks.

use serde::{Deserialize, Serialize};

use crate::mask::{Mask, MaskPair, PixelMask};
use crate::morph::{self, Connectivity};

/// Parameters of the refinement stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RefineParams {
    /// Half-width of the square structuring element. The default of 1 (a 3x3
    /// kernel) is the minimal element that severs single-pixel bridges.
    pub kernel_radius: usize,
    /// Connectivity for component analysis. 4 prevents diagonal leaks
    /// between adjacent fields.
    pub connectivity: Connectivity,
    /// Minimum fraction of context-valid pixels an instance must retain.
    pub min_valid_fraction: f64,
    /// Minimum instance area in pixels. Derive from the resolution lookup
    /// when configuring a run (see [`min_area_ha_for_resolution`]).
    pub min_area_px: u64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            kernel_radius: 1,
            connectivity: Connectivity::Four,
            min_valid_fraction: 0.9,
            min_area_px: 1,
        }
    }
}

/// Minimum field area in hectares appropriate for a given input resolution,
/// by nearest-resolution lookup: 10 m and 5 m map to 0.5 ha, 3 m and 2.5 m to
/// 0.3 ha, 2 m to 0.1 ha, 0.5 m to 0.05 ha. Ties resolve to the coarser
/// resolution's (larger) threshold.
pub fn min_area_ha_for_resolution(resolution_m: f64) -> f64 {
    const TABLE: [(f64, f64); 6] = [
        (10.0, 0.5),
        (5.0, 0.5),
        (3.0, 0.3),
        (2.5, 0.3),
        (2.0, 0.1),
        (0.5, 0.05),
    ];
    let mut best = TABLE[0];
    let mut best_d = (resolution_m - best.0).abs();
    for &entry in &TABLE[1..] {
        let d = (resolution_m - entry.0).abs();
        if d < best_d {
            best = entry;
            best_d = d;
        }
    }
    best.1
}

/// Key that orders instances for all downstream stages: area descending,
/// then tile index and instance index ascending. A total, deterministic
/// order regardless of how instances arrived.
pub fn priority_key(area_px: u64, tile_index: usize, instance_index: usize) -> (u64, usize, usize) {
    (u64::MAX - area_px, tile_index, instance_index)
}

/// Sorts `(area_px, tile_index, instance_index)`-keyed items by priority.
pub fn order_by_area<T>(items: &mut [T], key: impl Fn(&T) -> (u64, usize, usize)) {
    items.sort_by_key(|item| {
        let (area, tile, inst) = key(item);
        priority_key(area, tile, inst)
    });
}

/// Erode, keep the largest connected component, dilate back.
///
/// The output is a subset of the input (the sequence is an opening restricted
/// to one component) with at most one connected component; it is empty when
/// erosion empties the mask. Ties for the largest component break to the one
/// with the smallest row-major pixel index.
pub fn morphological_refine(mask: &Mask, params: &RefineParams) -> Mask {
    let eroded = morph::erode(mask, params.kernel_radius);
    if eroded.none_set() {
        return Mask::new(mask.w, mask.h);
    }
    let core = morph::largest_component(&eroded, params.connectivity);
    morph::dilate(&core, params.kernel_radius)
}

/// Why an instance was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Too few context-valid pixels.
    ValidFraction,
    /// Area below the minimum after clipping.
    MinArea,
}

/// Outcome of the validity filter. `Keep` carries the clipped mask and the
/// context-valid fraction so later stages can attribute it to the field.
#[derive(Debug, Clone)]
pub enum FilterDecision {
    Keep { mask: PixelMask, valid_fraction: f64 },
    Reject(RejectReason),
}

/// Clips an instance by the quality mask, then tests the clipped mask against
/// the minimum area and the context-valid fraction.
pub fn validity_filter(
    instance: &PixelMask,
    masks: &MaskPair,
    params: &RefineParams,
) -> FilterDecision {
    let mut clipped = instance.clone();
    let mut area = 0u64;
    let mut context_valid = 0u64;
    for ly in 0..clipped.mask.h {
        let gy = clipped.window.y0 + ly;
        for lx in 0..clipped.mask.w {
            let i = ly * clipped.mask.w + lx;
            if !clipped.mask.data[i] {
                continue;
            }
            let gx = clipped.window.x0 + lx;
            if !masks.quality_at(gx, gy) {
                clipped.mask.data[i] = false;
                continue;
            }
            area += 1;
            context_valid += masks.context_at(gx, gy) as u64;
        }
    }
    if area == 0 {
        return FilterDecision::Reject(RejectReason::MinArea);
    }
    let valid_fraction = context_valid as f64 / area as f64;
    if valid_fraction < params.min_valid_fraction {
        return FilterDecision::Reject(RejectReason::ValidFraction);
    }
    if area < params.min_area_px {
        return FilterDecision::Reject(RejectReason::MinArea);
    }
    match clipped.tighten() {
        Some(mask) => FilterDecision::Keep { mask, valid_fraction },
        None => FilterDecision::Reject(RejectReason::MinArea),
    }
}

//! Per-tile instance predictions: the provider interface, the prediction
//! file wire format, and load-time validation.
//!
//! Inference itself is out of process. Any model that writes the prediction
//! file format can feed the engine; the file-backed provider replays such a
//! file tile by tile. No confidence filtering happens anywhere: providers
//! return every instance and the pipeline keeps them all.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Window;
use crate::mask::{Mask, PixelMask};
use crate::rle;

/// One detected field on one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    /// Tile window in global pixel coordinates.
    pub tile_window: Window,
    /// Column-major run counts over the tile (see [`crate::rle`]).
    pub rle: Vec<u32>,
    /// Tight bounding box of the mask in tile-local pixels (x, y, w, h);
    /// all zeros for an empty mask.
    pub bbox: [usize; 4],
    /// Confidence in [0, 1].
    pub score: f64,
    /// Number of set pixels.
    pub area_px: u64,
}

impl InstancePrediction {
    /// Builds a prediction from a decoded tile-local mask, deriving the RLE,
    /// bounding box and area.
    pub fn from_mask(tile_window: Window, mask: &Mask, score: f64) -> Result<Self> {
        if mask.w != tile_window.w || mask.h != tile_window.h {
            return Err(Error::data(format!(
                "mask {}x{} does not match tile window {:?}",
                mask.w, mask.h, tile_window
            )));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::data(format!("score {score} outside [0, 1]")));
        }
        let bbox = match mask.bbox() {
            Some(b) => [b.x0, b.y0, b.w, b.h],
            None => [0, 0, 0, 0],
        };
        Ok(InstancePrediction {
            tile_window,
            rle: rle::encode(mask),
            bbox,
            score,
            area_px: mask.area(),
        })
    }

    /// Decodes the RLE payload into the tile-local mask.
    pub fn decode_mask(&self) -> Result<Mask> {
        rle::decode(&self.rle, self.tile_window.w, self.tile_window.h)
    }

    /// Decodes into a mask anchored at the instance's global bounding box.
    pub fn to_pixel_mask(&self) -> Result<Option<PixelMask>> {
        let local = self.decode_mask()?;
        let full = PixelMask::new(self.tile_window, local)?;
        Ok(full.tighten())
    }

    /// Verifies every declared field against the decoded mask.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::data(format!("score {} outside [0, 1]", self.score)));
        }
        let mask = self.decode_mask()?;
        let area = mask.area();
        if area != self.area_px {
            return Err(Error::data(format!(
                "area_px is {}, decoded mask has {area} pixels",
                self.area_px
            )));
        }
        let expected = match mask.bbox() {
            Some(b) => [b.x0, b.y0, b.w, b.h],
            None => [0, 0, 0, 0],
        };
        if expected != self.bbox {
            return Err(Error::data(format!(
                "bbox {:?} is not the tight box {:?} of the mask",
                self.bbox, expected
            )));
        }
        Ok(())
    }
}

/// All predictions for one tile of the plan.
///
/// Every prediction's `tile_window` equals `window`, which equals the plan's
/// window at `tile_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub tile_index: usize,
    pub window: Window,
    pub predictions: Vec<InstancePrediction>,
}

impl PredictionSet {
    /// Checks the internal window consistency of the set.
    pub fn validate_windows(&self) -> Result<()> {
        for (i, p) in self.predictions.iter().enumerate() {
            if p.tile_window != self.window {
                return Err(Error::data(format!(
                    "tile {} instance {i}: window {:?} does not match tile window {:?}",
                    self.tile_index, p.tile_window, self.window
                )));
            }
        }
        Ok(())
    }
}

/// Supplies instance predictions per tile.
///
/// Implementations must be safe for concurrent calls on distinct tiles and
/// must not filter or reorder their own output. Providers that need the tile
/// pixel content load it themselves from the input bundle.
pub trait MaskProvider: Sync {
    fn segment_tile(&self, tile_index: usize, window: Window) -> Result<PredictionSet>;
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

/// One instance as serialized in the prediction file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireInstance {
    pub rle: Vec<u32>,
    pub bbox: [usize; 4],
    pub score: f64,
    pub area_px: u64,
}

/// One tile entry of the prediction file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireTile {
    pub tile_index: usize,
    pub window: Window,
    pub instances: Vec<WireInstance>,
}

/// The prediction file: the wire contract between an external model and the
/// engine. One JSON document per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionFile {
    pub tile_size: usize,
    pub overlap: usize,
    pub tiles: Vec<WireTile>,
}

impl PredictionFile {
    pub fn from_sets(tile_size: usize, overlap: usize, sets: &[PredictionSet]) -> Self {
        let tiles = sets
            .iter()
            .map(|set| WireTile {
                tile_index: set.tile_index,
                window: set.window,
                instances: set
                    .predictions
                    .iter()
                    .map(|p| WireInstance {
                        rle: p.rle.clone(),
                        bbox: p.bbox,
                        score: p.score,
                        area_px: p.area_px,
                    })
                    .collect(),
            })
            .collect();
        PredictionFile { tile_size, overlap, tiles }
    }
}

/// Parses and fully validates a prediction file. Violations are reported with
/// the offending tile and instance index.
pub fn load_predictions(path: &Path) -> Result<(PredictionFile, Vec<PredictionSet>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read predictions {}: {e}", path.display())))?;
    let file: PredictionFile = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("bad prediction file {}: {e}", path.display())))?;
    let mut sets = Vec::with_capacity(file.tiles.len());
    for tile in &file.tiles {
        let mut predictions = Vec::with_capacity(tile.instances.len());
        for (i, inst) in tile.instances.iter().enumerate() {
            let pred = InstancePrediction {
                tile_window: tile.window,
                rle: inst.rle.clone(),
                bbox: inst.bbox,
                score: inst.score,
                area_px: inst.area_px,
            };
            pred.validate().map_err(|e| {
                Error::data(format!("tile {} instance {i}: {e}", tile.tile_index))
            })?;
            predictions.push(pred);
        }
        sets.push(PredictionSet { tile_index: tile.tile_index, window: tile.window, predictions });
    }
    Ok((file, sets))
}

/// Serializes prediction sets to the wire format.
pub fn save_predictions(file: &PredictionFile, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string(file)?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

/// Read-only provider replaying a validated prediction file.
pub struct FileProvider {
    by_tile: BTreeMap<usize, PredictionSet>,
    pub tile_size: usize,
    pub overlap: usize,
}

impl FileProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let (file, sets) = load_predictions(path)?;
        let mut by_tile = BTreeMap::new();
        for set in sets {
            if by_tile.insert(set.tile_index, set).is_some() {
                return Err(Error::data(format!(
                    "prediction file lists tile {} twice",
                    path.display()
                )));
            }
        }
        Ok(FileProvider { by_tile, tile_size: file.tile_size, overlap: file.overlap })
    }
}

impl MaskProvider for FileProvider {
    fn segment_tile(&self, tile_index: usize, window: Window) -> Result<PredictionSet> {
        let set = self
            .by_tile
            .get(&tile_index)
            .ok_or_else(|| Error::data(format!("no predictions stored for tile {tile_index}")))?;
        if set.window != window {
            return Err(Error::data(format!(
                "tile {tile_index}: stored window {:?} does not match plan window {:?}",
                set.window, window
            )));
        }
        Ok(set.clone())
    }
}

//! Engine for turning per-tile field instance masks over georeferenced rasters into a
//! single, non-overlapping vector layer of agricultural field boundaries.
//!
//! The processing chain is organised in five stages: tiling ([`tile`]), per-tile
//! instance segmentation behind a provider interface ([`segment`]), structured
//! mask refinement ([`refine`]), cross-tile unification into one label mosaic
//! ([`unify`]) and vectorization into validated polygons ([`vectorize`]).
//! [`metrics`] carries the instance-level evaluation stack (mask/boundary IoU,
//! AP, mAP, size statistics) and [`synth`] provides a deterministic synthetic
//! landscape plus a noisy oracle segmenter for desk-scale end-to-end runs.
//!
//! All stage functions are pure; data-parallel loops go through [`exec`], which
//! uses rayon when the `parallel` feature is enabled and plain iterators
//! otherwise. Output bytes are identical for any worker count.

pub mod error;
pub mod exec;
pub mod geo;
pub mod geojson;
pub mod grid;
pub mod mask;
pub mod metrics;
pub mod morph;
pub mod pipeline;
pub mod refine;
pub mod rle;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod tile;
pub mod unify;
pub mod vectorize;

pub use error::{Error, Result};
pub use geo::{GeoTransform, Window};
pub use grid::Grid;
pub use mask::{Mask, MaskPair, PixelMask};
pub use tile::TilePlan;

//! Typed 2D rasters and the on-disk bundle format.
//!
//! A raster bundle is a pair of files sharing a stem: `<name>.bin` holds the
//! row-major little-endian pixel values and `<name>.json` is a sidecar with
//! `{width, height, dtype, crs_epsg, geotransform, nodata}`. Boolean masks are
//! stored as `u8` with values 0/1.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoTransform;

/// Pixel value types the bundle format supports.
pub trait GridValue: Copy + PartialEq + Send + Sync + 'static {
    const DTYPE: &'static str;
    const SIZE: usize;
    fn to_le_bytes(self, out: &mut Vec<u8>);
    fn from_le_bytes(bytes: &[u8]) -> Self;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

macro_rules! impl_grid_value {
    ($t:ty, $name:expr) => {
        impl GridValue for $t {
            const DTYPE: &'static str = $name;
            const SIZE: usize = std::mem::size_of::<$t>();
            fn to_le_bytes(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn from_le_bytes(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().unwrap())
            }
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_grid_value!(u8, "u8");
impl_grid_value!(u16, "u16");
impl_grid_value!(u32, "u32");
impl_grid_value!(f32, "f32");

/// A georeferenced raster held in memory, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T: GridValue> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
    pub transform: GeoTransform,
    pub crs_epsg: u32,
    pub nodata: Option<T>,
}

impl<T: GridValue> Grid<T> {
    pub fn filled(
        width: usize,
        height: usize,
        value: T,
        transform: GeoTransform,
        crs_epsg: u32,
    ) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
            transform,
            crs_epsg,
            nodata: None,
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        data: Vec<T>,
        transform: GeoTransform,
        crs_epsg: u32,
        nodata: Option<T>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::data(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Grid { width, height, data, transform, crs_epsg, nodata })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Sidecar schema for a raster bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub crs_epsg: u32,
    pub geotransform: GeoTransform,
    pub nodata: Option<f64>,
}

/// Resolves a user-supplied bundle path (stem, `.bin`, or `.json`) to
/// `(bin_path, json_path)`.
pub fn bundle_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Reads just the sidecar of a bundle.
pub fn load_sidecar(path: &Path) -> Result<Sidecar> {
    let (_, json_path) = bundle_paths(path);
    let text = std::fs::read_to_string(&json_path)
        .map_err(|e| Error::config(format!("cannot read sidecar {}: {e}", json_path.display())))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("bad sidecar {}: {e}", json_path.display())))?;
    Ok(sidecar)
}

/// Writes `<stem>.bin` and `<stem>.json` for the grid.
pub fn save_bundle<T: GridValue>(grid: &Grid<T>, path: &Path) -> Result<()> {
    let (bin_path, json_path) = bundle_paths(path);
    let sidecar = Sidecar {
        width: grid.width,
        height: grid.height,
        dtype: T::DTYPE.to_string(),
        crs_epsg: grid.crs_epsg,
        geotransform: grid.transform,
        nodata: grid.nodata.map(|v| v.as_f64()),
    };
    let mut bytes = Vec::with_capacity(grid.data.len() * T::SIZE);
    for &v in &grid.data {
        v.to_le_bytes(&mut bytes);
    }
    std::fs::write(&bin_path, bytes)?;
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    Ok(())
}

/// Loads a bundle, checking that the stored dtype matches `T` and that the
/// payload size is consistent with the sidecar.
pub fn load_bundle<T: GridValue>(path: &Path) -> Result<Grid<T>> {
    let (bin_path, json_path) = bundle_paths(path);
    let sidecar = load_sidecar(path)?;
    if sidecar.dtype != T::DTYPE {
        return Err(Error::data(format!(
            "{}: dtype is {}, expected {}",
            json_path.display(),
            sidecar.dtype,
            T::DTYPE
        )));
    }
    let bytes = std::fs::read(&bin_path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", bin_path.display())))?;
    let expected = sidecar.width * sidecar.height * T::SIZE;
    if bytes.len() != expected {
        return Err(Error::data(format!(
            "{}: payload is {} bytes, expected {} for {}x{} {}",
            bin_path.display(),
            bytes.len(),
            expected,
            sidecar.width,
            sidecar.height,
            T::DTYPE
        )));
    }
    let data: Vec<T> = bytes.chunks_exact(T::SIZE).map(T::from_le_bytes).collect();
    Grid::from_data(
        sidecar.width,
        sidecar.height,
        data,
        sidecar.geotransform,
        sidecar.crs_epsg,
        sidecar.nodata.map(T::from_f64),
    )
}

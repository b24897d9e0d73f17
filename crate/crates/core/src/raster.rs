//! Georeferenced dense grids.
//!
//! Cells are stored row-major, row 0 at the top (north) edge. A raster is
//! immutable once built; every operation returns a new raster. Binary
//! operations require both operands to share one [`GeoTransform`].

use num_complex::Complex32;

use crate::error::{Error, Result};

/// Default floating-point nodata sentinel written by pipeline operations.
pub const NODATA: f64 = -9999.0;

/// Affine cell-to-map mapping for a north-up grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoTransform {
    /// Map x of the top-left corner of cell (0, 0).
    pub origin_x: f64,
    /// Map y of the top-left corner of cell (0, 0).
    pub origin_y: f64,
    pub pixel_size_x: f64,
    /// Negative for north-up grids.
    pub pixel_size_y: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub crs_label: String,
}

impl GeoTransform {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size_x: f64,
        pixel_size_y: f64,
        n_rows: usize,
        n_cols: usize,
        crs_label: impl Into<String>,
    ) -> Result<Self> {
        if !(pixel_size_x > 0.0) || !pixel_size_x.is_finite() {
            return Err(Error::BadTransform(format!(
                "pixel_size_x must be > 0, got {pixel_size_x}"
            )));
        }
        if pixel_size_y == 0.0 || !pixel_size_y.is_finite() {
            return Err(Error::BadTransform("pixel_size_y must be non-zero".into()));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::BadTransform(format!(
                "grid must have at least one cell, got {n_rows}x{n_cols}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::BadTransform("origin must be finite".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            pixel_size_x,
            pixel_size_y,
            n_rows,
            n_cols,
            crs_label: crs_label.into(),
        })
    }

    /// North-up grid with square cells whose top-left corner is `(origin_x, origin_y)`.
    pub fn north_up(
        origin_x: f64,
        origin_y: f64,
        cell_size: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        Self::new(origin_x, origin_y, cell_size, -cell_size, n_rows, n_cols, "")
    }

    pub fn with_crs(mut self, crs_label: impl Into<String>) -> Self {
        self.crs_label = crs_label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        (self.pixel_size_x * self.pixel_size_y).abs()
    }

    /// Map coordinate of the centre of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size_x,
            self.origin_y + (row as f64 + 0.5) * self.pixel_size_y,
        )
    }

    /// Continuous (row, col) position of a map point; cell centres sit at half-integers.
    pub fn fractional_cell(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (y - self.origin_y) / self.pixel_size_y,
            (x - self.origin_x) / self.pixel_size_x,
        )
    }

    /// Cell containing a map point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (r, c) = self.fractional_cell(x, y);
        if r < 0.0 || c < 0.0 {
            return None;
        }
        let (r, c) = (r.floor() as usize, c.floor() as usize);
        (r < self.n_rows && c < self.n_cols).then_some((r, c))
    }

    /// Map-space bounding box as `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let x1 = self.origin_x + self.n_cols as f64 * self.pixel_size_x;
        let y1 = self.origin_y + self.n_rows as f64 * self.pixel_size_y;
        (
            self.origin_x.min(x1),
            self.origin_y.min(y1),
            self.origin_x.max(x1),
            self.origin_y.max(y1),
        )
    }

    /// Co-registration test. CRS labels only participate when both are set.
    pub fn matches(&self, other: &GeoTransform) -> bool {
        let crs_ok = self.crs_label.is_empty()
            || other.crs_label.is_empty()
            || self.crs_label == other.crs_label;
        crs_ok
            && self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.origin_x == other.origin_x
            && self.origin_y == other.origin_y
            && self.pixel_size_x == other.pixel_size_x
            && self.pixel_size_y == other.pixel_size_y
    }
}

/// Cell types a raster can hold.
pub trait CellValue: Copy + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    fn is_nodata(self, nodata: Option<Self>) -> bool;
}

impl CellValue for f64 {
    fn is_nodata(self, nodata: Option<Self>) -> bool {
        self.is_nan() || nodata == Some(self)
    }
}

impl CellValue for Complex32 {
    fn is_nodata(self, nodata: Option<Self>) -> bool {
        self.re.is_nan() || self.im.is_nan() || nodata == Some(self)
    }
}

impl CellValue for bool {
    fn is_nodata(self, _nodata: Option<Self>) -> bool {
        false
    }
}

impl CellValue for u8 {
    fn is_nodata(self, nodata: Option<Self>) -> bool {
        nodata == Some(self)
    }
}

impl CellValue for u32 {
    fn is_nodata(self, nodata: Option<Self>) -> bool {
        nodata == Some(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    transform: GeoTransform,
    cells: Vec<T>,
    nodata: Option<T>,
}

pub type Mask = Raster<bool>;

impl<T: CellValue> Raster<T> {
    pub fn new(transform: GeoTransform, cells: Vec<T>, nodata: Option<T>) -> Result<Self> {
        if cells.len() != transform.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", transform.n_rows, transform.n_cols),
                got: format!("{} cells", cells.len()),
            });
        }
        Ok(Self {
            transform,
            cells,
            nodata,
        })
    }

    pub fn filled(transform: GeoTransform, value: T) -> Self {
        let cells = vec![value; transform.len()];
        Self {
            transform,
            cells,
            nodata: None,
        }
    }

    pub fn from_fn(transform: GeoTransform, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(transform.len());
        for r in 0..transform.n_rows {
            for c in 0..transform.n_cols {
                cells.push(f(r, c));
            }
        }
        Self {
            transform,
            cells,
            nodata: None,
        }
    }

    pub fn with_nodata(mut self, nodata: Option<T>) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<T> {
        self.cells
    }

    pub fn nodata(&self) -> Option<T> {
        self.nodata
    }

    pub fn n_rows(&self) -> usize {
        self.transform.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.transform.n_cols
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.transform.n_cols + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.cells[self.index(row, col)]
    }

    #[inline]
    pub fn is_nodata_at(&self, idx: usize) -> bool {
        self.cells[idx].is_nodata(self.nodata)
    }

    /// Cell value, or `None` for nodata.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<T> {
        let v = self.get(row, col);
        (!v.is_nodata(self.nodata)).then_some(v)
    }

    #[inline]
    pub fn value_at(&self, idx: usize) -> Option<T> {
        let v = self.cells[idx];
        (!v.is_nodata(self.nodata)).then_some(v)
    }

    pub fn ensure_same_grid<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.transform.matches(&other.transform) {
            Ok(())
        } else {
            Err(Error::TransformMismatch)
        }
    }

    /// Applies `f` to valid cells; nodata cells map to `nodata_out`.
    pub fn map_valid<U: CellValue>(&self, nodata_out: U, mut f: impl FnMut(T) -> U) -> Raster<U> {
        let cells = self
            .cells
            .iter()
            .map(|&v| {
                if v.is_nodata(self.nodata) {
                    nodata_out
                } else {
                    f(v)
                }
            })
            .collect();
        Raster {
            transform: self.transform.clone(),
            cells,
            nodata: Some(nodata_out),
        }
    }
}

impl Raster<f64> {
    /// Float raster using the standard [`NODATA`] sentinel.
    pub fn with_default_nodata(transform: GeoTransform, cells: Vec<f64>) -> Result<Self> {
        Self::new(transform, cells, Some(NODATA))
    }

    /// Replaces any nodata representation (NaN or the sentinel) by [`NODATA`].
    pub fn normalized_nodata(&self) -> Self {
        self.map_valid(NODATA, |v| v)
    }

    pub fn valid_count(&self) -> usize {
        (0..self.len()).filter(|&i| !self.is_nodata_at(i)).count()
    }
}

impl Mask {
    pub fn count_true(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn from_float(raster: &Raster<f64>) -> Self {
        Raster {
            transform: raster.transform.clone(),
            cells: (0..raster.len())
                .map(|i| raster.value_at(i).is_some_and(|v| v != 0.0))
                .collect(),
            nodata: None,
        }
    }

    pub fn to_float(&self) -> Raster<f64> {
        Raster {
            transform: self.transform.clone(),
            cells: self.cells.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            nodata: None,
        }
    }
}

/// Ordered, co-registered layers (e.g. a multi-date acquisition series).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    layers: Vec<Raster<f64>>,
}

impl RasterStack {
    pub fn new(layers: Vec<Raster<f64>>) -> Result<Self> {
        let first = layers.first().ok_or(Error::EmptyStack)?;
        for layer in &layers[1..] {
            first.ensure_same_grid(layer)?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Raster<f64>] {
        &self.layers
    }

    pub fn transform(&self) -> &GeoTransform {
        self.layers[0].transform()
    }
}

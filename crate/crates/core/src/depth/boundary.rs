//! Flood-boundary extraction, mask cleanup, component labelling, and
//! stratified boundary sampling.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};
use crate::terrain::D8_OFFSETS;

const N4: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

fn neighbor(r: usize, c: usize, dr: isize, dc: isize, rows: usize, cols: usize) -> Option<usize> {
    let (nr, nc) = (r as isize + dr, c as isize + dc);
    (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols)
        .then(|| nr as usize * cols + nc as usize)
}

/// Flood boundary: flooded, non-permanent-water cells with at least one
/// in-raster 8-neighbour that is dry and not permanent water.
pub fn extract_boundary(mask: &Mask, permanent_water: Option<&Mask>) -> Result<Mask> {
    if let Some(pw) = permanent_water {
        mask.ensure_same_grid(pw)?;
    }
    if mask.count_true() == 0 {
        return Err(Error::EmptyMask);
    }
    let rows = mask.n_rows();
    let cols = mask.n_cols();
    let flooded = mask.cells();
    let is_pw = |i: usize| permanent_water.is_some_and(|pw| pw.cells()[i]);
    Ok(Raster::from_fn(mask.transform().clone(), |r, c| {
        let i = r * cols + c;
        flooded[i]
            && !is_pw(i)
            && D8_OFFSETS.iter().any(|&(dr, dc)| {
                neighbor(r, c, dr, dc, rows, cols).is_some_and(|j| !flooded[j] && !is_pw(j))
            })
    }))
}

/// Labels 8-connected true regions `1..=count` in raster scan order; 0 marks
/// false cells. Returns the label raster and the region count.
pub fn label_components(mask: &Mask) -> (Raster<u32>, u32) {
    let (labels, count) = label_with(mask.cells(), mask.n_rows(), mask.n_cols(), true, &D8_OFFSETS);
    (
        Raster::new(mask.transform().clone(), labels, None).expect("shape preserved"),
        count,
    )
}

fn label_with(
    cells: &[bool],
    rows: usize,
    cols: usize,
    target: bool,
    offsets: &[(isize, isize)],
) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; cells.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if cells[start] != target || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / cols, i % cols);
            for &(dr, dc) in offsets {
                if let Some(j) = neighbor(r, c, dr, dc, rows, cols) {
                    if cells[j] == target && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Removes 8-connected flooded regions and fills 4-connected dry holes
/// (regions not touching the raster edge) smaller than `min_region_cells`.
pub fn clean_mask(mask: &Mask, min_region_cells: usize) -> Mask {
    let rows = mask.n_rows();
    let cols = mask.n_cols();
    let mut cells = mask.cells().to_vec();

    let (labels, count) = label_with(&cells, rows, cols, true, &D8_OFFSETS);
    let mut sizes = vec![0usize; count as usize + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    for (cell, &l) in cells.iter_mut().zip(&labels) {
        if l != 0 && sizes[l as usize] < min_region_cells {
            *cell = false;
        }
    }

    let (labels, count) = label_with(&cells, rows, cols, false, &N4);
    let mut sizes = vec![0usize; count as usize + 1];
    let mut touches_edge = vec![false; count as usize + 1];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l as usize] += 1;
        let (r, c) = (i / cols, i % cols);
        if r == 0 || c == 0 || r == rows - 1 || c == cols - 1 {
            touches_edge[l as usize] = true;
        }
    }
    for (cell, &l) in cells.iter_mut().zip(&labels) {
        if l != 0 && !touches_edge[l as usize] && sizes[l as usize] < min_region_cells {
            *cell = true;
        }
    }
    Raster::new(mask.transform().clone(), cells, None).expect("shape preserved")
}

/// One boundary elevation sample in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SamplePoint {
    pub fn distance(&self, other: &SamplePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Boundary elevation samples (at least 3) and the DEM they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    points: Vec<SamplePoint>,
    dem_label: String,
}

impl BoundarySamples {
    pub const MIN_SAMPLES: usize = 3;

    pub fn new(points: Vec<SamplePoint>, dem_label: impl Into<String>) -> Result<Self> {
        if points.len() < Self::MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                need: Self::MIN_SAMPLES,
                got: points.len(),
            });
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::BadConfig("boundary samples must be finite".into()));
        }
        Ok(Self {
            points,
            dem_label: dem_label.into(),
        })
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn dem_label(&self) -> &str {
        &self.dem_label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same locations with elevations re-read from `dem`. Points that fall
    /// outside the grid or on nodata keep their previous elevation.
    pub fn resampled(&self, dem: &Raster<f64>) -> BoundarySamples {
        let t = dem.transform();
        let points = self
            .points
            .iter()
            .map(|p| {
                let z = t
                    .cell_of(p.x, p.y)
                    .and_then(|(r, c)| dem.value(r, c))
                    .unwrap_or(p.z);
                SamplePoint { z, ..*p }
            })
            .collect();
        BoundarySamples {
            points,
            dem_label: self.dem_label.clone(),
        }
    }
}

/// Stratified sampling of boundary cells.
///
/// If at most `n` boundary cells carry valid DEM values, all are taken.
/// Otherwise the boundary's bounding box (in cell space) is split into
/// `ceil(sqrt(n))^2` tiles; each occupied tile's cells are shuffled and the
/// tiles are visited round-robin, one cell per visit, until `n` are drawn.
/// Samples are returned in raster order.
pub fn sample_boundary(
    boundary: &Mask,
    dem: &Raster<f64>,
    n: usize,
    seed: u64,
    dem_label: &str,
) -> Result<BoundarySamples> {
    boundary.ensure_same_grid(dem)?;
    if boundary.count_true() == 0 {
        return Err(Error::EmptyBoundary);
    }
    let cols = boundary.n_cols();
    let candidates: Vec<usize> = (0..boundary.len())
        .filter(|&i| boundary.cells()[i] && dem.value_at(i).is_some())
        .collect();
    let chosen = if candidates.len() <= n {
        candidates
    } else {
        stratified_pick(&candidates, cols, n, seed)
    };
    let t = dem.transform();
    let points = chosen
        .into_iter()
        .map(|i| {
            let (x, y) = t.cell_center(i / cols, i % cols);
            SamplePoint {
                x,
                y,
                z: dem.value_at(i).expect("filtered to valid cells"),
            }
        })
        .collect();
    BoundarySamples::new(points, dem_label)
}

fn stratified_pick(candidates: &[usize], cols: usize, n: usize, seed: u64) -> Vec<usize> {
    let tiles_per_axis = (n as f64).sqrt().ceil() as usize;
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for &i in candidates {
        let (r, c) = (i / cols, i % cols);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let tile_of = |i: usize| {
        let (r, c) = (i / cols - r0, i % cols - c0);
        let tr = r * tiles_per_axis / h;
        let tc = c * tiles_per_axis / w;
        tr * tiles_per_axis + tc
    };
    let mut tiles: Vec<Vec<usize>> = vec![Vec::new(); tiles_per_axis * tiles_per_axis];
    for &i in candidates {
        tiles[tile_of(i)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occupied: Vec<Vec<usize>> = tiles.into_iter().filter(|t| !t.is_empty()).collect();
    for tile in &mut occupied {
        tile.shuffle(&mut rng);
    }
    let mut chosen = Vec::with_capacity(n);
    let mut depth = 0;
    while chosen.len() < n {
        for tile in &occupied {
            if chosen.len() == n {
                break;
            }
            if let Some(&i) = tile.get(depth) {
                chosen.push(i);
            }
        }
        depth += 1;
    }
    chosen.sort_unstable();
    chosen
}

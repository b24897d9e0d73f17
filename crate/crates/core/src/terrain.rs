//! D8 flow routing on a depression-filled DEM and Height Above Nearest
//! Drainage (HAND).
//!
//! Direction codes: 0 = pit/outlet, 1..=8 = E, SE, S, SW, W, NW, N, NE.
//! The code order is also the tie-break order for equal slopes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster, NODATA};

pub const PIT: u8 = 0;

/// (d_row, d_col) for codes 1..=8.
pub const D8_OFFSETS: [(isize, isize); 8] = [
    (0, 1),   // E
    (1, 1),   // SE
    (1, 0),   // S
    (1, -1),  // SW
    (0, -1),  // W
    (-1, -1), // NW
    (-1, 0),  // N
    (-1, 1),  // NE
];

#[derive(Debug, Clone)]
pub struct FlowField {
    direction: Raster<u8>,
    filled: Raster<f64>,
}

impl FlowField {
    pub fn direction(&self) -> &Raster<u8> {
        &self.direction
    }

    /// Depression-filled elevations the directions were derived from.
    pub fn filled(&self) -> &Raster<f64> {
        &self.filled
    }

    /// Index of the cell that `idx` drains into, or `None` at pits/outlets.
    pub fn downstream(&self, idx: usize) -> Option<usize> {
        let code = self.direction.cells()[idx];
        if code == PIT {
            return None;
        }
        let cols = self.direction.n_cols();
        let (dr, dc) = D8_OFFSETS[(code - 1) as usize];
        let r = (idx / cols) as isize + dr;
        let c = (idx % cols) as isize + dc;
        Some(r as usize * cols + c as usize)
    }
}

#[derive(PartialEq)]
struct Entry {
    z: f64,
    order: u64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .z
            .total_cmp(&self.z)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbors(
    idx: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let r = (idx / cols) as isize;
    let c = (idx % cols) as isize;
    D8_OFFSETS
        .iter()
        .enumerate()
        .filter_map(move |(k, &(dr, dc))| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && nr < rows as isize && nc < cols as isize)
                .then(|| (k, nr as usize * cols + nc as usize))
        })
}

/// Priority-Flood depression filling. Seeds are border cells, cells next to
/// nodata, and any `sinks` cells. Returns filled elevations and, for every
/// non-seed cell, the neighbour it was reached from.
fn priority_flood(dem: &Raster<f64>, sinks: Option<&Mask>) -> (Vec<f64>, Vec<Option<usize>>) {
    let rows = dem.n_rows();
    let cols = dem.n_cols();
    let n = dem.len();
    let mut filled: Vec<f64> = (0..n).map(|i| dem.value_at(i).unwrap_or(f64::NAN)).collect();
    let mut parent = vec![None; n];
    let mut visited = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;

    for idx in 0..n {
        if filled[idx].is_nan() {
            visited[idx] = true;
            continue;
        }
        let (r, c) = (idx / cols, idx % cols);
        let border = r == 0 || c == 0 || r == rows - 1 || c == cols - 1;
        let near_nodata = neighbors(idx, rows, cols).any(|(_, j)| dem.value_at(j).is_none());
        let sink = sinks.is_some_and(|s| s.cells()[idx]);
        if border || near_nodata || sink {
            visited[idx] = true;
            heap.push(Entry {
                z: filled[idx],
                order,
                idx,
            });
            order += 1;
        }
    }

    while let Some(Entry { z, idx, .. }) = heap.pop() {
        for (_, j) in neighbors(idx, rows, cols) {
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if filled[j] < z {
                filled[j] = z;
            }
            parent[j] = Some(idx);
            heap.push(Entry {
                z: filled[j],
                order,
                idx: j,
            });
            order += 1;
        }
    }
    (filled, parent)
}

fn direction_code(from: usize, to: usize, cols: usize) -> u8 {
    let dr = (to / cols) as isize - (from / cols) as isize;
    let dc = (to % cols) as isize - (from % cols) as isize;
    D8_OFFSETS
        .iter()
        .position(|&o| o == (dr, dc))
        .map(|k| k as u8 + 1)
        .unwrap_or(PIT)
}

/// Steepest-descent D8 directions after depression filling, with raster
/// borders as the only outlets.
pub fn d8_flow(dem: &Raster<f64>) -> FlowField {
    d8_flow_with_sinks(dem, None)
}

/// As [`d8_flow`], with `sinks` cells (typically the drainage network) also
/// acting as outlets, so depressions that drain into them are not filled.
///
/// Cells with a strictly lower filled neighbour take the steepest one (slope
/// uses true cell distances). Cells on flats take the neighbour they were
/// reached from during filling, which is never higher and never forms a
/// cycle. Sink cells, nodata cells and border cells without a lower
/// neighbour are outlets.
pub fn d8_flow_with_sinks(dem: &Raster<f64>, sinks: Option<&Mask>) -> FlowField {
    let rows = dem.n_rows();
    let cols = dem.n_cols();
    let t = dem.transform();
    let dx = t.pixel_size_x.abs();
    let dy = t.pixel_size_y.abs();
    let dist: Vec<f64> = D8_OFFSETS
        .iter()
        .map(|&(dr, dc)| ((dr as f64 * dy).powi(2) + (dc as f64 * dx).powi(2)).sqrt())
        .collect();
    let (filled, parent) = priority_flood(dem, sinks);

    let direction: Vec<u8> = (0..dem.len())
        .into_par_iter()
        .map(|idx| {
            let z = filled[idx];
            if z.is_nan() || sinks.is_some_and(|s| s.cells()[idx]) {
                return PIT;
            }
            let mut best = 0.0;
            let mut code = PIT;
            for (k, j) in neighbors(idx, rows, cols) {
                let zj = filled[j];
                if zj.is_nan() {
                    continue;
                }
                let slope = (z - zj) / dist[k];
                if slope > best {
                    best = slope;
                    code = k as u8 + 1;
                }
            }
            if code == PIT {
                if let Some(p) = parent[idx] {
                    code = direction_code(idx, p, cols);
                }
            }
            code
        })
        .collect();

    let nodata_filled: Vec<f64> = filled
        .into_iter()
        .map(|z| if z.is_nan() { NODATA } else { z })
        .collect();
    FlowField {
        direction: Raster::new(t.clone(), direction, None).expect("shape preserved"),
        filled: Raster::with_default_nodata(t.clone(), nodata_filled).expect("shape preserved"),
    }
}

/// Height above nearest drainage in metres: 0 on drainage, `+inf` where the
/// flow path never reaches drainage, nodata where the DEM is nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct HandRaster(Raster<f64>);

impl HandRaster {
    pub fn raster(&self) -> &Raster<f64> {
        &self.0
    }

    pub fn into_raster(self) -> Raster<f64> {
        self.0
    }

    /// Wraps an externally computed HAND grid; negative values are clamped to 0.
    pub fn from_raster(raster: Raster<f64>) -> Self {
        HandRaster(raster.map_valid(NODATA, |v| v.max(0.0)))
    }
}

/// HAND along D8 flow paths: `dem(cell) - dem(first drainage cell downstream)`.
///
/// Cells in filled depressions may sit below the drainage cell they reach;
/// those are clamped to 0.
pub fn compute_hand(dem: &Raster<f64>, drainage: &Mask, flow: &FlowField) -> Result<HandRaster> {
    dem.ensure_same_grid(drainage)?;
    dem.ensure_same_grid(flow.direction())?;
    if drainage.count_true() == 0 {
        return Err(Error::NoDrainage);
    }
    const UNKNOWN: usize = usize::MAX;
    const NONE: usize = usize::MAX - 1;
    let n = dem.len();
    let drain = drainage.cells();
    let mut target = vec![UNKNOWN; n];
    let mut path = Vec::new();
    for start in 0..n {
        if target[start] != UNKNOWN {
            continue;
        }
        path.clear();
        let mut cur = start;
        let resolved = loop {
            if target[cur] != UNKNOWN {
                break target[cur];
            }
            if drain[cur] {
                break cur;
            }
            path.push(cur);
            match flow.downstream(cur) {
                Some(next) if path.len() <= n => cur = next,
                _ => break NONE,
            }
        };
        for &p in &path {
            target[p] = resolved;
        }
        if drain[cur] {
            target[cur] = cur;
        }
    }

    let cells = (0..n)
        .map(|i| match dem.value_at(i) {
            None => NODATA,
            Some(_) if drain[i] => 0.0,
            Some(z) => match target[i] {
                NONE | UNKNOWN => f64::INFINITY,
                t => match dem.value_at(t) {
                    Some(zt) => (z - zt).max(0.0),
                    None => f64::INFINITY,
                },
            },
        })
        .collect();
    Ok(HandRaster(Raster::with_default_nodata(
        dem.transform().clone(),
        cells,
    )?))
}

/// Flood-eligibility gate: true where HAND <= `threshold_m`.
pub fn hand_gate(hand: &HandRaster, threshold_m: f64) -> Result<Mask> {
    if !(threshold_m > 0.0) {
        return Err(Error::BadConfig(format!(
            "HAND threshold must be > 0, got {threshold_m}"
        )));
    }
    let r = hand.raster();
    Ok(Raster::from_fn(r.transform().clone(), |row, col| {
        r.value(row, col).is_some_and(|h| h <= threshold_m)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(rows: usize, cols: usize) -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 10.0, rows, cols).unwrap()
    }

    fn walk_to_end(flow: &FlowField, start: usize) -> usize {
        let mut cur = start;
        for _ in 0..=flow.direction().len() {
            match flow.downstream(cur) {
                Some(n) => cur = n,
                None => return cur,
            }
        }
        panic!("cycle from {start}");
    }

    #[test]
    fn west_tilted_plane_flows_west() {
        let dem = Raster::from_fn(grid(6, 8), |_, c| c as f64);
        let flow = d8_flow(&dem);
        for r in 0..6 {
            for c in 1..8 {
                assert_eq!(flow.direction().get(r, c), 5, "cell ({r},{c})");
            }
            assert_eq!(flow.direction().get(r, 0), PIT);
        }
    }

    #[test]
    fn bowl_chains_to_center_pit() {
        let n = 9;
        let dem = Raster::from_fn(grid(n, n), |r, c| {
            let dr = r as f64 - 4.0;
            let dc = c as f64 - 4.0;
            dr * dr + dc * dc
        });
        let sinks = Raster::from_fn(grid(n, n), |r, c| r == 4 && c == 4);
        let flow = d8_flow_with_sinks(&dem, Some(&sinks));
        let center = 4 * n + 4;
        for i in 0..n * n {
            assert_eq!(walk_to_end(&flow, i), center);
        }
    }

    #[test]
    fn random_dem_matches_steepest_neighbour_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dem = Raster::from_fn(grid(16, 16), |_, _| rng.random_range(0.0..100.0));
        let flow = d8_flow(&dem);
        let filled = flow.filled();
        let n = 16usize;
        for r in 0..n {
            for c in 0..n {
                let z = filled.get(r, c);
                // brute-force steepest strictly-lower neighbour
                let mut best: Option<(f64, u8)> = None;
                for (k, &(dr, dc)) in D8_OFFSETS.iter().enumerate() {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= n as isize || nc >= n as isize {
                        continue;
                    }
                    let d = if dr != 0 && dc != 0 { 10.0 * 2f64.sqrt() } else { 10.0 };
                    let s = (z - filled.get(nr as usize, nc as usize)) / d;
                    if s > 0.0 && best.is_none_or(|(b, _)| s > b) {
                        best = Some((s, k as u8 + 1));
                    }
                }
                let code = flow.direction().get(r, c);
                match best {
                    Some((_, k)) => assert_eq!(code, k, "cell ({r},{c})"),
                    None if code != PIT => {
                        // flat: must point to an equal-elevation neighbour
                        let j = flow.downstream(r * n + c).unwrap();
                        assert_eq!(filled.cells()[j], z);
                    }
                    None => {}
                }
            }
        }
        for i in 0..n * n {
            let end = walk_to_end(&flow, i);
            let (er, ec) = (end / n, end % n);
            assert!(er == 0 || ec == 0 || er == n - 1 || ec == n - 1);
            // filled surface never rises along a path
            let mut cur = i;
            while let Some(next) = flow.downstream(cur) {
                assert!(filled.cells()[next] <= filled.cells()[cur]);
                cur = next;
            }
        }
    }

    #[test]
    fn pit_is_filled_without_sink() {
        let dem = Raster::from_fn(grid(5, 5), |r, c| if r == 2 && c == 2 { 0.0 } else { 5.0 + c as f64 });
        let flow = d8_flow(&dem);
        assert_eq!(flow.filled().get(2, 2), 6.0);
        assert_ne!(flow.direction().get(2, 2), PIT);
    }

    #[test]
    fn hand_examples() {
        let t = grid(4, 4);
        let dem = Raster::from_fn(t.clone(), |r, c| (r + c) as f64);
        let all = Raster::filled(t.clone(), true);
        let flow = d8_flow(&dem);
        let hand = compute_hand(&dem, &all, &flow).unwrap();
        assert!(hand.raster().cells().iter().all(|&h| h == 0.0));

        // V valley: channel in column 2, walls rising 7 m per cell
        let t = grid(3, 5);
        let dem = Raster::from_fn(t.clone(), |r, c| 7.0 * (c as f64 - 2.0).abs() + 0.01 * r as f64);
        let drain = Raster::from_fn(t.clone(), |_, c| c == 2);
        let flow = d8_flow_with_sinks(&dem, Some(&drain));
        let hand = compute_hand(&dem, &drain, &flow).unwrap();
        assert!((hand.raster().get(1, 1) - 7.0).abs() < 1e-9);
        assert!((hand.raster().get(1, 3) - 7.0).abs() < 1e-9);
        assert_eq!(hand.raster().get(1, 2), 0.0);

        let none = Raster::filled(t, false);
        assert!(matches!(compute_hand(&dem, &none, &flow), Err(Error::NoDrainage)));
    }

    #[test]
    fn winding_channel_matches_path_oracle() {
        let n = 32;
        let t = grid(n, n);
        let chan = |c: usize| (16.0 + 6.0 * (c as f64 / 5.0).sin()).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dem = Raster::from_fn(t.clone(), |r, c| {
            (r as f64 - chan(c) as f64).abs() * 0.8 + 0.05 * c as f64 + rng.random_range(0.0..0.3)
        });
        let drain = Raster::from_fn(t.clone(), |r, c| r == chan(c));
        let flow = d8_flow_with_sinks(&dem, Some(&drain));
        let hand = compute_hand(&dem, &drain, &flow).unwrap();
        let min_drain = (0..n * n)
            .filter(|&i| drain.cells()[i])
            .map(|i| dem.cells()[i])
            .fold(f64::INFINITY, f64::min);
        for i in 0..n * n {
            // oracle: explicit walk to the first drainage cell
            let mut cur = i;
            let mut steps = 0;
            let expect = loop {
                if drain.cells()[cur] {
                    break (dem.cells()[i] - dem.cells()[cur]).max(0.0);
                }
                match flow.downstream(cur) {
                    Some(next) => cur = next,
                    None => break f64::INFINITY,
                }
                steps += 1;
                assert!(steps <= n * n);
            };
            let h = hand.raster().cells()[i];
            assert_eq!(h, expect, "cell {i}");
            assert!(h >= 0.0);
            if h.is_finite() {
                assert!(h <= dem.cells()[i] - min_drain + 1e-12);
            }
        }
    }

    #[test]
    fn gate_examples() {
        let t = grid(1, 4);
        let hand = HandRaster::from_raster(
            Raster::new(t, vec![9.99, 10.0, 10.01, f64::INFINITY], Some(NODATA)).unwrap(),
        );
        let g = hand_gate(&hand, 10.0).unwrap();
        assert_eq!(g.cells(), &[true, true, false, false]);
        assert!(hand_gate(&hand, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn gate_is_monotone(values in proptest::collection::vec(0.0f64..30.0, 16), a in 0.1f64..20.0, b in 0.1f64..20.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let hand = HandRaster::from_raster(Raster::new(grid(4, 4), values, None).unwrap());
            let g_lo = hand_gate(&hand, lo).unwrap();
            let g_hi = hand_gate(&hand, hi).unwrap();
            for (x, y) in g_lo.cells().iter().zip(g_hi.cells()) {
                proptest::prop_assert!(!x || *y);
            }
        }
    }
}

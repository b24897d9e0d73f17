//! Flood depth from the extent mask: boundary sampling, variogram fitting,
//! ordinary kriging of the water surface, and Monte Carlo confidence bands.

pub mod boundary;
pub mod kriging;
pub mod montecarlo;
pub mod variogram;

pub use boundary::{
    clean_mask, extract_boundary, label_components, sample_boundary, BoundarySamples, SamplePoint,
};
pub use kriging::{krige_predict, OrdinaryKriging};
pub use montecarlo::{correlated_noise, monte_carlo_depth, MonteCarloConfig};
pub use variogram::{
    empirical_semivariogram, fit_spherical, fit_spherical_or_nugget, semivariogram_with_cutoff,
    VariogramBin, VariogramModel,
};

use crate::error::Result;
use crate::raster::{Mask, Raster, NODATA};

/// Physical upper bound on reported depth (m).
pub const MAX_DEPTH_M: f64 = 10.0;

/// Depth estimate with its 90% Monte Carlo interval. All rasters are nodata
/// outside the flood mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthField {
    pub depth: Raster<f64>,
    pub ci_low: Raster<f64>,
    pub ci_high: Raster<f64>,
    pub kriging_variance: Raster<f64>,
    /// Kriged water surface from the unperturbed DEM.
    pub wse: Raster<f64>,
}

impl DepthField {
    /// Per-cell CI half-width `(ci_high - ci_low) / 2`.
    pub fn half_width(&self) -> Raster<f64> {
        let cells = (0..self.depth.len())
            .map(|i| match (self.ci_low.value_at(i), self.ci_high.value_at(i)) {
                (Some(l), Some(h)) => 0.5 * (h - l),
                _ => NODATA,
            })
            .collect();
        Raster::with_default_nodata(self.depth.transform().clone(), cells).expect("shape preserved")
    }

    /// Deterministic field with a zero-width interval.
    pub fn from_depth(depth: Raster<f64>) -> Self {
        let zero = depth.map_valid(NODATA, |_| 0.0);
        Self {
            ci_low: depth.clone(),
            ci_high: depth.clone(),
            kriging_variance: zero.clone(),
            wse: zero,
            depth,
        }
    }
}

/// `clamp(wse - dem, 0, 10)` on flooded cells; nodata elsewhere.
pub fn depth_from_wse(wse: &Raster<f64>, dem: &Raster<f64>, mask: &Mask) -> Result<Raster<f64>> {
    wse.ensure_same_grid(dem)?;
    wse.ensure_same_grid(mask)?;
    let cells = (0..wse.len())
        .map(|i| match (mask.cells()[i], wse.value_at(i), dem.value_at(i)) {
            (true, Some(w), Some(d)) => (w - d).clamp(0.0, MAX_DEPTH_M),
            _ => NODATA,
        })
        .collect();
    Raster::with_default_nodata(wse.transform().clone(), cells)
}

/// Per-zone water surface: mean DEM over the zone's boundary cells. Index
/// `z - 1` holds zone `z`; zones without boundary cells are `None`.
pub fn zone_wse(
    mask: &Mask,
    dem: &Raster<f64>,
    zones: &Raster<u32>,
    permanent_water: Option<&Mask>,
) -> Result<Vec<Option<f64>>> {
    mask.ensure_same_grid(dem)?;
    mask.ensure_same_grid(zones)?;
    let boundary = extract_boundary(mask, permanent_water)?;
    let n_zones = zones.cells().iter().copied().max().unwrap_or(0) as usize;
    let mut sum = vec![0.0; n_zones];
    let mut count = vec![0usize; n_zones];
    for i in 0..mask.len() {
        let z = zones.cells()[i] as usize;
        if z == 0 || !boundary.cells()[i] {
            continue;
        }
        if let Some(h) = dem.value_at(i) {
            sum[z - 1] += h;
            count[z - 1] += 1;
        }
    }
    Ok((0..n_zones)
        .map(|k| (count[k] > 0).then(|| sum[k] / count[k] as f64))
        .collect())
}

/// Zone-mean waterline baseline: each zone's water surface is the mean
/// boundary elevation and depth is `max(0, wse - dem)`. Cells in zones with
/// no usable boundary are nodata.
pub fn zone_mean_depth(
    mask: &Mask,
    dem: &Raster<f64>,
    zones: &Raster<u32>,
    permanent_water: Option<&Mask>,
) -> Result<Raster<f64>> {
    let wse = zone_wse(mask, dem, zones, permanent_water)?;
    for (k, w) in wse.iter().enumerate() {
        if w.is_none() {
            log::warn!("zone {} has no boundary cells; skipped", k + 1);
        }
    }
    let cells = (0..mask.len())
        .map(|i| {
            let z = zones.cells()[i] as usize;
            if !mask.cells()[i] || z == 0 {
                return NODATA;
            }
            match (wse[z - 1], dem.value_at(i)) {
                (Some(w), Some(d)) => (w - d).max(0.0),
                _ => NODATA,
            }
        })
        .collect();
    Raster::with_default_nodata(mask.transform().clone(), cells)
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

    #[test]
    fn depth_examples() {
        let t = grid(1, 4);
        let wse = Raster::new(t.clone(), vec![5.0, 3.0, 20.0, 5.0], None).unwrap();
        let dem = Raster::new(t.clone(), vec![3.0, 5.0, 2.0, 1.0], None).unwrap();
        let mask = Raster::new(t, vec![true, true, true, false], None).unwrap();
        let d = depth_from_wse(&wse, &dem, &mask).unwrap();
        assert_eq!(&d.cells()[..3], &[2.0, 0.0, 10.0]);
        assert!(d.is_nodata_at(3));
    }

    #[test]
    fn zone_mean_examples() {
        // 1x4 strip: two boundary cells at the ends of a flooded run, dry outside
        let t = grid(1, 6);
        let mask = Raster::new(t.clone(), vec![false, true, true, true, true, false], None).unwrap();
        let dem = Raster::new(t.clone(), vec![9.0, 4.0, 3.0, 3.0, 6.0, 9.0], None).unwrap();
        let (zones, n) = label_components(&mask);
        assert_eq!(n, 1);
        let w = zone_wse(&mask, &dem, &zones, None).unwrap();
        assert_eq!(w, vec![Some(5.0)]);
        let d = zone_mean_depth(&mask, &dem, &zones, None).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(0, 4), 0.0);
        assert!(d.is_nodata_at(0));
    }

    #[test]
    fn multi_zone_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let t = grid(24, 24);
        let mask = Raster::from_fn(t.clone(), |r, c| {
            ((2..9).contains(&r) && (2..11).contains(&c)) || ((13..22).contains(&r) && (6..20).contains(&c)) || (r == 20 && c == 2)
        });
        let dem = Raster::from_fn(t, |_, _| rng.random_range(0.0..5.0));
        let (zones, n) = label_components(&mask);
        assert_eq!(n, 3);
        let d = zone_mean_depth(&mask, &dem, &zones, None).unwrap();
        for z in 1..=n {
            let members: Vec<(usize, usize)> = (0..24)
                .flat_map(|r| (0..24).map(move |c| (r, c)))
                .filter(|&(r, c)| zones.get(r, c) == z)
                .collect();
            let edge: Vec<f64> = members
                .iter()
                .filter(|&&(r, c)| {
                    (-1i32..=1).any(|dr| {
                        (-1i32..=1).any(|dc| {
                            let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                            (0..24).contains(&nr) && (0..24).contains(&nc) && !mask.get(nr as usize, nc as usize)
                        })
                    })
                })
                .map(|&(r, c)| dem.get(r, c))
                .collect();
            let w = edge.iter().sum::<f64>() / edge.len() as f64;
            for &(r, c) in &members {
                assert!((d.get(r, c) - (w - dem.get(r, c)).max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_width_of_field() {
        let t = grid(1, 2);
        let f = DepthField {
            depth: Raster::new(t.clone(), vec![1.0, NODATA], Some(NODATA)).unwrap(),
            ci_low: Raster::new(t.clone(), vec![0.5, NODATA], Some(NODATA)).unwrap(),
            ci_high: Raster::new(t.clone(), vec![1.7, NODATA], Some(NODATA)).unwrap(),
            kriging_variance: Raster::filled(t.clone(), 0.0),
            wse: Raster::filled(t, 0.0),
        };
        let h = f.half_width();
        assert!((h.cells()[0] - 0.6).abs() < 1e-12);
        assert!(h.is_nodata_at(1));
    }
}

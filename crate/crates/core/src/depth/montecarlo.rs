//! Monte Carlo propagation of DEM error into kriged depth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::depth::boundary::BoundarySamples;
use crate::depth::kriging::OrdinaryKriging;
use crate::depth::variogram::VariogramModel;
use crate::depth::{DepthField, MAX_DEPTH_M};
use crate::error::{Error, Result};
use crate::raster::{GeoTransform, Mask, Raster, NODATA};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub n_mc: usize,
    /// Vertical DEM error standard deviation (m).
    pub dem_sigma_m: f64,
    /// Standard deviation of the Gaussian smoothing kernel (map units).
    pub corr_length_m: f64,
    /// Kriging is evaluated every `decimation` cells and bilinearly densified.
    pub decimation: usize,
    pub seed: u64,
}

impl MonteCarloConfig {
    pub const LIDAR_SIGMA_M: f64 = 0.5;
    pub const GLO30_SIGMA_M: f64 = 3.0;

    pub fn new(seed: u64) -> Self {
        Self {
            n_mc: 100,
            dem_sigma_m: Self::LIDAR_SIGMA_M,
            corr_length_m: 250.0,
            decimation: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 2 {
            return Err(Error::BadMonteCarlo(format!("n_mc must be >= 2, got {}", self.n_mc)));
        }
        if !(self.dem_sigma_m >= 0.0 && self.dem_sigma_m.is_finite()) {
            return Err(Error::BadMonteCarlo(format!("dem_sigma_m must be >= 0, got {}", self.dem_sigma_m)));
        }
        if !(self.corr_length_m >= 0.0 && self.corr_length_m.is_finite()) {
            return Err(Error::BadMonteCarlo(format!("corr_length_m must be >= 0, got {}", self.corr_length_m)));
        }
        if self.decimation == 0 {
            return Err(Error::BadMonteCarlo("decimation must be >= 1".into()));
        }
        Ok(())
    }
}

/// Zero-mean Gaussian field with marginal std `sigma`: white noise on a
/// padded grid convolved with a separable Gaussian kernel of std
/// `corr_length` (map units), then scaled by the kernel's analytic gain.
pub fn correlated_noise(transform: &GeoTransform, sigma: f64, corr_length: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rows = transform.n_rows;
    let cols = transform.n_cols;
    if sigma == 0.0 {
        return vec![0.0; rows * cols];
    }
    let kernel = |cell: f64| -> Vec<f64> {
        let s = corr_length / cell.abs();
        if s < 0.5 {
            return vec![1.0];
        }
        let radius = (3.0 * s).ceil() as isize;
        (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * s * s)).exp())
            .collect()
    };
    let kx = kernel(transform.pixel_size_x);
    let ky = kernel(transform.pixel_size_y);
    let (rx, ry) = (kx.len() / 2, ky.len() / 2);
    let (prow, pcol) = (rows + 2 * ry, cols + 2 * rx);
    let white: Vec<f64> = (0..prow * pcol).map(|_| StandardNormal.sample(rng)).collect();
    // horizontal pass: prow x cols
    let horiz: Vec<f64> = (0..prow)
        .into_par_iter()
        .flat_map_iter(|r| {
            let row = &white[r * pcol..(r + 1) * pcol];
            let kx = &kx;
            (0..cols).map(move |c| row[c..c + kx.len()].iter().zip(kx).map(|(a, b)| a * b).sum::<f64>())
        })
        .collect();
    let gain: f64 = kx.iter().map(|w| w * w).sum::<f64>().sqrt() * ky.iter().map(|w| w * w).sum::<f64>().sqrt();
    let scale = sigma / gain;
    (0..rows)
        .into_par_iter()
        .flat_map_iter(|r| {
            let (horiz, ky) = (&horiz, &ky);
            (0..cols).map(move |c| {
                ky.iter()
                    .enumerate()
                    .map(|(k, w)| w * horiz[(r + k) * cols + c])
                    .sum::<f64>()
                    * scale
            })
        })
        .collect()
}

/// Node positions along one axis: every `step` cells plus the last cell.
fn axis_nodes(n: usize, step: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..n).step_by(step).collect();
    if *nodes.last().expect("n >= 1") != n - 1 {
        nodes.push(n - 1);
    }
    nodes
}

/// Per-cell `(segment, weight)` for linear interpolation between nodes.
fn axis_weights(n: usize, nodes: &[usize]) -> Vec<(usize, f64)> {
    (0..n)
        .map(|i| {
            if nodes.len() == 1 {
                return (0, 0.0);
            }
            let seg = nodes.partition_point(|&v| v <= i).clamp(1, nodes.len() - 1) - 1;
            let (a, b) = (nodes[seg], nodes[seg + 1]);
            (seg, (i - a) as f64 / (b - a) as f64)
        })
        .collect()
}

/// Evaluates `f` on the decimated node grid and densifies bilinearly.
fn densify(transform: &GeoTransform, decimation: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
    let rows = transform.n_rows;
    let cols = transform.n_cols;
    let rn = axis_nodes(rows, decimation);
    let cn = axis_nodes(cols, decimation);
    let coarse: Vec<f64> = rn
        .par_iter()
        .flat_map_iter(|&r| {
            let f = &f;
            cn.iter().map(move |&c| {
                let (x, y) = transform.cell_center(r, c);
                f(x, y)
            })
        })
        .collect();
    let rw = axis_weights(rows, &rn);
    let cw = axis_weights(cols, &cn);
    let nc = cn.len();
    let at = |i: usize, j: usize| coarse[i * nc + j];
    let mut out = Vec::with_capacity(rows * cols);
    for &(ri, rt) in &rw {
        let ri1 = (ri + 1).min(rn.len() - 1);
        for &(ci, ct) in &cw {
            let ci1 = (ci + 1).min(nc - 1);
            let top = at(ri, ci) * (1.0 - ct) + at(ri, ci1) * ct;
            let bot = at(ri1, ci) * (1.0 - ct) + at(ri1, ci1) * ct;
            out.push(top * (1.0 - rt) + bot * rt);
        }
    }
    out
}

/// Kriged water-surface raster on `transform`.
pub fn wse_surface(ok: &OrdinaryKriging, transform: &GeoTransform, decimation: usize) -> Raster<f64> {
    let cells = densify(transform, decimation, |x, y| ok.predict(x, y));
    Raster::new(transform.clone(), cells, None).expect("shape preserved")
}

/// Kriging-variance raster on `transform`.
pub fn variance_surface(ok: &OrdinaryKriging, transform: &GeoTransform, decimation: usize) -> Raster<f64> {
    let cells = densify(transform, decimation, |x, y| {
        ok.predict_with_variance(x, y).map(|v| v.1).unwrap_or(f64::NAN)
    });
    Raster::new(transform.clone(), cells, None).expect("shape preserved")
}

fn flooded_cells(dem: &Raster<f64>, mask: &Mask) -> Vec<usize> {
    (0..dem.len())
        .filter(|&i| mask.cells()[i] && dem.value_at(i).is_some())
        .collect()
}

/// Depth ensemble under DEM perturbation.
///
/// Each realization draws a correlated error field on its own RNG stream,
/// re-reads boundary elevations from the perturbed DEM, re-solves the
/// kriging system (fixed variogram and locations), and differences against
/// the perturbed DEM. The reported depth is the ensemble median; the CI is
/// the 5th-95th percentile band.
pub fn monte_carlo_depth(
    samples: &BoundarySamples,
    model: VariogramModel,
    dem: &Raster<f64>,
    mask: &Mask,
    cfg: &MonteCarloConfig,
) -> Result<DepthField> {
    cfg.validate()?;
    dem.ensure_same_grid(mask)?;
    let t = dem.transform();
    let ok = OrdinaryKriging::new(samples, model)?;
    let wse = wse_surface(&ok, t, cfg.decimation);
    let variance = variance_surface(&ok, t, cfg.decimation);
    let cells = flooded_cells(dem, mask);
    let sample_cells: Vec<Option<usize>> = samples
        .points()
        .iter()
        .map(|p| t.cell_of(p.x, p.y).map(|(r, c)| r * t.n_cols + c).filter(|&i| dem.value_at(i).is_some()))
        .collect();

    let depth_of = |wse: f64, ground: f64| (wse - ground).clamp(0.0, MAX_DEPTH_M);
    let ensemble: Vec<Vec<f64>> = if cfg.dem_sigma_m == 0.0 {
        let base: Vec<f64> = cells.iter().map(|&i| depth_of(wse.cells()[i], dem.cells()[i])).collect();
        vec![base]
    } else {
        (0..cfg.n_mc)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>> {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                let noise = correlated_noise(t, cfg.dem_sigma_m, cfg.corr_length_m, &mut rng);
                let z: Vec<f64> = samples
                    .points()
                    .iter()
                    .zip(&sample_cells)
                    .map(|(p, cell)| match cell {
                        Some(i) => dem.cells()[*i] + noise[*i],
                        None => p.z,
                    })
                    .collect();
                let ok_r = ok.with_values(&z)?;
                let wse_r = wse_surface(&ok_r, t, cfg.decimation);
                Ok(cells
                    .iter()
                    .map(|&i| depth_of(wse_r.cells()[i], dem.cells()[i] + noise[i]))
                    .collect())
            })
            .collect::<Result<_>>()?
    };

    let n = dem.len();
    let mut depth = vec![NODATA; n];
    let mut lo = vec![NODATA; n];
    let mut hi = vec![NODATA; n];
    let mut var = vec![NODATA; n];
    let mut wse_out = vec![NODATA; n];
    let mut column = Vec::with_capacity(ensemble.len());
    for (k, &i) in cells.iter().enumerate() {
        column.clear();
        column.extend(ensemble.iter().map(|real| real[k]));
        column.sort_by(f64::total_cmp);
        depth[i] = stats::percentile_sorted(&column, 0.5).expect("non-empty ensemble");
        lo[i] = stats::percentile_sorted(&column, 0.05).expect("non-empty ensemble");
        hi[i] = stats::percentile_sorted(&column, 0.95).expect("non-empty ensemble");
        var[i] = variance.cells()[i];
        wse_out[i] = wse.cells()[i];
    }
    let mk = |cells| Raster::with_default_nodata(t.clone(), cells);
    Ok(DepthField {
        depth: mk(depth)?,
        ci_low: mk(lo)?,
        ci_high: mk(hi)?,
        kriging_variance: mk(var)?,
        wse: mk(wse_out)?,
    })
}

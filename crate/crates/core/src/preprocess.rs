//! Local preprocessing of calibrated intensity rasters: temporal median
//! compositing, sigma-filter despeckling and linear/dB conversion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Raster, RasterStack, NODATA};

/// Converts linear power to decibels. Nodata is preserved.
pub fn to_db(linear: &Raster<f64>) -> Result<Raster<f64>> {
    for (i, &v) in linear.cells().iter().enumerate() {
        if !linear.is_nodata_at(i) && v <= 0.0 {
            return Err(Error::NonPositiveCell {
                row: i / linear.n_cols(),
                col: i % linear.n_cols(),
                value: v,
            });
        }
    }
    Ok(linear.map_valid(NODATA, |v| 10.0 * v.log10()))
}

/// Inverse of [`to_db`].
pub fn from_db(db: &Raster<f64>) -> Raster<f64> {
    db.map_valid(NODATA, |v| 10f64.powf(v / 10.0))
}

/// Per-cell median across layers, ignoring nodata. A cell is nodata only
/// when every layer is nodata there.
pub fn median_composite(stack: &RasterStack) -> Result<Raster<f64>> {
    let layers = stack.layers();
    let n = layers[0].len();
    let mut out = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(layers.len());
    for i in 0..n {
        buf.clear();
        buf.extend(layers.iter().filter_map(|l| l.value_at(i)));
        out.push(crate::stats::median(&buf).unwrap_or(NODATA));
    }
    Raster::with_default_nodata(stack.transform().clone(), out)
}

/// Intensity-domain sigma filter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeeSigmaConfig {
    /// Odd window size, at least 3.
    pub kernel: usize,
    pub sigma_mult: f64,
    /// Equivalent number of looks of the input; sets the speckle coefficient
    /// of variation `1 / sqrt(looks)`.
    pub looks: f64,
    /// Fewer retained cells than this falls back to the full-window mean.
    pub min_retained: usize,
}

impl Default for LeeSigmaConfig {
    fn default() -> Self {
        Self {
            kernel: 5,
            sigma_mult: 2.0,
            looks: 5.0,
            min_retained: 3,
        }
    }
}

/// Sigma filter on linear intensity.
///
/// The centre estimate is the 3x3 mean around the cell. Window cells whose
/// ratio to that estimate falls inside the speckle sigma range are averaged.
/// The sigma range is the gamma interval with the same probability mass as
/// `±sigma_mult` standard deviations of a Gaussian, shifted so the truncated
/// distribution keeps unit mean; homogeneous regions therefore keep their
/// mean. Windows are clamped at the raster edge.
pub fn lee_sigma_filter(intensity: &Raster<f64>, cfg: &LeeSigmaConfig) -> Result<Raster<f64>> {
    if cfg.kernel < 3 || cfg.kernel % 2 == 0 {
        return Err(Error::BadKernel(cfg.kernel));
    }
    if !(cfg.looks > 0.0) || !(cfg.sigma_mult > 0.0) {
        return Err(Error::BadConfig(
            "lee sigma filter needs looks > 0 and sigma_mult > 0".into(),
        ));
    }
    let rows = intensity.n_rows();
    let cols = intensity.n_cols();
    let half = cfg.kernel / 2;
    let (lo_factor, hi_factor) = sigma_range(cfg.looks, cfg.sigma_mult);

    let out: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|r| {
            (0..cols).map(move |c| {
                let Some(center) = intensity.value(r, c) else {
                    return NODATA;
                };
                let (mut s3, mut n3) = (0.0, 0usize);
                for rr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                    for cc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                        if let Some(v) = intensity.value(rr, cc) {
                            s3 += v;
                            n3 += 1;
                        }
                    }
                }
                let est = if n3 > 0 { s3 / n3 as f64 } else { center };
                let window = |est: f64| {
                    let lo = est * lo_factor;
                    let hi = est * hi_factor;
                    let (mut s_all, mut n_all, mut s_in, mut n_in) = (0.0, 0usize, 0.0, 0usize);
                    for rr in r.saturating_sub(half)..=(r + half).min(rows - 1) {
                        for cc in c.saturating_sub(half)..=(c + half).min(cols - 1) {
                            if let Some(v) = intensity.value(rr, cc) {
                                s_all += v;
                                n_all += 1;
                                if v >= lo && v <= hi {
                                    s_in += v;
                                    n_in += 1;
                                }
                            }
                        }
                    }
                    (s_all / n_all as f64, s_in, n_in)
                };
                let (full_mean, s_in, n_in) = window(est);
                if n_in >= cfg.min_retained {
                    return s_in / n_in as f64;
                }
                // a 3x3 window straddling an edge: re-centre on the cell itself
                let (_, s_in, n_in) = window(center);
                if n_in >= cfg.min_retained {
                    s_in / n_in as f64
                } else {
                    full_mean
                }
            })
        })
        .collect();
    Raster::with_default_nodata(intensity.transform().clone(), out)
}

/// Sigma range `(lo, hi)` as multiples of the local mean for unit-mean gamma
/// speckle with shape `looks`: the interval holds the Gaussian `±sigma_mult`
/// probability mass and has conditional mean 1.
pub fn sigma_range(looks: f64, sigma_mult: f64) -> (f64, f64) {
    let mass = erf(sigma_mult / std::f64::consts::SQRT_2).min(1.0 - 1e-9);
    let cv = 1.0 / looks.sqrt();
    let x_max = 1.0 + 30.0 * cv;
    let steps = 20_000;
    let h = x_max / steps as f64;
    // cumulative mass and first moment of x^(L-1) e^(-L x) on a fine grid
    let kernel = |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            ((looks - 1.0) * x.ln() - looks * (x - 1.0)).exp()
        }
    };
    let mut cdf = vec![0.0; steps + 1];
    let mut cm1 = vec![0.0; steps + 1];
    let mut prev = (0.0, kernel(0.0));
    for i in 1..=steps {
        let x = i as f64 * h;
        let k = kernel(x);
        cdf[i] = cdf[i - 1] + 0.5 * h * (prev.1 + k);
        cm1[i] = cm1[i - 1] + 0.5 * h * (prev.0 * prev.1 + x * k);
        prev = (x, k);
    }
    let total = cdf[steps];
    let quantile = |q: f64| -> (f64, f64) {
        let target = q * total;
        let i = cdf.partition_point(|&v| v < target).clamp(1, steps);
        let span = cdf[i] - cdf[i - 1];
        let f = if span > 0.0 { (target - cdf[i - 1]) / span } else { 0.0 };
        let x = (i as f64 - 1.0 + f) * h;
        let m = cm1[i - 1] + f * (cm1[i] - cm1[i - 1]);
        (x, m)
    };
    let truncated_mean = |q_lo: f64| {
        let (a, ma) = quantile(q_lo);
        let (b, mb) = quantile(q_lo + mass);
        ((mb - ma) / (mass * total), a, b)
    };
    let (mut lo_q, mut hi_q) = (0.0, 1.0 - mass);
    for _ in 0..100 {
        let mid = 0.5 * (lo_q + hi_q);
        if truncated_mean(mid).0 < 1.0 {
            lo_q = mid;
        } else {
            hi_q = mid;
        }
    }
    let (_, a, b) = truncated_mean(0.5 * (lo_q + hi_q));
    (a, b)
}

/// Error function, Abramowitz & Stegun 7.1.26 (absolute error < 1.5e-7).
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn grid(rows: usize, cols: usize) -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 10.0, rows, cols).unwrap()
    }

    fn speckled(rows: usize, cols: usize, looks: f64, seed: u64) -> Raster<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gamma::new(looks, 1.0 / looks).unwrap();
        let cells = (0..rows * cols).map(|_| 0.05 * g.sample(&mut rng)).collect();
        Raster::new(grid(rows, cols), cells, None).unwrap()
    }

    #[test]
    fn db_examples() {
        let r = Raster::new(grid(1, 3), vec![1.0, 10.0, 0.25], None).unwrap();
        let db = to_db(&r).unwrap();
        assert_eq!(db.cells()[0], 0.0);
        assert!((db.cells()[1] - 10.0).abs() < 1e-12);
        assert!((db.cells()[2] - (-6.020599913279624)).abs() < 1e-9);
    }

    #[test]
    fn db_rejects_non_positive_but_skips_nodata() {
        let r = Raster::new(grid(1, 2), vec![1.0, 0.0], None).unwrap();
        assert!(matches!(to_db(&r), Err(Error::NonPositiveCell { col: 1, .. })));
        let r = Raster::new(grid(1, 2), vec![1.0, NODATA], Some(NODATA)).unwrap();
        let db = to_db(&r).unwrap();
        assert!(db.is_nodata_at(1));
    }

    #[test]
    fn median_examples() {
        let t = grid(1, 2);
        let a = Raster::new(t.clone(), vec![1.0, NODATA], Some(NODATA)).unwrap();
        let b = Raster::new(t.clone(), vec![100.0, NODATA], Some(NODATA)).unwrap();
        let c = Raster::new(t.clone(), vec![2.0, NODATA], Some(NODATA)).unwrap();
        let m = median_composite(&RasterStack::new(vec![a, b, c]).unwrap()).unwrap();
        assert_eq!(m.cells()[0], 2.0);
        assert!(m.is_nodata_at(1));

        let layers: Vec<_> = [4.0, 1.0, 3.0, 2.0]
            .iter()
            .map(|&v| Raster::new(grid(1, 1), vec![v], None).unwrap())
            .collect();
        let m = median_composite(&RasterStack::new(layers).unwrap()).unwrap();
        assert_eq!(m.cells()[0], 2.5);
    }

    #[test]
    fn median_ignores_partial_nodata() {
        let t = grid(1, 1);
        let a = Raster::new(t.clone(), vec![NODATA], Some(NODATA)).unwrap();
        let b = Raster::new(t.clone(), vec![7.0], Some(NODATA)).unwrap();
        let m = median_composite(&RasterStack::new(vec![a, b]).unwrap()).unwrap();
        assert_eq!(m.cells()[0], 7.0);
    }

    #[test]
    fn lee_rejects_bad_kernels() {
        let r = Raster::filled(grid(3, 3), 1.0);
        for k in [0, 1, 2, 4] {
            let cfg = LeeSigmaConfig {
                kernel: k,
                ..Default::default()
            };
            assert!(matches!(lee_sigma_filter(&r, &cfg), Err(Error::BadKernel(_))));
        }
    }

    #[test]
    fn lee_constant_and_single_cell_unchanged() {
        let r = Raster::filled(grid(7, 9), 0.3);
        let out = lee_sigma_filter(&r, &LeeSigmaConfig::default()).unwrap();
        for &v in out.cells() {
            assert!((v - 0.3).abs() < 1e-12);
        }
        let one = Raster::filled(grid(1, 1), 0.7);
        let cfg = LeeSigmaConfig {
            kernel: 3,
            ..Default::default()
        };
        assert_eq!(lee_sigma_filter(&one, &cfg).unwrap().cells()[0], 0.7);
    }

    #[test]
    fn lee_reduces_variance_and_keeps_mean() {
        let r = speckled(128, 128, 5.0, 11);
        let out = lee_sigma_filter(&r, &LeeSigmaConfig::default()).unwrap();
        let (m_in, s_in) = crate::stats::mean_std(r.cells()).unwrap();
        let (m_out, s_out) = crate::stats::mean_std(out.cells()).unwrap();
        assert!(s_out * s_out < s_in * s_in * 0.5, "{s_in} -> {s_out}");
        assert!(((m_out - m_in) / m_in).abs() < 0.02, "{m_in} -> {m_out}");
    }

    #[test]
    fn sigma_range_has_unit_conditional_mean() {
        let (a, b) = sigma_range(5.0, 2.0);
        assert!(a > 0.0 && a < 1.0 && b > 1.0, "{a} {b}");
        // independent check by direct quadrature of the gamma(5, 1/5) density
        let n = 200_000;
        let h = (b - a) / n as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let p = x.powi(4) * (-5.0 * x).exp();
            m0 += p;
            m1 += p * x;
        }
        assert!((m1 / m0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn lee_preserves_step_edge() {
        // bright half / dark half: the filter must not blur across the edge
        let t = grid(20, 20);
        let r = Raster::from_fn(t, |_, c| if c < 10 { 1.0 } else { 0.1 });
        let out = lee_sigma_filter(&r, &LeeSigmaConfig::default()).unwrap();
        assert!((out.get(10, 9) - 1.0).abs() < 0.05);
        assert!((out.get(10, 10) - 0.1).abs() < 0.01);
    }
}

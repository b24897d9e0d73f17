//! Empirical semivariogram and weighted least-squares spherical fit.

use crate::depth::boundary::{BoundarySamples, SamplePoint};
use crate::error::{Error, Result};

/// One lag bin: mean pair distance, semivariance, pair count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    pub lag: f64,
    pub gamma: f64,
    pub count: usize,
}

/// Semivariogram of boundary samples with `n_bins` equal-width bins up to
/// half the largest pairwise distance.
pub fn empirical_semivariogram(samples: &BoundarySamples, n_bins: usize) -> Result<Vec<VariogramBin>> {
    let pts = samples.points();
    if pts.len() < BoundarySamples::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            need: BoundarySamples::MIN_SAMPLES,
            got: pts.len(),
        });
    }
    let mut max_d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            max_d = max_d.max(a.distance(b));
        }
    }
    semivariogram_with_cutoff(pts, n_bins, 0.5 * max_d)
}

/// Semivariogram over pairs at distance `<= cutoff`, binned into `n_bins`
/// equal-width bins on `[0, cutoff]`. Only non-empty bins are returned, in
/// increasing lag order. Needs at least two points.
pub fn semivariogram_with_cutoff(
    points: &[SamplePoint],
    n_bins: usize,
    cutoff: f64,
) -> Result<Vec<VariogramBin>> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: points.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::BadConfig("n_bins must be >= 1".into()));
    }
    let mut lag_sum = vec![0.0; n_bins];
    let mut sq_sum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    let width = cutoff / n_bins as f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let h = a.distance(b);
            if h > cutoff {
                continue;
            }
            let k = if width > 0.0 {
                ((h / width) as usize).min(n_bins - 1)
            } else {
                0
            };
            let dz = a.z - b.z;
            lag_sum[k] += h;
            sq_sum[k] += dz * dz;
            count[k] += 1;
        }
    }
    Ok((0..n_bins)
        .filter(|&k| count[k] > 0)
        .map(|k| VariogramBin {
            lag: lag_sum[k] / count[k] as f64,
            gamma: sq_sum[k] / (2.0 * count[k] as f64),
            count: count[k],
        })
        .collect())
}

/// Spherical model with nugget `c0`, partial sill `c1`, and range `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramModel {
    nugget: f64,
    sill: f64,
    range: f64,
}

impl VariogramModel {
    /// Requires `c0 >= 0`, `c1 > 0`, `a > 0`.
    pub fn spherical(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0 && nugget.is_finite())
            || !(sill > 0.0 && sill.is_finite())
            || !(range > 0.0 && range.is_finite())
        {
            return Err(Error::BadVariogram(format!(
                "need c0 >= 0, c1 > 0, a > 0; got ({nugget}, {sill}, {range})"
            )));
        }
        Ok(Self { nugget, sill, range })
    }

    /// Constant semivariance `c0` at every non-zero lag.
    pub fn pure_nugget(nugget: f64) -> Result<Self> {
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::BadVariogram(format!("nugget must be >= 0, got {nugget}")));
        }
        Ok(Self {
            nugget,
            sill: 0.0,
            range: 1.0,
        })
    }

    /// Same model with the nugget raised to at least `floor`.
    pub fn with_nugget_floor(self, floor: f64) -> Self {
        if floor.is_finite() && floor > self.nugget {
            Self { nugget: floor, ..self }
        } else {
            self
        }
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn sill(&self) -> f64 {
        self.sill
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn is_pure_nugget(&self) -> bool {
        self.sill == 0.0
    }

    /// Model semivariance; `gamma(0) = c0`.
    pub fn gamma(&self, h: f64) -> f64 {
        self.nugget + self.sill * spherical_shape(h / self.range)
    }
}

/// Unit spherical structure `1.5 t - 0.5 t^3` on `[0, 1]`, 1 beyond.
fn spherical_shape(t: f64) -> f64 {
    if t >= 1.0 {
        1.0
    } else {
        1.5 * t - 0.5 * t * t * t
    }
}

struct WeightedBins {
    lag: Vec<f64>,
    gamma: Vec<f64>,
    weight: Vec<f64>,
    sill_floor: f64,
}

impl WeightedBins {
    /// Best `(c0, c1, sse)` for a fixed range: weighted linear least squares
    /// projected onto `c0 >= 0`, `c1 >= sill_floor`.
    fn solve(&self, a: f64) -> (f64, f64, f64) {
        let f: Vec<f64> = self.lag.iter().map(|&h| spherical_shape(h / a)).collect();
        let sse = |c0: f64, c1: f64| {
            f.iter()
                .zip(&self.gamma)
                .zip(&self.weight)
                .map(|((&fk, &g), &w)| {
                    let e = c0 + c1 * fk - g;
                    w * e * e
                })
                .sum::<f64>()
        };
        let (mut sw, mut sf, mut sg, mut sff, mut sfg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&fk, &g), &w) in f.iter().zip(&self.gamma).zip(&self.weight) {
            sw += w;
            sf += w * fk;
            sg += w * g;
            sff += w * fk * fk;
            sfg += w * fk * g;
        }
        // the sill-floor candidate comes first so exact ties prefer the
        // simpler nugget-dominated model
        let c1 = self.sill_floor;
        let mut candidates = vec![(((sg - c1 * sf) / sw).max(0.0), c1)];
        let det = sw * sff - sf * sf;
        if det.abs() > 1e-12 * sw * sff {
            let c1 = (sw * sfg - sf * sg) / det;
            let c0 = (sg - c1 * sf) / sw;
            if c0 >= 0.0 && c1 >= self.sill_floor {
                candidates.push((c0, c1));
            }
        }
        // c0 = 0 edge
        if sff > 0.0 {
            candidates.push((0.0, (sfg / sff).max(self.sill_floor)));
        }
        candidates
            .into_iter()
            .map(|(c0, c1)| (c0, c1, sse(c0, c1)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("at least one candidate")
    }
}

/// Weighted least-squares spherical fit with weights `N_k / max(gamma_k, eps)^2`.
///
/// The range is chosen by a log-spaced grid search refined with golden
/// section; nugget and sill are solved exactly for each candidate range.
/// The sill is bounded below by a tiny positive floor, so a flat empirical
/// variogram yields a (near) pure-nugget model.
pub fn fit_spherical(bins: &[VariogramBin]) -> Result<VariogramModel> {
    let bins: Vec<&VariogramBin> = bins.iter().filter(|b| b.count > 0).collect();
    if bins.len() < 3 {
        return Err(Error::FitFailure(format!("{} non-empty bins, need 3", bins.len())));
    }
    if bins.iter().any(|b| !(b.lag.is_finite() && b.gamma.is_finite() && b.gamma >= 0.0)) {
        return Err(Error::FitFailure("non-finite bin".into()));
    }
    let g_max = bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    let eps = (1e-6 * g_max).max(1e-12);
    let data = WeightedBins {
        lag: bins.iter().map(|b| b.lag).collect(),
        gamma: bins.iter().map(|b| b.gamma).collect(),
        weight: bins
            .iter()
            .map(|b| b.count as f64 / b.gamma.max(eps).powi(2))
            .collect(),
        sill_floor: 1e-9 * g_max.max(1e-12),
    };
    let h_min = data.lag.iter().copied().filter(|&h| h > 0.0).fold(f64::INFINITY, f64::min);
    let h_max = data.lag.iter().copied().fold(0.0, f64::max);
    if !(h_max > 0.0) || !h_min.is_finite() {
        return Err(Error::FitFailure("all lags are zero".into()));
    }
    let (lo, hi) = ((0.25 * h_min).ln(), (4.0 * h_max).ln());
    let n_grid = 80;
    let obj = |log_a: f64| data.solve(log_a.exp()).2;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let best = (0..n_grid)
        .min_by(|&i, &j| obj(grid[i]).total_cmp(&obj(grid[j])))
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n_grid - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    for _ in 0..100 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = obj(x2);
        }
    }
    let mut log_a = 0.5 * (a + b);
    if obj(grid[best]) < obj(log_a) {
        log_a = grid[best];
    }
    let range = log_a.exp();
    let (c0, c1, _) = data.solve(range);
    VariogramModel::spherical(c0, c1, range).map_err(|e| Error::FitFailure(e.to_string()))
}

/// [`fit_spherical`], falling back to a pure-nugget model at the
/// count-weighted mean semivariance. The flag reports the fallback.
pub fn fit_spherical_or_nugget(bins: &[VariogramBin]) -> (VariogramModel, bool) {
    match fit_spherical(bins) {
        Ok(m) => (m, false),
        Err(_) => {
            let n: usize = bins.iter().map(|b| b.count).sum();
            let c0 = if n == 0 {
                0.0
            } else {
                bins.iter().map(|b| b.gamma * b.count as f64).sum::<f64>() / n as f64
            };
            let c0 = if c0.is_finite() && c0 >= 0.0 { c0 } else { 0.0 };
            (VariogramModel::pure_nugget(c0).expect("finite non-negative"), true)
        }
    }
}

//! Flood extent detection: backscatter change, coherence change, the HAND
//! gate, and their naive-Bayes fusion into a posterior flood probability.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex32;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster, NODATA};
use crate::stats;
use crate::terrain::HandRaster;

/// Minimum reference-region size for scene statistics.
pub const MIN_REFERENCE_CELLS: usize = 100;

/// Evidence channels enabled in fusion. Backscatter change is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelSet {
    pub cci: bool,
    pub hand: bool,
}

impl ChannelSet {
    pub const BCR_ONLY: ChannelSet = ChannelSet {
        cci: false,
        hand: false,
    };
    pub const BCR_HAND: ChannelSet = ChannelSet {
        cci: false,
        hand: true,
    };
    pub const BCR_CCI: ChannelSet = ChannelSet {
        cci: true,
        hand: false,
    };
    pub const FULL: ChannelSet = ChannelSet {
        cci: true,
        hand: true,
    };

    /// The four ablation configurations in reporting order.
    pub fn ablations() -> [ChannelSet; 4] {
        [Self::BCR_ONLY, Self::BCR_HAND, Self::BCR_CCI, Self::FULL]
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BCR")?;
        if self.cci {
            f.write_str("+CCI")?;
        }
        if self.hand {
            f.write_str("+HAND")?;
        }
        Ok(())
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    /// Accepts `+`/`,`-separated channel names, e.g. `bcr+hand`, or `full`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::FULL);
        }
        let mut set = ChannelSet::BCR_ONLY;
        let mut has_bcr = false;
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "bcr" => has_bcr = true,
                "cci" => set.cci = true,
                "hand" => set.hand = true,
                other => {
                    return Err(Error::Config(format!("unknown channel '{other}'")));
                }
            }
        }
        if !has_bcr {
            return Err(Error::Config(format!(
                "channel set '{s}' must include BCR"
            )));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub bcr_sigma_mult: f64,
    /// Hard CCI cut used only by the optional candidate pre-mask.
    pub cci_threshold: f64,
    pub hand_threshold_m: f64,
    pub posterior_threshold: f64,
    pub prior_flood: f64,
    pub channels: ChannelSet,
    /// Flood-class mean shift of the BCR likelihood, in dB.
    pub bcr_flood_offset_db: f64,
    /// Flood-class mean shift of the CCI likelihood.
    pub cci_flood_offset: f64,
    /// Zero the posterior outside the hard-threshold candidate set
    /// (BCR below the scene threshold, or urban CCI above `cci_threshold`).
    pub candidate_premask: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            bcr_sigma_mult: 2.0,
            cci_threshold: 0.30,
            hand_threshold_m: 10.0,
            posterior_threshold: 0.50,
            prior_flood: 0.10,
            channels: ChannelSet::FULL,
            bcr_flood_offset_db: -5.5,
            cci_flood_offset: 0.45,
            candidate_premask: false,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.posterior_threshold) {
            return Err(Error::BadConfig("posterior_threshold must be in (0,1)".into()));
        }
        if !open_unit(self.cci_threshold) {
            return Err(Error::BadConfig("cci_threshold must be in (0,1)".into()));
        }
        if !open_unit(self.prior_flood) {
            return Err(Error::BadConfig("prior_flood must be in (0,1)".into()));
        }
        if !(self.hand_threshold_m > 0.0) {
            return Err(Error::BadConfig("hand_threshold_m must be > 0".into()));
        }
        if !(self.bcr_sigma_mult > 0.0) {
            return Err(Error::BadConfig("bcr_sigma_mult must be > 0".into()));
        }
        Ok(())
    }
}

/// Backscatter change `post - pre`, both in dB.
pub fn compute_bcr(pre_db: &Raster<f64>, post_db: &Raster<f64>) -> Result<Raster<f64>> {
    pre_db.ensure_same_grid(post_db)?;
    let cells = (0..pre_db.len())
        .map(|i| match (pre_db.value_at(i), post_db.value_at(i)) {
            (Some(a), Some(b)) => b - a,
            _ => NODATA,
        })
        .collect();
    Raster::with_default_nodata(pre_db.transform().clone(), cells)
}

fn reference_values(raster: &Raster<f64>, reference: &Mask) -> Result<Vec<f64>> {
    raster.ensure_same_grid(reference)?;
    Ok(reference
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .filter_map(|(i, _)| raster.value_at(i))
        .collect())
}

/// Scene-adaptive BCR threshold `mean - sigma_mult * std` over the reference cells.
pub fn scene_threshold(bcr: &Raster<f64>, reference: &Mask, sigma_mult: f64) -> Result<f64> {
    let values = reference_values(bcr, reference)?;
    if values.len() < MIN_REFERENCE_CELLS {
        return Err(Error::ReferenceTooSmall {
            channel: "BCR",
            got: values.len(),
            need: MIN_REFERENCE_CELLS,
        });
    }
    let (m, s) = stats::mean_std(&values).expect("non-empty");
    Ok(m - sigma_mult * s)
}

/// Cells flagged by the scene threshold (`bcr < threshold`).
pub fn threshold_mask(bcr: &Raster<f64>, threshold: f64) -> Mask {
    Raster::from_fn(bcr.transform().clone(), |r, c| {
        bcr.value(r, c).is_some_and(|v| v < threshold)
    })
}

/// Windowed interferometric coherence magnitude.
///
/// `window` is `(range, azimuth)`, i.e. `(columns, rows)`. The window is
/// centred on each cell (even sizes extend one more cell right/down) and
/// clamped at the raster edges. Cells with zero power in either image are
/// nodata.
pub fn coherence(
    s1: &Raster<Complex32>,
    s2: &Raster<Complex32>,
    window: (usize, usize),
) -> Result<Raster<f64>> {
    s1.ensure_same_grid(s2)?;
    let (w_range, w_az) = window;
    if w_range == 0 || w_az == 0 {
        return Err(Error::BadConfig("coherence window must be at least 1x1".into()));
    }
    let rows = s1.n_rows();
    let cols = s1.n_cols();
    let stride = cols + 1;
    // summed-area tables of the cross product and both powers
    let mut cross_re = vec![0.0f64; (rows + 1) * stride];
    let mut cross_im = vec![0.0f64; (rows + 1) * stride];
    let mut pow1 = vec![0.0f64; (rows + 1) * stride];
    let mut pow2 = vec![0.0f64; (rows + 1) * stride];
    for r in 0..rows {
        let (mut a_re, mut a_im, mut a1, mut a2) = (0.0, 0.0, 0.0, 0.0);
        for c in 0..cols {
            let i = r * cols + c;
            if let (Some(x), Some(y)) = (s1.value_at(i), s2.value_at(i)) {
                let (xr, xi) = (x.re as f64, x.im as f64);
                let (yr, yi) = (y.re as f64, y.im as f64);
                // x * conj(y)
                a_re += xr * yr + xi * yi;
                a_im += xi * yr - xr * yi;
                a1 += xr * xr + xi * xi;
                a2 += yr * yr + yi * yi;
            }
            let o = (r + 1) * stride + c + 1;
            let up = r * stride + c + 1;
            cross_re[o] = cross_re[up] + a_re;
            cross_im[o] = cross_im[up] + a_im;
            pow1[o] = pow1[up] + a1;
            pow2[o] = pow2[up] + a2;
        }
    }
    let rect = |t: &[f64], r0: usize, c0: usize, r1: usize, c1: usize| {
        t[r1 * stride + c1] - t[r0 * stride + c1] - t[r1 * stride + c0] + t[r0 * stride + c0]
    };
    let (c_lo, c_hi) = ((w_range - 1) / 2, w_range / 2);
    let (r_lo, r_hi) = ((w_az - 1) / 2, w_az / 2);
    let cells: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|r| {
            let r0 = r.saturating_sub(r_lo);
            let r1 = (r + r_hi + 1).min(rows);
            let (cross_re, cross_im, pow1, pow2) = (&cross_re, &cross_im, &pow1, &pow2);
            (0..cols).map(move |c| {
                let c0 = c.saturating_sub(c_lo);
                let c1 = (c + c_hi + 1).min(cols);
                let p1 = rect(pow1, r0, c0, r1, c1);
                let p2 = rect(pow2, r0, c0, r1, c1);
                if p1 <= 0.0 || p2 <= 0.0 {
                    return NODATA;
                }
                let re = rect(cross_re, r0, c0, r1, c1);
                let im = rect(cross_im, r0, c0, r1, c1);
                ((re * re + im * im).sqrt() / (p1 * p2).sqrt()).clamp(0.0, 1.0)
            })
        })
        .collect();
    Raster::with_default_nodata(s1.transform().clone(), cells)
}

/// Coherence change `pre - co` inside the urban mask; nodata elsewhere.
pub fn compute_cci(coh_pre: &Raster<f64>, coh_co: &Raster<f64>, urban: &Mask) -> Result<Raster<f64>> {
    coh_pre.ensure_same_grid(coh_co)?;
    coh_pre.ensure_same_grid(urban)?;
    let cells = (0..coh_pre.len())
        .map(|i| {
            if !urban.cells()[i] {
                return NODATA;
            }
            match (coh_pre.value_at(i), coh_co.value_at(i)) {
                (Some(a), Some(b)) => a - b,
                _ => NODATA,
            }
        })
        .collect();
    Raster::with_default_nodata(coh_pre.transform().clone(), cells)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - self.std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Class-conditional densities of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLikelihood {
    pub flood: Gaussian,
    pub dry: Gaussian,
}

impl ChannelLikelihood {
    pub fn log_ratio(&self, x: f64) -> f64 {
        self.flood.log_pdf(x) - self.dry.log_pdf(x)
    }

    fn validate(&self, name: &str) -> Result<()> {
        for g in [self.flood, self.dry] {
            if !(g.std > 0.0) || !g.std.is_finite() || !g.mean.is_finite() {
                return Err(Error::DegenerateModel(format!(
                    "{name} likelihood has std {} (must be > 0)",
                    g.std
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    pub bcr: ChannelLikelihood,
    /// Absent when no coherence data was available.
    pub cci: Option<ChannelLikelihood>,
}

impl LikelihoodModel {
    pub fn validate(&self) -> Result<()> {
        self.bcr.validate("BCR")?;
        if let Some(c) = &self.cci {
            c.validate("CCI")?;
        }
        Ok(())
    }
}

/// Flood-class mean shifts relative to the dry-class reference statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloodOffsets {
    pub bcr_db: f64,
    pub cci: f64,
}

impl Default for FloodOffsets {
    fn default() -> Self {
        Self {
            bcr_db: -5.5,
            cci: 0.45,
        }
    }
}

fn fit_channel(values: &[f64], offset: f64, channel: &'static str) -> Result<ChannelLikelihood> {
    if values.len() < MIN_REFERENCE_CELLS {
        return Err(Error::ReferenceTooSmall {
            channel,
            got: values.len(),
            need: MIN_REFERENCE_CELLS,
        });
    }
    let (mean, std) = stats::mean_std(values).expect("non-empty");
    if !(std > 0.0) {
        return Err(Error::DegenerateModel(format!(
            "{channel} reference region has zero variance"
        )));
    }
    Ok(ChannelLikelihood {
        dry: Gaussian { mean, std },
        flood: Gaussian {
            mean: mean + offset,
            std,
        },
    })
}

/// Training-free likelihoods: the dry class takes the reference-region mean
/// and std of each channel; the flood class shifts the mean by `offsets` and
/// keeps the std. CCI statistics use the reference cells where CCI is
/// defined (urban cells).
pub fn fit_likelihoods(
    bcr: &Raster<f64>,
    cci: Option<&Raster<f64>>,
    reference: &Mask,
    offsets: FloodOffsets,
) -> Result<LikelihoodModel> {
    let bcr_fit = fit_channel(&reference_values(bcr, reference)?, offsets.bcr_db, "BCR")?;
    let cci_fit = match cci {
        Some(c) => Some(fit_channel(&reference_values(c, reference)?, offsets.cci, "CCI")?),
        None => None,
    };
    Ok(LikelihoodModel {
        bcr: bcr_fit,
        cci: cci_fit,
    })
}

/// Normalised two-class posterior flood probability.
///
/// Per cell, the log-odds are `logit(prior)` plus the log likelihood ratio of
/// each enabled channel. CCI nodata (outside the urban mask) contributes
/// nothing. With HAND enabled, cells above the HAND threshold (including
/// unreachable cells) get exactly 0. BCR or HAND nodata gives nodata.
pub fn fuse_posterior(
    bcr: &Raster<f64>,
    cci: Option<&Raster<f64>>,
    hand: Option<&HandRaster>,
    model: &LikelihoodModel,
    cfg: &DetectionConfig,
) -> Result<Raster<f64>> {
    cfg.validate()?;
    model.validate()?;
    let cci = if cfg.channels.cci {
        let c = cci.ok_or_else(|| Error::BadConfig("CCI channel enabled but no CCI raster".into()))?;
        bcr.ensure_same_grid(c)?;
        let lik = model
            .cci
            .ok_or_else(|| Error::DegenerateModel("CCI channel enabled but model has no CCI term".into()))?;
        Some((c, lik))
    } else {
        None
    };
    let hand = if cfg.channels.hand {
        let h = hand.ok_or_else(|| Error::BadConfig("HAND channel enabled but no HAND raster".into()))?;
        bcr.ensure_same_grid(h.raster())?;
        Some(h.raster())
    } else {
        None
    };
    let prior_logit = (cfg.prior_flood / (1.0 - cfg.prior_flood)).ln();
    let cells: Vec<f64> = (0..bcr.len())
        .into_par_iter()
        .map(|i| {
            let Some(b) = bcr.value_at(i) else {
                return NODATA;
            };
            if let Some(h) = hand {
                match h.value_at(i) {
                    None => return NODATA,
                    Some(v) if !(v <= cfg.hand_threshold_m) => return 0.0,
                    _ => {}
                }
            }
            let mut log_odds = prior_logit + model.bcr.log_ratio(b);
            if let Some((c, lik)) = &cci {
                if let Some(v) = c.value_at(i) {
                    log_odds += lik.log_ratio(v);
                }
            }
            logistic(log_odds)
        })
        .collect();
    Raster::with_default_nodata(bcr.transform().clone(), cells)
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hard-threshold candidate set: BCR below `bcr_threshold`, or (when CCI is
/// enabled) urban CCI above `cfg.cci_threshold`.
pub fn candidate_mask(
    bcr: &Raster<f64>,
    cci: Option<&Raster<f64>>,
    bcr_threshold: f64,
    cfg: &DetectionConfig,
) -> Result<Mask> {
    if let Some(c) = cci {
        bcr.ensure_same_grid(c)?;
    }
    Ok(Raster::from_fn(bcr.transform().clone(), |r, c| {
        let by_bcr = bcr.value(r, c).is_some_and(|v| v < bcr_threshold);
        let by_cci = cfg.channels.cci
            && cci.is_some_and(|x| x.value(r, c).is_some_and(|v| v > cfg.cci_threshold));
        by_bcr || by_cci
    }))
}

/// Zeroes the posterior outside `candidates`; nodata stays nodata.
pub fn apply_premask(posterior: &Raster<f64>, candidates: &Mask) -> Result<Raster<f64>> {
    posterior.ensure_same_grid(candidates)?;
    let cells = (0..posterior.len())
        .map(|i| match posterior.value_at(i) {
            None => NODATA,
            Some(p) if candidates.cells()[i] => p,
            Some(_) => 0.0,
        })
        .collect();
    Raster::with_default_nodata(posterior.transform().clone(), cells)
}

/// Binary extent: true where posterior >= threshold (nodata is dry).
pub fn extent_mask(posterior: &Raster<f64>, threshold: f64) -> Mask {
    Raster::from_fn(posterior.transform().clone(), |r, c| {
        posterior.value(r, c).is_some_and(|p| p >= threshold)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid(rows: usize, cols: usize) -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 10.0, rows, cols).unwrap()
    }

    #[test]
    fn bcr_examples() {
        let t = grid(1, 2);
        let pre = Raster::new(t.clone(), vec![10.0, 3.0], None).unwrap();
        let post = Raster::new(t.clone(), vec![4.0, 3.0], None).unwrap();
        let bcr = compute_bcr(&pre, &post).unwrap();
        assert_eq!(bcr.cells(), &[-6.0, 0.0]);
        let other = Raster::filled(grid(2, 1), 0.0);
        assert!(matches!(compute_bcr(&pre, &other), Err(Error::TransformMismatch)));
    }

    #[test]
    fn threshold_examples() {
        let t = grid(10, 20);
        // half -2.5, half 1.5: mean -0.5, population std 2
        let bcr = Raster::from_fn(t.clone(), |_, c| if c % 2 == 0 { -2.5 } else { 1.5 });
        let all = Raster::filled(t.clone(), true);
        let thr = scene_threshold(&bcr, &all, 2.0).unwrap();
        assert!((thr + 4.5).abs() < 1e-12);

        let small = Raster::from_fn(t, |r, _| r == 0);
        assert!(matches!(
            scene_threshold(&bcr, &small, 2.0),
            Err(Error::ReferenceTooSmall { got: 20, .. })
        ));
    }

    #[test]
    fn self_coherence_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = grid(12, 10);
        let s1 = Raster::from_fn(t.clone(), |_, _| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let k = Complex32::new(0.3, -2.0);
        let s2 = s1.map_valid(Complex32::new(f32::NAN, f32::NAN), |v| v * k);
        for win in [(1, 1), (5, 20), (3, 4)] {
            let g = coherence(&s1, &s1, win).unwrap();
            assert!(g.cells().iter().all(|&v| (v - 1.0).abs() < 1e-9));
            let g = coherence(&s1, &s2, win).unwrap();
            assert!(g.cells().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn coherence_matches_direct_window_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = grid(9, 11);
        let mut gen = || Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s1 = Raster::from_fn(t.clone(), |_, _| gen());
        let s2 = Raster::from_fn(t.clone(), |_, _| gen());
        let g = coherence(&s1, &s2, (3, 4)).unwrap();
        for r in 0..9usize {
            for c in 0..11usize {
                let (mut num, mut p1, mut p2) = (num_complex::Complex64::new(0.0, 0.0), 0.0, 0.0);
                for rr in r.saturating_sub(1)..=(r + 2).min(8) {
                    for cc in c.saturating_sub(1)..=(c + 1).min(10) {
                        let a = s1.get(rr, cc);
                        let b = s2.get(rr, cc);
                        let a = num_complex::Complex64::new(a.re as f64, a.im as f64);
                        let b = num_complex::Complex64::new(b.re as f64, b.im as f64);
                        num += a * b.conj();
                        p1 += a.norm_sqr();
                        p2 += b.norm_sqr();
                    }
                }
                let expect = num.norm() / (p1 * p2).sqrt();
                assert!((g.get(r, c) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_power_window_is_nodata() {
        let t = grid(3, 3);
        let z = Raster::filled(t.clone(), Complex32::new(0.0, 0.0));
        let o = Raster::filled(t, Complex32::new(1.0, 0.0));
        let g = coherence(&z, &o, (1, 1)).unwrap();
        assert!((0..9).all(|i| g.is_nodata_at(i)));
    }

    #[test]
    fn independent_windows_show_small_bias() {
        // Monte Carlo oracle: mean |coherence| of independent circular
        // Gaussian samples over N = 100 looks, computed by direct sums.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cg = |rng: &mut ChaCha8Rng| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            num_complex::Complex64::new(re, im)
        };
        let n_windows = 10_000;
        let mut total = 0.0;
        for _ in 0..n_windows {
            let (mut num, mut p1, mut p2) = (num_complex::Complex64::new(0.0, 0.0), 0.0, 0.0);
            for _ in 0..100 {
                let a = cg(&mut rng);
                let b = cg(&mut rng);
                num += a * b.conj();
                p1 += a.norm_sqr();
                p2 += b.norm_sqr();
            }
            total += num.norm() / (p1 * p2).sqrt();
        }
        let oracle = total / n_windows as f64;
        assert!((oracle - std::f64::consts::PI.sqrt() / 20.0).abs() < 0.005);

        // implementation on a large independent field, interior cells only
        let t = grid(220, 120);
        let mut gen = || {
            let re: f32 = StandardNormal.sample(&mut rng);
            let im: f32 = StandardNormal.sample(&mut rng);
            Complex32::new(re, im)
        };
        let s1 = Raster::from_fn(t.clone(), |_, _| gen());
        let s2 = Raster::from_fn(t, |_, _| gen());
        let g = coherence(&s1, &s2, (5, 20)).unwrap();
        let mut vals = Vec::new();
        for r in (10..210).step_by(20) {
            for c in (3..117).step_by(5) {
                vals.push(g.get(r, c));
            }
        }
        let m = stats::mean(&vals).unwrap();
        assert!((m - oracle).abs() < 0.01, "impl {m} vs oracle {oracle}");
    }

    #[test]
    fn cci_examples() {
        let t = grid(1, 3);
        let pre = Raster::new(t.clone(), vec![0.9, 0.9, 0.6], None).unwrap();
        let co = Raster::new(t.clone(), vec![0.4, 0.4, 0.6], None).unwrap();
        let urban = Raster::new(t, vec![true, false, true], None).unwrap();
        let cci = compute_cci(&pre, &co, &urban).unwrap();
        assert!((cci.cells()[0] - 0.5).abs() < 1e-12);
        assert!(cci.cells()[0] > 0.30);
        assert!(cci.is_nodata_at(1));
        assert_eq!(cci.cells()[2], 0.0);
    }

    fn model(bcr_std: f64) -> LikelihoodModel {
        LikelihoodModel {
            bcr: ChannelLikelihood {
                dry: Gaussian { mean: 0.0, std: bcr_std },
                flood: Gaussian { mean: -5.5, std: bcr_std },
            },
            cci: Some(ChannelLikelihood {
                dry: Gaussian { mean: 0.05, std: 0.1 },
                flood: Gaussian { mean: 0.5, std: 0.1 },
            }),
        }
    }

    #[test]
    fn hand_gate_forces_zero() {
        let t = grid(1, 2);
        let bcr = Raster::new(t.clone(), vec![-8.0, -8.0], None).unwrap();
        let hand = HandRaster::from_raster(Raster::new(t, vec![12.0, 2.0], None).unwrap());
        let p = fuse_posterior(&bcr, None, Some(&hand), &model(1.5), &DetectionConfig {
            channels: ChannelSet::BCR_HAND,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.cells()[0], 0.0);
        assert!(p.cells()[1] > 0.99);
    }

    #[test]
    fn symmetric_evidence_gives_prior() {
        let t = grid(1, 1);
        let bcr = Raster::new(t, vec![-2.75], None).unwrap();
        let cfg = DetectionConfig {
            channels: ChannelSet::BCR_ONLY,
            prior_flood: 0.5,
            ..Default::default()
        };
        let p = fuse_posterior(&bcr, None, None, &model(1.5), &cfg).unwrap();
        assert!((p.cells()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_direct_bayes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = grid(8, 8);
        let bcr = Raster::from_fn(t.clone(), |_, _| rng.random_range(-9.0..2.0));
        let cci = Raster::from_fn(t.clone(), |r, c| if (r + c) % 3 == 0 { NODATA } else { r as f64 * 0.08 })
            .with_nodata(Some(NODATA));
        let hand = HandRaster::from_raster(Raster::from_fn(t, |r, _| r as f64 * 2.0));
        let m = model(1.5);
        let cfg = DetectionConfig::default();
        let p = fuse_posterior(&bcr, Some(&cci), Some(&hand), &m, &cfg).unwrap();
        let density = |x: f64, mu: f64, s: f64| {
            (-(x - mu) * (x - mu) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        for i in 0..64 {
            let b = bcr.cells()[i];
            let mut lf = density(b, -5.5, 1.5);
            let mut ln = density(b, 0.0, 1.5);
            if let Some(c) = cci.value_at(i) {
                lf *= density(c, 0.5, 0.1);
                ln *= density(c, 0.05, 0.1);
            }
            let h = hand.raster().cells()[i];
            let expect = if h > 10.0 { 0.0 } else { lf * 0.1 / (lf * 0.1 + ln * 0.9) };
            assert!((p.cells()[i] - expect).abs() < 1e-9, "cell {i}: {} vs {expect}", p.cells()[i]);
        }
    }

    #[test]
    fn fit_examples() {
        let t = grid(20, 20);
        // mean 0, population std 1.5
        let bcr = Raster::from_fn(t.clone(), |_, c| if c % 2 == 0 { -1.5 } else { 1.5 });
        let all = Raster::filled(t.clone(), true);
        let m = fit_likelihoods(&bcr, None, &all, FloodOffsets::default()).unwrap();
        assert!((m.bcr.flood.mean + 5.5).abs() < 1e-12);
        assert!((m.bcr.flood.std - 1.5).abs() < 1e-12);
        assert_eq!(m.bcr.flood.std, m.bcr.dry.std);

        let flat = Raster::filled(t, 0.0);
        assert!(matches!(
            fit_likelihoods(&flat, None, &all, FloodOffsets::default()),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn degenerate_model_rejected() {
        let t = grid(1, 1);
        let bcr = Raster::new(t, vec![0.0], None).unwrap();
        let cfg = DetectionConfig {
            channels: ChannelSet::BCR_ONLY,
            ..Default::default()
        };
        assert!(matches!(
            fuse_posterior(&bcr, None, None, &model(0.0), &cfg),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn extent_threshold_is_inclusive() {
        let t = grid(1, 3);
        let p = Raster::new(t.clone(), vec![0.5, 0.499, NODATA], Some(NODATA)).unwrap();
        assert_eq!(extent_mask(&p, 0.5).cells(), &[true, false, false]);
        let z = Raster::filled(t, 0.0);
        assert_eq!(extent_mask(&z, 0.5).count_true(), 0);
    }

    #[test]
    fn channel_set_parsing() {
        assert_eq!("bcr".parse::<ChannelSet>().unwrap(), ChannelSet::BCR_ONLY);
        assert_eq!("BCR+HAND".parse::<ChannelSet>().unwrap(), ChannelSet::BCR_HAND);
        assert_eq!("bcr,cci".parse::<ChannelSet>().unwrap(), ChannelSet::BCR_CCI);
        assert_eq!("full".parse::<ChannelSet>().unwrap(), ChannelSet::FULL);
        assert!("cci+hand".parse::<ChannelSet>().is_err());
        assert_eq!(ChannelSet::FULL.to_string(), "BCR+CCI+HAND");
    }

    proptest::proptest! {
        #[test]
        fn posterior_in_unit_interval_and_monotone_in_bcr(xs in proptest::collection::vec(-20.0f64..10.0, 16)) {
            let bcr = Raster::new(grid(4, 4), xs.clone(), None).unwrap();
            let cfg = DetectionConfig { channels: ChannelSet::BCR_ONLY, ..Default::default() };
            let p = fuse_posterior(&bcr, None, None, &model(1.5), &cfg).unwrap();
            for i in 0..16 {
                proptest::prop_assert!((0.0..=1.0).contains(&p.cells()[i]));
                for j in 0..16 {
                    // lower BCR is more flood-like; ordering must follow
                    if xs[i] < xs[j] {
                        proptest::prop_assert!(p.cells()[i] >= p.cells()[j]);
                    }
                }
            }
        }

        #[test]
        fn extent_mask_monotone_in_threshold(ps in proptest::collection::vec(0.0f64..=1.0, 16), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let post = Raster::new(grid(4, 4), ps, None).unwrap();
            let m_lo = extent_mask(&post, lo);
            let m_hi = extent_mask(&post, hi);
            for (x, y) in m_hi.cells().iter().zip(m_lo.cells()) {
                proptest::prop_assert!(!x || *y);
            }
        }
    }
}

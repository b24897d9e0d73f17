//! Per-property depth statistics, depth-damage evaluation, confidence, and
//! expected loss.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::depth::DepthField;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::stats;

/// Occupancy class. Only single-family residential is scored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Occupancy {
    Res1,
    Other(String),
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occupancy::Res1 => f.write_str("RES1"),
            Occupancy::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for Occupancy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Config("empty occupancy code".into()));
        }
        Ok(if t.eq_ignore_ascii_case("RES1") {
            Occupancy::Res1
        } else {
            Occupancy::Other(t.to_string())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub claim_id: String,
    pub parcel_id: String,
    /// WGS-84 centroid.
    pub latitude: f64,
    pub longitude: f64,
    /// Footprint in raster map coordinates.
    pub footprint: Polygon,
    pub occupancy: Occupancy,
    pub stories: u32,
    pub insured_value_usd: f64,
}

impl Property {
    pub fn validate(&self) -> Result<()> {
        if !(self.insured_value_usd > 0.0 && self.insured_value_usd.is_finite()) {
            return Err(Error::Config(format!(
                "claim {}: insured value must be > 0, got {}",
                self.claim_id, self.insured_value_usd
            )));
        }
        if self.stories < 1 {
            return Err(Error::Config(format!("claim {}: stories must be >= 1", self.claim_id)));
        }
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::Config(format!("claim {}: centroid out of range", self.claim_id)));
        }
        Ok(())
    }
}

/// Footprint depth statistics. Dry member cells count as depth 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DepthStats {
    /// 90th percentile of member-cell depths.
    pub d_max_m: f64,
    pub d_mean_m: f64,
    /// Flooded member cells over all member cells.
    pub faf: f64,
    /// Mean CI half-width over flooded member cells.
    pub dur_m: f64,
    pub n_cells: usize,
}

/// Statistics over cells whose centres fall inside the footprint. A cell is
/// flooded where the depth raster is valid.
pub fn zonal_stats(depth: &DepthField, property: &Property) -> Result<DepthStats> {
    let t = depth.depth.transform();
    let (bx0, by0, bx1, by1) = property.footprint.bbox();
    let (rx0, ry0, rx1, ry1) = t.bounds();
    if bx1 < rx0 || bx0 > rx1 || by1 < ry0 || by0 > ry1 {
        return Err(Error::FootprintOutsideRaster(property.claim_id.clone()));
    }
    let (ra, ca) = t.fractional_cell(bx0, by0);
    let (rb, cb) = t.fractional_cell(bx1, by1);
    let clamp_row = |v: f64| v.clamp(0.0, (t.n_rows - 1) as f64) as usize;
    let clamp_col = |v: f64| v.clamp(0.0, (t.n_cols - 1) as f64) as usize;
    let (r0, r1) = (clamp_row(ra.min(rb).floor()), clamp_row(ra.max(rb).ceil()));
    let (c0, c1) = (clamp_col(ca.min(cb).floor()), clamp_col(ca.max(cb).ceil()));

    let half_width = depth.half_width();
    let mut depths = Vec::new();
    let mut flooded = 0usize;
    let mut dur_sum = 0.0;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let (x, y) = t.cell_center(r, c);
            if !property.footprint.contains(x, y) {
                continue;
            }
            match depth.depth.value(r, c) {
                Some(d) => {
                    flooded += 1;
                    depths.push(d);
                    dur_sum += half_width.value(r, c).unwrap_or(0.0);
                }
                None => depths.push(0.0),
            }
        }
    }
    if depths.is_empty() {
        return Ok(DepthStats::default());
    }
    let n = depths.len();
    Ok(DepthStats {
        d_max_m: stats::percentile(&depths, 0.9).expect("non-empty"),
        d_mean_m: stats::mean(&depths).expect("non-empty"),
        faf: flooded as f64 / n as f64,
        dur_m: if flooded > 0 { dur_sum / flooded as f64 } else { 0.0 },
        n_cells: n,
    })
}

/// Piecewise-linear depth-damage curve, flat beyond the last knot, scaled
/// by `rescale`.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageCurve {
    pub occupancy: Occupancy,
    pub stories: u32,
    knots: Vec<(f64, f64)>,
    rescale: f64,
}

impl DamageCurve {
    pub const DEFAULT_RESCALE: f64 = 0.94;
    /// EFL multiplier applied to the one-story knots for multi-story homes.
    pub const MULTI_STORY_FACTOR: f64 = 0.85;
    pub const RES1_KNOTS: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.35), (2.0, 0.55), (3.0, 0.72)];

    pub fn new(occupancy: Occupancy, stories: u32, knots: Vec<(f64, f64)>, rescale: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::BadCurve("no knots".into()));
        }
        if !(rescale > 0.0 && rescale <= 1.2) {
            return Err(Error::BadCurve(format!("rescale {rescale} outside (0, 1.2]")));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::BadCurve("knot depths must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::BadCurve("EFL must be nondecreasing".into()));
            }
        }
        if knots.iter().any(|&(d, e)| !d.is_finite() || !(0.0..=1.0).contains(&e)) {
            return Err(Error::BadCurve("EFL must lie in [0, 1]".into()));
        }
        Ok(Self {
            occupancy,
            stories,
            knots,
            rescale,
        })
    }

    /// Built-in single-family curve; two or more stories scale EFL by
    /// [`Self::MULTI_STORY_FACTOR`].
    pub fn res1(stories: u32, rescale: f64) -> Result<Self> {
        let factor = if stories >= 2 { Self::MULTI_STORY_FACTOR } else { 1.0 };
        let knots = Self::RES1_KNOTS.iter().map(|&(d, e)| (d, e * factor)).collect();
        Self::new(Occupancy::Res1, stories.max(1), knots, rescale)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn rescale(&self) -> f64 {
        self.rescale
    }

    pub fn with_rescale(&self, rescale: f64) -> Result<Self> {
        Self::new(self.occupancy.clone(), self.stories, self.knots.clone(), rescale)
    }
}

/// Expected fractional loss at `depth_m` (negative depths evaluate as 0).
pub fn ddc_eval(curve: &DamageCurve, depth_m: f64) -> f64 {
    let k = &curve.knots;
    let d = depth_m.max(0.0);
    let efl = if d <= k[0].0 {
        k[0].1
    } else if d >= k[k.len() - 1].0 {
        k[k.len() - 1].1
    } else {
        let i = k.partition_point(|&(x, _)| x <= d) - 1;
        let (x0, y0) = k[i];
        let (x1, y1) = k[i + 1];
        y0 + (y1 - y0) * (d - x0) / (x1 - x0)
    };
    efl * curve.rescale
}

/// Curves keyed by occupancy and stories.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    curves: Vec<DamageCurve>,
}

impl CurveSet {
    /// Built-in one- and two-story single-family curves.
    pub fn default_res1(rescale: f64) -> Result<Self> {
        Ok(Self {
            curves: vec![DamageCurve::res1(1, rescale)?, DamageCurve::res1(2, rescale)?],
        })
    }

    pub fn new(curves: Vec<DamageCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::BadCurve("empty curve set".into()));
        }
        Ok(Self { curves })
    }

    pub fn curves(&self) -> &[DamageCurve] {
        &self.curves
    }

    /// Curve for `occupancy` with the largest story count not above
    /// `stories` (or the smallest available if all are above).
    pub fn lookup(&self, occupancy: &Occupancy, stories: u32) -> Option<&DamageCurve> {
        let same: Vec<&DamageCurve> = self.curves.iter().filter(|c| &c.occupancy == occupancy).collect();
        same.iter()
            .filter(|c| c.stories <= stories)
            .max_by_key(|c| c.stories)
            .or_else(|| same.iter().min_by_key(|c| c.stories))
            .copied()
    }

    /// Parses a knot table: one `occupancy stories depth_m efl` record per
    /// line (whitespace or comma separated); `#` starts a comment. Knots of
    /// one curve must appear in increasing depth order.
    pub fn parse(text: &str, source_name: &str, rescale: f64) -> Result<Self> {
        let mut groups: Vec<((Occupancy, u32), Vec<(f64, f64)>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            let err = |msg: &str| Error::parse(source_name, format!("line {}", ln + 1), msg);
            if fields.len() != 4 {
                return Err(err("expected: occupancy stories depth_m efl"));
            }
            let occ: Occupancy = fields[0].parse()?;
            let stories: u32 = fields[1].parse().map_err(|_| err("stories is not an integer"))?;
            let depth: f64 = fields[2].parse().map_err(|_| err("depth_m is not a number"))?;
            let efl: f64 = fields[3].parse().map_err(|_| err("efl is not a number"))?;
            let key = (occ, stories);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, knots)) => knots.push((depth, efl)),
                None => groups.push((key, vec![(depth, efl)])),
            }
        }
        let curves = groups
            .into_iter()
            .map(|((occ, stories), knots)| DamageCurve::new(occ, stories, knots, rescale))
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    pub fn load(path: &Path, rescale: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), rescale)
    }
}

/// `faf * exp(-dur / lambda)`.
pub fn confidence(faf: f64, dur_m: f64, lambda_m: f64) -> Result<f64> {
    if !(lambda_m > 0.0 && lambda_m.is_finite()) {
        return Err(Error::BadLambda(lambda_m));
    }
    Ok((faf * (-dur_m.max(0.0) / lambda_m).exp()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    pub lambda_m: f64,
    pub theta_damage_usd: f64,
    /// Properties with FAF below this get zero severity.
    pub faf_min: f64,
    pub rescale: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            lambda_m: 1.0,
            theta_damage_usd: 5000.0,
            faf_min: 0.10,
            rescale: DamageCurve::DEFAULT_RESCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredProperty {
    pub property: Property,
    pub stats: DepthStats,
    pub severity: f64,
    pub confidence: f64,
    pub expected_loss_usd: f64,
    pub high_severity: bool,
}

/// Severity, confidence, and loss for one property. `curve` is `None` for
/// occupancies without a curve; such properties get zero severity.
pub fn score_property(
    property: &Property,
    stats: &DepthStats,
    curve: Option<&DamageCurve>,
    cfg: &ScoringConfig,
) -> Result<ScoredProperty> {
    let c = confidence(stats.faf, stats.dur_m, cfg.lambda_m)?;
    let severity = match curve {
        Some(curve) if stats.faf >= cfg.faf_min => ddc_eval(curve, stats.d_max_m),
        _ => 0.0,
    };
    let loss = severity * property.insured_value_usd;
    Ok(ScoredProperty {
        property: property.clone(),
        stats: *stats,
        severity,
        confidence: c,
        expected_loss_usd: loss,
        high_severity: loss >= cfg.theta_damage_usd,
    })
}

/// Scores a portfolio in input order. Only RES1 properties are looked up
/// in `curves`; others pass through with zero severity (logged).
pub fn score_portfolio(
    properties: &[Property],
    depth: &DepthField,
    curves: &CurveSet,
    cfg: &ScoringConfig,
) -> Result<Vec<ScoredProperty>> {
    properties
        .par_iter()
        .map(|p| {
            let stats = zonal_stats(depth, p)?;
            let curve = match p.occupancy {
                Occupancy::Res1 => curves.lookup(&p.occupancy, p.stories),
                Occupancy::Other(ref code) => {
                    log::warn!("claim {}: occupancy {code} is not scored", p.claim_id);
                    None
                }
            };
            score_property(p, &stats, curve, cfg)
        })
        .collect()
}

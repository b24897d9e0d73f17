//! Synthetic flood scenarios with exactly known ground truth, and the
//! oracle that scores pipeline output against them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::depth::{correlated_noise, DepthField};
use crate::error::{Error, Result};
use crate::geometry::{LocalTangentPlane, Polygon};
use crate::pipeline::{PipelineInputs, PipelineOutput, SlcSet};
use crate::raster::{GeoTransform, Mask, Raster, RasterStack, NODATA};
use crate::scoring::{ddc_eval, zonal_stats, CurveSet, DamageCurve, Occupancy, Property};
use crate::triage::{evaluate, extent_metrics, ExtentMetrics, RankedList, TriageMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerrainKind {
    /// Plane rising east and south; drains to the west edge.
    TiltedPlane,
    /// Paraboloid around the scene centre; drains to the centre cell.
    Bowl,
    /// V-shaped valley rising to the south, draining to a three-column
    /// channel along the centre.
    Valley,
    /// Valley plus an elevated ridge in the east whose co-event backscatter
    /// drops like open water.
    Composite,
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerrainKind::TiltedPlane => "plane",
            TerrainKind::Bowl => "bowl",
            TerrainKind::Valley => "valley",
            TerrainKind::Composite => "composite",
        })
    }
}

impl FromStr for TerrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plane" | "tilted_plane" => Ok(TerrainKind::TiltedPlane),
            "bowl" => Ok(TerrainKind::Bowl),
            "valley" => Ok(TerrainKind::Valley),
            "composite" => Ok(TerrainKind::Composite),
            other => Err(Error::BadSpec(format!("unknown terrain kind '{other}'"))),
        }
    }
}

/// True water surface. Coordinates are metres east of the west edge (`x`)
/// and south of the north edge (`y`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WseModel {
    Constant(f64),
    Planar { base_m: f64, grad_x: f64, grad_y: f64 },
}

impl WseModel {
    pub fn at(&self, x: f64, y: f64) -> f64 {
        match *self {
            WseModel::Constant(z) => z,
            WseModel::Planar { base_m, grad_x, grad_y } => base_m + grad_x * x + grad_y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size_m: f64,
    pub terrain: TerrainKind,
    pub wse: WseModel,
    /// Equivalent number of looks of the intensity speckle.
    pub looks: f64,
    /// Number of pre-event intensity acquisitions.
    pub n_pre: usize,
    /// Area fraction of the urban block in the north-west corner.
    pub urban_fraction: f64,
    /// Fraction of the open-water backscatter drop seen in flooded urban
    /// cells, where double bounce offsets specular darkening.
    pub urban_bcr_factor: f64,
    pub parcel_rows: usize,
    pub parcel_cols: usize,
    /// Side of each square footprint, in cells.
    pub footprint_cells: usize,
    pub value_median_usd: f64,
    /// Log-space std of insured values.
    pub value_log_sigma: f64,
    pub two_story_fraction: f64,
    /// DEM error handed to the pipeline: std and correlation length (m).
    pub dem_noise_m: f64,
    pub dem_noise_corr_m: f64,
    /// Log-space std of multiplicative noise on truth losses; 0 disables.
    pub claims_noise_sigma: f64,
    pub theta_damage_usd: f64,
    pub rescale: f64,
    pub geo_origin: LocalTangentPlane,
    pub seed: u64,
}

impl ScenarioSpec {
    /// 128x128 scene at 10 m with the terrain's default water surface.
    pub fn new(terrain: TerrainKind, seed: u64) -> Self {
        let (rows, cols, cell) = (128, 128, 10.0);
        Self {
            rows,
            cols,
            cell_size_m: cell,
            terrain,
            wse: default_wse(terrain, rows, cell),
            looks: 5.0,
            n_pre: 3,
            urban_fraction: 0.25,
            urban_bcr_factor: 0.5,
            parcel_rows: 12,
            parcel_cols: 12,
            footprint_cells: 4,
            value_median_usd: 250_000.0,
            value_log_sigma: 0.4,
            two_story_fraction: 0.3,
            dem_noise_m: 0.5,
            dem_noise_corr_m: 250.0,
            claims_noise_sigma: 0.0,
            theta_damage_usd: 5000.0,
            rescale: DamageCurve::DEFAULT_RESCALE,
            geo_origin: LocalTangentPlane {
                lat0: 29.76,
                lon0: -95.37,
            },
            seed,
        }
    }

    /// Resizes the grid and resets the water surface to the terrain default.
    pub fn with_size(mut self, rows: usize, cols: usize) -> Self {
        self.rows = rows;
        self.cols = cols;
        self.wse = default_wse(self.terrain, rows, self.cell_size_m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        if self.rows < 8 || self.cols < 8 {
            return bad(format!("grid {}x{} is smaller than 8x8", self.rows, self.cols));
        }
        if !(self.cell_size_m > 0.0 && self.cell_size_m.is_finite()) {
            return bad("cell size must be positive".into());
        }
        if !(self.looks >= 1.0) {
            return bad(format!("looks must be >= 1, got {}", self.looks));
        }
        if self.n_pre == 0 {
            return bad("need at least one pre-event acquisition".into());
        }
        for (name, v) in [
            ("urban_fraction", self.urban_fraction),
            ("urban_bcr_factor", self.urban_bcr_factor),
            ("two_story_fraction", self.two_story_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if self.parcel_rows == 0 || self.parcel_cols == 0 || self.footprint_cells == 0 {
            return bad("parcel grid and footprint must be non-empty".into());
        }
        if self.footprint_cells > self.rows / self.parcel_rows || self.footprint_cells > self.cols / self.parcel_cols {
            return bad("footprints do not fit in their parcel blocks".into());
        }
        if !(self.value_median_usd > 0.0) || !(self.value_log_sigma >= 0.0) || !(self.claims_noise_sigma >= 0.0) {
            return bad("insured-value and claims-noise parameters must be non-negative".into());
        }
        if !(self.dem_noise_m >= 0.0) || !(self.dem_noise_corr_m >= 0.0) {
            return bad("DEM noise parameters must be non-negative".into());
        }
        if !(self.rescale > 0.0 && self.rescale <= 1.0) {
            return bad(format!("rescale must be in (0,1], got {}", self.rescale));
        }
        Ok(())
    }

    pub fn transform(&self) -> GeoTransform {
        let height = self.rows as f64 * self.cell_size_m;
        GeoTransform::north_up(0.0, height, self.cell_size_m, self.rows, self.cols)
            .expect("validated spec")
            .with_crs("local-tangent-plane")
    }
}

fn default_wse(terrain: TerrainKind, rows: usize, cell: f64) -> WseModel {
    match terrain {
        TerrainKind::TiltedPlane | TerrainKind::Bowl => WseModel::Constant(4.0),
        TerrainKind::Valley | TerrainKind::Composite => WseModel::Planar {
            base_m: 4.0,
            grad_x: 0.0,
            grad_y: 2.0 / (rows as f64 * cell),
        },
    }
}

const LAND_DB: f64 = -9.0;
const URBAN_DB: f64 = -6.0;
const URBAN_COHERENCE: f64 = 0.85;
const LAND_COHERENCE: f64 = 0.5;
const WATER_COHERENCE: f64 = 0.1;
const RIDGE_HEIGHT_M: f64 = 20.0;
/// Ridge cells at least this high show the look-alike backscatter drop.
const LOOKALIKE_HEIGHT_M: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTruth {
    pub claim_id: String,
    /// 90th-percentile footprint depth (dry cells count as 0).
    pub d_max_m: f64,
    pub severity: f64,
    pub loss_usd: f64,
    pub high_severity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub dem: Raster<f64>,
    pub wse: Raster<f64>,
    pub flood: Mask,
    /// `wse - dem` on flooded cells, nodata elsewhere.
    pub depth: Raster<f64>,
    /// Cells whose co-event backscatter mimics open water.
    pub lookalike: Mask,
    /// Mean co-event backscatter drop over flooded cells (dB, positive).
    pub bcr_offset_db: f64,
    /// Urban coherence decrement over flooded cells.
    pub cci_decrement: f64,
    pub properties: Vec<PropertyTruth>,
    pub theta_damage_usd: f64,
}

impl ScenarioTruth {
    pub fn high_severity_set(&self) -> BTreeSet<String> {
        self.high_severity_at(self.theta_damage_usd)
    }

    /// Claims with truth loss at least `theta`.
    pub fn high_severity_at(&self, theta: f64) -> BTreeSet<String> {
        self.properties
            .iter()
            .filter(|p| p.loss_usd >= theta)
            .map(|p| p.claim_id.clone())
            .collect()
    }

    pub fn depth_field(&self) -> DepthField {
        DepthField::from_depth(self.depth.clone())
    }
}

/// Independent RNG stream per generation step so that changing one step
/// leaves the others untouched.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn terrain_height(kind: TerrainKind, u: f64, v: f64, x: f64, y: f64, w: f64, h: f64) -> f64 {
    let valley = 2.0 + 12.0 * (u - 0.5).abs() + 2.0 * v;
    match kind {
        TerrainKind::TiltedPlane => 2.0 + 6.0 * u + 4.0 * v,
        TerrainKind::Bowl => {
            let rho = (x - 0.5 * w).hypot(y - 0.5 * h) / (0.5 * w.min(h));
            1.0 + 9.0 * rho * rho
        }
        TerrainKind::Valley => valley,
        TerrainKind::Composite => valley + ridge_height(u, v, w),
    }
}

fn ridge_height(u: f64, v: f64, w: f64) -> f64 {
    if !(0.15..=0.85).contains(&v) {
        return 0.0;
    }
    let d = (u - 0.82) * w;
    let s = 0.03 * w;
    RIDGE_HEIGHT_M * (-(d * d) / (2.0 * s * s)).exp()
}

fn is_drainage(kind: TerrainKind, r: usize, c: usize, rows: usize, cols: usize) -> bool {
    match kind {
        TerrainKind::TiltedPlane => c == 0,
        TerrainKind::Bowl => r == rows / 2 && c == cols / 2,
        TerrainKind::Valley | TerrainKind::Composite => c + 1 >= cols / 2 && c <= cols / 2 + 1,
    }
}

fn circular_gaussian(rng: &mut ChaCha8Rng) -> Complex32 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex32::new((s * re) as f32, (s * im) as f32)
}

/// Builds the pipeline inputs and the matching truth. Identical specs give
/// identical outputs.
pub fn generate(spec: &ScenarioSpec) -> Result<(PipelineInputs, ScenarioTruth)> {
    spec.validate()?;
    let t = spec.transform();
    let (rows, cols, cell) = (spec.rows, spec.cols, spec.cell_size_m);
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let n = rows * cols;
    let idx_uv = |i: usize| {
        let (r, c) = (i / cols, i % cols);
        let (x, y) = ((c as f64 + 0.5) * cell, (r as f64 + 0.5) * cell);
        (r, c, x, y, x / w, y / h)
    };

    let mut dem_true = vec![0.0; n];
    let mut wse_true = vec![0.0; n];
    let mut lookalike = vec![false; n];
    for i in 0..n {
        let (_, _, x, y, u, v) = idx_uv(i);
        dem_true[i] = terrain_height(spec.terrain, u, v, x, y, w, h);
        wse_true[i] = spec.wse.at(x, y);
        lookalike[i] = spec.terrain == TerrainKind::Composite && ridge_height(u, v, w) >= LOOKALIKE_HEIGHT_M;
    }
    let flood: Vec<bool> = (0..n).map(|i| wse_true[i] > dem_true[i]).collect();
    let urban_rows = (rows as f64 * spec.urban_fraction.sqrt()).round() as usize;
    let urban_cols = (cols as f64 * spec.urban_fraction.sqrt()).round() as usize;
    let urban: Vec<bool> = (0..n).map(|i| i / cols < urban_rows && i % cols < urban_cols).collect();

    // DEM seen by the pipeline
    let mut rng = stream(spec.seed, 1);
    let noise = correlated_noise(&t, spec.dem_noise_m, spec.dem_noise_corr_m, &mut rng);
    let dem_obs: Vec<f64> = dem_true.iter().zip(&noise).map(|(z, e)| z + e).collect();

    // backscatter: scene mean drop drawn in [3, 8] dB over flooded cells,
    // split between open and urban cells by `urban_bcr_factor`
    let mut rng = stream(spec.seed, 0);
    let mean_drop: f64 = rng.random_range(3.0..=8.0);
    let cci_decrement: f64 = rng.random_range(0.35..=0.65);
    let n_urban_flood = (0..n).filter(|&i| flood[i] && urban[i]).count() as f64;
    let n_open_flood = (0..n).filter(|&i| flood[i] && !urban[i]).count() as f64;
    let weight = n_open_flood + spec.urban_bcr_factor * n_urban_flood;
    let open_drop = if weight > 0.0 {
        mean_drop * (n_open_flood + n_urban_flood) / weight
    } else {
        mean_drop
    };
    let speckle = Gamma::new(spec.looks, 1.0 / spec.looks).map_err(|e| Error::BadSpec(e.to_string()))?;
    let mut rng = stream(spec.seed, 2);
    let base_db: Vec<f64> = (0..n).map(|i| if urban[i] { URBAN_DB } else { LAND_DB }).collect();
    let mut pre_layers = Vec::with_capacity(spec.n_pre);
    for _ in 0..spec.n_pre {
        let cells: Vec<f64> = base_db
            .iter()
            .map(|db| 10f64.powf(db / 10.0) * speckle.sample(&mut rng))
            .collect();
        pre_layers.push(Raster::with_default_nodata(t.clone(), cells)?);
    }
    let post_cells: Vec<f64> = (0..n)
        .map(|i| {
            let drop = if flood[i] {
                if urban[i] {
                    spec.urban_bcr_factor * open_drop
                } else {
                    open_drop
                }
            } else if lookalike[i] {
                open_drop
            } else {
                0.0
            };
            10f64.powf((base_db[i] - drop) / 10.0) * speckle.sample(&mut rng)
        })
        .collect();

    // complex images: coherence model s2 = g s1 + sqrt(1 - g^2) n
    let mut rng = stream(spec.seed, 3);
    let (mut pre_a, mut pre_b, mut co) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let (g_pre, g_co) = match (urban[i], flood[i]) {
            (true, false) => (URBAN_COHERENCE, URBAN_COHERENCE),
            (true, true) => (URBAN_COHERENCE, URBAN_COHERENCE - cci_decrement),
            (false, false) => (LAND_COHERENCE, LAND_COHERENCE),
            (false, true) => (LAND_COHERENCE, WATER_COHERENCE),
        };
        let b = circular_gaussian(&mut rng);
        let na = circular_gaussian(&mut rng);
        let nc = circular_gaussian(&mut rng);
        let mix = |g: f64, x: Complex32, e: Complex32| x * g as f32 + e * (1.0 - g * g).sqrt() as f32;
        pre_a.push(mix(g_pre, b, na));
        pre_b.push(b);
        co.push(mix(g_co, b, nc));
    }

    let reference: Vec<bool> = (0..n).map(|i| dem_true[i] >= wse_true[i] + 1.0 && !lookalike[i]).collect();
    let drainage: Vec<bool> = (0..n).map(|i| is_drainage(spec.terrain, i / cols, i % cols, rows, cols)).collect();
    let depth_cells: Vec<f64> = (0..n)
        .map(|i| if flood[i] { wse_true[i] - dem_true[i] } else { NODATA })
        .collect();

    let mask = |cells: Vec<bool>| Raster::new(t.clone(), cells, None);
    let truth_depth = Raster::with_default_nodata(t.clone(), depth_cells)?;
    let properties = make_parcels(spec, &t)?;
    let truth_props = truth_properties(spec, &properties, &truth_depth)?;

    let inputs = PipelineInputs {
        pre_stack: RasterStack::new(pre_layers)?,
        post: Raster::with_default_nodata(t.clone(), post_cells)?,
        slc: Some(SlcSet {
            pre_primary: Raster::new(t.clone(), pre_a, None)?,
            pre_secondary: Raster::new(t.clone(), pre_b, None)?,
            co: Raster::new(t.clone(), co, None)?,
        }),
        dem: Raster::with_default_nodata(t.clone(), dem_obs)?,
        dem_label: "synthetic".into(),
        drainage: mask(drainage)?,
        urban: Some(mask(urban)?),
        reference: Some(mask(reference)?),
        permanent_water: None,
        properties,
    };
    let truth = ScenarioTruth {
        dem: Raster::with_default_nodata(t.clone(), dem_true)?,
        wse: Raster::with_default_nodata(t.clone(), wse_true)?,
        flood: mask(flood)?,
        depth: truth_depth,
        lookalike: mask(lookalike)?,
        bcr_offset_db: mean_drop,
        cci_decrement,
        properties: truth_props,
        theta_damage_usd: spec.theta_damage_usd,
    };
    Ok((inputs, truth))
}

fn make_parcels(spec: &ScenarioSpec, t: &GeoTransform) -> Result<Vec<Property>> {
    let mut rng = stream(spec.seed, 4);
    let block_r = spec.rows / spec.parcel_rows;
    let block_c = spec.cols / spec.parcel_cols;
    let f = spec.footprint_cells;
    let cell = spec.cell_size_m;
    let mut out = Vec::with_capacity(spec.parcel_rows * spec.parcel_cols);
    for pr in 0..spec.parcel_rows {
        for pc in 0..spec.parcel_cols {
            let k = pr * spec.parcel_cols + pc + 1;
            let r0 = pr * block_r + (block_r - f) / 2;
            let c0 = pc * block_c + (block_c - f) / 2;
            let x0 = t.origin_x + c0 as f64 * cell;
            let y1 = t.origin_y - r0 as f64 * cell;
            let footprint = Polygon::rectangle(x0, y1 - f as f64 * cell, x0 + f as f64 * cell, y1)?;
            let (cx, cy) = footprint.centroid();
            let (lon, lat) = spec.geo_origin.to_lonlat(cx, cy);
            let z: f64 = StandardNormal.sample(&mut rng);
            let value = (spec.value_median_usd * (spec.value_log_sigma * z).exp() / 1000.0).round() * 1000.0;
            let stories = if rng.random_bool(spec.two_story_fraction) { 2 } else { 1 };
            out.push(Property {
                claim_id: format!("CLM-{k:05}"),
                parcel_id: format!("PCL-{k:05}"),
                latitude: lat,
                longitude: lon,
                footprint,
                occupancy: Occupancy::Res1,
                stories,
                insured_value_usd: value.max(1000.0),
            });
        }
    }
    Ok(out)
}

fn truth_properties(spec: &ScenarioSpec, props: &[Property], depth: &Raster<f64>) -> Result<Vec<PropertyTruth>> {
    let field = DepthField::from_depth(depth.clone());
    let curves = CurveSet::default_res1(spec.rescale)?;
    let mut rng = stream(spec.seed, 5);
    props
        .iter()
        .map(|p| {
            let stats = zonal_stats(&field, p)?;
            let curve = curves
                .lookup(&p.occupancy, p.stories)
                .ok_or_else(|| Error::BadSpec(format!("no curve for {} stories", p.stories)))?;
            let severity = ddc_eval(curve, stats.d_max_m);
            let z: f64 = StandardNormal.sample(&mut rng);
            let loss = severity * p.insured_value_usd * (spec.claims_noise_sigma * z).exp();
            Ok(PropertyTruth {
                claim_id: p.claim_id.clone(),
                d_max_m: stats.d_max_m,
                severity,
                loss_usd: loss,
                high_severity: loss >= spec.theta_damage_usd,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub rmse_m: f64,
    pub mae_m: f64,
    pub r2: f64,
    /// Fraction of cells whose truth depth lies inside the 90% interval.
    pub ci90_coverage: f64,
    pub n_cells: usize,
}

/// Depth errors over cells flooded in both the truth and the prediction.
/// `None` when there are no such cells.
pub fn depth_metrics(pred: &DepthField, truth_depth: &Raster<f64>) -> Result<Option<DepthMetrics>> {
    pred.depth
        .ensure_same_grid(truth_depth)
        .map_err(|_| Error::ScenarioMismatch("depth grids differ".into()))?;
    let mut pairs = Vec::new();
    let mut covered = 0usize;
    for i in 0..truth_depth.len() {
        if let (Some(t), Some(p)) = (truth_depth.value_at(i), pred.depth.value_at(i)) {
            pairs.push((t, p));
            let lo = pred.ci_low.value_at(i).unwrap_or(p);
            let hi = pred.ci_high.value_at(i).unwrap_or(p);
            if lo <= t && t <= hi {
                covered += 1;
            }
        }
    }
    if pairs.is_empty() {
        return Ok(None);
    }
    let n = pairs.len() as f64;
    let sse: f64 = pairs.iter().map(|(t, p)| (p - t).powi(2)).sum();
    let sae: f64 = pairs.iter().map(|(t, p)| (p - t).abs()).sum();
    let mean_t = pairs.iter().map(|(t, _)| t).sum::<f64>() / n;
    let sst: f64 = pairs.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(Some(DepthMetrics {
        rmse_m: (sse / n).sqrt(),
        mae_m: sae / n,
        r2,
        ci90_coverage: covered as f64 / n,
        n_cells: pairs.len(),
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub extent: ExtentMetrics,
    pub depth: Option<DepthMetrics>,
    /// `None` when the truth high-severity set is empty.
    pub triage: Option<TriageMetrics>,
}

/// Scores predicted extent, depth, and ranking against scenario truth. The
/// dispatch cutoff for TES is `tau`.
pub fn oracle_metrics(
    extent: &Mask,
    depth: &DepthField,
    ranked: &RankedList,
    truth: &ScenarioTruth,
    tau: f64,
) -> Result<OracleReport> {
    let extent_m =
        extent_metrics(extent, &truth.flood).map_err(|_| Error::ScenarioMismatch("extent grids differ".into()))?;
    let depth_m = depth_metrics(depth, &truth.depth)?;
    let ids: BTreeSet<&str> = ranked.items().iter().map(|p| p.property.claim_id.as_str()).collect();
    let truth_ids: BTreeSet<&str> = truth.properties.iter().map(|p| p.claim_id.as_str()).collect();
    if ids != truth_ids {
        return Err(Error::ScenarioMismatch("ranked claims differ from scenario claims".into()));
    }
    let high = truth.high_severity_set();
    let triage = if high.is_empty() {
        None
    } else {
        Some(evaluate(ranked, &high, tau)?)
    };
    Ok(OracleReport {
        extent: extent_m,
        depth: depth_m,
        triage,
    })
}

/// [`oracle_metrics`] for a full pipeline run, using the raw extent.
pub fn oracle_report(output: &PipelineOutput, truth: &ScenarioTruth, tau: f64) -> Result<OracleReport> {
    oracle_metrics(&output.detection.extent, &output.depth.field, &output.ranked, truth, tau)
}

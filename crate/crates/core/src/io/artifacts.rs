//! On-disk layout of stage outputs and synthetic scenarios.
//!
//! A run directory holds, per stage:
//!
//! | stage  | files |
//! |--------|-------|
//! | detect | `bcr.altr`, `hand.altr`, `cci.altr` (if used), `posterior.altr`, `extent.altr`, `detection.txt` |
//! | depth  | `flood_cleaned.altr`, `depth.altr`, `depth_ci_low.altr`, `depth_ci_high.altr`, `depth_unc.altr`, `wse.altr`, `kriging_variance.altr`, `variogram.txt`, `boundary_samples.csv` |
//! | score  | `scores.csv` |
//! | triage | `triage.csv`, `triage.geojson`, `summary.txt` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::depth::DepthField;
use crate::error::{Error, Result};
use crate::geometry::{LocalTangentPlane, Polygon};
use crate::pipeline::{DepthOutput, Detection, Evidence, PipelineInputs};
use crate::raster::Mask;
use crate::scoring::{Property, ScoredProperty};
use crate::synth::{ScenarioSpec, ScenarioTruth};
use crate::triage::RankedList;

use super::products::{output_rows, summarize, write_geojson, write_summary, write_triage_csv, EventSummary, OutputRow};
use super::raster_io::{read_mask, read_raster, write_complex, write_mask, write_raster};
use super::tables::{read_truth_claims, write_parcels, write_truth_claims};

pub const EXTENT_FILE: &str = "extent.altr";
pub const DEPTH_FILE: &str = "depth.altr";
pub const CI_LOW_FILE: &str = "depth_ci_low.altr";
pub const CI_HIGH_FILE: &str = "depth_ci_high.altr";
pub const DEPTH_UNC_FILE: &str = "depth_unc.altr";
pub const WSE_FILE: &str = "wse.altr";
pub const KRIGING_VARIANCE_FILE: &str = "kriging_variance.altr";
pub const SCORES_FILE: &str = "scores.csv";
pub const TRIAGE_CSV_FILE: &str = "triage.csv";
pub const GEOJSON_FILE: &str = "triage.geojson";
pub const SUMMARY_FILE: &str = "summary.txt";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_detection(dir: &Path, evidence: &Evidence, detection: &Detection) -> Result<()> {
    ensure_dir(dir)?;
    write_raster(&evidence.bcr, &dir.join("bcr.altr"))?;
    write_raster(evidence.hand.raster(), &dir.join("hand.altr"))?;
    if let (Some(cci), true) = (&evidence.cci, detection.channels.cci) {
        write_raster(cci, &dir.join("cci.altr"))?;
    }
    write_raster(&detection.posterior, &dir.join("posterior.altr"))?;
    write_mask(&detection.extent, &dir.join(EXTENT_FILE))?;
    let mut s = String::new();
    writeln!(s, "channels = {}", detection.channels).expect("write to String");
    writeln!(s, "bcr_threshold_db = {}", evidence.bcr_threshold).expect("write to String");
    let channels = [("bcr", Some(&evidence.model.bcr)), ("cci", evidence.model.cci.as_ref())];
    for (name, lik) in channels {
        let Some(lik) = lik else { continue };
        for (class, g) in [("flood", lik.flood), ("dry", lik.dry)] {
            writeln!(s, "{name}_{class}_mean = {}", g.mean).expect("write to String");
            writeln!(s, "{name}_{class}_std = {}", g.std).expect("write to String");
        }
    }
    writeln!(s, "flooded_cells = {}", detection.extent.count_true()).expect("write to String");
    write_text(&dir.join("detection.txt"), &s)
}

pub fn read_extent(dir: &Path) -> Result<Mask> {
    read_mask(&dir.join(EXTENT_FILE))
}

pub fn write_depth(dir: &Path, depth: &DepthOutput) -> Result<()> {
    ensure_dir(dir)?;
    let f = &depth.field;
    write_mask(&depth.cleaned, &dir.join("flood_cleaned.altr"))?;
    write_raster(&f.depth, &dir.join(DEPTH_FILE))?;
    write_raster(&f.ci_low, &dir.join(CI_LOW_FILE))?;
    write_raster(&f.ci_high, &dir.join(CI_HIGH_FILE))?;
    write_raster(&f.half_width(), &dir.join(DEPTH_UNC_FILE))?;
    write_raster(&f.wse, &dir.join(WSE_FILE))?;
    write_raster(&f.kriging_variance, &dir.join(KRIGING_VARIANCE_FILE))?;

    let mut s = String::new();
    match &depth.model {
        Some(m) => {
            writeln!(s, "nugget = {}", m.nugget()).expect("write to String");
            writeln!(s, "sill = {}", m.sill()).expect("write to String");
            writeln!(s, "range_m = {}", m.range()).expect("write to String");
        }
        None => writeln!(s, "model = none").expect("write to String"),
    }
    writeln!(s, "nugget_fallback = {}", depth.nugget_fallback).expect("write to String");
    for (k, b) in depth.bins.iter().enumerate() {
        writeln!(s, "bin_{k} = {} {} {}", b.lag, b.gamma, b.count).expect("write to String");
    }
    write_text(&dir.join("variogram.txt"), &s)?;

    let path = dir.join("boundary_samples.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["x", "y", "z"])?;
    if let Some(samples) = &depth.samples {
        for p in samples.points() {
            w.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_depth_field(dir: &Path) -> Result<DepthField> {
    let depth = read_raster(&dir.join(DEPTH_FILE))?;
    let ci_low = read_raster(&dir.join(CI_LOW_FILE))?;
    let ci_high = read_raster(&dir.join(CI_HIGH_FILE))?;
    let kriging_variance = read_raster(&dir.join(KRIGING_VARIANCE_FILE))?;
    let wse = read_raster(&dir.join(WSE_FILE))?;
    for r in [&ci_low, &ci_high, &kriging_variance, &wse] {
        r.ensure_same_grid(&depth)?;
    }
    Ok(DepthField {
        depth,
        ci_low,
        ci_high,
        kriging_variance,
        wse,
    })
}

/// Writes the ranked CSV, GeoJSON, and summary. Returns the rows and the
/// summary that were written.
#[allow(clippy::too_many_arguments)]
pub fn write_triage_products(
    dir: &Path,
    ranked: &RankedList,
    tiers: &[u8],
    properties: &[Property],
    extent: &Mask,
    theta_damage_usd: f64,
    sar_date: &str,
    plane: &LocalTangentPlane,
) -> Result<(Vec<OutputRow>, EventSummary)> {
    ensure_dir(dir)?;
    let rows = output_rows(ranked, tiers, sar_date)?;
    write_triage_csv(&rows, &dir.join(TRIAGE_CSV_FILE))?;
    let footprints: BTreeMap<String, Polygon> =
        properties.iter().map(|p| (p.parcel_id.clone(), p.footprint.clone())).collect();
    write_geojson(&rows, &footprints, plane, &dir.join(GEOJSON_FILE))?;
    let summary = summarize(
        &rows,
        ranked,
        extent.count_true(),
        extent.transform().cell_area(),
        theta_damage_usd,
        sar_date,
    )?;
    write_summary(&summary, &dir.join(SUMMARY_FILE))?;
    Ok((rows, summary))
}

/// Portfolio order of scored properties, for the stage-4 table.
pub fn scored_in_portfolio_order(ranked: &RankedList, properties: &[Property]) -> Vec<ScoredProperty> {
    let pos: BTreeMap<&str, usize> = properties.iter().enumerate().map(|(i, p)| (p.claim_id.as_str(), i)).collect();
    let mut items = ranked.items().to_vec();
    items.sort_by_key(|s| pos.get(s.property.claim_id.as_str()).copied().unwrap_or(usize::MAX));
    items
}

/// Files of a scenario written by [`write_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFiles {
    pub config: PathBuf,
    pub truth_dir: PathBuf,
}

/// Writes inputs under `dir/inputs`, truth under `dir/truth`, and a run
/// config `dir/config.txt` whose output directory is `dir/out`.
pub fn write_scenario(dir: &Path, spec: &ScenarioSpec, inputs: &PipelineInputs, truth: &ScenarioTruth) -> Result<ScenarioFiles> {
    let in_dir = dir.join("inputs");
    let truth_dir = dir.join("truth");
    ensure_dir(&in_dir)?;
    ensure_dir(&truth_dir)?;

    let mut cfg = String::new();
    let mut kv = |k: &str, v: String| writeln!(cfg, "{k} = {v}").expect("write to String");
    let mut pre = Vec::new();
    for (k, layer) in inputs.pre_stack.layers().iter().enumerate() {
        let name = format!("pre_{k}.altr");
        write_raster(layer, &in_dir.join(&name))?;
        pre.push(format!("inputs/{name}"));
    }
    kv("pre_stack", pre.join(", "));
    write_raster(&inputs.post, &in_dir.join("post.altr"))?;
    kv("post", "inputs/post.altr".into());
    if let Some(slc) = &inputs.slc {
        for (key, r) in [
            ("slc_pre_primary", &slc.pre_primary),
            ("slc_pre_secondary", &slc.pre_secondary),
            ("slc_co", &slc.co),
        ] {
            write_complex(r, &in_dir.join(format!("{key}.altr")))?;
            kv(key, format!("inputs/{key}.altr"));
        }
    }
    write_raster(&inputs.dem, &in_dir.join("dem.altr"))?;
    kv("dem", "inputs/dem.altr".into());
    kv("dem_label", inputs.dem_label.clone());
    write_mask(&inputs.drainage, &in_dir.join("drainage.altr"))?;
    kv("drainage", "inputs/drainage.altr".into());
    for (key, m) in [
        ("urban", &inputs.urban),
        ("reference", &inputs.reference),
        ("permanent_water", &inputs.permanent_water),
    ] {
        if let Some(m) = m {
            write_mask(m, &in_dir.join(format!("{key}.altr")))?;
            kv(key, format!("inputs/{key}.altr"));
        }
    }
    write_parcels(&inputs.properties, &in_dir.join("parcels.csv"))?;
    kv("parcels", "inputs/parcels.csv".into());
    let o = spec.geo_origin;
    kv("geo_origin", format!("{}, {}", o.lat0, o.lon0));
    kv("theta_damage_usd", spec.theta_damage_usd.to_string());
    kv("rescale", spec.rescale.to_string());
    kv("dem_sigma_m", spec.dem_noise_m.to_string());
    kv("output_dir", "out".into());
    let config = dir.join("config.txt");
    write_text(&config, &cfg)?;

    write_mask(&truth.flood, &truth_dir.join("flood.altr"))?;
    write_raster(&truth.depth, &truth_dir.join("depth.altr"))?;
    write_raster(&truth.dem, &truth_dir.join("dem.altr"))?;
    write_raster(&truth.wse, &truth_dir.join("wse.altr"))?;
    write_mask(&truth.lookalike, &truth_dir.join("lookalike.altr"))?;
    write_truth_claims(&truth.properties, &truth_dir.join("claims.csv"))?;
    let mut t = String::new();
    writeln!(t, "terrain = {}", spec.terrain).expect("write to String");
    writeln!(t, "seed = {}", spec.seed).expect("write to String");
    writeln!(t, "theta_damage_usd = {}", truth.theta_damage_usd).expect("write to String");
    writeln!(t, "bcr_offset_db = {}", truth.bcr_offset_db).expect("write to String");
    writeln!(t, "cci_decrement = {}", truth.cci_decrement).expect("write to String");
    write_text(&truth_dir.join("truth.txt"), &t)?;
    Ok(ScenarioFiles { config, truth_dir })
}

/// Truth needed for evaluation, as read back from a scenario directory.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFiles {
    pub flood: Mask,
    pub depth: crate::raster::Raster<f64>,
    pub claims: Vec<crate::synth::PropertyTruth>,
    pub theta_damage_usd: f64,
}

impl TruthFiles {
    pub fn high_severity_at(&self, theta: f64) -> std::collections::BTreeSet<String> {
        self.claims.iter().filter(|c| c.loss_usd >= theta).map(|c| c.claim_id.clone()).collect()
    }
}

pub fn read_truth(dir: &Path) -> Result<TruthFiles> {
    let meta_path = dir.join("truth.txt");
    let meta = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let theta = meta
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "theta_damage_usd")
        .and_then(|(_, v)| v.trim().parse::<f64>().ok())
        .ok_or_else(|| Error::parse(meta_path.display().to_string(), "file", "missing theta_damage_usd"))?;
    Ok(TruthFiles {
        flood: read_mask(&dir.join("flood.altr"))?,
        depth: read_raster(&dir.join("depth.altr"))?,
        claims: read_truth_claims(&dir.join("claims.csv"))?,
        theta_damage_usd: theta,
    })
}

//! Flat CSV tables: the parcel portfolio, per-property scores, and
//! scenario truth claims.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::scoring::{DepthStats, Occupancy, Property, ScoredProperty};
use crate::synth::PropertyTruth;

pub const PARCEL_COLUMNS: [&str; 8] = [
    "claim_id",
    "parcel_id",
    "latitude",
    "longitude",
    "occupancy",
    "stories",
    "insured_value",
    "footprint_wkt",
];

#[derive(Debug, Serialize, Deserialize)]
struct ParcelRecord {
    claim_id: String,
    parcel_id: String,
    latitude: f64,
    longitude: f64,
    occupancy: String,
    stories: u32,
    insured_value: f64,
    footprint_wkt: String,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::parse(
            path.display().to_string(),
            "line 1",
            format!("expected columns {}, found {}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn record_location(pos: Option<&csv::Position>) -> String {
    pos.map(|p| format!("line {}", p.line())).unwrap_or_else(|| "unknown line".into())
}

/// Reads the portfolio. Footprints are WKT polygons in raster map units;
/// claim ids must be unique.
pub fn read_parcels(path: &Path) -> Result<Vec<Property>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &PARCEL_COLUMNS)?;
    let name = path.display().to_string();
    let mut out: Vec<Property> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rec in rdr.deserialize::<ParcelRecord>() {
        let rec = rec?;
        let loc = format!("claim {}", rec.claim_id);
        let footprint = Polygon::from_wkt(&rec.footprint_wkt)
            .map_err(|e| Error::parse(&name, &loc, format!("footprint_wkt: {e}")))?;
        let occupancy: Occupancy = rec
            .occupancy
            .parse()
            .map_err(|e: Error| Error::parse(&name, &loc, format!("occupancy: {e}")))?;
        if !seen.insert(rec.claim_id.clone()) {
            return Err(Error::parse(&name, &loc, "duplicate claim_id"));
        }
        let p = Property {
            claim_id: rec.claim_id,
            parcel_id: rec.parcel_id,
            latitude: rec.latitude,
            longitude: rec.longitude,
            footprint,
            occupancy,
            stories: rec.stories,
            insured_value_usd: rec.insured_value,
        };
        p.validate().map_err(|e| Error::parse(&name, &loc, e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_parcels(properties: &[Property], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    for p in properties {
        w.serialize(ParcelRecord {
            claim_id: p.claim_id.clone(),
            parcel_id: p.parcel_id.clone(),
            latitude: p.latitude,
            longitude: p.longitude,
            occupancy: p.occupancy.to_string(),
            stories: p.stories,
            insured_value: p.insured_value_usd,
            footprint_wkt: p.footprint.to_wkt(),
        })?;
    }
    if properties.is_empty() {
        w.write_record(PARCEL_COLUMNS)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const SCORE_COLUMNS: [&str; 11] = [
    "claim_id",
    "parcel_id",
    "d_max_m",
    "d_mean_m",
    "faf",
    "dur_m",
    "n_cells",
    "severity",
    "confidence",
    "expected_loss_usd",
    "high_severity",
];

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRecord {
    claim_id: String,
    parcel_id: String,
    d_max_m: f64,
    d_mean_m: f64,
    faf: f64,
    dur_m: f64,
    n_cells: usize,
    severity: f64,
    confidence: f64,
    expected_loss_usd: f64,
    high_severity: u8,
}

/// Full-precision stage-4 table in portfolio order. Floats use the
/// shortest representation that round-trips.
pub fn write_scores(scored: &[ScoredProperty], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    for s in scored {
        w.serialize(ScoreRecord {
            claim_id: s.property.claim_id.clone(),
            parcel_id: s.property.parcel_id.clone(),
            d_max_m: s.stats.d_max_m,
            d_mean_m: s.stats.d_mean_m,
            faf: s.stats.faf,
            dur_m: s.stats.dur_m,
            n_cells: s.stats.n_cells,
            severity: s.severity,
            confidence: s.confidence,
            expected_loss_usd: s.expected_loss_usd,
            high_severity: s.high_severity as u8,
        })?;
    }
    if scored.is_empty() {
        w.write_record(SCORE_COLUMNS)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Joins a scores table back onto the portfolio by claim id. Every
/// property must have exactly one score row.
pub fn read_scores(path: &Path, properties: &[Property]) -> Result<Vec<ScoredProperty>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &SCORE_COLUMNS)?;
    let name = path.display().to_string();
    let mut by_id: std::collections::BTreeMap<String, ScoreRecord> = Default::default();
    for rec in rdr.deserialize::<ScoreRecord>() {
        let rec = rec.map_err(|e| Error::parse(&name, record_location(e.position()), e.to_string()))?;
        let id = rec.claim_id.clone();
        if by_id.insert(id.clone(), rec).is_some() {
            return Err(Error::parse(&name, format!("claim {id}"), "duplicate claim_id"));
        }
    }
    if by_id.len() != properties.len() {
        return Err(Error::parse(
            &name,
            "table",
            format!("{} score rows for {} parcels", by_id.len(), properties.len()),
        ));
    }
    properties
        .iter()
        .map(|p| {
            let r = by_id
                .remove(&p.claim_id)
                .ok_or_else(|| Error::parse(&name, format!("claim {}", p.claim_id), "no score row"))?;
            Ok(ScoredProperty {
                property: p.clone(),
                stats: DepthStats {
                    d_max_m: r.d_max_m,
                    d_mean_m: r.d_mean_m,
                    faf: r.faf,
                    dur_m: r.dur_m,
                    n_cells: r.n_cells,
                },
                severity: r.severity,
                confidence: r.confidence,
                expected_loss_usd: r.expected_loss_usd,
                high_severity: r.high_severity != 0,
            })
        })
        .collect()
}

pub const TRUTH_COLUMNS: [&str; 5] = ["claim_id", "d_max_m", "severity", "loss_usd", "high_severity"];

#[derive(Debug, Serialize, Deserialize)]
struct TruthRecord {
    claim_id: String,
    d_max_m: f64,
    severity: f64,
    loss_usd: f64,
    high_severity: u8,
}

pub fn write_truth_claims(truth: &[PropertyTruth], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    for t in truth {
        w.serialize(TruthRecord {
            claim_id: t.claim_id.clone(),
            d_max_m: t.d_max_m,
            severity: t.severity,
            loss_usd: t.loss_usd,
            high_severity: t.high_severity as u8,
        })?;
    }
    if truth.is_empty() {
        w.write_record(TRUTH_COLUMNS)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth_claims(path: &Path) -> Result<Vec<PropertyTruth>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &TRUTH_COLUMNS)?;
    let name = path.display().to_string();
    rdr.deserialize::<TruthRecord>()
        .map(|rec| {
            let r = rec.map_err(|e| Error::parse(&name, record_location(e.position()), e.to_string()))?;
            Ok(PropertyTruth {
                claim_id: r.claim_id,
                d_max_m: r.d_max_m,
                severity: r.severity,
                loss_usd: r.loss_usd,
                high_severity: r.high_severity != 0,
            })
        })
        .collect()
}

//! Per-property triage outputs: the ranked CSV, the GeoJSON layer, and the
//! event summary.
//!
//! Every numeric field of an [`OutputRow`] is rounded to six significant
//! digits once, when the row is built. The CSV prints those values with
//! `%g`, the GeoJSON carries the same numbers, and the summary sums them in
//! rank order, so the three products agree exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{LocalTangentPlane, Polygon};
use crate::scoring::{Occupancy, ScoredProperty};
use crate::triage::{irr_at_recall, RankedList};

pub const TABLE_COLUMNS: [&str; 15] = [
    "claim_id",
    "parcel_id",
    "latitude",
    "longitude",
    "severity_score",
    "confidence",
    "depth_max_m",
    "depth_mean_m",
    "depth_unc_m",
    "faf",
    "expected_loss",
    "tier",
    "occupancy",
    "stories",
    "sar_date",
];

pub const SIGNIFICANT_DIGITS: usize = 6;

/// C `%.6g` formatting: six significant digits, trailing zeros removed,
/// exponent form below 1e-4 or at and above 1e6.
pub fn format_g(x: f64) -> String {
    format_g_digits(x, SIGNIFICANT_DIGITS)
}

pub fn format_g_digits(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to the value `format_g` prints.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format_g(x).parse().expect("format_g output parses")
}

/// One line of the ranked per-property table.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub claim_id: String,
    pub parcel_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub severity_score: f64,
    pub confidence: f64,
    pub depth_max_m: f64,
    pub depth_mean_m: f64,
    pub depth_unc_m: f64,
    pub faf: f64,
    pub expected_loss: f64,
    pub tier: u8,
    pub occupancy: Occupancy,
    pub stories: u32,
    pub sar_date: String,
}

impl OutputRow {
    pub fn new(s: &ScoredProperty, tier: u8, sar_date: &str) -> Self {
        let p = &s.property;
        Self {
            claim_id: p.claim_id.clone(),
            parcel_id: p.parcel_id.clone(),
            latitude: round_sig(p.latitude),
            longitude: round_sig(p.longitude),
            severity_score: round_sig(s.severity),
            confidence: round_sig(s.confidence),
            depth_max_m: round_sig(s.stats.d_max_m),
            depth_mean_m: round_sig(s.stats.d_mean_m),
            depth_unc_m: round_sig(s.stats.dur_m),
            faf: round_sig(s.stats.faf),
            expected_loss: round_sig(s.expected_loss_usd),
            tier,
            occupancy: p.occupancy.clone(),
            stories: p.stories,
            sar_date: sar_date.to_string(),
        }
    }

    fn fields(&self) -> [String; 15] {
        [
            self.claim_id.clone(),
            self.parcel_id.clone(),
            format_g(self.latitude),
            format_g(self.longitude),
            format_g(self.severity_score),
            format_g(self.confidence),
            format_g(self.depth_max_m),
            format_g(self.depth_mean_m),
            format_g(self.depth_unc_m),
            format_g(self.faf),
            format_g(self.expected_loss),
            self.tier.to_string(),
            self.occupancy.to_string(),
            self.stories.to_string(),
            self.sar_date.clone(),
        ]
    }

    fn properties(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("claim_id".into(), json!(self.claim_id));
        m.insert("parcel_id".into(), json!(self.parcel_id));
        m.insert("latitude".into(), json!(self.latitude));
        m.insert("longitude".into(), json!(self.longitude));
        m.insert("severity_score".into(), json!(self.severity_score));
        m.insert("confidence".into(), json!(self.confidence));
        m.insert("depth_max_m".into(), json!(self.depth_max_m));
        m.insert("depth_mean_m".into(), json!(self.depth_mean_m));
        m.insert("depth_unc_m".into(), json!(self.depth_unc_m));
        m.insert("faf".into(), json!(self.faf));
        m.insert("expected_loss".into(), json!(self.expected_loss));
        m.insert("tier".into(), json!(self.tier));
        m.insert("occupancy".into(), json!(self.occupancy.to_string()));
        m.insert("stories".into(), json!(self.stories));
        m.insert("sar_date".into(), json!(self.sar_date));
        m
    }
}

/// Rows in rank order. `tiers` is indexed by rank position.
pub fn output_rows(ranked: &RankedList, tiers: &[u8], sar_date: &str) -> Result<Vec<OutputRow>> {
    if tiers.len() != ranked.len() {
        return Err(Error::Config(format!(
            "{} tiers for {} ranked properties",
            tiers.len(),
            ranked.len()
        )));
    }
    Ok(ranked
        .items()
        .iter()
        .zip(tiers)
        .map(|(s, &t)| OutputRow::new(s, t, sar_date))
        .collect())
}

/// RFC 4180 CSV (CRLF line ends) with the fixed fifteen-column header.
pub fn format_triage_csv(rows: &[OutputRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("CSV buffer: {e}")))
}

pub fn write_triage_csv(rows: &[OutputRow], path: &Path) -> Result<()> {
    write_file(path, &format_triage_csv(rows)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Exterior ring in lon-lat, counterclockwise and closed.
fn lonlat_ring(footprint: &Polygon, plane: &LocalTangentPlane) -> Result<Vec<[f64; 2]>> {
    let ring: Vec<(f64, f64)> = footprint.vertices().iter().map(|&(x, y)| plane.to_lonlat(x, y)).collect();
    let geo = Polygon::new(ring)?.to_ccw();
    Ok(geo.closed_ring().into_iter().map(|(lon, lat)| [lon, lat]).collect())
}

/// RFC 7946 FeatureCollection, one Polygon feature per row. Footprints are
/// looked up by parcel id and converted from map metres to lon-lat.
pub fn format_geojson(
    rows: &[OutputRow],
    footprints: &std::collections::BTreeMap<String, Polygon>,
    plane: &LocalTangentPlane,
) -> Result<Vec<u8>> {
    let features = rows
        .iter()
        .map(|r| {
            let fp = footprints
                .get(&r.parcel_id)
                .ok_or_else(|| Error::Geometry(format!("no footprint for parcel {}", r.parcel_id)))?;
            Ok(json!({
                "type": "Feature",
                "id": r.claim_id,
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [lonlat_ring(fp, plane)?],
                },
                "properties": Value::Object(r.properties()),
            }))
        })
        .collect::<Result<Vec<Value>>>()?;
    let fc = json!({
        "type": "FeatureCollection",
        "features": features,
    });
    let mut bytes = serde_json::to_vec_pretty(&fc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_geojson(
    rows: &[OutputRow],
    footprints: &std::collections::BTreeMap<String, Polygon>,
    plane: &LocalTangentPlane,
    path: &Path,
) -> Result<()> {
    write_file(path, &format_geojson(rows, footprints, plane)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierAggregate {
    pub tier: u8,
    pub count: usize,
    pub expected_loss: f64,
}

/// Event-level aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSummary {
    pub sar_date: String,
    pub flooded_cells: usize,
    pub inundated_area_m2: f64,
    pub n_properties: usize,
    pub tiers: [TierAggregate; 3],
    pub total_expected_loss: f64,
    /// Properties predicted at or above the damage threshold.
    pub n_predicted_high: usize,
    /// Share of the portfolio dispatched to reach 90% of the predicted
    /// high-severity set; `None` when that set is empty.
    pub irr_at_90: Option<f64>,
}

/// Aggregates `rows` (rank order) and the extent. Tier losses are summed
/// in rank order from the rounded row values.
pub fn summarize(
    rows: &[OutputRow],
    ranked: &RankedList,
    flooded_cells: usize,
    cell_area_m2: f64,
    theta_damage_usd: f64,
    sar_date: &str,
) -> Result<EventSummary> {
    let mut tiers = [1u8, 2, 3].map(|t| TierAggregate {
        tier: t,
        count: 0,
        expected_loss: 0.0,
    });
    let mut total = 0.0;
    for r in rows {
        let agg = tiers
            .get_mut(r.tier.wrapping_sub(1) as usize)
            .ok_or_else(|| Error::Config(format!("claim {}: tier {} out of range", r.claim_id, r.tier)))?;
        agg.count += 1;
        agg.expected_loss += r.expected_loss;
        total += r.expected_loss;
    }
    let pseudo_truth: std::collections::BTreeSet<String> = ranked
        .items()
        .iter()
        .filter(|s| s.expected_loss_usd >= theta_damage_usd)
        .map(|s| s.property.claim_id.clone())
        .collect();
    let irr_at_90 = if pseudo_truth.is_empty() {
        None
    } else {
        Some(irr_at_recall(&ranked.hits(&pseudo_truth)?, 0.9)?)
    };
    Ok(EventSummary {
        sar_date: sar_date.to_string(),
        flooded_cells,
        inundated_area_m2: flooded_cells as f64 * cell_area_m2,
        n_properties: rows.len(),
        tiers,
        total_expected_loss: total,
        n_predicted_high: pseudo_truth.len(),
        irr_at_90,
    })
}

/// `key = value` report; floats print in shortest round-trip form.
pub fn format_summary(s: &EventSummary) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to String");
    line("sar_date", s.sar_date.clone());
    line("flooded_cells", s.flooded_cells.to_string());
    line("inundated_area_m2", s.inundated_area_m2.to_string());
    line("inundated_area_km2", (s.inundated_area_m2 / 1e6).to_string());
    line("properties", s.n_properties.to_string());
    for t in &s.tiers {
        line(&format!("tier{}_count", t.tier), t.count.to_string());
        line(&format!("tier{}_expected_loss", t.tier), t.expected_loss.to_string());
    }
    line("total_expected_loss", s.total_expected_loss.to_string());
    line("predicted_high_severity", s.n_predicted_high.to_string());
    line(
        "irr_at_90_recall",
        s.irr_at_90.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into()),
    );
    out
}

pub fn write_summary(s: &EventSummary, path: &Path) -> Result<()> {
    write_file(path, format_summary(s).as_bytes())
}

/// Parses a summary written by [`format_summary`] into key/value pairs.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.329, "0.329"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (-95.370001, "-95.37"),
            (29.761234567, "29.7612"),
            (1e-300, "1e-300"),
            (100.0, "100"),
            (0.1 + 0.2, "0.3"),
            (-1.5e10, "-1.5e+10"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g(x), want, "{x}");
        }
        assert_eq!(format_g_digits(3.14159, 3), "3.14");
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [0.123456789, 98765.4321, 1e-7 / 3.0, 250_123.4] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert_eq!(format_g(r), format_g(x));
        }
    }
}

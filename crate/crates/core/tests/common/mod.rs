#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use floodtriage::geometry::{LocalTangentPlane, Polygon};
use floodtriage::io::products::{parse_summary, OutputRow, TABLE_COLUMNS};
use floodtriage::scoring::{DepthStats, Occupancy, Property, ScoredProperty};
use floodtriage::triage::{assign_tiers, rank, RankedList, TierBoundaries};

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn plane() -> LocalTangentPlane {
    LocalTangentPlane::new(29.76, -95.37).unwrap()
}

fn scored(
    claim: &str,
    footprint: Polygon,
    occupancy: Occupancy,
    stories: u32,
    value: f64,
    stats: DepthStats,
    severity: f64,
    confidence: f64,
) -> ScoredProperty {
    let plane = plane();
    let (cx, cy) = footprint.centroid();
    let (lon, lat) = plane.to_lonlat(cx, cy);
    ScoredProperty {
        property: Property {
            claim_id: claim.into(),
            parcel_id: format!("P-{claim}"),
            latitude: lat,
            longitude: lon,
            footprint,
            occupancy,
            stories,
            insured_value_usd: value,
        },
        stats,
        severity,
        confidence,
        expected_loss_usd: severity * value,
        high_severity: severity * value >= 5000.0,
    }
}

fn stats(d_max_m: f64, d_mean_m: f64, faf: f64, dur_m: f64, n_cells: usize) -> DepthStats {
    DepthStats {
        d_max_m,
        d_mean_m,
        faf,
        dur_m,
        n_cells,
    }
}

/// Five scored properties covering every tier, a non-RES1 occupancy, a
/// quoted claim id, a clockwise footprint, and values needing exponent
/// notation.
pub fn fixture() -> (RankedList, Vec<u8>, BTreeMap<String, Polygon>) {
    let rect = |x: f64, y: f64| Polygon::rectangle(x, y, x + 40.0, y + 30.0).unwrap();
    let clockwise = Polygon::new(vec![(200.0, 0.0), (200.0, 25.0), (235.0, 25.0), (235.0, 0.0)]).unwrap();
    let items = vec![
        scored("C-001", rect(0.0, 0.0), Occupancy::Res1, 1, 312_500.0, stats(2.41, 2.173, 1.0, 0.3125, 12), 0.5734, 0.7316),
        scored("C-002", rect(50.0, 0.0), Occupancy::Res1, 2, 199_999.99, stats(1.2, 0.987654321, 0.75, 0.48, 12), 0.2847, 0.4648),
        scored("C-003, \"rear\"", clockwise, Occupancy::Res1, 1, 87_000.0, stats(0.051, 0.0123, 0.25, 1.0 / 3.0, 12), 0.01581, 0.1791),
        scored("C-004", rect(100.0, 0.0), Occupancy::Other("COM1".into()), 3, 1.5e6, stats(0.9, 0.6, 1.0, 0.2, 12), 0.0, 0.8187),
        scored("C-005", rect(150.0, 0.0), Occupancy::Res1, 1, 240_000.0, stats(0.0, 0.0, 0.0, 0.0, 12), 0.0, 1.2e-7),
    ];
    let footprints = items
        .iter()
        .map(|s| (s.property.parcel_id.clone(), s.property.footprint.clone()))
        .collect();
    let ranked = rank(items);
    let tiers = assign_tiers(&ranked, &TierBoundaries::default()).unwrap();
    (ranked, tiers, footprints)
}

/// Checks a GeoJSON document against the rows it was written from: every
/// attribute survives a generic parser, rings are closed, and exterior rings
/// wind counterclockwise.
pub fn check_geojson(bytes: &[u8], rows: &[OutputRow]) -> Result<(), String> {
    use geojson::{GeoJson, Value};
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let gj: GeoJson = text.parse().map_err(|e| format!("parse: {e}"))?;
    let fc = match gj {
        GeoJson::FeatureCollection(fc) => fc,
        _ => return Err("not a FeatureCollection".into()),
    };
    if fc.features.len() != rows.len() {
        return Err(format!("{} features for {} rows", fc.features.len(), rows.len()));
    }
    for (f, row) in fc.features.iter().zip(rows) {
        let props = f.properties.as_ref().ok_or("feature without properties")?;
        let keys: Vec<&str> = props.keys().map(String::as_str).collect();
        if keys != TABLE_COLUMNS {
            return Err(format!("{}: property keys {keys:?}", row.claim_id));
        }
        let num = |k: &str| props[k].as_f64().ok_or(format!("{}: {k} is not a number", row.claim_id));
        let s = |k: &str| props[k].as_str().map(str::to_string).ok_or(format!("{}: {k} is not a string", row.claim_id));
        let same = s("claim_id")? == row.claim_id
            && s("parcel_id")? == row.parcel_id
            && num("latitude")? == row.latitude
            && num("longitude")? == row.longitude
            && num("severity_score")? == row.severity_score
            && num("confidence")? == row.confidence
            && num("depth_max_m")? == row.depth_max_m
            && num("depth_mean_m")? == row.depth_mean_m
            && num("depth_unc_m")? == row.depth_unc_m
            && num("faf")? == row.faf
            && num("expected_loss")? == row.expected_loss
            && props["tier"].as_u64() == Some(row.tier as u64)
            && s("occupancy")? == row.occupancy.to_string()
            && props["stories"].as_u64() == Some(row.stories as u64)
            && s("sar_date")? == row.sar_date;
        if !same {
            return Err(format!("{}: attributes changed in GeoJSON", row.claim_id));
        }
        let geom = f.geometry.as_ref().ok_or("feature without geometry")?;
        let rings = match &geom.value {
            Value::Polygon(rings) => rings,
            other => return Err(format!("{}: geometry {other:?} is not a Polygon", row.claim_id)),
        };
        let ext = rings.first().ok_or("polygon without rings")?;
        if ext.len() < 4 || ext.first() != ext.last() {
            return Err(format!("{}: exterior ring is not closed", row.claim_id));
        }
        let twice_area: f64 = ext.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum();
        if twice_area <= 0.0 {
            return Err(format!("{}: exterior ring is clockwise", row.claim_id));
        }
    }
    Ok(())
}

/// Re-sums the written CSV per tier and compares with the summary file
/// exactly. Loss columns are summed in file (rank) order.
pub fn check_summary_resum(csv_text: &str, summary_text: &str) -> Result<(), String> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no column {name}"));
    let (tier_col, loss_col) = (col("tier")?, col("expected_loss")?);
    let mut count = [0usize; 3];
    let mut loss = [0.0f64; 3];
    let mut total = 0.0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let t: usize = rec[tier_col].parse().map_err(|_| "bad tier")?;
        let l: f64 = rec[loss_col].parse().map_err(|_| "bad loss")?;
        count[t - 1] += 1;
        loss[t - 1] += l;
        total += l;
    }
    let kv: BTreeMap<String, String> = parse_summary(summary_text).into_iter().collect();
    let get = |k: &str| kv.get(k).cloned().ok_or(format!("summary is missing {k}"));
    for t in 0..3 {
        let c: usize = get(&format!("tier{}_count", t + 1))?.parse().map_err(|_| "bad count")?;
        let l: f64 = get(&format!("tier{}_expected_loss", t + 1))?.parse().map_err(|_| "bad loss")?;
        if c != count[t] || l != loss[t] {
            return Err(format!("tier {}: summary ({c}, {l}) vs CSV ({}, {})", t + 1, count[t], loss[t]));
        }
    }
    let tot: f64 = get("total_expected_loss")?.parse().map_err(|_| "bad total")?;
    if tot != total {
        return Err(format!("total: summary {tot} vs CSV {total}"));
    }
    let n: usize = get("properties")?.parse().map_err(|_| "bad count")?;
    if n != count.iter().sum::<usize>() {
        return Err("tier counts do not partition the portfolio".into());
    }
    Ok(())
}

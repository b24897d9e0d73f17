//! Simple polygons in map coordinates.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A simple polygon stored as an open ring (no repeated closing vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    ring: Vec<(f64, f64)>,
}

impl Polygon {
    /// Accepts open or closed rings. Rejects rings with fewer than three
    /// distinct vertices, zero area, non-finite coordinates, or
    /// self-intersections.
    pub fn new(mut ring: Vec<(f64, f64)>) -> Result<Self> {
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        ring.dedup();
        if ring.len() < 3 {
            return Err(Error::Geometry(format!("ring has {} distinct vertices", ring.len())));
        }
        if ring.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(Error::Geometry("non-finite vertex".into()));
        }
        let poly = Self { ring };
        if poly.signed_area() == 0.0 {
            return Err(Error::Geometry("ring has zero area".into()));
        }
        if poly.self_intersects() {
            return Err(Error::Geometry("ring self-intersects".into()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        Self::new(vec![(min_x, min_y), (max_x, min_y), (max_x, max_y), (min_x, max_y)])
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.ring
    }

    /// Vertices with the first repeated at the end.
    pub fn closed_ring(&self) -> Vec<(f64, f64)> {
        let mut r = self.ring.clone();
        r.push(self.ring[0]);
        r
    }

    /// Shoelace area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.ring.len();
        0.5 * (0..n)
            .map(|i| {
                let (x0, y0) = self.ring[i];
                let (x1, y1) = self.ring[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum::<f64>()
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    /// Same polygon with counter-clockwise orientation.
    pub fn to_ccw(&self) -> Polygon {
        let mut ring = self.ring.clone();
        if !self.is_ccw() {
            ring.reverse();
        }
        Polygon { ring }
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.ring.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }

    /// Even-odd point-in-polygon test. Points exactly on the left or bottom
    /// edge of an axis-aligned rectangle count as inside, on the right or
    /// top edge as outside, so adjacent parcels never share a point.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let n = self.ring.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = self.ring[i];
            let (xj, yj) = self.ring[j];
            if (yi > y) != (yj > y) {
                let x_cross = xi + (y - yi) * (xj - xi) / (yj - yi);
                if x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.ring.len();
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (x0, y0) = self.ring[i];
            let (x1, y1) = self.ring[(i + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
        }
        (cx / (6.0 * a), cy / (6.0 * a))
    }

    fn self_intersects(&self) -> bool {
        let n = self.ring.len();
        let seg = |i: usize| (self.ring[i], self.ring[(i + 1) % n]);
        for i in 0..n {
            for j in i + 1..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }

    /// `POLYGON((x y, x y, ...))` with the closing vertex repeated.
    pub fn to_wkt(&self) -> String {
        let mut s = String::from("POLYGON((");
        for (k, (x, y)) in self.closed_ring().iter().enumerate() {
            if k > 0 {
                s.push_str(", ");
            }
            write!(s, "{x} {y}").expect("write to String");
        }
        s.push_str("))");
        s
    }

    /// Parses a single-ring `POLYGON((x y, ...))` string.
    pub fn from_wkt(text: &str) -> Result<Self> {
        let t = text.trim();
        let upper = t.to_ascii_uppercase();
        let rest = upper
            .strip_prefix("POLYGON")
            .ok_or_else(|| Error::Geometry(format!("expected POLYGON, got '{t}'")))?;
        let body = rest.trim();
        let inner = body
            .strip_prefix("((")
            .and_then(|b| b.strip_suffix("))"))
            .ok_or_else(|| Error::Geometry("expected POLYGON((...))".into()))?;
        if inner.contains('(') || inner.contains(')') {
            return Err(Error::Geometry("only single-ring polygons are supported".into()));
        }
        let ring = inner
            .split(',')
            .map(|pair| {
                let mut it = pair.split_whitespace();
                let parse = |v: Option<&str>| {
                    v.ok_or_else(|| Error::Geometry(format!("bad coordinate pair '{}'", pair.trim())))?
                        .parse::<f64>()
                        .map_err(|_| Error::Geometry(format!("bad coordinate pair '{}'", pair.trim())))
                };
                let x = parse(it.next())?;
                let y = parse(it.next())?;
                if it.next().is_some() {
                    return Err(Error::Geometry(format!("bad coordinate pair '{}'", pair.trim())));
                }
                Ok((x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ring)
    }
}

/// Equirectangular local tangent plane: map metres (east, north) relative to
/// a geographic origin. Adequate over the few kilometres of one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTangentPlane {
    pub lat0: f64,
    pub lon0: f64,
}

impl LocalTangentPlane {
    pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

    pub fn new(lat0: f64, lon0: f64) -> Result<Self> {
        if !((-89.0..=89.0).contains(&lat0) && (-180.0..=180.0).contains(&lon0)) {
            return Err(Error::Geometry(format!("bad tangent-plane origin ({lat0}, {lon0})")));
        }
        Ok(Self { lat0, lon0 })
    }

    /// `(lon, lat)` in degrees.
    pub fn to_lonlat(&self, x: f64, y: f64) -> (f64, f64) {
        let r = Self::EARTH_RADIUS_M;
        let lat = self.lat0 + (y / r).to_degrees();
        let lon = self.lon0 + (x / (r * self.lat0.to_radians().cos())).to_degrees();
        (lon, lat)
    }

    pub fn from_lonlat(&self, lon: f64, lat: f64) -> (f64, f64) {
        let r = Self::EARTH_RADIUS_M;
        let x = (lon - self.lon0).to_radians() * r * self.lat0.to_radians().cos();
        let y = (lat - self.lat0).to_radians() * r;
        (x, y)
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

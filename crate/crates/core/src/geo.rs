//! Geodesic primitives: coordinates, great-circle distance and point-to-polygon distance.

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Samples per polygon edge when approximating point-to-segment distance.
pub const EDGE_SAMPLES: usize = 64;

/// A WGS84-style (latitude, longitude) pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.is_finite() && lon.is_finite())
            || !(-90.0..=90.0).contains(&lat)
            || !(-180.0..=180.0).contains(&lon)
        {
            return Err(Error::CoordinateOutOfRange { lat, lon });
        }
        Ok(Coord { lat, lon })
    }

    /// Parses `lat,lon`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let (lat, lon) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `lat,lon`, got `{s}`"))?;
        let lat: f64 = lat
            .trim()
            .parse()
            .map_err(|_| format!("bad latitude `{lat}`"))?;
        let lon: f64 = lon
            .trim()
            .parse()
            .map_err(|_| format!("bad longitude `{lon}`"))?;
        Coord::new(lat, lon).map_err(|e| e.to_string())
    }

    /// Parses a `lat,lon;lat,lon` list; the empty string yields no coordinates.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<Self>, String> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';').map(Coord::parse).collect()
    }
}

/// Great-circle distance in kilometres (haversine formula).
pub fn haversine(a: Coord, b: Coord) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A simple polygon given by its vertex ring; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Coord>,
}

impl Polygon {
    pub fn new(vertices: Vec<Coord>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(vertices.len()));
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Coord] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Coord, Coord)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Inside-or-boundary test, treating (lon, lat) as planar coordinates.
    pub fn contains(&self, c: Coord) -> bool {
        if self.edges().any(|(a, b)| on_segment(c, a, b)) {
            return true;
        }
        let (x, y) = (c.lon, c.lat);
        let mut inside = false;
        for (a, b) in self.edges() {
            let (xi, yi, xj, yj) = (a.lon, a.lat, b.lon, b.lat);
            if (yi > y) != (yj > y) {
                let x_cross = xi + (y - yi) * (xj - xi) / (yj - yi);
                if x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(p: Coord, a: Coord, b: Coord) -> bool {
    const EPS: f64 = 1e-12;
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    if cross.abs() > EPS {
        return false;
    }
    p.lon >= a.lon.min(b.lon) - EPS
        && p.lon <= a.lon.max(b.lon) + EPS
        && p.lat >= a.lat.min(b.lat) - EPS
        && p.lat <= a.lat.max(b.lat) + EPS
}

/// Distance from `c` to `poly` in kilometres; 0 when `c` is inside or on the boundary.
///
/// Outside points use the minimum haversine distance to [`EDGE_SAMPLES`]
/// evenly spaced points on each edge (endpoints included), interpolated
/// linearly in degrees. For country-sized edges this stays within about a
/// kilometre of the exact point-to-arc distance.
pub fn point_to_polygon(c: Coord, poly: &Polygon) -> f64 {
    if poly.contains(c) {
        return 0.0;
    }
    let last = (EDGE_SAMPLES - 1) as f64;
    poly.edges()
        .flat_map(|(a, b)| {
            (0..EDGE_SAMPLES).map(move |i| {
                let t = i as f64 / last;
                Coord {
                    lat: a.lat + t * (b.lat - a.lat),
                    lon: a.lon + t * (b.lon - a.lon),
                }
            })
        })
        .map(|p| haversine(c, p))
        .fold(f64::INFINITY, f64::min)
}

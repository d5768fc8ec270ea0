//! Geodesy primitives: great-circle distance, initial bearing, compass
//! quantization and a local planar frame for meter-scale geometry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GeoError;

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if !lon.is_finite() || !lat.is_finite() || !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::OutOfRange { lon, lat });
        }
        Ok(Self { lon, lat })
    }

    /// Unchecked constructor for coordinates already known to be valid.
    pub const fn new_unchecked(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.lon, self.lat).is_ok()
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`, degrees clockwise from north in `[0, 360)`.
pub fn bearing(a: GeoPoint, b: GeoPoint) -> Result<f64, GeoError> {
    if a == b {
        return Err(GeoError::CoincidentPoints);
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lon - a.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Ok(normalize_degrees(y.atan2(x).to_degrees()))
}

/// Bearing of a planar displacement given as (east, north) meters.
pub fn planar_bearing(east: f64, north: f64) -> Option<f64> {
    if east == 0.0 && north == 0.0 {
        return None;
    }
    Some(normalize_degrees(east.atan2(north).to_degrees()))
}

fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Eight-way compass direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    /// Sector `floor(((bearing + 22.5) mod 360) / 45)`, lower boundary inclusive.
    pub fn quantize(bearing: f64) -> Direction {
        let shifted = (bearing + 22.5).rem_euclid(360.0);
        let sector = ((shifted / 45.0).floor() as usize).min(7);
        Self::ALL[sector]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Direction::N => "N",
            Direction::NE => "NE",
            Direction::E => "E",
            Direction::SE => "SE",
            Direction::S => "S",
            Direction::SW => "SW",
            Direction::W => "W",
            Direction::NW => "NW",
        }
    }

    /// Lowercase word used in generated text ("north", "southeast", ...).
    pub fn word(self) -> &'static str {
        match self {
            Direction::N => "north",
            Direction::NE => "northeast",
            Direction::E => "east",
            Direction::SE => "southeast",
            Direction::S => "south",
            Direction::SW => "southwest",
            Direction::W => "west",
            Direction::NW => "northwest",
        }
    }

    /// Unit vector as (east, north).
    pub fn unit(self) -> (f64, f64) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Direction::N => (0.0, 1.0),
            Direction::NE => (h, h),
            Direction::E => (1.0, 0.0),
            Direction::SE => (h, -h),
            Direction::S => (0.0, -1.0),
            Direction::SW => (-h, -h),
            Direction::W => (-1.0, 0.0),
            Direction::NW => (-h, h),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

impl FromStr for Direction {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase().replace(['-', ' ', '_'], "");
        Direction::ALL
            .into_iter()
            .find(|d| d.word() == t || d.abbrev().eq_ignore_ascii_case(&t))
            .ok_or_else(|| GeoError::UnknownDirection(s.to_string()))
    }
}

/// Equirectangular projection around an origin; x is east, y is north, both in meters.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self { origin, cos_lat: origin.lat.to_radians().cos() }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn to_xy(&self, p: GeoPoint) -> (f64, f64) {
        let mut dlon = p.lon - self.origin.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let x = dlon.to_radians() * EARTH_RADIUS_M * self.cos_lat;
        let y = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint { lon, lat }
    }
}

/// Centroid of a set of points, averaged in a planar frame centered at the first point.
pub fn planar_centroid(points: &[GeoPoint]) -> Option<GeoPoint> {
    let first = *points.first()?;
    let frame = LocalFrame::new(first);
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in points {
        let (x, y) = frame.to_xy(*p);
        sx += x;
        sy += y;
    }
    let n = points.len() as f64;
    Some(frame.to_geo(sx / n, sy / n))
}

/// Result of projecting a point onto a planar segment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Projection {
    /// Parameter along the segment, clamped to `[0, 1]`.
    pub t: f64,
    pub distance: f64,
}

pub(crate) fn project_onto_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> Projection {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (fx, fy) = (a.0 + t * dx, a.1 + t * dy);
    Projection { t, distance: ((p.0 - fx).powi(2) + (p.1 - fy).powi(2)).sqrt() }
}

pub(crate) fn segments_intersect(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    }
    fn on_segment(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
        c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Minimum distance between two planar segments.
pub(crate) fn segment_distance(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    project_onto_segment(p1, q1, q2)
        .distance
        .min(project_onto_segment(p2, q1, q2).distance)
        .min(project_onto_segment(q1, p1, p2).distance)
        .min(project_onto_segment(q2, p1, p2).distance)
}

/// Even-odd point-in-polygon test in planar coordinates.
pub(crate) fn point_in_polygon(p: (f64, f64), ring: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint::new(lon, lat).unwrap()
    }

    #[test]
    fn haversine_zero_and_equator_degree() {
        assert_eq!(haversine(p(116.3, 39.9), p(116.3, 39.9)), 0.0);
        let expected = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert_abs_diff_eq!(expected, 111_194.93, epsilon = 0.01);
        assert_abs_diff_eq!(haversine(p(0.0, 0.0), p(1.0, 0.0)), expected, epsilon = 0.1);
    }

    #[test]
    fn bearing_cardinal_and_oblique() {
        assert_abs_diff_eq!(bearing(p(10.0, 10.0), p(10.0, 10.5)).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing(p(0.0, 0.0), p(0.5, 0.0)).unwrap(), 90.0, epsilon = 1e-9);
        // planar oracle: atan2(1, 3)
        let planar = 1.0f64.atan2(3.0).to_degrees();
        assert_abs_diff_eq!(planar, 18.4349, epsilon = 1e-4);
        assert_abs_diff_eq!(bearing(p(0.0, 0.0), p(1.0, 3.0)).unwrap(), planar, epsilon = 0.1);
        assert!(matches!(bearing(p(1.0, 1.0), p(1.0, 1.0)), Err(GeoError::CoincidentPoints)));
    }

    #[test]
    fn quantize_boundaries() {
        assert_eq!(Direction::quantize(0.0), Direction::N);
        assert_eq!(Direction::quantize(22.5), Direction::NE);
        assert_eq!(Direction::quantize(22.499), Direction::N);
        assert_eq!(Direction::quantize(359.9), Direction::N);
        assert_eq!(Direction::quantize(337.5), Direction::N);
        assert_eq!(Direction::quantize(337.4999), Direction::NW);
        assert_eq!(Direction::quantize(180.0), Direction::S);
    }

    #[test]
    fn direction_parse() {
        assert_eq!("North-East".parse::<Direction>().unwrap(), Direction::NE);
        assert_eq!("sw".parse::<Direction>().unwrap(), Direction::SW);
        assert!("up".parse::<Direction>().is_err());
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(GeoPoint::new(181.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn local_frame_round_trip() {
        let f = LocalFrame::new(p(116.3, 39.9));
        let q = p(116.31, 39.91);
        let (x, y) = f.to_xy(q);
        let back = f.to_geo(x, y);
        assert_abs_diff_eq!(back.lon, q.lon, epsilon = 1e-12);
        assert_abs_diff_eq!(back.lat, q.lat, epsilon = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn quantize_partitions_circle(b in 0.0f64..360.0) {
            let d = Direction::quantize(b);
            let center = d.index() as f64 * 45.0;
            let mut delta = (b - center).rem_euclid(360.0);
            if delta >= 180.0 { delta -= 360.0; }
            proptest::prop_assert!((-22.5..22.5).contains(&delta));
        }

        #[test]
        fn haversine_symmetric(a_lon in -180.0f64..180.0, a_lat in -89.0f64..89.0, b_lon in -180.0f64..180.0, b_lat in -89.0f64..89.0) {
            let a = p(a_lon, a_lat);
            let b = p(b_lon, b_lat);
            proptest::prop_assert_eq!(haversine(a, b), haversine(b, a));
        }
    }
}

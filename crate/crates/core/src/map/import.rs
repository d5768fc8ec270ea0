use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geo::{haversine, segments_intersect, point_in_polygon, GeoPoint, LocalFrame};

use super::{Aoi, CityMap, Junction, Poi, RoadSegment, Taxonomy};

/// Relative tolerance between a road's declared length and its polyline length.
const LENGTH_TOLERANCE: f64 = 0.01;

/// One line of the canonical map JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapRecord {
    Junction {
        id: String,
        lon: f64,
        lat: f64,
    },
    Road {
        id: String,
        name: String,
        from: String,
        to: String,
        polyline: Vec<[f64; 2]>,
        length_m: f64,
    },
    Poi {
        id: String,
        name: String,
        category: String,
        lon: f64,
        lat: f64,
    },
    Aoi {
        id: String,
        name: String,
        boundary: Vec<[f64; 2]>,
        pois: Vec<String>,
    },
}

pub fn import_map(path: impl AsRef<Path>) -> Result<CityMap, MapError> {
    import_map_with(path, Taxonomy::default())
}

pub fn import_map_with(path: impl AsRef<Path>, taxonomy: Taxonomy) -> Result<CityMap, MapError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MapError::Io { path: path.to_path_buf(), source })?;
    parse_map(BufReader::new(file), taxonomy)
}

fn point(line: usize, field: &'static str, lon: f64, lat: f64) -> Result<GeoPoint, MapError> {
    GeoPoint::new(lon, lat).map_err(|e| MapError::InvalidField { line, field, message: e.to_string() })
}

fn ring_points(line: usize, field: &'static str, raw: &[[f64; 2]]) -> Result<Vec<GeoPoint>, MapError> {
    raw.iter().map(|[lon, lat]| point(line, field, *lon, *lat)).collect()
}

/// Parse canonical map JSONL and validate referential integrity.
pub fn parse_map(reader: impl BufRead, taxonomy: Taxonomy) -> Result<CityMap, MapError> {
    let mut junctions = Vec::new();
    let mut roads: Vec<(usize, RoadSegment)> = Vec::new();
    let mut pois = Vec::new();
    let mut aois: Vec<(usize, Aoi)> = Vec::new();
    let mut seen: HashMap<&'static str, HashSet<String>> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| MapError::Malformed { line: lineno, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MapRecord =
            serde_json::from_str(&line).map_err(|e| MapError::Malformed { line: lineno, message: e.to_string() })?;
        let (kind, id) = match &record {
            MapRecord::Junction { id, .. } => ("junction", id),
            MapRecord::Road { id, .. } => ("road", id),
            MapRecord::Poi { id, .. } => ("poi", id),
            MapRecord::Aoi { id, .. } => ("aoi", id),
        };
        if id.is_empty() {
            return Err(MapError::InvalidField { line: lineno, field: "id", message: "empty id".into() });
        }
        if !seen.entry(kind).or_default().insert(id.clone()) {
            return Err(MapError::DuplicateId { line: lineno, kind, id: id.clone() });
        }
        match record {
            MapRecord::Junction { id, lon, lat } => {
                junctions.push(Junction { id, location: point(lineno, "lon/lat", lon, lat)?, incident_roads: Vec::new() });
            }
            MapRecord::Road { id, name, from, to, polyline, length_m } => {
                if polyline.len() < 2 {
                    return Err(MapError::InvalidField { line: lineno, field: "polyline", message: "needs at least 2 points".into() });
                }
                let polyline = ring_points(lineno, "polyline", &polyline)?;
                if !(length_m.is_finite() && length_m > 0.0) {
                    return Err(MapError::InvalidField { line: lineno, field: "length_m", message: format!("{length_m} is not a positive length") });
                }
                let arc: f64 = polyline.windows(2).map(|w| haversine(w[0], w[1])).sum();
                if (length_m - arc).abs() > LENGTH_TOLERANCE * arc {
                    return Err(MapError::InvalidField {
                        line: lineno,
                        field: "length_m",
                        message: format!("{length_m} differs from polyline length {arc:.3} by more than 1%"),
                    });
                }
                if from == to {
                    return Err(MapError::InvalidField { line: lineno, field: "to", message: "road starts and ends at the same junction".into() });
                }
                roads.push((lineno, RoadSegment { id, name, from, to, length_m, polyline }));
            }
            MapRecord::Poi { id, name, category, lon, lat } => {
                if !taxonomy.contains(&category) {
                    return Err(MapError::InvalidField { line: lineno, field: "category", message: format!("{category:?} is not in the taxonomy") });
                }
                pois.push(Poi { id, name, category, location: point(lineno, "lon/lat", lon, lat)?, address: None });
            }
            MapRecord::Aoi { id, name, boundary, pois: members } => {
                let mut ring = ring_points(lineno, "boundary", &boundary)?;
                if ring.len() > 1 && ring.first() == ring.last() {
                    ring.pop();
                }
                if ring.len() < 3 {
                    return Err(MapError::InvalidField { line: lineno, field: "boundary", message: "needs at least 3 distinct vertices".into() });
                }
                if self_intersects(&ring) {
                    return Err(MapError::InvalidField { line: lineno, field: "boundary", message: "polygon is self-intersecting".into() });
                }
                aois.push((lineno, Aoi { id, name, boundary: ring, pois: members, centroid: GeoPoint::new_unchecked(0.0, 0.0), address: None }));
            }
        }
    }

    let junction_loc: HashMap<&str, GeoPoint> = junctions.iter().map(|j| (j.id.as_str(), j.location)).collect();
    for (line, r) in &roads {
        for end in [&r.from, &r.to] {
            if !junction_loc.contains_key(end.as_str()) {
                return Err(MapError::DanglingReference { line: *line, kind: "road", id: r.id.clone(), target_kind: "junction", target: end.clone() });
            }
        }
        if junction_loc[r.from.as_str()] == junction_loc[r.to.as_str()] {
            return Err(MapError::InvalidField { line: *line, field: "to", message: "road endpoints share a location".into() });
        }
    }
    let poi_loc: HashMap<&str, GeoPoint> = pois.iter().map(|p| (p.id.as_str(), p.location)).collect();
    for (line, a) in &aois {
        let frame = LocalFrame::new(a.boundary[0]);
        let ring: Vec<(f64, f64)> = a.boundary.iter().map(|p| frame.to_xy(*p)).collect();
        for pid in &a.pois {
            let Some(loc) = poi_loc.get(pid.as_str()) else {
                return Err(MapError::DanglingReference { line: *line, kind: "aoi", id: a.id.clone(), target_kind: "poi", target: pid.clone() });
            };
            if !point_in_polygon(frame.to_xy(*loc), &ring) {
                return Err(MapError::InvalidField { line: *line, field: "pois", message: format!("poi {pid:?} lies outside the boundary") });
            }
        }
    }

    CityMap::assemble(pois, aois.into_iter().map(|(_, a)| a).collect(), junctions, roads.into_iter().map(|(_, r)| r).collect(), taxonomy)
}

fn self_intersects(ring: &[GeoPoint]) -> bool {
    let frame = LocalFrame::new(ring[0]);
    let pts: Vec<(f64, f64)> = ring.iter().map(|p| frame.to_xy(*p)).collect();
    let n = pts.len();
    for i in 0..n {
        let (a1, a2) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(a1, a2, pts[j], pts[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Canonical records for a map: junctions, roads, PoIs, AoIs, each sorted by id.
pub fn export_map(map: &CityMap) -> Vec<MapRecord> {
    let xy = |p: &GeoPoint| [p.lon, p.lat];
    map.junctions()
        .iter()
        .map(|j| MapRecord::Junction { id: j.id.clone(), lon: j.location.lon, lat: j.location.lat })
        .chain(map.roads().iter().map(|r| MapRecord::Road {
            id: r.id.clone(),
            name: r.name.clone(),
            from: r.from.clone(),
            to: r.to.clone(),
            polyline: r.polyline.iter().map(xy).collect(),
            length_m: r.length_m,
        }))
        .chain(map.pois().iter().map(|p| MapRecord::Poi {
            id: p.id.clone(),
            name: p.name.clone(),
            category: p.category.clone(),
            lon: p.location.lon,
            lat: p.location.lat,
        }))
        .chain(map.aois().iter().map(|a| MapRecord::Aoi {
            id: a.id.clone(),
            name: a.name.clone(),
            boundary: a.boundary.iter().map(xy).collect(),
            pois: a.pois.clone(),
        }))
        .collect()
}

pub fn write_map_jsonl(records: &[MapRecord], out: impl Write) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::fixtures;

    fn parse(s: &str) -> Result<CityMap, MapError> {
        parse_map(s.as_bytes(), Taxonomy::default())
    }

    #[test]
    fn dangling_junction_is_named_with_line() {
        let mut text = fixtures::toy_square();
        text.push_str(r#"{"type":"road","id":"R9","name":"Ghost Rd","from":"J1","to":"J9","polyline":[[116.3,39.9],[116.301,39.9]],"length_m":85.3}"#);
        text.push('\n');
        let err = parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("J9"), "{msg}");
        assert!(msg.contains("line 12"), "{msg}");
    }

    #[test]
    fn malformed_line_reports_field() {
        let text = "{\"type\":\"junction\",\"id\":\"J1\",\"lon\":1.0}\n";
        let msg = parse(text).unwrap_err().to_string();
        assert!(msg.contains("line 1") && msg.contains("lat"), "{msg}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = "{\"type\":\"junction\",\"id\":\"J1\",\"lon\":1.0,\"lat\":1.0}\n{\"type\":\"junction\",\"id\":\"J1\",\"lon\":1.0,\"lat\":1.1}\n";
        assert!(matches!(parse(text), Err(MapError::DuplicateId { line: 2, .. })));
    }

    #[test]
    fn length_mismatch_rejected() {
        let text = concat!(
            "{\"type\":\"junction\",\"id\":\"J1\",\"lon\":0.0,\"lat\":0.0}\n",
            "{\"type\":\"junction\",\"id\":\"J2\",\"lon\":0.001,\"lat\":0.0}\n",
            "{\"type\":\"road\",\"id\":\"R1\",\"name\":\"A\",\"from\":\"J1\",\"to\":\"J2\",\"polyline\":[[0.0,0.0],[0.001,0.0]],\"length_m\":150.0}\n"
        );
        let err = parse(text).unwrap_err();
        assert!(matches!(err, MapError::InvalidField { line: 3, field: "length_m", .. }), "{err}");
    }

    #[test]
    fn unknown_category_and_outside_poi_rejected() {
        let text = fixtures::toy_square().replace("\"category\":\"food\"", "\"category\":\"bakery\"");
        assert!(matches!(parse(&text), Err(MapError::InvalidField { field: "category", .. })));
        let text = fixtures::toy_square().replace("\"pois\":[\"P1\",\"P2\"]", "\"pois\":[\"P1\",\"P2\",\"P7\"]");
        assert!(matches!(parse(&text), Err(MapError::DanglingReference { target_kind: "poi", .. })));
    }

    #[test]
    fn isolated_junction_rejected() {
        let mut text = fixtures::toy_square();
        text.push_str("{\"type\":\"junction\",\"id\":\"J5\",\"lon\":116.31,\"lat\":39.91}\n");
        assert!(matches!(parse(&text), Err(MapError::IsolatedJunction(id)) if id == "J5"));
    }

    #[test]
    fn bowtie_boundary_rejected() {
        let text = "{\"type\":\"aoi\",\"id\":\"A1\",\"name\":\"x\",\"boundary\":[[0,0],[1,1],[1,0],[0,1]],\"pois\":[]}\n";
        assert!(matches!(parse(text), Err(MapError::InvalidField { field: "boundary", .. })));
    }

    #[test]
    fn same_bytes_same_map() {
        let a = parse(&fixtures::toy_square()).unwrap();
        let b = parse(&fixtures::toy_square()).unwrap();
        assert_eq!(a, b);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geo::{project_onto_segment, GeoPoint, LocalFrame};

use super::CityMap;

/// Perpendicular distances below this count as lying on the road.
pub const ON_ROAD_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    On,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::On => "on",
        }
    }

    pub fn flipped(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::On => Side::On,
        }
    }
}

/// Road-network address: `offset_m` meters along `road_name` from
/// `anchor_junction`, on `side` when walking away from the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressDescriptor {
    pub road_name: String,
    pub segment_id: String,
    pub anchor_junction: String,
    pub offset_m: f64,
    pub side: Side,
}

impl AddressDescriptor {
    /// Side relative to travelling the segment from its `from` junction to its `to` junction.
    pub fn side_heading_forward(&self, map: &CityMap) -> Option<Side> {
        let seg = map.road(&self.segment_id)?;
        Some(if self.anchor_junction == seg.from { self.side } else { self.side.flipped() })
    }

    pub fn describe(&self) -> String {
        match self.side {
            Side::On => format!("{}, {:.0} m from junction {}", self.road_name, self.offset_m, self.anchor_junction),
            side => format!(
                "{}, {:.0} m from junction {}, {} side",
                self.road_name,
                self.offset_m,
                self.anchor_junction,
                side.as_str()
            ),
        }
    }
}

/// Address of a location relative to its nearest road segment.
pub fn reconstruct_address(location: GeoPoint, map: &CityMap) -> Result<AddressDescriptor, MapError> {
    let frame = LocalFrame::new(location);
    let origin = (0.0, 0.0);
    // (distance, road slot, sub-segment, t)
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for (slot, road) in map.roads().iter().enumerate() {
        let pts: Vec<(f64, f64)> = road.polyline.iter().map(|p| frame.to_xy(*p)).collect();
        for (k, w) in pts.windows(2).enumerate() {
            let proj = project_onto_segment(origin, w[0], w[1]);
            if best.is_none_or(|b| proj.distance < b.0) {
                best = Some((proj.distance, slot, k, proj.t));
            }
        }
    }
    let (distance, slot, k, t) = best.ok_or(MapError::EmptyRoadNetwork)?;
    let road = &map.roads()[slot];

    let pts: Vec<(f64, f64)> = road.polyline.iter().map(|p| frame.to_xy(*p)).collect();
    let lens: Vec<f64> = pts.windows(2).map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt()).collect();
    let total: f64 = lens.iter().sum();
    let along: f64 = lens[..k].iter().sum::<f64>() + t * lens[k];
    let from_start = if total > 0.0 { along / total * road.length_m } else { 0.0 };
    // ties (within float noise) go to the `from` junction
    let (anchor, offset, forward) = if from_start <= road.length_m / 2.0 + 1e-6 {
        (road.from.clone(), from_start, true)
    } else {
        (road.to.clone(), (road.length_m - from_start).max(0.0), false)
    };

    let side = if distance < ON_ROAD_TOLERANCE_M {
        Side::On
    } else {
        let anchor_loc = map.junction(&anchor).map(|j| j.location).unwrap_or(road.polyline[0]);
        let af = LocalFrame::new(anchor_loc);
        let (a, b) = (af.to_xy(road.polyline[k]), af.to_xy(road.polyline[k + 1]));
        let (dx, dy) = if forward { (b.0 - a.0, b.1 - a.1) } else { (a.0 - b.0, a.1 - b.1) };
        let foot = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        let p = af.to_xy(location);
        let (vx, vy) = (p.0 - foot.0, p.1 - foot.1);
        let cross = dx * vy - dy * vx;
        if cross > 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    };

    Ok(AddressDescriptor { road_name: road.name.clone(), segment_id: road.id.clone(), anchor_junction: anchor, offset_m: offset, side })
}

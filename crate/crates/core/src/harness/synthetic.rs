//! Seeded stand-in mobility data for maps that come without real check-ins.

use std::collections::HashMap;

use rand::Rng;

use crate::map::{CityMap, EntityKind};
use crate::seed::rng_for;

use super::extract::normalize_name;
use super::mobility::{TrajectoryRecord, Visit};
use super::trajectory::{Agenda, AgendaItem};

const HOP_RADIUS_M: f64 = 1500.0;

/// `count` one-day trajectories of 3 to 8 visits. Each visit is a PoI within
/// 1.5 km of the previous one; only PoIs with a unique name are used so
/// a place can be recovered from its name.
pub fn synthetic_trajectories(map: &CityMap, count: usize, seed: u64) -> Vec<TrajectoryRecord> {
    let mut by_name: HashMap<String, usize> = HashMap::new();
    for p in map.pois() {
        *by_name.entry(normalize_name(&p.name)).or_default() += 1;
    }
    let usable: Vec<&str> =
        map.pois().iter().filter(|p| by_name[&normalize_name(&p.name)] == 1).map(|p| p.id.as_str()).collect();
    if usable.len() < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, "trajectory", i as u64);
            let len = rng.random_range(3..=8);
            let mut poi = usable[rng.random_range(0..usable.len())].to_string();
            let mut minute = rng.random_range(7 * 60..10 * 60);
            let day = 1 + i % 28;
            let mut visits = Vec::with_capacity(len);
            for _ in 0..len {
                visits.push(Visit { poi: poi.clone(), time: format!("2024-03-{day:02}T{:02}:{:02}:00", minute / 60, minute % 60) });
                let here = map.poi(&poi).map(|p| p.location).expect("usable ids come from the map");
                let near: Vec<String> = map
                    .nearby_entities(here, HOP_RADIUS_M, &[EntityKind::Poi])
                    .into_iter()
                    .map(|e| e.id)
                    .filter(|id| *id != poi && by_name[&normalize_name(&map.poi(id).unwrap().name)] == 1)
                    .collect();
                poi = if near.is_empty() {
                    usable[rng.random_range(0..usable.len())].to_string()
                } else {
                    near[rng.random_range(0..near.len())].clone()
                };
                minute = (minute + rng.random_range(30..150)).min(23 * 60 + 59);
            }
            // keep timestamps strictly increasing once the day is full
            visits.dedup_by(|b, a| b.time == a.time);
            TrajectoryRecord { subject: format!("u{i:04}"), visits }
        })
        .filter(|r| r.visits.len() >= 2)
        .collect()
}

/// One agenda per trajectory, naming only the category of each visit.
pub fn agendas_for(records: &[TrajectoryRecord], map: &CityMap) -> Vec<Agenda> {
    records
        .iter()
        .map(|r| Agenda {
            id: r.subject.clone(),
            date: r.visits.first().and_then(|v| v.time.get(..10)).map(str::to_string),
            items: r
                .visits
                .iter()
                .map(|v| AgendaItem {
                    time: v.time.get(11..16).unwrap_or("").to_string(),
                    action: format!("visit a {}", map.poi(&v.poi).map(|p| p.category.as_str()).unwrap_or("place")),
                })
                .collect(),
        })
        .collect()
}

mod common;

use std::collections::{HashSet, VecDeque};
use std::sync::OnceLock;

use urbanscope::harness::mock::{FixedModel, NavOracleModel, RandomChoiceModel};
use urbanscope::harness::{nav_prompt, parse_nav_prompt, run_navigation};
use urbanscope::map::synthetic::SyntheticCityConfig;
use urbanscope::nav::*;
use urbanscope::{CityMap, RoadGraph};

use common::{dist, RefGraph};

struct Fixture {
    map: CityMap,
    graph: RoadGraph,
    suite: Vec<NavTask>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let map = SyntheticCityConfig::with_entity_count(5000, 7).build().unwrap();
        let graph = RoadGraph::from_map(&map);
        let suite = gen_nav_suite(&map, &graph, &NavSuiteConfig::default()).unwrap();
        Fixture { map, graph, suite }
    })
}

/// Hops from the start AoI's nearest junction to any junction within the
/// success radius of the destination centroid, by breadth-first search.
fn bfs_min_steps(map: &CityMap, g: &RefGraph, task: &NavTask) -> Option<usize> {
    let start = g.nearest_junction(map.aoi(&task.start)?.centroid);
    let dest = map.aoi(&task.dest)?.centroid;
    let goal = |n: usize| dist(g.loc[n], dest) <= 500.0;
    if goal(start) {
        return Some(0);
    }
    let mut depth = vec![usize::MAX; g.ids.len()];
    depth[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(n) = q.pop_front() {
        for (m, ..) in &g.adj[n] {
            if depth[*m] == usize::MAX {
                depth[*m] = depth[n] + 1;
                if goal(*m) {
                    return Some(depth[*m]);
                }
                q.push_back(*m);
            }
        }
    }
    None
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

#[test]
fn suite_has_the_configured_shape() {
    let f = fixture();
    assert_eq!(f.suite.len(), 21);
    let steps: Vec<usize> = f.suite.iter().map(|t| t.min_steps).collect();
    let mean = steps.iter().sum::<usize>() as f64 / steps.len() as f64;
    assert!((4.0..=5.0).contains(&mean), "mean min_steps {mean}");
    let values: HashSet<usize> = steps.iter().copied().collect();
    assert!((1..=6).all(|k| values.contains(&k)), "{steps:?}");
    assert!(steps.iter().all(|s| (1..=6).contains(s)));
    let ids: HashSet<&str> = f.suite.iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids.len(), 21);
    assert!(f.suite.iter().all(|t| t.start != t.dest));
}

#[test]
fn min_steps_match_breadth_first_search() {
    let f = fixture();
    let g = RefGraph::new(&f.map);
    for t in &f.suite {
        assert_eq!(bfs_min_steps(&f.map, &g, t), Some(t.min_steps), "{}", t.id);
    }
}

#[test]
fn oracle_reaches_every_destination_in_min_steps() {
    let f = fixture();
    for t in &f.suite {
        let goal = Goal::new(t, &f.map, &f.graph).unwrap();
        let r = run_episode(t, &f.map, |obs, st| oracle_agent(obs, st, &f.map, &f.graph, &goal)).unwrap();
        assert!(r.success, "{}", t.id);
        assert_eq!(r.steps, t.min_steps, "{}", t.id);
        assert_eq!(r.invalid_actions, 0);
        assert_eq!(r.log.len(), r.steps);
        assert!(r.log.last().unwrap().distance_to_dest_m <= SUCCESS_RADIUS_M);
    }
}

#[test]
fn failed_episodes_report_thirty_steps() {
    let f = fixture();
    let t = &f.suite[0];
    // never answers
    let r = run_episode(t, &f.map, |_, _| None).unwrap();
    assert!(!r.success);
    assert_eq!(r.steps, MAX_STEPS);
    assert_eq!(r.invalid_actions, MAX_STEPS);
    // walks back and forth on the first lane, away from a goal it cannot reach that way
    let far = f.suite.iter().max_by_key(|t| t.min_steps).unwrap();
    let bounce = run_episode(far, &f.map, |obs, _| obs.candidates.first().cloned()).unwrap();
    if !bounce.success {
        assert_eq!(bounce.steps, MAX_STEPS);
        assert_eq!(bounce.log.len(), MAX_STEPS);
    }
    let bogus = LaneChoice { road_name: "Nowhere Road".into(), direction: urbanscope::Direction::N };
    let r = run_episode(t, &f.map, |_, _| Some(bogus.clone())).unwrap();
    assert_eq!((r.success, r.steps, r.invalid_actions), (false, MAX_STEPS, MAX_STEPS));
}

#[test]
fn finished_episodes_reject_further_steps() {
    let f = fixture();
    let t = &f.suite[0];
    let mut st = start_episode(t, &f.map).unwrap();
    while !st.done {
        st = step(&st, None, t, &f.map).unwrap();
    }
    assert!(matches!(step(&st, None, t, &f.map), Err(urbanscope::NavError::EpisodeDone)));
    assert!(matches!(observe(&st, t, &f.map), Err(urbanscope::NavError::EpisodeDone)));
}

#[test]
fn observations_round_trip_through_the_prompt() {
    let f = fixture();
    for t in &f.suite {
        let st = start_episode(t, &f.map).unwrap();
        let obs = observe(&st, t, &f.map).unwrap();
        assert_eq!(obs.hint.len(), 2);
        assert!(!obs.candidates.is_empty());
        assert_eq!(parse_nav_prompt(&nav_prompt(&obs)).as_ref(), Some(&obs));
    }
}

#[test]
fn model_driven_navigation_through_the_harness() {
    let f = fixture();
    let oracle = NavOracleModel::new(&f.suite, &f.map, &f.graph).unwrap();
    let res = rt().block_on(run_navigation(&f.suite, &f.map, &oracle, 8)).unwrap();
    assert_eq!(res.summary.success_rate, 1.0);
    for (r, t) in res.episodes.iter().zip(&f.suite) {
        assert_eq!(r.steps, t.min_steps);
    }
    let mean = f.suite.iter().map(|t| t.min_steps as f64).sum::<f64>() / 21.0;
    assert!((res.summary.mean_steps - mean).abs() < 1e-12);

    let silent = rt().block_on(run_navigation(&f.suite, &f.map, &FixedModel::new("I am not sure."), 8)).unwrap();
    assert_eq!(silent.summary.success_rate, 0.0);
    assert_eq!(silent.summary.mean_steps, MAX_STEPS as f64);

    let a = rt().block_on(run_navigation(&f.suite, &f.map, &RandomChoiceModel::new(3), 1)).unwrap();
    let b = rt().block_on(run_navigation(&f.suite, &f.map, &RandomChoiceModel::new(3), 8)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn suite_targets_cover_small_and_large_counts() {
    assert_eq!(min_step_targets(21, 4.5, 6).iter().sum::<usize>(), 95);
    assert_eq!(min_step_targets(3, 4.5, 6), vec![1, 2, 3]);
    let t = min_step_targets(100, 4.5, 6);
    assert_eq!(t.len(), 100);
    assert!((t.iter().sum::<usize>() as f64 / 100.0 - 4.5).abs() < 0.01);
    assert!(t.iter().all(|&s| (1..=6).contains(&s)));
}

#[test]
fn suite_generation_is_seeded() {
    let f = fixture();
    let again = gen_nav_suite(&f.map, &f.graph, &NavSuiteConfig::default()).unwrap();
    assert_eq!(again, f.suite);
    let other = gen_nav_suite(&f.map, &f.graph, &NavSuiteConfig { seed: 9, ..NavSuiteConfig::default() }).unwrap();
    assert_ne!(other, f.suite);
}

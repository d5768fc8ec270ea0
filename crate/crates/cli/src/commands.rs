use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use urbanscope::eval::{dedupe_against_training, export_benchmark, gen_benchmark, read_benchmark, BenchmarkSpec, EvalQuestion};
use urbanscope::harness::mock::{LookupModel, NavOracleModel};
use urbanscope::harness::{
    agendas_for, disjoint_pool, mobility_prompts, read_agendas, read_trajectories, report_csv, run_benchmark,
    run_mobility_prediction, run_navigation, run_trajectory_generation, summary_csv, synthetic_trajectories,
    trajectory_prompt, Agenda, BenchmarkRun, ChatModel, EvalResult, MobilityResult, TrajectoryGenResult,
    TrajectoryRecord,
};
use urbanscope::instruct::{
    export_dataset, gen_cityqa, gen_cityreasoning, gen_citywalk, read_dataset, CityQaConfig, CityReasoningConfig,
    CityWalkConfig, InstructionSample, TemplateSet,
};
use urbanscope::map::synthetic::SyntheticCityConfig;
use urbanscope::map::{export_map, import_map_with, write_map_jsonl, Taxonomy};
use urbanscope::nav::{gen_nav_suite, EpisodeResult, NavSuiteConfig, NavTask, SuiteSummary};
use urbanscope::seed::sub_seed;
use urbanscope::swft::{compute_weights, export_weighted_dataset, flag_anomalies, read_losses, write_weights, MIN_ANOMALY_RECORDS};
use urbanscope::{CityMap, RoadGraph};

use crate::config::RunConfig;
use crate::endpoint::{Counted, ModelChoice};
use crate::error::CliError;
use crate::io::{read_json, read_jsonl, require, write_json, write_jsonl, write_text};
use crate::manifest::ManifestBuilder;

/// Exemplar questions generated per task type for few-shot prompting.
const EXEMPLARS_PER_TYPE: usize = 5;

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::data(cfg.out.display(), e))?;
    Ok(&cfg.out)
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Data(format!("tokio runtime: {e}")))
}

fn load_taxonomy(cfg: &RunConfig) -> Result<Taxonomy, CliError> {
    match &cfg.taxonomy {
        Some(p) => read_json(p),
        None => Ok(Taxonomy::default()),
    }
}

fn load_map(cfg: &RunConfig, manifest: &mut ManifestBuilder) -> Result<CityMap, CliError> {
    let path = cfg.map_path();
    require(&path, "import-map")?;
    manifest.input(&path)?;
    let started = Instant::now();
    let map = import_map_with(&path, load_taxonomy(cfg)?)?;
    log::info!(
        "map {}: {} junctions, {} roads, {} PoIs, {} AoIs ({:.1}s)",
        path.display(),
        map.junctions().len(),
        map.roads().len(),
        map.pois().len(),
        map.aois().len(),
        started.elapsed().as_secs_f64()
    );
    Ok(map)
}

#[derive(Serialize)]
struct MapStats {
    junctions: usize,
    roads: usize,
    pois: usize,
    aois: usize,
    entities: usize,
    categories: BTreeMap<String, usize>,
}

pub fn import_map(cfg: &RunConfig, synthetic: Option<usize>) -> Result<(), CliError> {
    let out = out_dir(cfg)?;
    let synthetic = synthetic.or(cfg.synthetic_entities).filter(|_| cfg.map.is_none());
    let mut manifest;
    let map = match synthetic {
        Some(n) => {
            let seed = cfg.require_seed()?;
            manifest = ManifestBuilder::new("import-map", Some(seed), json!({ "synthetic_entities": n }));
            SyntheticCityConfig::with_entity_count(n, seed).build()?
        }
        None => {
            let path = cfg.map.clone().ok_or_else(|| {
                CliError::Config("map: required (pass --map, or --synthetic N for a generated city)".into())
            })?;
            manifest = ManifestBuilder::new("import-map", cfg.seed, json!({}));
            manifest.input(&path)?;
            if let Some(t) = &cfg.taxonomy {
                manifest.input(t)?;
            }
            import_map_with(&path, load_taxonomy(cfg)?)?
        }
    };
    let map_out = out.join("map.jsonl");
    let file = std::fs::File::create(&map_out).map_err(|e| CliError::data(map_out.display(), e))?;
    write_map_jsonl(&export_map(&map), file).map_err(|e| CliError::data(map_out.display(), e))?;
    let mut categories = BTreeMap::new();
    for p in map.pois() {
        *categories.entry(p.category.clone()).or_default() += 1;
    }
    let stats = MapStats {
        junctions: map.junctions().len(),
        roads: map.roads().len(),
        pois: map.pois().len(),
        aois: map.aois().len(),
        entities: map.entity_count(),
        categories,
    };
    let stats_out = out.join("map_stats.json");
    write_json(&stats_out, &stats)?;
    manifest.output(map_out);
    manifest.output(stats_out);
    manifest.write(out)?;
    log::info!("imported {} entities into {}", stats.entities, out.display());
    Ok(())
}

#[derive(Serialize)]
struct SynthStats {
    cityqa: usize,
    citywalk: usize,
    cityreasoning: usize,
    cityreasoning_mean_rounds: f64,
    trajectories: usize,
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let out = out_dir(cfg)?;
    let mut manifest = ManifestBuilder::new("synth", Some(seed), serde_json::to_value(&cfg.synth).unwrap_or_default());
    let map = load_map(cfg, &mut manifest)?;
    let graph = RoadGraph::from_map(&map);
    let templates = match &cfg.synth.templates {
        Some(p) => {
            manifest.input(p)?;
            TemplateSet::load(p)?
        }
        None => TemplateSet::default(),
    };
    let s = &cfg.synth;
    let timed = |what: &str, started: Instant, n: usize| log::info!("{what}: {n} samples ({:.1}s)", started.elapsed().as_secs_f64());

    let t = Instant::now();
    let qa = gen_cityqa(&map, &templates, &CityQaConfig::new(s.cityqa, seed))?;
    timed("CityQA", t, qa.len());
    let t = Instant::now();
    let walk = gen_citywalk(
        &map,
        &graph,
        &templates,
        &CityWalkConfig { min_route_m: s.min_route_m, max_route_m: s.max_route_m, ..CityWalkConfig::new(s.citywalk, seed) },
    )?;
    timed("CityWalk", t, walk.len());
    let t = Instant::now();
    let reasoning = gen_cityreasoning(
        &graph,
        &templates,
        &CityReasoningConfig {
            two_round_fraction: s.two_round_fraction,
            min_route_m: s.min_route_m,
            max_route_m: s.max_route_m,
            ..CityReasoningConfig::new(s.cityreasoning, seed)
        },
    )?;
    timed("CityReasoning", t, reasoning.len());
    let trajectories = synthetic_trajectories(&map, s.trajectories, seed);
    let agendas = agendas_for(&trajectories, &map);

    for (name, samples) in [("cityqa.jsonl", &qa), ("citywalk.jsonl", &walk), ("cityreasoning.jsonl", &reasoning)] {
        let p = out.join(name);
        export_dataset(samples, &p)?;
        manifest.output(p);
    }
    if s.trajectories > 0 {
        let tp = out.join("trajectories.jsonl");
        write_jsonl(&tp, &trajectories)?;
        let ap = out.join("agendas.jsonl");
        write_jsonl(&ap, &agendas)?;
        manifest.output(tp);
        manifest.output(ap);
    }
    let rounds = reasoning.iter().map(InstructionSample::rounds).sum::<usize>() as f64 / reasoning.len().max(1) as f64;
    let stats = SynthStats {
        cityqa: qa.len(),
        citywalk: walk.len(),
        cityreasoning: reasoning.len(),
        cityreasoning_mean_rounds: rounds,
        trajectories: trajectories.len(),
    };
    let sp = out.join("synth_stats.json");
    write_json(&sp, &stats)?;
    manifest.output(sp);
    manifest.write(out)?;
    Ok(())
}

#[derive(Serialize)]
struct BenchStats {
    questions: usize,
    per_group: BTreeMap<String, usize>,
    per_task: BTreeMap<String, usize>,
    removed_by_dedupe: usize,
    exemplars: usize,
    nav_tasks: usize,
    nav_mean_min_steps: f64,
}

fn training_sets(cfg: &RunConfig, manifest: &mut ManifestBuilder) -> Result<Vec<InstructionSample>, CliError> {
    let paths: Vec<PathBuf> = if cfg.inputs.training.is_empty() {
        ["citywalk.jsonl", "cityreasoning.jsonl"].iter().map(|n| cfg.out.join(n)).filter(|p| p.exists()).collect()
    } else {
        cfg.inputs.training.clone()
    };
    let mut all = Vec::new();
    for p in &paths {
        require(p, "synth")?;
        manifest.input(p)?;
        all.extend(read_dataset(p)?);
    }
    if all.is_empty() {
        log::warn!("no training data found; leakage filtering is skipped");
    }
    Ok(all)
}

pub fn gen_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let out = out_dir(cfg)?;
    let spec = BenchmarkSpec { seed, ..cfg.benchmark.clone() };
    let nav_cfg = NavSuiteConfig { seed, ..cfg.nav.clone() };
    let mut manifest = ManifestBuilder::new("gen-eval", Some(seed), json!({ "benchmark": spec, "nav": nav_cfg }));
    let map = load_map(cfg, &mut manifest)?;
    let graph = RoadGraph::from_map(&map);
    let training = training_sets(cfg, &mut manifest)?;

    let t = Instant::now();
    let questions = gen_benchmark(&map, &graph, &spec, Some(&training))?;
    let (questions, dedupe) = dedupe_against_training(questions, &training);
    log::info!("benchmark: {} questions ({:.1}s)", questions.len(), t.elapsed().as_secs_f64());

    let pool_spec = BenchmarkSpec {
        seed: sub_seed(seed, "exemplars", 0),
        city_image_count: EXEMPLARS_PER_TYPE * spec.city_image_types.len(),
        urban_semantics_count: EXEMPLARS_PER_TYPE * spec.urban_semantics_types.len(),
        spatial_reasoning_count: EXEMPLARS_PER_TYPE * spec.spatial_reasoning_types.len(),
        ..spec.clone()
    };
    let mut pool = gen_benchmark(&map, &graph, &pool_spec, Some(&training))?;
    for q in &mut pool {
        q.id = format!("exemplar-{}", q.id);
    }
    let pool = disjoint_pool(pool, &questions);
    let suite = gen_nav_suite(&map, &graph, &nav_cfg)?;

    let bp = out.join("benchmark.jsonl");
    export_benchmark(&questions, &bp)?;
    let ep = out.join("exemplars.jsonl");
    export_benchmark(&pool, &ep)?;
    let np = out.join("nav_tasks.jsonl");
    write_jsonl(&np, &suite)?;
    let mut per_group = BTreeMap::new();
    let mut per_task = BTreeMap::new();
    for q in &questions {
        *per_group.entry(q.group.short().to_string()).or_default() += 1;
        *per_task.entry(q.task.clone()).or_default() += 1;
    }
    let stats = BenchStats {
        questions: questions.len(),
        per_group,
        per_task,
        removed_by_dedupe: dedupe.removed,
        exemplars: pool.len(),
        nav_tasks: suite.len(),
        nav_mean_min_steps: suite.iter().map(|t| t.min_steps as f64).sum::<f64>() / suite.len().max(1) as f64,
    };
    let sp = out.join("benchmark_stats.json");
    write_json(&sp, &stats)?;
    for p in [bp, ep, np, sp] {
        manifest.output(p);
    }
    manifest.write(out)?;
    Ok(())
}

/// Full output of `run-eval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunResults {
    pub benchmark: EvalResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobility: Option<MobilityResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryGenResult>,
}

/// Echo-truth mock that also replays the reference trajectory for each agenda.
fn truth_model(
    questions: &[EvalQuestion],
    mobility: &[urbanscope::harness::MobilityItem],
    agendas: &[Agenda],
    reference: &[TrajectoryRecord],
    map: Option<&CityMap>,
) -> LookupModel {
    let mut m = LookupModel::echo_truth(questions);
    m.add_mobility(mobility);
    if let Some(map) = map {
        for a in agendas {
            let Some(r) = reference.iter().find(|r| r.subject == a.id) else { continue };
            let reply: Vec<String> = r
                .visits
                .iter()
                .filter_map(|v| Some(format!("{} | {}", v.time.get(11..16)?, map.poi(&v.poi)?.name)))
                .collect();
            m.insert(trajectory_prompt(a), reply.join("\n"));
        }
    }
    m
}

pub fn run_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let out = out_dir(cfg)?;
    let choice = ModelChoice::from_endpoint(&cfg.endpoint)?;
    let mut manifest = ManifestBuilder::new(
        "run-eval",
        Some(seed),
        json!({ "model": cfg.endpoint.model, "params": cfg.endpoint.params, "shots": cfg.shots }),
    );
    let bp = cfg.input(&cfg.inputs.benchmark, "benchmark.jsonl");
    require(&bp, "gen-eval")?;
    manifest.input(&bp)?;
    let questions = read_benchmark(&bp)?;
    let pool = if cfg.shots > 0 {
        let ep = cfg.input(&cfg.inputs.exemplars, "exemplars.jsonl");
        require(&ep, "gen-eval")?;
        manifest.input(&ep)?;
        read_benchmark(&ep)?
    } else {
        Vec::new()
    };

    // composite tasks run when their inputs are present
    let tp = cfg.input(&cfg.inputs.trajectories, "trajectories.jsonl");
    let ap = cfg.input(&cfg.inputs.agendas, "agendas.jsonl");
    let composite = tp.exists();
    let map = if composite { Some(load_map(cfg, &mut manifest)?) } else { None };
    let (reference, mobility_items, agendas) = match &map {
        Some(map) => {
            manifest.input(&tp)?;
            let reference = read_trajectories(&tp, map)?;
            let items = mobility_prompts(&reference, map, seed)?;
            let agendas = if ap.exists() {
                manifest.input(&ap)?;
                read_agendas(&ap)?
            } else {
                Vec::new()
            };
            (reference, items, agendas)
        }
        None => Default::default(),
    };

    let model: Box<dyn ChatModel> = match choice.generic()? {
        Some(m) => m,
        None => Box::new(truth_model(&questions, &mobility_items, &agendas, &reference, map.as_ref())),
    };
    let counted = Counted::new(model.as_ref());
    let k = cfg.endpoint.max_in_flight;
    let run = BenchmarkRun { params: cfg.endpoint.params.clone(), shots: cfg.shots, seed, max_in_flight: k };
    let rt = runtime()?;
    let t = Instant::now();
    let benchmark = rt.block_on(run_benchmark(&questions, &pool, &counted, &run))?;
    log::info!("benchmark: {} questions answered ({:.1}s)", questions.len(), t.elapsed().as_secs_f64());
    let mobility = (!mobility_items.is_empty()).then(|| rt.block_on(run_mobility_prediction(&mobility_items, &counted, k)));
    let trajectory = match &map {
        Some(map) if !agendas.is_empty() => Some(rt.block_on(run_trajectory_generation(&agendas, &reference, map, &counted, k))?),
        _ => None,
    };
    counted.check()?;

    for g in &benchmark.per_group {
        log::info!("{}: accuracy {:.4} over {} task types", g.group.short(), g.accuracy, g.tasks);
    }
    let results = RunResults { benchmark, mobility, trajectory };
    let rp = out.join("results.json");
    write_json(&rp, &results)?;
    manifest.output(rp);
    manifest.write(out)?;
    Ok(())
}

#[derive(Serialize)]
struct EpisodeRow<'a> {
    task_id: &'a str,
    success: bool,
    steps: usize,
    min_steps: usize,
    invalid_actions: usize,
}

pub fn navigate(cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.seed;
    let out = out_dir(cfg)?;
    let choice = ModelChoice::from_endpoint(&cfg.endpoint)?;
    let mut manifest = ManifestBuilder::new("navigate", seed, json!({ "model": cfg.endpoint.model }));
    let map = load_map(cfg, &mut manifest)?;
    let graph = RoadGraph::from_map(&map);
    let np = cfg.input(&cfg.inputs.nav_tasks, "nav_tasks.jsonl");
    require(&np, "gen-eval")?;
    manifest.input(&np)?;
    let tasks: Vec<NavTask> = read_jsonl(&np)?;
    let model: Box<dyn ChatModel> = match choice.generic()? {
        Some(m) => m,
        None => Box::new(NavOracleModel::new(&tasks, &map, &graph)?),
    };
    let counted = Counted::new(model.as_ref());
    let res = runtime()?.block_on(run_navigation(&tasks, &map, &counted, cfg.endpoint.max_in_flight))?;
    counted.check()?;

    let steps: Vec<_> = res.episodes.iter().flat_map(|e: &EpisodeResult| e.log.iter()).collect();
    let lp = out.join("nav_episodes.jsonl");
    write_jsonl(&lp, &steps)?;
    let rows: Vec<EpisodeRow> = res
        .episodes
        .iter()
        .zip(&tasks)
        .map(|(e, t)| EpisodeRow {
            task_id: &e.task_id,
            success: e.success,
            steps: e.steps,
            min_steps: t.min_steps,
            invalid_actions: e.invalid_actions,
        })
        .collect();
    let rp = out.join("nav_results.jsonl");
    write_jsonl(&rp, &rows)?;
    let sp = out.join("nav_summary.json");
    let summary: SuiteSummary = res.summary;
    write_json(&sp, &summary)?;
    log::info!("navigation: success rate {:.3}, mean steps {:.2}", summary.success_rate, summary.mean_steps);
    for p in [lp, rp, sp] {
        manifest.output(p);
    }
    manifest.write(out)?;
    Ok(())
}

#[derive(Serialize)]
struct AnomalyReport {
    ratio_quantile: f64,
    records: usize,
    flagged: Vec<String>,
}

pub fn swft_weights(cfg: &RunConfig, losses: Option<PathBuf>, dataset: Option<PathBuf>) -> Result<(), CliError> {
    let out = out_dir(cfg)?;
    let q = cfg.swft.ratio_quantile;
    let mut manifest = ManifestBuilder::new("swft-weights", cfg.seed, json!({ "ratio_quantile": q }));
    let lp = losses.or_else(|| cfg.inputs.losses.clone()).unwrap_or_else(|| cfg.out.join("losses.jsonl"));
    require(&lp, "an external loss computation")?;
    manifest.input(&lp)?;
    let records = read_losses(&lp)?;
    let weights = compute_weights(&records)?;
    let flagged = if records.len() >= MIN_ANOMALY_RECORDS {
        flag_anomalies(&records, q)?
    } else {
        log::warn!("{} loss records; anomaly flagging needs at least {MIN_ANOMALY_RECORDS}", records.len());
        Vec::new()
    };
    let wp = out.join("weights.jsonl");
    write_weights(&weights, &wp)?;
    let ap = out.join("anomalies.json");
    write_json(&ap, &AnomalyReport { ratio_quantile: q, records: records.len(), flagged })?;
    manifest.output(wp);
    manifest.output(ap);
    if let Some(dp) = dataset.or_else(|| cfg.inputs.dataset.clone()) {
        require(&dp, "synth")?;
        manifest.input(&dp)?;
        let samples = read_dataset(&dp)?;
        let op = out.join("weighted_dataset.jsonl");
        export_weighted_dataset(&samples, &weights, &op)?;
        manifest.output(op);
    }
    manifest.write(out)?;
    log::info!("wrote {} weights", weights.len());
    Ok(())
}

fn composite_csv(results: &[RunResults]) -> String {
    let mut s = String::from("model,shots,mobility_acc_multi,mobility_acc_gen,jsd_radius,jsd_distance,jsd_dailyloc\n");
    let f = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    for r in results {
        let m = r.mobility.as_ref();
        let t = r.trajectory.as_ref();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.benchmark.config.model,
            r.benchmark.config.shots,
            f(m.map(|m| m.acc_multi)),
            f(m.map(|m| m.acc_gen)),
            f(t.map(|t| t.jsd_radius)),
            f(t.map(|t| t.jsd_distance)),
            f(t.map(|t| t.jsd_dailyloc)),
        ));
    }
    s
}

pub fn report(cfg: &RunConfig, results: Vec<PathBuf>) -> Result<(), CliError> {
    let out = out_dir(cfg)?;
    let paths = if !results.is_empty() {
        results
    } else if !cfg.inputs.results.is_empty() {
        cfg.inputs.results.clone()
    } else {
        vec![cfg.out.join("results.json")]
    };
    let mut manifest = ManifestBuilder::new("report", cfg.seed, json!({}));
    let mut all = Vec::new();
    for p in &paths {
        require(p, "run-eval")?;
        manifest.input(p)?;
        all.push(read_json::<RunResults>(p)?);
    }
    let evals: Vec<EvalResult> = all.iter().map(|r| r.benchmark.clone()).collect();
    let files = [
        ("report.csv", report_csv(&evals)),
        ("summary.csv", summary_csv(&evals)),
        ("composite.csv", composite_csv(&all)),
    ];
    for (name, text) in files {
        let p = out.join(name);
        write_text(&p, &text)?;
        manifest.output(p);
    }
    manifest.write(out)?;
    Ok(())
}

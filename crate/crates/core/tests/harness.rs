use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use async_trait::async_trait;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use urbanscope::error::HarnessError;
use urbanscope::eval::{gen_benchmark, BenchmarkSpec, EvalQuestion, Group};
use urbanscope::harness::mock::{FixedModel, LookupModel, RandomChoiceModel};
use urbanscope::harness::*;
use urbanscope::instruct::Message;
use urbanscope::map::synthetic::SyntheticCityConfig;
use urbanscope::seed::sub_seed;
use urbanscope::{CityMap, RoadGraph};

struct Fixture {
    map: CityMap,
    questions: Vec<EvalQuestion>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let map = SyntheticCityConfig::with_entity_count(5000, 11).build().unwrap();
        let graph = RoadGraph::from_map(&map);
        let questions = gen_benchmark(&map, &graph, &BenchmarkSpec::with_seed(3), None).unwrap();
        Fixture { map, questions }
    })
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

#[test]
fn echo_truth_scores_one_on_every_group() {
    let f = fixture();
    let model = LookupModel::echo_truth(&f.questions);
    let res = rt().block_on(run_benchmark(&f.questions, &[], &model, &BenchmarkRun::default())).unwrap();
    for g in Group::ALL {
        assert_eq!(res.group_accuracy(g), Some(1.0), "{g:?}");
    }
    assert!(res.per_task.iter().all(|t| t.abstained == 0 && t.wrong == 0));
}

#[test]
fn fixed_answer_scores_chance() {
    let f = fixture();
    assert!(f.questions.len() >= 1000);
    let res = rt().block_on(run_benchmark(&f.questions, &[], &FixedModel::new("A"), &BenchmarkRun::default())).unwrap();
    let n = f.questions.len() as f64;
    let ps: Vec<f64> = f.questions.iter().map(|q| 1.0 / q.choices.len() as f64).collect();
    let expected = ps.iter().sum::<f64>() / n;
    let sigma = ps.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt() / n;
    let observed = res.transcripts.iter().filter(|t| t.correct).count() as f64 / n;
    assert!((observed - expected).abs() <= 3.0 * sigma, "observed {observed}, expected {expected} ± {}", 3.0 * sigma);
    assert!(res.transcripts.iter().all(|t| t.extracted == Some(0)));
}

/// Delegates after a prompt-dependent delay so completions arrive out of order.
struct Jittered<M>(M);

#[async_trait]
impl<M: ChatModel> ChatModel for Jittered<M> {
    fn name(&self) -> &str {
        self.0.name()
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        let key = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        tokio::time::sleep(Duration::from_micros(sub_seed(1, key, 0) % 2000)).await;
        self.0.complete(messages).await
    }
}

#[test]
fn results_do_not_depend_on_concurrency() {
    let f = fixture();
    let qs = &f.questions[..400];
    let pool = disjoint_pool(f.questions[400..].to_vec(), qs);
    let pool = &pool[..];
    let model = Jittered(RandomChoiceModel::new(5));
    let run = |k: usize| {
        let cfg = BenchmarkRun { shots: 2, seed: 4, max_in_flight: k, ..BenchmarkRun::default() };
        let res = rt().block_on(run_benchmark(qs, pool, &model, &cfg)).unwrap();
        (serde_json::to_string(&res).unwrap(), report_csv(std::slice::from_ref(&res)))
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn few_shot_exemplars_must_not_overlap_the_questions() {
    let f = fixture();
    let qs = &f.questions[..20];
    let run = BenchmarkRun { shots: 3, ..BenchmarkRun::default() };
    let err = rt().block_on(run_benchmark(qs, &f.questions[10..60], &FixedModel::new("A"), &run)).unwrap_err();
    assert!(matches!(err, HarnessError::ExemplarOverlap(_)), "{err}");

    let pool = disjoint_pool(f.questions[10..60].to_vec(), qs);
    assert!(pool.iter().all(|e| qs.iter().all(|q| q.id != e.id && q.question != e.question)));
    assert!(rt().block_on(run_benchmark(qs, &pool, &FixedModel::new("A"), &run)).is_ok());

    let msgs = render_prompt(&qs[0], &[&f.questions[100], &f.questions[101], &f.questions[102]]);
    assert_eq!(msgs.len(), 7);
    assert!(msgs[1].content.starts_with("The answer is "));
}

struct Failing;

#[async_trait]
impl ChatModel for Failing {
    fn name(&self) -> &str {
        "failing"
    }

    async fn complete(&self, _: &[Message]) -> Result<String, HarnessError> {
        Err(HarnessError::Transport("connection refused".into()))
    }
}

#[test]
fn model_errors_count_as_abstentions() {
    let f = fixture();
    let res = rt().block_on(run_benchmark(&f.questions[..50], &[], &Failing, &BenchmarkRun::default())).unwrap();
    assert!(res.per_task.iter().all(|t| t.abstain_rate == 1.0 && t.accuracy == 0.0));
    assert!(res.transcripts.iter().all(|t| t.error.is_some() && t.response.is_none()));
}

#[test]
fn mobility_prediction_chance_and_ceiling() {
    let f = fixture();
    let records = synthetic_trajectories(&f.map, 1500, 2);
    let items = mobility_prompts(&records, &f.map, 6).unwrap();
    assert_eq!(items.len(), 1500);
    assert!(items.iter().all(|i| i.choices.len() == 9 && i.choices[i.answer] == i.target_name));

    let res = rt().block_on(run_mobility_prediction(&items, &RandomChoiceModel::new(8), 8));
    let p = 1.0 / 9.0;
    let sigma = (p * (1.0 - p) / items.len() as f64).sqrt();
    assert!((res.acc_multi - p).abs() <= 3.0 * sigma, "acc_multi {}", res.acc_multi);

    let mut oracle = LookupModel::new("oracle");
    oracle.add_mobility(&items);
    let res = rt().block_on(run_mobility_prediction(&items, &oracle, 8));
    assert_eq!((res.acc_multi, res.acc_gen), (1.0, 1.0));
}

#[test]
fn trajectory_generation_reproducing_the_reference_has_zero_divergence() {
    let f = fixture();
    let reference = synthetic_trajectories(&f.map, 200, 12);
    let agendas = agendas_for(&reference, &f.map);
    let mut model = LookupModel::new("replay");
    for (a, r) in agendas.iter().zip(&reference) {
        let reply: Vec<String> =
            r.visits.iter().map(|v| format!("{} | {}", &v.time[11..16], f.map.poi(&v.poi).unwrap().name)).collect();
        model.insert(trajectory_prompt(a), reply.join("\n"));
    }
    let res = rt().block_on(run_trajectory_generation(&agendas, &reference, &f.map, &model, 4)).unwrap();
    assert_eq!(res.unmatched_places, 0);
    assert_eq!(res.generated, reference);
    assert!(res.jsd_radius.abs() < 1e-9 && res.jsd_distance.abs() < 1e-9 && res.jsd_dailyloc.abs() < 1e-9);

    let other = synthetic_trajectories(&f.map, 200, 99);
    let res = rt().block_on(run_trajectory_generation(&agendas, &other, &f.map, &model, 4)).unwrap();
    assert!(res.jsd_distance > 0.0);

    let res = rt().block_on(run_trajectory_generation(&agendas, &reference, &f.map, &FixedModel::new("08:00 | Nowhere"), 4)).unwrap();
    assert_eq!(res.unmatched_places, 200);
    assert_eq!((res.jsd_radius, res.jsd_distance, res.jsd_dailyloc), (1.0, 1.0, 1.0));
}

// --- HTTP client against a local server ---

#[derive(Default)]
struct ServerState {
    calls: Mutex<HashMap<String, usize>>,
    last_body: Mutex<Option<Value>>,
    last_auth: Mutex<Option<String>>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

async fn handler(
    State(st): State<Arc<ServerState>>,
    Path(mode): Path<String>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, String) {
    let n = {
        let mut calls = st.calls.lock().unwrap();
        let c = calls.entry(mode.clone()).or_default();
        *c += 1;
        *c
    };
    *st.last_body.lock().unwrap() = Some(body.clone());
    *st.last_auth.lock().unwrap() = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
    let ok = || {
        let last = body["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str()).unwrap_or("");
        (StatusCode::OK, json!({"choices": [{"message": {"role": "assistant", "content": format!("echo: {last}")}}]}).to_string())
    };
    match mode.as_str() {
        "ok" => ok(),
        "flaky" if n <= 2 => (StatusCode::INTERNAL_SERVER_ERROR, "overloaded".into()),
        "flaky" => ok(),
        "limited" if n == 1 => (StatusCode::TOO_MANY_REQUESTS, "slow down".into()),
        "limited" => ok(),
        "down" => (StatusCode::SERVICE_UNAVAILABLE, "down".into()),
        "bad" => (StatusCode::BAD_REQUEST, "unknown model".into()),
        "garbage" => (StatusCode::OK, "<html>not json</html>".into()),
        "empty" => (StatusCode::OK, json!({"choices": []}).to_string()),
        "gate" => {
            let now = st.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            st.peak.fetch_max(now, Ordering::SeqCst);
            tokio::time::sleep(Duration::from_millis(10)).await;
            st.in_flight.fetch_sub(1, Ordering::SeqCst);
            ok()
        }
        "slow" => {
            tokio::time::sleep(Duration::from_secs(3)).await;
            ok()
        }
        _ => (StatusCode::NOT_FOUND, String::new()),
    }
}

fn serve(rt: &tokio::runtime::Runtime) -> (String, Arc<ServerState>) {
    let st = Arc::new(ServerState::default());
    let app = Router::new().route("/{mode}/v1/chat/completions", post(handler)).with_state(st.clone());
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), st)
}

fn endpoint(base: &str, mode: &str) -> ModelEndpoint {
    ModelEndpoint {
        base_url: format!("{base}/{mode}/v1"),
        model: "test-model".into(),
        retries: 3,
        backoff_ms: 5,
        timeout_ms: 2000,
        ..ModelEndpoint::default()
    }
}

#[test]
fn http_client_speaks_chat_completions() {
    let rt = rt();
    let (base, st) = serve(&rt);
    let mut ep = endpoint(&base, "ok");
    ep.api_key = Some("secret".into());
    ep.params.repetition_penalty = 1.1;
    let m = HttpModel::new(ep).unwrap();
    let reply = rt.block_on(m.complete(&[Message::user("hello")])).unwrap();
    assert_eq!(reply, "echo: hello");
    let body = st.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 500);
    assert_eq!(body["repetition_penalty"], 1.1);
    assert_eq!(body["messages"][0], json!({"role": "user", "content": "hello"}));
    assert_eq!(st.last_auth.lock().unwrap().as_deref(), Some("Bearer secret"));
}

#[test]
fn http_client_retries_server_errors_and_rate_limits() {
    let rt = rt();
    let (base, st) = serve(&rt);
    for mode in ["flaky", "limited"] {
        let m = HttpModel::new(endpoint(&base, mode)).unwrap();
        assert_eq!(rt.block_on(m.complete(&[Message::user("x")])).unwrap(), "echo: x");
    }
    let m = HttpModel::new(endpoint(&base, "down")).unwrap();
    let err = rt.block_on(m.complete(&[Message::user("x")])).unwrap_err();
    assert!(matches!(err, HarnessError::RetriesExhausted { attempts: 4, .. }), "{err}");
    let calls = st.calls.lock().unwrap();
    assert_eq!((calls["flaky"], calls["limited"], calls["down"]), (3, 2, 4));
}

#[test]
fn http_client_fails_fast_on_client_errors_and_bad_bodies() {
    let rt = rt();
    let (base, st) = serve(&rt);
    let m = HttpModel::new(endpoint(&base, "bad")).unwrap();
    let err = rt.block_on(m.complete(&[Message::user("x")])).unwrap_err();
    assert!(matches!(err, HarnessError::Status { status: 400, .. }), "{err}");
    for mode in ["garbage", "empty"] {
        let m = HttpModel::new(endpoint(&base, mode)).unwrap();
        let err = rt.block_on(m.complete(&[Message::user("x")])).unwrap_err();
        assert!(matches!(err, HarnessError::MalformedResponse(_)), "{mode}: {err}");
    }
    let calls = st.calls.lock().unwrap();
    assert_eq!((calls["bad"], calls["garbage"], calls["empty"]), (1, 1, 1));
}

#[test]
fn http_client_times_out() {
    let rt = rt();
    let (base, _) = serve(&rt);
    let mut ep = endpoint(&base, "slow");
    ep.timeout_ms = 150;
    ep.retries = 1;
    let m = HttpModel::new(ep).unwrap();
    let started = std::time::Instant::now();
    let err = rt.block_on(m.complete(&[Message::user("x")])).unwrap_err();
    assert!(matches!(err, HarnessError::RetriesExhausted { attempts: 2, .. }), "{err}");
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[test]
fn http_benchmark_run_respects_max_in_flight() {
    let rt = rt();
    let (base, st) = serve(&rt);
    let f = fixture();
    let m = HttpModel::new(endpoint(&base, "gate")).unwrap();
    let res = rt.block_on(run_benchmark(&f.questions[..64], &[], &m, &BenchmarkRun { max_in_flight: 8, ..BenchmarkRun::default() })).unwrap();
    assert_eq!(res.transcripts.len(), 64);
    assert_eq!(st.calls.lock().unwrap()["gate"], 64);
    assert_eq!(st.peak.load(Ordering::SeqCst), 8);
    assert_eq!(res.config.model, "test-model");
}

#[test]
fn trajectory_and_agenda_files_use_the_documented_keys() {
    let f = fixture();
    let p = &f.map.pois()[..3];
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("traj.jsonl");
    std::fs::write(
        &tp,
        format!(
            "{{\"subject\":\"u1\",\"visits\":[{{\"poi\":\"{}\",\"t\":\"2024-03-01T08:00:00\"}},{{\"poi\":\"{}\",\"t\":\"2024-03-01T09:30:00+00:00\"}}]}}\n",
            p[0].id, p[1].id
        ),
    )
    .unwrap();
    let recs = read_trajectories(&tp, &f.map).unwrap();
    assert_eq!(recs[0].visits[1].time, "2024-03-01T09:30:00+00:00");
    assert!(serde_json::to_string(&recs[0]).unwrap().contains("\"t\":"));

    std::fs::write(&tp, format!("{{\"subject\":\"u1\",\"visits\":[{{\"poi\":\"{}\",\"t\":\"2024-03-01T09:00:00\"}},{{\"poi\":\"{}\",\"t\":\"2024-03-01T08:00:00\"}}]}}\n", p[0].id, p[1].id)).unwrap();
    assert!(matches!(read_trajectories(&tp, &f.map), Err(HarnessError::NonMonotonicTrajectory(_))));
    std::fs::write(&tp, format!("{{\"subject\":\"u1\",\"visits\":[{{\"poi\":\"{}\",\"t\":\"2024-03-01T09:00:00\"}}]}}\n", p[0].id)).unwrap();
    assert!(matches!(read_trajectories(&tp, &f.map), Err(HarnessError::TrajectoryTooShort { .. })));

    let ap = dir.path().join("agendas.jsonl");
    std::fs::write(&ap, "{\"agenda_id\":\"a1\",\"items\":[{\"time\":\"08:00\",\"action\":\"get coffee\"},{\"time\":\"12:30\",\"action\":\"have lunch\"}]}\n").unwrap();
    let ags = read_agendas(&ap).unwrap();
    assert_eq!((ags[0].id.as_str(), ags[0].date.as_deref(), ags[0].items.len()), ("a1", None, 2));
    let prompt = trajectory_prompt(&ags[0]);
    assert!(prompt.contains("08:00 get coffee") && prompt.contains("HH:MM | place name"));
}

#[test]
fn mobility_distractors_prefer_nearby_places_of_the_same_category() {
    let f = fixture();
    let records = synthetic_trajectories(&f.map, 300, 21);
    let items = mobility_prompts(&records, &f.map, 1).unwrap();
    let by_name: HashMap<&str, &urbanscope::map::Poi> = f.map.pois().iter().map(|p| (p.name.as_str(), p)).collect();
    let mut same = 0;
    let mut total = 0;
    for it in &items {
        let target = f.map.poi(&it.target_poi).unwrap();
        for c in it.choices.iter().filter(|c| **c != it.target_name) {
            let p = by_name[c.as_str()];
            total += 1;
            same += usize::from(p.category == target.category);
        }
        assert!(it.prompt_multi.ends_with(ANSWER_INSTRUCTION));
        assert!(!it.prompt_gen.contains("\nA. "));
    }
    assert!(same as f64 / total as f64 > 0.9, "{same}/{total}");
}

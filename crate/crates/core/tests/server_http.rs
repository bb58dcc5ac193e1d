use std::path::Path;
use std::sync::Arc;

use rescue_core::config::{Scenario, ScenarioConfig};
use rescue_core::marl::RescueEnv;
use rescue_core::server::{self, CreatedSession, ServerConfig, ServerHandle, WireObservation, WireStep};
use serde_json::{json, Value};

fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)).unwrap()
}

struct Client {
    url: String,
    agent: ureq::Agent,
}

impl Client {
    fn new(handle: &ServerHandle) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { url: handle.url(), agent }
    }

    fn post(&self, path: &str, body: &str) -> (u16, Value) {
        let mut res = self
            .agent
            .post(&format!("{}{path}", self.url))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (res.status().as_u16(), res.body_mut().read_json().unwrap())
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut res = self.agent.get(&format!("{}{path}", self.url)).call().unwrap();
        (res.status().as_u16(), res.body_mut().read_json().unwrap())
    }

    fn create(&self, scenario: &str) -> String {
        let (status, body) = self.post("/v1/session", scenario);
        assert_eq!(status, 200, "{body}");
        let created: CreatedSession = serde_json::from_value(body).unwrap();
        created.session_id
    }
}

fn wait_all(agents: &[&str]) -> String {
    let actions: serde_json::Map<String, Value> = agents
        .iter()
        .map(|id| (id.to_string(), json!(if id.starts_with("engine") { 5 } else { 0 })))
        .collect();
    json!({ "actions": actions }).to_string()
}

#[test]
fn create_reports_agent_spec() {
    let handle = server::spawn(ServerConfig::default()).unwrap();
    let c = Client::new(&handle);
    let (status, body) = c.post("/v1/session", &scenario_text("city.json"));
    assert_eq!(status, 200);
    let created: CreatedSession = serde_json::from_value(body).unwrap();
    let engines = created.spec.agents.iter().filter(|a| a.agent_id.starts_with("engine")).count();
    assert_eq!((engines, created.spec.agents.len()), (2, 18));
}

#[test]
fn error_statuses() {
    let handle = server::spawn(ServerConfig {
        session_limit: 1,
        ..ServerConfig::default()
    })
    .unwrap();
    let c = Client::new(&handle);

    assert_eq!(c.post("/v1/session", "{\"graph\": 3}").0, 400);
    assert_eq!(c.post("/v1/session", "").0, 400);
    assert_eq!(c.post("/v1/session/99/reset", "").0, 404);
    assert_eq!(c.get("/v1/session/nope/state").0, 404);

    let id = c.create(&scenario_text("one_cell.json"));
    assert_eq!(c.post("/v1/session", &scenario_text("one_cell.json")).0, 409);
    c.post(&format!("/v1/session/{id}/reset"), "");

    let step = format!("/v1/session/{id}/step");
    assert_eq!(c.post(&step, "not json").0, 422);
    assert_eq!(c.post(&step, r#"{"actions": {"engine_0": 9}}"#).0, 422);
    assert_eq!(c.post(&step, r#"{"actions": {"ghost": 0}}"#).0, 422);
    assert_eq!(c.post(&step, r#"{"actions": {}}"#).0, 422);

    let (status, body) = c.post(&step, r#"{"actions": {"engine_0": 0}}"#);
    assert_eq!(status, 200);
    let out: WireStep = serde_json::from_value(body).unwrap();
    assert!(out.done);
    assert!((out.reward - 100.9).abs() < 1e-9);
    assert_eq!(c.post(&step, r#"{"actions": {"engine_0": 0}}"#).0, 409);
}

#[test]
fn default_scenario_serves_empty_body() {
    let text = scenario_text("one_cell.json");
    let scenario = Scenario::new(ScenarioConfig::from_json(&text).unwrap()).unwrap();
    let handle = server::spawn(ServerConfig {
        default_scenario: Some(Arc::new(scenario)),
        ..ServerConfig::default()
    })
    .unwrap();
    let c = Client::new(&handle);
    let (status, _) = c.post("/v1/session", "");
    assert_eq!(status, 200);
}

#[test]
fn repeated_seed_resets_are_identical() {
    let mut cfg = ScenarioConfig::from_json(&scenario_text("desk.json")).unwrap();
    cfg.seeds = vec![7, 7];
    let handle = server::spawn(ServerConfig::default()).unwrap();
    let c = Client::new(&handle);
    let id = c.create(&cfg.to_json());
    let a = c.post(&format!("/v1/session/{id}/reset"), "").1;
    let b = c.post(&format!("/v1/session/{id}/reset"), "").1;
    assert_eq!(a, b);
}

#[test]
fn state_tracks_ticks() {
    let handle = server::spawn(ServerConfig::default()).unwrap();
    let c = Client::new(&handle);
    let id = c.create(&scenario_text("desk.json"));
    c.post(&format!("/v1/session/{id}/reset"), "");
    let agents = ["engine_0", "light_0", "light_1", "light_2", "light_3"];
    for _ in 0..5 {
        assert_eq!(c.post(&format!("/v1/session/{id}/step"), &wait_all(&agents)).0, 200);
    }
    let (status, state) = c.get(&format!("/v1/session/{id}/state"));
    assert_eq!(status, 200);
    assert_eq!(state["tick"], 5);
    assert_eq!(state["lights"].as_array().unwrap().len(), 4);
}

#[test]
fn interleaved_sessions_are_independent() {
    let text = scenario_text("desk.json");
    let scenario = Arc::new(Scenario::new(ScenarioConfig::from_json(&text).unwrap()).unwrap());
    let handle = server::spawn(ServerConfig::default()).unwrap();
    let c = Client::new(&handle);
    let ids = [c.create(&text), c.create(&text)];
    let mut envs = [RescueEnv::new(scenario.clone()).unwrap(), RescueEnv::new(scenario.clone()).unwrap()];
    for (id, env) in ids.iter().zip(&mut envs) {
        let remote: WireObservation =
            serde_json::from_value(c.post(&format!("/v1/session/{id}/reset"), "").1).unwrap();
        let obs = env.reset(scenario.config.seeds[0]).unwrap();
        assert_eq!(remote, WireObservation::new(env.specs(), 0, &obs));
    }
    // session 0 keeps waiting while session 1 drives its engine straight on
    for t in 0..10 {
        for (k, (id, env)) in ids.iter().zip(&mut envs).enumerate() {
            let engine = if k == 0 { 5 } else { 4 };
            let actions = [engine, 0, (t % 2), 0, 0];
            let body = json!({ "actions": {
                "engine_0": actions[0], "light_0": actions[1], "light_1": actions[2],
                "light_2": actions[3], "light_3": actions[4],
            }});
            let (status, value) = c.post(&format!("/v1/session/{id}/step"), &body.to_string());
            assert_eq!(status, 200, "{value}");
            let remote: WireStep = serde_json::from_value(value).unwrap();
            let out = env.step(&actions).unwrap();
            assert_eq!(remote.observation, WireObservation::new(env.specs(), env.world().tick, &out.observations));
            assert_eq!((remote.reward, remote.done), (out.reward, out.done));
        }
    }
}

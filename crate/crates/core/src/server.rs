//! HTTP/JSON front end for driving environments from another process.
//!
//! ```text
//! POST /v1/session              body: scenario (optional)  -> {session_id, spec}
//! POST /v1/session/{id}/reset                              -> observations
//! POST /v1/session/{id}/step    body: {"actions": {...}}   -> observations, reward, done, events
//! GET  /v1/session/{id}/state                              -> trace record of the current tick
//! ```

use std::collections::{BTreeMap, HashMap};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::config::{Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::marl::{AgentSpec, Observations, RescueEnv};
use crate::sim::{StepEvents, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub agents: Vec<AgentSpec>,
    pub state_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreatedSession {
    pub session_id: String,
    pub spec: SessionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireAction {
    pub actions: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Arrival,
    Collision,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEvent {
    #[serde(rename = "type")]
    pub kind: EventType,
    pub vehicles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObservation {
    pub tick: u32,
    pub observations: BTreeMap<String, Vec<f64>>,
    pub available_actions: BTreeMap<String, Vec<usize>>,
    pub global_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireStep {
    #[serde(flatten)]
    pub observation: WireObservation,
    pub reward: f64,
    pub done: bool,
    pub events: Vec<WireEvent>,
}

impl WireObservation {
    pub fn new(specs: &[AgentSpec], tick: u32, obs: &Observations) -> Self {
        let ids = specs.iter().map(|s| s.agent_id.clone());
        Self {
            tick,
            observations: ids.clone().zip(obs.obs.iter().cloned()).collect(),
            available_actions: ids
                .zip(&obs.masks)
                .map(|(id, m)| (id, (0..m.len()).filter(|&a| m[a]).collect()))
                .collect(),
            global_state: obs.state.clone(),
        }
    }
}

pub fn wire_events(events: &StepEvents) -> Vec<WireEvent> {
    let one = |kind: EventType, v: usize| WireEvent { kind, vehicles: vec![v] };
    events
        .arrivals
        .iter()
        .map(|&v| one(EventType::Arrival, v))
        .chain(events.collisions.iter().map(|&(a, b)| WireEvent {
            kind: EventType::Collision,
            vehicles: vec![a, b],
        }))
        .chain(events.masked.iter().map(|&v| one(EventType::Masked, v)))
        .collect()
}

/// Converts a keyed action object into the environment's agent order.
pub fn decode_actions(specs: &[AgentSpec], wire: &WireAction) -> std::result::Result<Vec<usize>, String> {
    let unknown: Vec<&str> = wire
        .actions
        .keys()
        .filter(|k| !specs.iter().any(|s| &s.agent_id == *k))
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(format!("unknown agent ids: {}", unknown.join(", ")));
    }
    let missing: Vec<&str> = specs
        .iter()
        .filter(|s| !wire.actions.contains_key(&s.agent_id))
        .map(|s| s.agent_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(format!("missing actions for: {}", missing.join(", ")));
    }
    specs
        .iter()
        .map(|s| {
            let v = &wire.actions[&s.agent_id];
            match v.as_u64() {
                Some(a) if (a as usize) < s.action_count => Ok(a as usize),
                _ => Err(format!(
                    "action for {} must be an integer in 0..{}, got {v}",
                    s.agent_id, s.action_count
                )),
            }
        })
        .collect()
}

struct Session {
    env: RescueEnv,
    resets: usize,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub session_limit: usize,
    /// Used when a session is created with an empty body.
    pub default_scenario: Option<Arc<Scenario>>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            session_limit: 16,
            default_scenario: None,
        }
    }
}

struct AppState {
    sessions: Mutex<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: Mutex<u64>,
    limit: usize,
    default_scenario: Option<Arc<Scenario>>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    fn session(&self, id: &str) -> std::result::Result<Arc<Mutex<Session>>, ApiError> {
        id.parse::<u64>()
            .ok()
            .and_then(|n| lock(&self.sessions).get(&n).cloned())
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

async fn create(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<CreatedSession> {
    let bad = |e: Error| ApiError(StatusCode::BAD_REQUEST, e.to_string());
    let scenario = if body.iter().all(u8::is_ascii_whitespace) {
        app.default_scenario
            .clone()
            .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "a scenario body is required".into()))?
    } else {
        let text = std::str::from_utf8(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
        let config = ScenarioConfig::from_json(text).map_err(bad)?;
        Arc::new(Scenario::new(config).map_err(bad)?)
    };
    let env = RescueEnv::new(scenario).map_err(bad)?;
    let spec = SessionSpec {
        agents: env.specs().to_vec(),
        state_dim: env.state_dim(),
    };
    let mut sessions = lock(&app.sessions);
    if sessions.len() >= app.limit {
        return Err(ApiError(
            StatusCode::CONFLICT,
            format!("session limit of {} reached", app.limit),
        ));
    }
    let id = {
        let mut next = lock(&app.next_id);
        *next += 1;
        *next
    };
    sessions.insert(id, Arc::new(Mutex::new(Session { env, resets: 0 })));
    Ok(Json(CreatedSession {
        session_id: id.to_string(),
        spec,
    }))
}

async fn reset(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<WireObservation> {
    let session = app.session(&id)?;
    let mut s = lock(&session);
    let seeds = &s.env.scenario().config.seeds;
    let seed = seeds[s.resets % seeds.len()];
    s.resets += 1;
    let obs = s
        .env
        .reset(seed)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(WireObservation::new(s.env.specs(), s.env.world().tick, &obs)))
}

async fn step(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<WireStep> {
    let session = app.session(&id)?;
    let mut s = lock(&session);
    if s.env.status() != crate::sim::Status::Running {
        return Err(ApiError(StatusCode::CONFLICT, "episode is over; reset first".into()));
    }
    let unprocessable = |msg: String| ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg);
    let wire: WireAction = serde_json::from_slice(&body).map_err(|e| unprocessable(e.to_string()))?;
    let actions = decode_actions(s.env.specs(), &wire).map_err(unprocessable)?;
    let out = s
        .env
        .step(&actions)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(WireStep {
        observation: WireObservation::new(s.env.specs(), s.env.world().tick, &out.observations),
        reward: out.reward,
        done: out.done,
        events: wire_events(&out.events),
    }))
}

async fn state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<TraceRecord> {
    let session = app.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.env.snapshot(&StepEvents::default(), 0.0)))
}

async fn log_request(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_owned());
    let start = Instant::now();
    let res = next.run(req).await;
    log::info!("{method} {path} {} {:.1}ms", res.status().as_u16(), start.elapsed().as_secs_f64() * 1e3);
    res
}

pub fn router(config: &ServerConfig) -> Router {
    let app = Arc::new(AppState {
        sessions: Mutex::new(HashMap::new()),
        next_id: Mutex::new(0),
        limit: config.session_limit,
        default_scenario: config.default_scenario.clone(),
    });
    Router::new()
        .route("/v1/session", post(create))
        .route("/v1/session/{id}/reset", post(reset))
        .route("/v1/session/{id}/step", post(step))
        .route("/v1/session/{id}/state", get(state))
        .layer(middleware::from_fn(log_request))
        .with_state(app)
}

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(Error::validation("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}

fn bind(addr: SocketAddr) -> Result<TcpListener> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

async fn serve_until(listener: TcpListener, app: Router, stop: impl std::future::Future<Output = ()> + Send + 'static) -> Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, app).with_graceful_shutdown(stop).await?;
    Ok(())
}

/// Binds `config.addr` and serves on a background thread.
pub fn spawn(config: ServerConfig) -> Result<ServerHandle> {
    let listener = bind(config.addr)?;
    let addr = listener.local_addr()?;
    let app = router(&config);
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new().name("envserver".into()).spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        rt.block_on(serve_until(listener, app, async {
            let _ = rx.await;
        }))
    })?;
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serves on the calling thread until Ctrl-C.
pub fn serve_forever(config: ServerConfig) -> Result<()> {
    let listener = bind(config.addr)?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let app = router(&config);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve_until(listener, app, async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
    }))
}

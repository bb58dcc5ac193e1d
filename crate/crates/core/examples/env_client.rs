//! Starts the environment server in-process and plays one episode over HTTP
//! with a policy that picks the first available action for every agent.
//!
//! cargo run --example env_client

use rescue_core::server::{self, CreatedSession, ServerConfig, WireObservation, WireStep};
use serde_json::{json, Map, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let handle = server::spawn(ServerConfig::default())?;
    let url = handle.url();
    let scenario = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/desk.json"))?;

    let created: CreatedSession = ureq::post(&format!("{url}/v1/session")).send(&scenario)?.body_mut().read_json()?;
    let id = created.session_id;
    println!("session {id}: {} agents, state of {} values", created.spec.agents.len(), created.spec.state_dim);

    let mut obs: WireObservation = ureq::post(&format!("{url}/v1/session/{id}/reset")).send("")?.body_mut().read_json()?;
    let mut total = 0.0;
    loop {
        let actions: Map<String, Value> = obs
            .available_actions
            .iter()
            .map(|(agent, valid)| (agent.clone(), json!(valid[0])))
            .collect();
        let step: WireStep = ureq::post(&format!("{url}/v1/session/{id}/step"))
            .send_json(json!({ "actions": actions }))?
            .body_mut()
            .read_json()?;
        total += step.reward;
        if !step.events.is_empty() {
            println!("tick {}: {:?}", step.observation.tick, step.events);
        }
        obs = step.observation;
        if step.done {
            break;
        }
    }
    println!("episode over at tick {}, return {total:.2}", obs.tick);
    handle.stop()?;
    Ok(())
}

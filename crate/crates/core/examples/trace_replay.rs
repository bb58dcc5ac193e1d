//! Records one random episode as a JSONL trace and summarizes it as CSV.
//!
//! cargo run --example trace_replay

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rescue_core::cli::replay;
use rescue_core::config::Scenario;
use rescue_core::marl::{run_episode, AgentNets, RescueEnv};
use rescue_core::sim::TraceWriter;

fn main() -> rescue_core::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/desk.json");
    let mut env = RescueEnv::new(Arc::new(Scenario::load(&path)?))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let agents = AgentNets::new(env.specs(), &[16], 1e-3, &mut rng)?;

    let mut writer = TraceWriter::new(Vec::new());
    let result = run_episode(&mut env, 1, &agents, 1.0, &mut rng, Some(&mut writer))?;
    let jsonl = writer.into_inner();
    println!("episode: {} ticks, return {:.2}, {} collisions", result.steps, result.ret, result.collisions);

    let csv = replay(jsonl.as_slice())?;
    for line in csv.lines().take(8) {
        println!("{line}");
    }
    println!("... {} rows", csv.lines().count() - 1);
    Ok(())
}

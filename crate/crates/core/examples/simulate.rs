//! Drives the simulator directly: the engine greedily takes whichever move
//! lowers its distance to the fire, lights switch whenever allowed.
//!
//! cargo run --example simulate

use std::path::Path;

use rescue_core::config::Scenario;
use rescue_core::sim::{EngineAction, LightAction, Status};

fn main() -> rescue_core::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/desk.json");
    let scenario = Scenario::load(&path)?;
    let mut world = scenario.build_world(7)?;
    let engine = world.engines()[0];
    let k = scenario.graph().max_out_degree();
    let mut candidates: Vec<EngineAction> = (0..k).map(EngineAction::TurnChoice).collect();
    candidates.extend([EngineAction::Continue, EngineAction::Wait]);

    println!("tick  distance  arrivals  collisions");
    while world.is_terminal() == Status::Running {
        let lights: Vec<LightAction> = world
            .lights
            .iter()
            .map(|l| if l.time_in_phase >= l.min_green { LightAction::Switch } else { LightAction::Hold })
            .collect();
        let mask = world.engine_action_mask(engine, k);
        let mut best = (u32::MAX, EngineAction::Wait);
        for (a, _) in candidates.iter().zip(&mask).filter(|(_, ok)| **ok) {
            let mut trial = world.clone();
            trial.step(&lights, &[*a])?;
            let d = if trial.vehicles[engine].active { trial.distance_to_destination(engine) } else { 0 };
            if d < best.0 {
                best = (d, *a);
            }
        }
        let events = world.step(&lights, &[best.1])?;
        println!(
            "{:>4}  {:>8}  {:>8}  {:>10}",
            world.tick,
            best.0,
            events.arrivals.len(),
            events.collisions.len()
        );
    }
    println!("finished: {:?}", world.is_terminal());
    Ok(())
}

//! Trains QMIX and IQL with the same seed on the desk scenario and compares
//! their returns over the final episodes.
//!
//! cargo run --release --example train_compare -- [episodes] [seed]

use std::path::Path;
use std::sync::Arc;

use rescue_core::config::{Scenario, Strategy, TrainConfig};
use rescue_core::marl::train;

fn main() -> rescue_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(300, |a| a.parse().expect("episodes"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let scenario = Arc::new(Scenario::load(&dir.join("desk.json"))?);
    let base = TrainConfig::load(&dir.join("qmix.json"))?;
    let window = (episodes / 10).max(1);
    for strategy in [Strategy::Qmix, Strategy::Iql] {
        let cfg = TrainConfig { strategy, episodes, seed: Some(seed), ..base.clone() };
        let (log, model) = train(scenario.clone(), &cfg, None)?;
        println!(
            "{:<4}  {} updates  final-{window} mean return {:.2}",
            strategy.name(),
            model.train_steps(),
            log.final_mean(window)
        );
    }
    Ok(())
}

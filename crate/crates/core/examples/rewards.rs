//! Per-engine reward components and the team reward.
//!
//! cargo run --example rewards

use rescue_core::rewards::{engine_reward, global_reward, EngineRewardInput, RewardConfig};

fn main() -> rescue_core::Result<()> {
    let cfg = RewardConfig::default();
    let cases = [
        ("idle", EngineRewardInput { prev_dist: 10.0, new_dist: 10.0, arrived: false, collided: false }),
        ("one cell closer", EngineRewardInput { prev_dist: 10.0, new_dist: 9.0, arrived: false, collided: false }),
        ("arrival", EngineRewardInput { prev_dist: 1.0, new_dist: 0.0, arrived: true, collided: false }),
        ("collision", EngineRewardInput { prev_dist: 4.0, new_dist: 4.0, arrived: false, collided: true }),
        ("moved away", EngineRewardInput { prev_dist: 4.0, new_dist: 7.0, arrived: false, collided: false }),
    ];
    for (name, input) in &cases {
        println!("{name:<16} {:>8.2}", engine_reward(input, &cfg)?);
    }
    let team: Vec<_> = cases.iter().map(|(_, i)| *i).collect();
    println!("{:<16} {:>8.2}", "team total", global_reward(&team, &cfg)?);

    for alpha in [0.5, 1.0, 2.0, 5.0] {
        let cfg = RewardConfig { alpha, ..cfg };
        let row: Vec<String> = (1..=4).map(|d| format!("{:.1}", cfg.approach(f64::from(d)))).collect();
        println!("alpha {alpha}: approach for 1..4 cells = {}", row.join(" "));
    }
    Ok(())
}

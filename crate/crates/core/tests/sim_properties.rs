use std::collections::HashSet;
use std::path::Path;

use proptest::prelude::*;
use rescue_core::config::Scenario;
use rescue_core::sim::{EngineAction, LightAction, VehicleKind, WorldState};

fn scenario(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)).unwrap()
}

fn decode(world: &WorldState, k: usize, raw: &[(u8, u8)]) -> (Vec<LightAction>, Vec<EngineAction>) {
    let lights = (0..world.lights.len())
        .map(|i| if raw[i % raw.len()].0 % 2 == 0 { LightAction::Hold } else { LightAction::Switch })
        .collect();
    let engines = (0..world.engines().len())
        .map(|i| match raw[i % raw.len()].1 as usize % (k + 2) {
            a if a < k => EngineAction::TurnChoice(a),
            a if a == k => EngineAction::Continue,
            _ => EngineAction::Wait,
        })
        .collect();
    (lights, engines)
}

fn run(s: &Scenario, seed: u64, script: &[Vec<(u8, u8)>]) -> Vec<WorldState> {
    let k = s.graph().max_out_degree();
    let mut world = s.build_world(seed).unwrap();
    let mut states = vec![world.clone()];
    for raw in script {
        let (l, e) = decode(&world, k, raw);
        world.step(&l, &e).unwrap();
        states.push(world.clone());
    }
    states
}

fn script() -> impl Strategy<Value = Vec<Vec<(u8, u8)>>> {
    proptest::collection::vec(proptest::collection::vec(any::<(u8, u8)>(), 1..20), 1..150)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn occupancy_is_exclusive(seed in any::<u64>(), script in script()) {
        let s = scenario("city.json");
        for w in run(&s, seed, &script) {
            let mut seen = HashSet::new();
            for v in w.vehicles.iter().filter(|v| v.active) {
                prop_assert!(seen.insert((v.pos.edge, v.pos.progress)), "tick {}: two vehicles at {:?}", w.tick, v.pos);
            }
            prop_assert_eq!(w.occupancy_violations(), 0);
        }
    }

    #[test]
    fn replays_are_bit_identical(seed in any::<u64>(), script in script()) {
        let s = scenario("desk.json");
        prop_assert_eq!(run(&s, seed, &script), run(&s, seed, &script));
    }

    #[test]
    fn lights_respect_min_green_and_ticks_advance(seed in any::<u64>(), script in script()) {
        let s = scenario("city.json");
        let states = run(&s, seed, &script);
        for pair in states.windows(2) {
            prop_assert_eq!(pair[1].tick, pair[0].tick + 1);
            for (a, b) in pair[0].lights.iter().zip(&pair[1].lights) {
                if a.phase != b.phase {
                    prop_assert!(a.time_in_phase >= a.min_green);
                }
            }
        }
    }

    #[test]
    fn vehicles_are_conserved_and_routes_fixed(seed in any::<u64>(), script in script()) {
        let s = scenario("desk.json");
        let states = run(&s, seed, &script);
        let first = &states[0];
        for pair in states.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            prop_assert_eq!(a.vehicles.len(), b.vehicles.len());
            for (va, vb) in a.vehicles.iter().zip(&b.vehicles) {
                prop_assert_eq!(va.id, vb.id);
                prop_assert!(va.active || !vb.active, "vehicle {} reactivated", va.id);
                if va.kind != VehicleKind::Special {
                    prop_assert!(vb.leg >= va.leg);
                }
            }
        }
        let last = states.last().unwrap();
        for (v0, v) in first.vehicles.iter().zip(&last.vehicles) {
            if v.kind != VehicleKind::Special {
                prop_assert_eq!(&v0.route, &v.route);
                let edge = s.graph().edge(v.pos.edge);
                prop_assert_eq!((edge.from, edge.to), (v.route[v.leg], v.route[v.leg + 1]));
            }
        }
    }
}

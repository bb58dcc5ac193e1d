use super::*;

impl WorldState {
    /// Advances the world by one tick.
    ///
    /// `engine_actions` holds one entry per special vehicle in engine order;
    /// entries for vehicles that already arrived are ignored.
    pub fn step(&mut self, light_actions: &[LightAction], engine_actions: &[EngineAction]) -> Result<StepEvents> {
        if light_actions.len() != self.lights.len() {
            return Err(Error::validation(format!(
                "expected {} light actions, got {}",
                self.lights.len(),
                light_actions.len()
            )));
        }
        if engine_actions.len() != self.engines.len() {
            return Err(Error::validation(format!(
                "expected {} engine actions, got {}",
                self.engines.len(),
                engine_actions.len()
            )));
        }

        for (light, action) in self.lights.iter_mut().zip(light_actions) {
            if *action == LightAction::Switch && light.time_in_phase >= light.min_green {
                light.phase = light.phase.flipped();
                light.time_in_phase = 0;
            } else {
                light.time_in_phase += 1;
            }
        }

        let mut engine_action = vec![None; self.vehicles.len()];
        for (&v, &a) in self.engines.iter().zip(engine_actions) {
            engine_action[v] = Some(a);
        }

        // Front-most vehicles move first so queues advance together.
        let mut order: Vec<usize> = (0..self.vehicles.len()).filter(|&i| self.vehicles[i].active).collect();
        order.sort_by_key(|&i| {
            let v = &self.vehicles[i];
            (self.graph.edge(v.pos.edge).len - v.pos.progress, i)
        });

        let mut events = StepEvents::default();
        for i in order {
            let target = match engine_action[i] {
                Some(action) => self.engine_target(i, action, &mut events),
                None => self.route_target(i),
            };
            let Some(next) = target else { continue };
            if let Some(other) = self.occupant(next.edge, next.progress) {
                if self.vehicles[i].kind == VehicleKind::Special {
                    events.collisions.push((i, other));
                }
                continue;
            }
            self.move_vehicle(i, next);
            let v = &self.vehicles[i];
            let e = self.graph.edge(v.pos.edge);
            if v.pos.progress == e.len && e.to == v.destination {
                let c = self.cell(v.pos);
                self.occupancy[c] = FREE;
                self.vehicles[i].active = false;
                events.arrivals.push(i);
            }
        }

        self.tick += 1;
        Ok(events)
    }

    fn move_vehicle(&mut self, i: usize, next: Position) {
        let from = self.cell(self.vehicles[i].pos);
        self.occupancy[from] = FREE;
        let to = self.cell(next);
        self.occupancy[to] = i as u32;
        let v = &mut self.vehicles[i];
        if next.edge != v.pos.edge {
            let head = self.graph.edge(next.edge).to;
            if v.kind == VehicleKind::Special {
                v.route.push(head);
            }
            v.leg += 1;
        }
        v.pos = next;
    }

    /// Desired cell of a route-following vehicle, honouring lights.
    fn route_target(&self, i: usize) -> Option<Position> {
        let v = &self.vehicles[i];
        let e = self.graph.edge(v.pos.edge);
        if v.pos.progress < e.len {
            return Some(Position {
                edge: v.pos.edge,
                progress: v.pos.progress + 1,
            });
        }
        if let Some(light) = self.light_at(e.to) {
            if !light.phase.allows(self.graph.heading(v.pos.edge)) {
                return None;
            }
        }
        let next_node = v.route[v.leg + 2];
        let edge = self.graph.find_edge(e.to, next_node).expect("route follows graph edges");
        Some(Position { edge, progress: 1 })
    }

    /// Desired cell of a special vehicle under `action`; lights are ignored.
    fn engine_target(&self, i: usize, action: EngineAction, events: &mut StepEvents) -> Option<Position> {
        let v = &self.vehicles[i];
        let e = self.graph.edge(v.pos.edge);
        if action == EngineAction::Wait {
            return None;
        }
        if v.pos.progress < e.len {
            return Some(Position {
                edge: v.pos.edge,
                progress: v.pos.progress + 1,
            });
        }
        let edge = match action {
            EngineAction::TurnChoice(k) => self.graph.out_edges(e.to).get(k).copied(),
            EngineAction::Continue => self.graph.out_edge_heading(e.to, self.graph.heading(v.pos.edge)),
            EngineAction::Wait => unreachable!(),
        };
        match edge {
            Some(edge) => Some(Position { edge, progress: 1 }),
            None => {
                events.masked.push(i);
                None
            }
        }
    }

    /// Actions that have an effect for engine `engine` in the current state,
    /// indexed as `TurnChoice(0..k)`, then `Continue`, then `Wait`.
    pub fn engine_action_mask(&self, engine: usize, turn_choices: usize) -> Vec<bool> {
        let mut mask = vec![false; turn_choices + 2];
        mask[turn_choices + 1] = true;
        let v = &self.vehicles[self.engines[engine]];
        if !v.active {
            return mask;
        }
        let e = self.graph.edge(v.pos.edge);
        if v.pos.progress < e.len {
            mask[turn_choices] = true;
        } else {
            let out = self.graph.out_edges(e.to).len().min(turn_choices);
            mask[..out].iter_mut().for_each(|m| *m = true);
            mask[turn_choices] = self
                .graph
                .out_edge_heading(e.to, self.graph.heading(v.pos.edge))
                .is_some();
        }
        mask
    }
}

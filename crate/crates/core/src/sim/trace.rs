use std::io::Write;

use super::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleRecord {
    pub id: usize,
    pub kind: VehicleKind,
    pub edge: EdgeId,
    pub progress: u32,
    pub active: bool,
    /// Graph distance to the destination; present for special vehicles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_distance: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightRecord {
    pub node: NodeId,
    pub phase: Phase,
    pub time_in_phase: u32,
}

/// One line of an episode trace: the world after `tick` steps, the events of
/// the step that produced it and the team reward it earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub tick: u32,
    pub vehicles: Vec<VehicleRecord>,
    pub lights: Vec<LightRecord>,
    pub events: StepEvents,
    #[serde(default)]
    pub reward: f64,
}

impl WorldState {
    pub fn snapshot(&self, events: &StepEvents, reward: f64) -> TraceRecord {
        TraceRecord {
            tick: self.tick,
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleRecord {
                    id: v.id,
                    kind: v.kind,
                    edge: v.pos.edge,
                    progress: v.pos.progress,
                    active: v.active,
                    target_distance: (v.kind == VehicleKind::Special).then(|| self.distance_to_destination(v.id)),
                })
                .collect(),
            lights: self
                .lights
                .iter()
                .map(|l| LightRecord {
                    node: l.node,
                    phase: l.phase,
                    time_in_phase: l.time_in_phase,
                })
                .collect(),
            events: events.clone(),
            reward,
        }
    }
}

pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord) -> Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, record: &TraceRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for TraceWriter<W> {
    fn record(&mut self, record: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::roadnet::Position;
    use crate::sim::testutil::*;
    use crate::sim::*;

    #[test]
    fn jsonl_lines_parse_back() {
        let mut w = world_on(line(3, 2), 2, 10, 5);
        w.add_light(1, 5).unwrap();
        let engine = w.place_engine(0).unwrap();
        let e = w.graph().find_edge(0, 1).unwrap();
        put(&mut w, VehicleKind::Ordinary, Position { edge: e, progress: 0 }, vec![0, 1, 2], 2);
        let mut sink = TraceWriter::new(Vec::new());
        sink.record(&w.snapshot(&StepEvents::default(), 0.0)).unwrap();
        let ev = w.step(&[LightAction::Hold], &[EngineAction::TurnChoice(0)]).unwrap();
        sink.record(&w.snapshot(&ev, -0.1)).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let records: Vec<TraceRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].tick, 1);
        assert_eq!(records[0].vehicles[engine].target_distance, Some(4));
        assert_eq!(records[1].vehicles[1].target_distance, None);
        assert_eq!(records[1].reward, -0.1);
    }
}

use super::*;

/// Ray distances in cells to the nearest occupied cell or dead end, capped at
/// the sensing range, plus the sensing vehicle's own position and destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaySense {
    pub ahead: u32,
    pub behind: u32,
    pub left: u32,
    pub right: u32,
    pub position: Position,
    pub destination: NodeId,
}

impl RaySense {
    pub fn distances(&self) -> [u32; 4] {
        [self.ahead, self.behind, self.left, self.right]
    }
}

impl WorldState {
    pub fn sense(&self, vehicle: usize) -> Result<RaySense> {
        let v = self
            .vehicles
            .get(vehicle)
            .ok_or_else(|| Error::validation(format!("vehicle {vehicle} does not exist")))?;
        if !v.active {
            return Err(Error::validation(format!("vehicle {vehicle} is not active")));
        }
        let heading = self.graph.heading(v.pos.edge);
        Ok(RaySense {
            ahead: self.ray_forward(v.pos, None),
            behind: self.ray_backward(v.pos),
            left: self.ray_forward(v.pos, Some(heading.left())),
            right: self.ray_forward(v.pos, Some(heading.right())),
            position: v.pos,
            destination: v.destination,
        })
    }

    /// Walks forward from `pos`. With `turn` set, the cells up to the head
    /// node are skipped over and the ray continues along the edge leaving the
    /// head node in that direction.
    fn ray_forward(&self, pos: Position, turn: Option<Heading>) -> u32 {
        let range = self.sensing_range;
        if range == 0 {
            return 0;
        }
        let (mut edge, mut cell) = (pos.edge, pos.progress);
        let mut scan = turn.is_none();
        let mut turn = turn;
        let mut offset = 0;
        loop {
            let e = self.graph.edge(edge);
            if cell < e.len {
                cell += 1;
                offset += 1;
                if scan && self.occupant(edge, cell).is_some() {
                    return offset.min(range);
                }
                if offset >= range {
                    return range;
                }
                continue;
            }
            let heading = turn.take().unwrap_or_else(|| self.graph.heading(edge));
            match self.graph.out_edge_heading(e.to, heading) {
                None => return (offset + 1).min(range),
                Some(next) => {
                    scan = true;
                    // cell 0 of the next edge shares the head-node slot
                    if offset > 0 && self.occupant(next, 0).is_some() {
                        return offset;
                    }
                    edge = next;
                    cell = 0;
                }
            }
        }
    }

    fn ray_backward(&self, pos: Position) -> u32 {
        let range = self.sensing_range;
        if range == 0 {
            return 0;
        }
        let heading = self.graph.heading(pos.edge);
        let (mut edge, mut cell) = (pos.edge, pos.progress);
        let mut offset = 0;
        loop {
            let prev = self.graph.in_edge_heading(self.graph.edge(edge).from, heading);
            if cell > 0 {
                cell -= 1;
                offset += 1;
                let hit = self.occupant(edge, cell).is_some()
                    || (cell == 0 && prev.is_some_and(|p| self.occupant(p, self.graph.edge(p).len).is_some()));
                if hit {
                    return offset.min(range);
                }
                if offset >= range {
                    return range;
                }
                continue;
            }
            match prev {
                None => return (offset + 1).min(range),
                Some(p) => {
                    edge = p;
                    cell = self.graph.edge(p).len;
                }
            }
        }
    }
}

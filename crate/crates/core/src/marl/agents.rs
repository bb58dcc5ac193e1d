use rand::Rng;

use super::{AgentKind, AgentSpec, Observations};
use crate::error::{Error, Result};
use crate::nnet::{Activation, Cache, DenseNet, Gradients, RmsProp};

/// Q-network shared by every agent of one kind.
#[derive(Debug, Clone)]
pub(crate) struct KindNet {
    pub kind: AgentKind,
    pub agents: usize,
    pub obs_dim: usize,
    pub actions: usize,
    pub online: DenseNet,
    pub target: DenseNet,
    pub opt: RmsProp,
}

/// Per-kind shared Q-networks with their target copies. Each agent feeds its
/// observation followed by a one-hot of its index within the kind.
#[derive(Debug, Clone)]
pub struct AgentNets {
    specs: Vec<AgentSpec>,
    pub(crate) kinds: Vec<KindNet>,
    /// (kind slot, index within kind) per agent.
    slots: Vec<(usize, usize)>,
}

impl AgentNets {
    pub fn new<R: Rng + ?Sized>(specs: &[AgentSpec], hidden: &[usize], lr: f64, rng: &mut R) -> Result<Self> {
        Self::build(specs, |input, actions| {
            DenseNet::mlp(input, hidden, actions, Activation::Relu, Activation::Identity, rng)
        }, lr)
    }

    /// Builds from explicit online networks, one per kind in order of first
    /// appearance among `specs`.
    pub fn from_networks(specs: &[AgentSpec], nets: Vec<DenseNet>, lr: f64) -> Result<Self> {
        let mut nets = nets.into_iter();
        let out = Self::build(specs, |_, _| nets.next().unwrap_or_else(|| DenseNet { layers: Vec::new() }), lr)?;
        if nets.next().is_some() {
            return Err(Error::validation("more networks than agent kinds"));
        }
        Ok(out)
    }

    fn build(specs: &[AgentSpec], mut make: impl FnMut(usize, usize) -> DenseNet, lr: f64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::validation("no agents"));
        }
        let mut kinds: Vec<KindNet> = Vec::new();
        let mut slots = Vec::with_capacity(specs.len());
        for s in specs {
            if s.action_count < 2 {
                return Err(Error::validation(format!("{} needs at least two actions", s.agent_id)));
            }
            match kinds.iter().position(|k| k.kind == s.kind) {
                Some(slot) => {
                    let k = &mut kinds[slot];
                    if k.obs_dim != s.obs_dim || k.actions != s.action_count {
                        return Err(Error::validation(format!("{} differs in shape from its kind", s.agent_id)));
                    }
                    slots.push((slot, k.agents));
                    k.agents += 1;
                }
                None => {
                    slots.push((kinds.len(), 0));
                    kinds.push(KindNet {
                        kind: s.kind,
                        agents: 1,
                        obs_dim: s.obs_dim,
                        actions: s.action_count,
                        online: DenseNet { layers: Vec::new() },
                        target: DenseNet { layers: Vec::new() },
                        opt: RmsProp::new(&DenseNet { layers: Vec::new() }, lr),
                    });
                }
            }
        }
        for k in &mut kinds {
            let net = make(k.obs_dim + k.agents, k.actions);
            let net = DenseNet::new(net.layers)?;
            if net.input_dim() != k.obs_dim + k.agents || net.output_dim() != k.actions {
                return Err(Error::validation(format!("network shape does not fit {:?} agents", k.kind)));
            }
            k.opt = RmsProp::new(&net, lr);
            k.target = net.clone();
            k.online = net;
        }
        Ok(Self {
            specs: specs.to_vec(),
            kinds,
            slots,
        })
    }

    pub fn specs(&self) -> &[AgentSpec] {
        &self.specs
    }

    pub fn agent_count(&self) -> usize {
        self.specs.len()
    }

    pub fn networks(&self) -> impl Iterator<Item = &DenseNet> {
        self.kinds.iter().map(|k| &k.online)
    }

    pub fn target_networks(&self) -> impl Iterator<Item = &DenseNet> {
        self.kinds.iter().map(|k| &k.target)
    }

    pub(crate) fn slot(&self, agent: usize) -> usize {
        self.slots[agent].0
    }

    fn input(&self, agent: usize, obs: &[f64]) -> Result<Vec<f64>> {
        let (slot, local) = self.slots[agent];
        let k = &self.kinds[slot];
        if obs.len() != k.obs_dim {
            return Err(Error::validation(format!(
                "{} expects {} observation values, got {}",
                self.specs[agent].agent_id,
                k.obs_dim,
                obs.len()
            )));
        }
        let mut x = Vec::with_capacity(k.obs_dim + k.agents);
        x.extend_from_slice(obs);
        x.extend((0..k.agents).map(|i| if i == local { 1.0 } else { 0.0 }));
        Ok(x)
    }

    pub fn q_values(&self, agent: usize, obs: &[f64]) -> Result<Vec<f64>> {
        self.kinds[self.slot(agent)].online.predict(&self.input(agent, obs)?)
    }

    pub fn target_q_values(&self, agent: usize, obs: &[f64]) -> Result<Vec<f64>> {
        self.kinds[self.slot(agent)].target.predict(&self.input(agent, obs)?)
    }

    pub(crate) fn forward(&self, agent: usize, obs: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.kinds[self.slot(agent)].online.forward(&self.input(agent, obs)?)
    }

    pub(crate) fn backward(&self, agent: usize, cache: &Cache, grad_q: &[f64], grads: &mut [Gradients]) -> Result<()> {
        let slot = self.slot(agent);
        self.kinds[slot].online.backward_into(cache, grad_q, &mut grads[slot])?;
        Ok(())
    }

    pub(crate) fn zero_grads(&self) -> Vec<Gradients> {
        self.kinds.iter().map(|k| Gradients::zeros_like(&k.online)).collect()
    }

    pub(crate) fn apply(&mut self, grads: &[Gradients]) -> Result<()> {
        for (k, g) in self.kinds.iter_mut().zip(grads) {
            k.opt.step(&mut k.online, g)?;
        }
        Ok(())
    }

    pub fn sync_targets(&mut self) {
        for k in &mut self.kinds {
            k.target = k.online.clone();
        }
    }

    /// Index of the wait/hold action: the last engine action, the first light action.
    pub fn idle_action(&self, agent: usize) -> usize {
        match self.specs[agent].kind {
            AgentKind::FireEngine => self.specs[agent].action_count - 1,
            AgentKind::TrafficLight => 0,
        }
    }

    /// Epsilon-greedy over the valid actions of each agent, using only that
    /// agent's own observation. Inactive agents idle without consuming
    /// randomness.
    pub fn select_actions<R: Rng + ?Sized>(&self, obs: &Observations, epsilon: f64, rng: &mut R) -> Result<Vec<usize>> {
        if obs.obs.len() != self.specs.len() || obs.masks.len() != self.specs.len() || obs.active.len() != self.specs.len() {
            return Err(Error::validation("observation count does not match the agents"));
        }
        (0..self.specs.len())
            .map(|i| {
                if !obs.active[i] {
                    return Ok(self.idle_action(i));
                }
                let mask = &obs.masks[i];
                if epsilon > 0.0 && rng.random::<f64>() < epsilon {
                    let valid: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
                    if valid.is_empty() {
                        return Ok(self.idle_action(i));
                    }
                    return Ok(valid[rng.random_range(0..valid.len())]);
                }
                Ok(masked_argmax(&self.q_values(i, &obs.obs[i])?, mask).unwrap_or_else(|| self.idle_action(i)))
            })
            .collect()
    }
}

/// Highest-valued action allowed by `mask`; ties go to the lowest index.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (a, &v) in q.iter().enumerate() {
        if !mask.get(a).copied().unwrap_or(false) {
            continue;
        }
        if best.is_none_or(|b| v > q[b]) {
            best = Some(a);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marl::agent_specs;
    use crate::nnet::Layer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(inputs: usize, q: &[f64]) -> DenseNet {
        DenseNet::new(vec![Layer {
            inputs,
            outputs: q.len(),
            weights: vec![0.0; inputs * q.len()],
            bias: q.to_vec(),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn one_light(q: &[f64]) -> (AgentNets, Observations) {
        let mut spec = agent_specs(0, 1, 0).remove(0);
        spec.action_count = q.len();
        let nets = AgentNets::from_networks(&[spec.clone()], vec![fixed(spec.obs_dim + 1, q)], 1e-3).unwrap();
        let obs = Observations {
            obs: vec![vec![0.0; spec.obs_dim]],
            masks: vec![vec![true; q.len()]],
            state: vec![],
            active: vec![true],
        };
        (nets, obs)
    }

    #[test]
    fn greedy_picks_argmax() {
        let (nets, obs) = one_light(&[1.0, 3.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(nets.select_actions(&obs, 0.0, &mut rng).unwrap(), vec![1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let (nets, obs) = one_light(&[2.0, 2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(nets.select_actions(&obs, 0.0, &mut rng).unwrap(), vec![0]);
        assert_eq!(masked_argmax(&[2.0, 2.0, 1.0], &[false, true, true]), Some(1));
        assert_eq!(masked_argmax(&[2.0], &[false]), None);
    }

    #[test]
    fn exploration_is_reproducible_and_respects_masks() {
        let (nets, mut obs) = one_light(&[1.0, 3.0, 2.0]);
        obs.masks[0] = vec![true, false, true];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| nets.select_actions(&obs, 1.0, &mut rng).unwrap()[0])
                .collect::<Vec<_>>()
        };
        let a = run(4);
        assert_eq!(a, run(4));
        assert!(a.iter().all(|&x| x != 1));
        assert!(a.contains(&0) && a.contains(&2));
    }

    #[test]
    fn inactive_agents_idle() {
        let specs = agent_specs(1, 1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nets = AgentNets::new(&specs, &[8], 1e-3, &mut rng).unwrap();
        let obs = Observations {
            obs: specs.iter().map(|s| vec![0.0; s.obs_dim]).collect(),
            masks: specs.iter().map(|s| vec![true; s.action_count]).collect(),
            state: vec![],
            active: vec![false, true],
        };
        let a = nets.select_actions(&obs, 1.0, &mut rng).unwrap();
        assert_eq!(a[0], 5);
    }

    #[test]
    fn actions_ignore_other_agents_observations() {
        let specs = agent_specs(2, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nets = AgentNets::new(&specs, &[16], 1e-3, &mut rng).unwrap();
        for trial in 0..50 {
            let mut obs = Observations {
                obs: specs
                    .iter()
                    .map(|s| (0..s.obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                masks: specs.iter().map(|s| vec![true; s.action_count]).collect(),
                state: vec![],
                active: vec![true; specs.len()],
            };
            let before = nets.select_actions(&obs, 0.0, &mut rng).unwrap();
            let j = trial % specs.len();
            for v in &mut obs.obs[j] {
                *v = rng.random_range(-1.0..1.0);
            }
            let after = nets.select_actions(&obs, 0.0, &mut rng).unwrap();
            for i in (0..specs.len()).filter(|&i| i != j) {
                assert_eq!(before[i], after[i]);
            }
        }
    }

    #[test]
    fn target_sync_copies_outputs() {
        let specs = agent_specs(1, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut nets = AgentNets::new(&specs, &[8], 1e-2, &mut rng).unwrap();
        let mut grads = nets.zero_grads();
        for g in &mut grads {
            g.values_mut().for_each(|v| *v = 1.0);
        }
        nets.apply(&grads).unwrap();
        let x = vec![0.3; specs[0].obs_dim];
        assert_ne!(nets.q_values(0, &x).unwrap(), nets.target_q_values(0, &x).unwrap());
        nets.sync_targets();
        for i in 0..specs.len() {
            let x: Vec<f64> = (0..specs[i].obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(nets.q_values(i, &x).unwrap(), nets.target_q_values(i, &x).unwrap());
        }
    }
}

use rand::Rng;

use super::agents::masked_argmax;
use super::mixer::{Mixer, MixerGradients};
use super::{AgentNets, AgentSpec, JointTransition};
use crate::config::{Strategy, TrainConfig};
use crate::error::{Error, Result};
use crate::nnet::{Gradients, RmsProp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub lr: f64,
    pub grad_clip: f64,
    pub target_sync: usize,
    /// Online argmax with target evaluation; plain target max when false.
    pub double_q: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::from(&TrainConfig::default())
    }
}

impl From<&TrainConfig> for LearnerConfig {
    fn from(c: &TrainConfig) -> Self {
        Self {
            gamma: c.gamma,
            lr: c.lr,
            grad_clip: c.grad_clip,
            target_sync: c.target_sync,
            double_q: c.double_q,
        }
    }
}

fn check_batch(batch: &[&JointTransition], agents: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::validation("empty training batch"));
    }
    if let Some(t) = batch.iter().find(|t| !t.is_consistent() || t.agent_count() != agents) {
        return Err(Error::validation(format!(
            "transition covers {} agents, model has {agents}",
            t.agent_count()
        )));
    }
    Ok(())
}

/// Value of agent `i`'s greedy next action, evaluated by its target network.
fn next_value(agents: &AgentNets, t: &JointTransition, i: usize, double_q: bool) -> Result<f64> {
    if !t.next_active[i] {
        return Ok(0.0);
    }
    let target = agents.target_q_values(i, &t.next_obs[i])?;
    let chooser = if double_q { agents.q_values(i, &t.next_obs[i])? } else { target.clone() };
    Ok(masked_argmax(&chooser, &t.next_masks[i]).map_or(0.0, |a| target[a]))
}

/// Scales every gradient so their joint norm is at most `max_norm`.
fn clip_global<'a>(grads: impl IntoIterator<Item = &'a mut Gradients>, max_norm: f64) -> f64 {
    let grads: Vec<&mut Gradients> = grads.into_iter().collect();
    let norm = grads.iter().map(|g| g.norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads {
            g.scale(k);
        }
    }
    norm
}

fn diverged(what: &str) -> Error {
    Error::Divergence(format!("non-finite {what}"))
}

#[derive(Debug, Clone)]
pub struct QmixGradients {
    pub agents: Vec<Gradients>,
    pub mixer: MixerGradients,
}

impl QmixGradients {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.agents.iter().chain(self.mixer.nets.iter()).flat_map(|g| g.values())
    }
}

/// Agent networks mixed into Q_tot by a state-conditioned monotonic mixer.
#[derive(Debug, Clone)]
pub struct QmixModel {
    pub agents: AgentNets,
    pub mixer: Mixer,
    pub target_mixer: Mixer,
    mixer_opt: [RmsProp; 4],
    pub config: LearnerConfig,
    steps: usize,
}

impl QmixModel {
    pub fn new<R: Rng + ?Sized>(
        specs: &[AgentSpec],
        state_dim: usize,
        hidden: &[usize],
        embed: usize,
        hyper_hidden: usize,
        config: LearnerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let agents = AgentNets::new(specs, hidden, config.lr, rng)?;
        let mixer = Mixer::new(specs.len(), state_dim, embed, hyper_hidden, rng);
        Ok(Self::from_parts(agents, mixer, config))
    }

    pub fn from_parts(agents: AgentNets, mixer: Mixer, config: LearnerConfig) -> Self {
        Self {
            mixer_opt: mixer.optimizers(config.lr),
            target_mixer: mixer.clone(),
            agents,
            mixer,
            config,
            steps: 0,
        }
    }

    pub fn train_steps(&self) -> usize {
        self.steps
    }

    pub fn sync_targets(&mut self) {
        self.agents.sync_targets();
        self.target_mixer = self.mixer.clone();
    }

    fn target(&self, t: &JointTransition) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        let q = (0..t.agent_count())
            .map(|i| next_value(&self.agents, t, i, self.config.double_q))
            .collect::<Result<Vec<_>>>()?;
        Ok(t.reward + self.config.gamma * self.target_mixer.value(&q, &t.next_state)?)
    }

    /// Q_tot of the taken joint action; arrived agents contribute zero.
    pub fn q_tot(&self, t: &JointTransition) -> Result<f64> {
        let q = (0..t.agent_count())
            .map(|i| {
                Ok(if t.active[i] { self.agents.q_values(i, &t.obs[i])?[t.actions[i]] } else { 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;
        self.mixer.value(&q, &t.state)
    }

    /// Mean squared TD error of the batch without touching parameters.
    pub fn loss(&self, batch: &[&JointTransition]) -> Result<f64> {
        check_batch(batch, self.agents.agent_count())?;
        let mut sum = 0.0;
        for t in batch {
            let d = self.q_tot(t)? - self.target(t)?;
            sum += d * d;
        }
        Ok(sum / batch.len() as f64)
    }

    pub fn loss_and_grad(&self, batch: &[&JointTransition]) -> Result<(f64, QmixGradients)> {
        check_batch(batch, self.agents.agent_count())?;
        let n = self.agents.agent_count();
        let scale = 1.0 / batch.len() as f64;
        let mut grads = QmixGradients {
            agents: self.agents.zero_grads(),
            mixer: MixerGradients::zeros_like(&self.mixer),
        };
        let mut loss = 0.0;
        for t in batch {
            let y = self.target(t)?;
            let mut q = vec![0.0; n];
            let mut caches = Vec::with_capacity(n);
            for i in 0..n {
                if t.active[i] {
                    let (out, cache) = self.agents.forward(i, &t.obs[i])?;
                    q[i] = out[t.actions[i]];
                    caches.push(Some(cache));
                } else {
                    caches.push(None);
                }
            }
            let (q_tot, mcache) = self.mixer.forward(&q, &t.state)?;
            let d = q_tot - y;
            loss += d * d * scale;
            let dq = self.mixer.backward(&mcache, 2.0 * d * scale, &mut grads.mixer)?;
            for (i, cache) in caches.iter().enumerate() {
                if let Some(cache) = cache {
                    let mut g = vec![0.0; self.agents.specs()[i].action_count];
                    g[t.actions[i]] = dq[i];
                    self.agents.backward(i, cache, &g, &mut grads.agents)?;
                }
            }
        }
        Ok((loss, grads))
    }

    /// One optimizer step on the batch; returns the pre-update loss.
    pub fn train_step(&mut self, batch: &[&JointTransition]) -> Result<f64> {
        let (loss, mut grads) = self.loss_and_grad(batch)?;
        if !loss.is_finite() {
            return Err(diverged("loss"));
        }
        clip_global(grads.agents.iter_mut().chain(grads.mixer.nets.iter_mut()), self.config.grad_clip);
        self.agents.apply(&grads.agents)?;
        for ((net, opt), g) in self.mixer.nets_mut().into_iter().zip(&mut self.mixer_opt).zip(&grads.mixer.nets) {
            opt.step(net, g)?;
        }
        self.steps += 1;
        if self.steps % self.config.target_sync == 0 {
            self.sync_targets();
        }
        Ok(loss)
    }

    /// Online parameters in the same order as [`QmixGradients::values`].
    pub fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::new();
        for k in &mut self.agents.kinds {
            out.extend(k.online.params_mut());
        }
        for net in self.mixer.nets_mut() {
            out.extend(net.params_mut());
        }
        out
    }
}

/// Independent learners: each agent regresses its own Q-value on the team
/// reward. Agents of one kind share a network as in [`QmixModel`].
#[derive(Debug, Clone)]
pub struct IqlModel {
    pub agents: AgentNets,
    pub config: LearnerConfig,
    steps: usize,
}

impl IqlModel {
    pub fn new<R: Rng + ?Sized>(specs: &[AgentSpec], hidden: &[usize], config: LearnerConfig, rng: &mut R) -> Result<Self> {
        Ok(Self::from_parts(AgentNets::new(specs, hidden, config.lr, rng)?, config))
    }

    pub fn from_parts(agents: AgentNets, config: LearnerConfig) -> Self {
        Self { agents, config, steps: 0 }
    }

    pub fn train_steps(&self) -> usize {
        self.steps
    }

    pub fn sync_targets(&mut self) {
        self.agents.sync_targets();
    }

    fn target(&self, t: &JointTransition, i: usize) -> Result<f64> {
        if t.done {
            return Ok(t.reward);
        }
        Ok(t.reward + self.config.gamma * next_value(&self.agents, t, i, self.config.double_q)?)
    }

    /// Per-agent mean squared TD errors and their summed gradients. Agents
    /// inactive throughout the batch report a loss of zero.
    pub fn losses_and_grad(&self, batch: &[&JointTransition]) -> Result<(Vec<f64>, Vec<Gradients>)> {
        let n = self.agents.agent_count();
        check_batch(batch, n)?;
        let mut grads = self.agents.zero_grads();
        let mut losses = vec![0.0; n];
        for (i, loss) in losses.iter_mut().enumerate() {
            let used: Vec<&&JointTransition> = batch.iter().filter(|t| t.active[i]).collect();
            if used.is_empty() {
                continue;
            }
            let scale = 1.0 / used.len() as f64;
            for t in used {
                let y = self.target(t, i)?;
                let (out, cache) = self.agents.forward(i, &t.obs[i])?;
                let d = out[t.actions[i]] - y;
                *loss += d * d * scale;
                let mut g = vec![0.0; out.len()];
                g[t.actions[i]] = 2.0 * d * scale;
                self.agents.backward(i, &cache, &g, &mut grads)?;
            }
        }
        Ok((losses, grads))
    }

    pub fn train_step(&mut self, batch: &[&JointTransition]) -> Result<Vec<f64>> {
        let (losses, mut grads) = self.losses_and_grad(batch)?;
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(diverged("loss"));
        }
        clip_global(grads.iter_mut(), self.config.grad_clip);
        self.agents.apply(&grads)?;
        self.steps += 1;
        if self.steps % self.config.target_sync == 0 {
            self.sync_targets();
        }
        Ok(losses)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Qmix(QmixModel),
    Iql(IqlModel),
}

impl Model {
    pub fn build<R: Rng + ?Sized>(specs: &[AgentSpec], state_dim: usize, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let lc = LearnerConfig::from(cfg);
        Ok(match cfg.strategy {
            Strategy::Qmix => Model::Qmix(QmixModel::new(specs, state_dim, &cfg.hidden, cfg.mixer_embed, cfg.hyper_hidden, lc, rng)?),
            Strategy::Iql => Model::Iql(IqlModel::new(specs, &cfg.hidden, lc, rng)?),
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            Model::Qmix(_) => Strategy::Qmix,
            Model::Iql(_) => Strategy::Iql,
        }
    }

    pub fn agents(&self) -> &AgentNets {
        match self {
            Model::Qmix(m) => &m.agents,
            Model::Iql(m) => &m.agents,
        }
    }

    pub fn train_steps(&self) -> usize {
        match self {
            Model::Qmix(m) => m.train_steps(),
            Model::Iql(m) => m.train_steps(),
        }
    }

    /// Returns the batch loss; for IQL the mean of the per-agent losses.
    pub fn train_step(&mut self, batch: &[&JointTransition]) -> Result<f64> {
        match self {
            Model::Qmix(m) => m.train_step(batch),
            Model::Iql(m) => {
                let l = m.train_step(batch)?;
                Ok(l.iter().sum::<f64>() / l.len() as f64)
            }
        }
    }

    pub fn sync_targets(&mut self) {
        match self {
            Model::Qmix(m) => m.sync_targets(),
            Model::Iql(m) => m.sync_targets(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marl::{agent_specs, AgentKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_spec() -> Vec<AgentSpec> {
        vec![AgentSpec {
            agent_id: "a".into(),
            kind: AgentKind::FireEngine,
            index: 0,
            obs_dim: 1,
            action_count: 2,
        }]
    }

    fn toy(reward: f64, done: bool) -> JointTransition {
        JointTransition {
            obs: vec![vec![1.0]],
            actions: vec![0],
            reward,
            next_obs: vec![vec![1.0]],
            state: vec![1.0],
            next_state: vec![1.0],
            done,
            active: vec![true],
            next_active: vec![true],
            next_masks: vec![vec![true, true]],
        }
    }

    fn cfg(gamma: f64) -> LearnerConfig {
        LearnerConfig {
            gamma,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn terminal_target_is_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = QmixModel::new(&toy_spec(), 1, &[4], 3, 4, cfg(0.9), &mut rng).unwrap();
        let t = toy(2.5, true);
        assert_eq!(m.target(&t).unwrap(), 2.5);
        let expected = (m.q_tot(&t).unwrap() - 2.5).powi(2);
        assert!((m.loss(&[&t]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn iql_single_agent_is_a_dqn_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = IqlModel::new(&toy_spec(), &[4], cfg(0.5), &mut rng).unwrap();
        let t = toy(1.0, false);
        let q = m.agents.q_values(0, &[1.0]).unwrap();
        let next = m.agents.target_q_values(0, &[1.0]).unwrap();
        let greedy = masked_argmax(&q, &[true, true]).unwrap();
        let y = 1.0 + 0.5 * next[greedy];
        let (losses, _) = m.losses_and_grad(&[&t]).unwrap();
        assert!((losses[0] - (q[0] - y).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn qmix_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = agent_specs(2, 2, 3);
        let state_dim = crate::marl::state_dim(&specs);
        let mut m = QmixModel::new(&specs, state_dim, &[8], 4, 6, cfg(0.9), &mut rng).unwrap();
        let batch: Vec<JointTransition> = (0..4)
            .map(|b| {
                let obs: Vec<Vec<f64>> = specs
                    .iter()
                    .map(|s| (0..s.obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let next_obs: Vec<Vec<f64>> = specs
                    .iter()
                    .map(|s| (0..s.obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let mut state: Vec<f64> = obs.iter().flatten().copied().collect();
                state.push(0.1);
                let mut next_state: Vec<f64> = next_obs.iter().flatten().copied().collect();
                next_state.push(0.2);
                JointTransition {
                    actions: specs.iter().map(|s| rng.random_range(0..s.action_count)).collect(),
                    reward: rng.random_range(-1.0..1.0),
                    obs,
                    next_obs,
                    state,
                    next_state,
                    done: b == 3,
                    active: vec![b != 1, true, true, true],
                    next_active: vec![b == 0, true, true, true],
                    next_masks: specs.iter().map(|s| vec![true; s.action_count]).collect(),
                }
            })
            .collect();
        let refs: Vec<&JointTransition> = batch.iter().collect();
        let (_, grads) = m.loss_and_grad(&refs).unwrap();
        let analytic: Vec<f64> = grads.values().copied().collect();
        assert_eq!(analytic.len(), m.params_mut().len());
        for idx in (0..analytic.len()).step_by(analytic.len() / 25) {
            let h = 1e-6;
            let orig = *m.params_mut()[idx];
            *m.params_mut()[idx] = orig + h;
            let up = m.loss(&refs).unwrap();
            *m.params_mut()[idx] = orig - h;
            let down = m.loss(&refs).unwrap();
            *m.params_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-6);
            assert!(err < 1e-3 || (fd - analytic[idx]).abs() < 1e-8, "param {idx}: fd {fd} vs {}", analytic[idx]);
        }
    }

    #[test]
    fn training_reduces_loss_on_fixed_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = QmixModel::new(&toy_spec(), 1, &[8], 4, 8, LearnerConfig { lr: 1e-2, ..cfg(0.0) }, &mut rng).unwrap();
        let t = toy(3.0, true);
        let first = m.loss(&[&t]).unwrap();
        for _ in 0..300 {
            m.train_step(&[&t]).unwrap();
        }
        assert!(m.loss(&[&t]).unwrap() < first * 0.01);
    }

    #[test]
    fn zero_loss_batch_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = IqlModel::new(&toy_spec(), &[4], cfg(0.0), &mut rng).unwrap();
        let q = m.agents.q_values(0, &[1.0]).unwrap()[0];
        let t = toy(q, true);
        let before: Vec<f64> = m.agents.networks().flat_map(|n| n.params().copied().collect::<Vec<_>>()).collect();
        let losses = m.train_step(&[&t]).unwrap();
        assert_eq!(losses, vec![0.0]);
        let after: Vec<f64> = m.agents.networks().flat_map(|n| n.params().copied().collect::<Vec<_>>()).collect();
        assert_eq!(before, after);
    }
}

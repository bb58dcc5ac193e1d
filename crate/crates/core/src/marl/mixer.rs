use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::{Activation, Cache, DenseNet, Gradients, RmsProp};

/// Monotonic mixing network. Hypernetworks map the global state to the mixer
/// parameters:
///
/// ```text
/// W1 = |hyper_w1(s)|  (embed x n)      b1 = hyper_b1(s)
/// w2 = |hyper_w2(s)|  (embed)          b2 = hyper_b2(s)
/// Q_tot = w2 . elu(W1 q + b1) + b2
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    agents: usize,
    embed: usize,
    pub hyper_w1: DenseNet,
    pub hyper_b1: DenseNet,
    pub hyper_w2: DenseNet,
    pub hyper_b2: DenseNet,
}

#[derive(Debug, Clone)]
pub struct MixerCache {
    q: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    caches: [Cache; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerGradients {
    pub nets: [Gradients; 4],
}

impl MixerGradients {
    pub fn zeros_like(m: &Mixer) -> Self {
        Self {
            nets: [
                Gradients::zeros_like(&m.hyper_w1),
                Gradients::zeros_like(&m.hyper_b1),
                Gradients::zeros_like(&m.hyper_w2),
                Gradients::zeros_like(&m.hyper_b2),
            ],
        }
    }
}

impl Mixer {
    pub fn new<R: Rng + ?Sized>(agents: usize, state_dim: usize, embed: usize, hyper_hidden: usize, rng: &mut R) -> Self {
        let hyper_w1 = DenseNet::mlp(state_dim, &[hyper_hidden], embed * agents, Activation::Relu, Activation::Abs, rng);
        let hyper_b1 = DenseNet::mlp(state_dim, &[], embed, Activation::Relu, Activation::Identity, rng);
        let hyper_w2 = DenseNet::mlp(state_dim, &[hyper_hidden], embed, Activation::Relu, Activation::Abs, rng);
        let hyper_b2 = DenseNet::mlp(state_dim, &[embed], 1, Activation::Relu, Activation::Identity, rng);
        Self {
            agents,
            embed,
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_b2,
        }
    }

    /// Assembles a mixer from given hypernetworks, checking their shapes.
    pub fn from_networks(agents: usize, nets: [DenseNet; 4]) -> Result<Self> {
        let [hyper_w1, hyper_b1, hyper_w2, hyper_b2] = nets;
        let state_dim = hyper_w1.input_dim();
        let embed = hyper_b1.output_dim();
        let ok = agents > 0
            && [&hyper_b1, &hyper_w2, &hyper_b2].iter().all(|n| n.input_dim() == state_dim)
            && hyper_w1.output_dim() == embed * agents
            && hyper_w2.output_dim() == embed
            && hyper_b2.output_dim() == 1;
        if !ok {
            return Err(Error::validation("hypernetwork shapes do not form a mixer"));
        }
        Ok(Self {
            agents,
            embed,
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_b2,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn state_dim(&self) -> usize {
        self.hyper_w1.input_dim()
    }

    pub fn nets(&self) -> [&DenseNet; 4] {
        [&self.hyper_w1, &self.hyper_b1, &self.hyper_w2, &self.hyper_b2]
    }

    pub fn nets_mut(&mut self) -> [&mut DenseNet; 4] {
        [&mut self.hyper_w1, &mut self.hyper_b1, &mut self.hyper_w2, &mut self.hyper_b2]
    }

    pub fn optimizers(&self, lr: f64) -> [RmsProp; 4] {
        self.nets().map(|n| RmsProp::new(n, lr))
    }

    fn check(&self, q: &[f64], state: &[f64]) -> Result<()> {
        if q.len() != self.agents {
            return Err(Error::validation(format!("mixer expects {} q-values, got {}", self.agents, q.len())));
        }
        if state.len() != self.state_dim() {
            return Err(Error::validation(format!(
                "mixer expects a state of {} values, got {}",
                self.state_dim(),
                state.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, q: &[f64], state: &[f64]) -> Result<f64> {
        self.check(q, state)?;
        let w1 = self.hyper_w1.predict(state)?;
        let b1 = self.hyper_b1.predict(state)?;
        let w2 = self.hyper_w2.predict(state)?;
        let b2 = self.hyper_b2.predict(state)?;
        let n = self.agents;
        let mixed = (0..self.embed)
            .map(|k| {
                let pre = b1[k] + (0..n).map(|i| w1[k * n + i] * q[i]).sum::<f64>();
                w2[k] * Activation::Elu.apply(pre)
            })
            .sum::<f64>();
        Ok(b2[0] + mixed)
    }

    pub fn forward(&self, q: &[f64], state: &[f64]) -> Result<(f64, MixerCache)> {
        self.check(q, state)?;
        let (w1, c1) = self.hyper_w1.forward(state)?;
        let (b1, c2) = self.hyper_b1.forward(state)?;
        let (w2, c3) = self.hyper_w2.forward(state)?;
        let (b2, c4) = self.hyper_b2.forward(state)?;
        let n = self.agents;
        let pre: Vec<f64> = (0..self.embed)
            .map(|k| b1[k] + (0..n).map(|i| w1[k * n + i] * q[i]).sum::<f64>())
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&z| Activation::Elu.apply(z)).collect();
        let total = b2[0] + w2.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
        Ok((
            total,
            MixerCache {
                q: q.to_vec(),
                w1,
                w2,
                pre,
                hidden,
                caches: [c1, c2, c3, c4],
            },
        ))
    }

    /// Accumulates hypernetwork gradients for upstream `dq_tot`; returns
    /// dQ_tot/dq scaled by it.
    pub fn backward(&self, cache: &MixerCache, dq_tot: f64, grads: &mut MixerGradients) -> Result<Vec<f64>> {
        let n = self.agents;
        let [g1, g2, g3, g4] = &mut grads.nets;
        let [c1, c2, c3, c4] = &cache.caches;
        self.hyper_b2.backward_into(c4, &[dq_tot], g4)?;
        let dw2: Vec<f64> = cache.hidden.iter().map(|h| dq_tot * h).collect();
        self.hyper_w2.backward_into(c3, &dw2, g3)?;
        let dpre: Vec<f64> = cache
            .pre
            .iter()
            .zip(&cache.w2)
            .map(|(&z, &w)| dq_tot * w * Activation::Elu.derivative(z))
            .collect();
        self.hyper_b1.backward_into(c2, &dpre, g2)?;
        let mut dw1 = vec![0.0; self.embed * n];
        let mut dq = vec![0.0; n];
        for k in 0..self.embed {
            for i in 0..n {
                dw1[k * n + i] = dpre[k] * cache.q[i];
                dq[i] += dpre[k] * cache.w1[k * n + i];
            }
        }
        self.hyper_w1.backward_into(c1, &dw1, g1)?;
        Ok(dq)
    }
}

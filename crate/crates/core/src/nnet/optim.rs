use super::{DenseNet, Gradients};
use crate::error::{Error, Result};

/// RMSProp: `v = decay * v + (1 - decay) * g^2`, `p -= lr * g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    square_avg: Gradients,
}

impl RmsProp {
    pub const DEFAULT_DECAY: f64 = 0.99;
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Self {
            lr,
            decay: Self::DEFAULT_DECAY,
            eps: Self::DEFAULT_EPS,
            square_avg: Gradients::zeros_like(net),
        }
    }

    pub fn square_avg(&self) -> &Gradients {
        &self.square_avg
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        if grads.layers.len() != net.layers.len() || self.square_avg.layers.len() != net.layers.len() {
            return Err(Error::validation("optimizer state does not match the network"));
        }
        let (lr, decay, eps) = (self.lr, self.decay, self.eps);
        for ((layer, (gw, gb)), (sw, sb)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.square_avg.layers.iter_mut())
        {
            for (p, (g, s)) in layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(gw.iter().chain(gb.iter()).zip(sw.iter_mut().chain(sb.iter_mut())))
            {
                *s = decay * *s + (1.0 - decay) * g * g;
                *p -= lr * g / (s.sqrt() + eps);
            }
        }
        if !net.is_finite() {
            return Err(Error::Divergence("non-finite parameter after update".into()));
        }
        Ok(())
    }
}

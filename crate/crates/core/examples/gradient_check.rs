//! Backpropagation against central finite differences on a small MLP.
//!
//! cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescue_core::nnet::{Activation, DenseNet};

fn main() -> rescue_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = DenseNet::mlp(4, &[8, 8], 3, Activation::Relu, Activation::Identity, &mut rng);
    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target = [0.5, -1.0, 2.0];
    let loss = |net: &DenseNet| -> f64 {
        let y = net.predict(&x).unwrap();
        y.iter().zip(&target).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
    };

    let (y, cache) = net.forward(&x)?;
    let dy: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
    let (grads, _) = net.backward(&cache, &dy)?;
    let analytic: Vec<f64> = grads.values().copied().collect();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = *net.params_mut().nth(k).unwrap();
        *net.params_mut().nth(k).unwrap() = orig + h;
        let up = loss(&net);
        *net.params_mut().nth(k).unwrap() = orig - h;
        let down = loss(&net);
        *net.params_mut().nth(k).unwrap() = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-8));
    }
    println!("{} parameters, loss {:.6}, max relative error {worst:.2e}", analytic.len(), loss(&net));
    Ok(())
}

#![allow(dead_code)]

use neurodiff::nn::{loss_for, Mlp, MlpArch, OutputHead};
use neurodiff::rng;
use rand::Rng;

/// Loss of `model` on one batch, computed through the plain forward pass.
pub fn batch_loss(model: &Mlp<f64>, x: &[f64], y: &[f64], batch: usize) -> f64 {
    let probs = model.forward(x, batch);
    loss_for(model.arch().head, &probs, y, model.classes())
}

pub struct Probe {
    pub layer: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    pub fn rel_err(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(1e-8);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Central differences `(L(w + h) - L(w - h)) / 2h` on `count` randomly
/// chosen parameters, paired with the backpropagated gradient.
pub fn gradient_probes(head: OutputHead, count: usize, seed: u64) -> Vec<Probe> {
    let h = 1e-5;
    let mut r = rng::stream(seed, 0);
    let arch = MlpArch::new(8, vec![6, 5], 4).unwrap().with_head(head);
    let mut model = neurodiff::nn::init_model::<f64>(&arch, seed);
    for layer in model.layers_mut() {
        for b in &mut layer.bias {
            *b = r.random_range(-0.5..0.5);
        }
    }
    let batch = 7;
    let x: Vec<f64> = (0..batch * 8).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..batch)
        .flat_map(|_| {
            let c = r.random_range(0..4);
            (0..4).map(move |i| if i == c { 1.0 } else { 0.0 })
        })
        .collect();
    let (_, grads) = model.loss_and_gradients(&x, &y, batch);

    let mut probes = Vec::with_capacity(count);
    while probes.len() < count {
        let layer = r.random_range(0..model.layers().len());
        let n_w = model.layers()[layer].weights.len();
        let n = n_w + model.layers()[layer].bias.len();
        let index = r.random_range(0..n);
        let analytic = if index < n_w {
            grads[layer].weights[index]
        } else {
            grads[layer].bias[index - n_w]
        };
        let eval = |delta: f64| {
            let mut m = model.clone();
            let l = &mut m.layers_mut()[layer];
            if index < n_w {
                l.weights[index] += delta;
            } else {
                l.bias[index - n_w] += delta;
            }
            batch_loss(&m, &x, &y, batch)
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        probes.push(Probe {
            layer,
            index,
            analytic,
            numeric,
        });
    }
    probes
}

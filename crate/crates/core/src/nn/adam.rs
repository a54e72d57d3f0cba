use super::mlp::{Gradients, Layer, Mlp};
use super::scalar::Scalar;

/// Adam moment estimates for every parameter of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Layer<T>>,
    second: Vec<Layer<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(model: &Mlp<T>) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: model.zero_gradients(),
            second: model.zero_gradients(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `model` in place.
pub fn adam_step<T: Scalar>(model: &mut Mlp<T>, grads: &Gradients<T>, state: &mut AdamState<T>, lr: f64) {
    state.step += 1;
    let b1 = T::lit(state.beta1);
    let b2 = T::lit(state.beta2);
    let one = T::one();
    let c1 = 1.0 - state.beta1.powi(state.step as i32);
    let c2 = 1.0 - state.beta2.powi(state.step as i32);
    // lr * m / c1 / (sqrt(v / c2) + eps)
    let step_size = T::lit(lr / c1);
    let inv_sqrt_c2 = T::lit(1.0 / c2.sqrt());
    let eps = T::lit(state.eps);
    let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - step_size * *m / (v.sqrt() * inv_sqrt_c2 + eps);
        }
    };

    for (((layer, g), m), v) in model
        .layers_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
}

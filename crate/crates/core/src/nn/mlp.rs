use rand::Rng;

use super::scalar::{gemm, Scalar};
use crate::error::ModelError;
use crate::rng;

/// How the output layer turns logits into class scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum OutputHead {
    /// Independent sigmoid per class, trained with binary cross-entropy
    /// against one-hot targets.
    #[default]
    Sigmoid,
    /// Softmax over classes, trained with categorical cross-entropy.
    Softmax,
}

impl OutputHead {
    pub(crate) fn code(self) -> u8 {
        match self {
            OutputHead::Sigmoid => 0,
            OutputHead::Softmax => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OutputHead::Sigmoid),
            1 => Some(OutputHead::Softmax),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub head: OutputHead,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self, ModelError> {
        let arch = Self {
            input_dim,
            hidden,
            output_dim,
            head: OutputHead::Sigmoid,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Hidden widths 128 and 1024.
    pub fn proposed(classes: usize) -> Self {
        Self::new(64, vec![128, 1024], classes).expect("valid preset")
    }

    /// Hidden widths 128, 1024 and 1024.
    pub fn baksi(classes: usize) -> Self {
        Self::new(64, vec![128, 1024, 1024], classes).expect("valid preset")
    }

    pub fn with_head(mut self, head: OutputHead) -> Self {
        self.head = head;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dims().any(|d| d == 0) {
            return Err(ModelError::Arch(format!("zero-width layer in {:?}", self.widths())));
        }
        if self.output_dim < 2 {
            return Err(ModelError::Arch("need at least two output classes".into()));
        }
        Ok(())
    }

    fn dims(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.input_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.output_dim))
    }

    /// Input width, hidden widths, output width.
    pub fn widths(&self) -> Vec<usize> {
        self.dims().collect()
    }

    /// `(fan_in, fan_out)` of each dense layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let w = self.widths();
        w.windows(2).map(|p| (p[0], p[1])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// One dense layer: `weights` is `fan_in x fan_out`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Gradients share the parameter layout of the model.
pub type Gradients<T> = Vec<Layer<T>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    arch: MlpArch,
    layers: Vec<Layer<T>>,
    init_seed: u64,
}

/// He-uniform weights, `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`, zero biases.
pub fn init_model<T: Scalar>(arch: &MlpArch, seed: u64) -> Mlp<T> {
    let layers = arch
        .layer_shapes()
        .into_iter()
        .enumerate()
        .map(|(idx, (fan_in, fan_out))| {
            let mut rng = rng::stream(seed, idx as u64);
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut layer = Layer::zeros(fan_in, fan_out);
            for w in &mut layer.weights {
                *w = T::lit(rng.random_range(-bound..bound));
            }
            layer
        })
        .collect();
    Mlp {
        arch: arch.clone(),
        layers,
        init_seed: seed,
    }
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Debug, Default)]
pub struct ForwardCache<T> {
    batch: usize,
    /// Post-activation output of every layer; the last entry holds the class
    /// probabilities.
    acts: Vec<Vec<T>>,
    deltas: [Vec<T>; 2],
}

impl<T: Scalar> ForwardCache<T> {
    pub fn new() -> Self {
        Self {
            batch: 0,
            acts: Vec::new(),
            deltas: [Vec::new(), Vec::new()],
        }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn probabilities(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn from_parts(arch: MlpArch, layers: Vec<Layer<T>>, init_seed: u64) -> Result<Self, ModelError> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        let ok = shapes.len() == layers.len()
            && shapes.iter().zip(&layers).all(|(&(i, o), l)| {
                l.fan_in == i && l.fan_out == o && l.weights.len() == i * o && l.bias.len() == o
            });
        if !ok {
            return Err(ModelError::Arch("layer shapes do not match architecture".into()));
        }
        Ok(Self {
            arch,
            layers,
            init_seed,
        })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn classes(&self) -> usize {
        self.arch.output_dim
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in, l.fan_out))
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.params().all(|p| p.is_finite()))
    }

    /// Forward pass keeping intermediate activations in `cache`.
    ///
    /// `input` is a row-major `batch x input_dim` matrix.
    pub fn forward_cached(&self, input: &[T], batch: usize, cache: &mut ForwardCache<T>) {
        assert_eq!(
            input.len(),
            batch * self.arch.input_dim,
            "feature width does not match the model input"
        );
        cache.batch = batch;
        cache.acts.resize_with(self.layers.len(), Vec::new);
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let (before, rest) = cache.acts.split_at_mut(idx);
            let x: &[T] = if idx == 0 { input } else { &before[idx - 1] };
            let out = &mut rest[0];
            out.clear();
            out.reserve(batch * layer.fan_out);
            for _ in 0..batch {
                out.extend_from_slice(&layer.bias);
            }
            gemm(
                false,
                false,
                batch,
                layer.fan_out,
                layer.fan_in,
                x,
                &layer.weights,
                T::one(),
                out,
            );
            if idx < last {
                for v in out.iter_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            } else {
                activate_output(self.arch.head, out, layer.fan_out);
            }
        }
    }

    /// Class probabilities for a row-major `batch x input_dim` matrix.
    pub fn forward(&self, input: &[T], batch: usize) -> Vec<T> {
        let mut cache = ForwardCache::new();
        self.forward_cached(input, batch, &mut cache);
        cache.acts.pop().unwrap_or_default()
    }

    /// Gradients of the mean training loss with respect to every parameter,
    /// given the cache of a forward pass over `input` and one-hot `targets`.
    pub fn backward(
        &self,
        input: &[T],
        targets: &[T],
        cache: &mut ForwardCache<T>,
        grads: &mut Gradients<T>,
    ) {
        let batch = cache.batch;
        let t = self.arch.output_dim;
        assert_eq!(targets.len(), batch * t, "target shape mismatch");
        // Derivative of the mean loss with respect to the output logits.
        let scale = match self.arch.head {
            OutputHead::Sigmoid => T::one() / T::lit((batch * t) as f64),
            OutputHead::Softmax => T::one() / T::lit(batch as f64),
        };
        let [mut delta, mut prev] = std::mem::take(&mut cache.deltas);
        delta.clear();
        delta.extend(
            cache
                .probabilities()
                .iter()
                .zip(targets)
                .map(|(&p, &y)| (p - y) * scale),
        );

        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let x: &[T] = if idx == 0 { input } else { &cache.acts[idx - 1] };
            let g = &mut grads[idx];
            // dW = X^T * delta
            gemm(
                true,
                false,
                layer.fan_in,
                layer.fan_out,
                batch,
                x,
                &delta,
                T::zero(),
                &mut g.weights,
            );
            g.bias.iter_mut().for_each(|b| *b = T::zero());
            for row in delta.chunks_exact(layer.fan_out) {
                for (b, &d) in g.bias.iter_mut().zip(row) {
                    *b = *b + d;
                }
            }
            if idx > 0 {
                // delta_prev = delta * W^T, masked by the ReLU derivative.
                prev.clear();
                prev.resize(batch * layer.fan_in, T::zero());
                gemm(
                    false,
                    true,
                    batch,
                    layer.fan_in,
                    layer.fan_out,
                    &delta,
                    &layer.weights,
                    T::zero(),
                    &mut prev,
                );
                for (d, &a) in prev.iter_mut().zip(x) {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                }
                std::mem::swap(&mut delta, &mut prev);
            }
        }
        cache.deltas = [delta, prev];
    }

    /// Convenience wrapper: forward + backward on one batch, returning the
    /// loss and freshly allocated gradients.
    pub fn loss_and_gradients(&self, input: &[T], targets: &[T], batch: usize) -> (T, Gradients<T>) {
        let mut cache = ForwardCache::new();
        self.forward_cached(input, batch, &mut cache);
        let loss = loss_for(self.arch.head, cache.probabilities(), targets, self.arch.output_dim);
        let mut grads = self.zero_gradients();
        self.backward(input, targets, &mut cache, &mut grads);
        (loss, grads)
    }

    /// Predicted class per row: argmax with ties broken toward the lowest index.
    pub fn predict(&self, input: &[T], batch: usize) -> Vec<usize> {
        argmax_rows(&self.forward(input, batch), self.arch.output_dim)
    }
}

fn activate_output<T: Scalar>(head: OutputHead, logits: &mut [T], width: usize) {
    match head {
        OutputHead::Sigmoid => {
            for z in logits.iter_mut() {
                *z = sigmoid(*z);
            }
        }
        OutputHead::Softmax => {
            for row in logits.chunks_exact_mut(width) {
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                let mut sum = T::zero();
                for z in row.iter_mut() {
                    *z = (*z - max).exp();
                    sum = sum + *z;
                }
                for z in row.iter_mut() {
                    *z = *z / sum;
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Loss matching the head: BCE for sigmoid outputs, categorical CE for softmax.
pub fn loss_for<T: Scalar>(head: OutputHead, probs: &[T], targets: &[T], width: usize) -> T {
    match head {
        OutputHead::Sigmoid => super::loss::bce_loss(probs, targets),
        OutputHead::Softmax => super::loss::cross_entropy_loss(probs, targets, width),
    }
}

pub fn argmax_rows<T: Scalar>(scores: &[T], width: usize) -> Vec<usize> {
    scores
        .chunks_exact(width)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::SubScores;
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};

/// Number of sub-scores fed to the network.
pub const INPUT_DIM: usize = 5;

/// Default layer widths: 5 inputs, two ReLU hidden layers, one sigmoid output.
pub const DEFAULT_LAYER_DIMS: [usize; 4] = [INPUT_DIM, 32, 16, 1];

/// Feed-forward network mapping sigmoid-transformed sub-scores to a score
/// in `(0,1)`. Hidden layers use ReLU, the output a logistic sigmoid.
///
/// `weights[l]` is row-major `layer_dims[l+1] x layer_dims[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorModel<T> {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
    pub seed: u64,
}

/// Parameter gradients, same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(m: &AggregatorModel<T>) -> Self {
        Self {
            weights: m.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: m.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.params_mut().zip(other.params()) {
            *a += b;
        }
    }

    fn scale(&mut self, k: T) {
        for a in self.params_mut() {
            *a *= k;
        }
    }

    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.iter().chain(&self.biases).flatten().copied()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }
}

/// Elementwise logistic on `(l_pix, l_sem, l_obj, l_ciou, l_dep)`.
pub fn sigmoid_transform<T: Scalar>(s: &SubScores<T>) -> [T; INPUT_DIM] {
    s.to_array().map(logistic)
}

impl<T: Scalar> AggregatorModel<T> {
    /// Xavier-uniform weights drawn from a seeded stream, zero biases.
    pub fn xavier(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| T::lit(rng.gen_range(-limit..limit)))
                    .collect(),
            );
            biases.push(vec![T::zero(); fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed,
        })
    }

    /// All parameters zero; outputs exactly 0.5 for every input.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims.windows(2).map(|w| vec![T::zero(); w[0] * w[1]]).collect(),
            biases: layer_dims.windows(2).map(|w| vec![T::zero(); w[1]]).collect(),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(&self.layer_dims)?;
        let layers = self.layer_dims.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Model(format!(
                "expected {layers} weight and bias arrays, found {} and {}",
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (l, d) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].len() != d[0] * d[1] {
                return Err(Error::Model(format!(
                    "layer {l}: weight array has {} entries, expected {}",
                    self.weights[l].len(),
                    d[0] * d[1]
                )));
            }
            if self.biases[l].len() != d[1] {
                return Err(Error::Model(format!(
                    "layer {l}: bias array has {} entries, expected {}",
                    self.biases[l].len(),
                    d[1]
                )));
            }
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Activations of every layer, input first.
    fn activations(&self, input: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.num_layers() + 1);
        acts.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let prev = &acts[l];
            let w = &self.weights[l];
            let last = l + 1 == self.num_layers();
            let out: Vec<T> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = row.iter().zip(prev).map(|(a, b)| *a * *b).sum::<T>() + self.biases[l][o];
                    if last {
                        logistic(z)
                    } else {
                        z.max(T::zero())
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Network output for an already transformed input vector.
    pub fn forward_transformed(&self, input: &[T; INPUT_DIM]) -> T {
        self.activations(input).last().unwrap()[0]
    }

    /// The aggregated score in `(0,1)`.
    pub fn forward(&self, s: &SubScores<T>) -> Result<T> {
        self.validate()?;
        Ok(self.forward_transformed(&sigmoid_transform(s)))
    }

    /// Squared error `(y - target)²` and its parameter gradient.
    pub fn loss_and_gradient(&self, input: &[T; INPUT_DIM], target: T) -> (T, Gradients<T>) {
        let acts = self.activations(input);
        let y = acts.last().unwrap()[0];
        let err = y - target;
        let mut grads = Gradients::zeros_like(self);
        // dL/dz at the sigmoid output
        let mut delta = vec![T::lit(2.0) * err * y * (T::one() - y)];
        for l in (0..self.num_layers()).rev() {
            let n_in = self.layer_dims[l];
            let prev = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                grads.biases[l][o] = *d;
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(prev) {
                    *g = *d * *a;
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|i| {
                        if prev[i] > T::zero() {
                            delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| w[o * n_in + i] * *d)
                                .sum()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
            }
        }
        (err * err, grads)
    }

    /// Mean squared error and mean gradient over a batch.
    pub fn batch_gradient(&self, batch: &[([T; INPUT_DIM], T)]) -> (T, Gradients<T>) {
        let mut total = Gradients::zeros_like(self);
        let mut loss = T::zero();
        for (x, t) in batch {
            let (l, g) = self.loss_and_gradient(x, *t);
            loss += l;
            total.add_assign(&g);
        }
        let k = T::one() / T::from_usize_lossy(batch.len().max(1));
        total.scale(k);
        (loss * k, total)
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims[0] != INPUT_DIM || *dims.last().unwrap() != 1 || dims.contains(&0) {
        return Err(Error::Model(format!(
            "layer dims {dims:?} must start at {INPUT_DIM}, end at 1 and have no empty layer"
        )));
    }
    Ok(())
}

/// Largest relative difference between analytic gradients and central
/// finite differences (step `1e-5`) of the squared error over all
/// parameters. Pairs where both sides are below `1e-10` count as agreeing.
pub fn gradient_check<T: Scalar>(m: &AggregatorModel<T>, s: &SubScores<T>, target: T) -> T {
    let h = T::lit(1e-5);
    let floor = T::lit(1e-10);
    let x = sigmoid_transform(s);
    let (_, analytic) = m.loss_and_gradient(&x, target);
    let analytic: Vec<T> = analytic.params().collect();
    let mut probe = m.clone();
    let mut worst = T::zero();
    for (k, a) in analytic.iter().enumerate() {
        let original = *probe.params_mut().nth(k).unwrap();
        *probe.params_mut().nth(k).unwrap() = original + h;
        let (plus, _) = probe.loss_and_gradient(&x, target);
        *probe.params_mut().nth(k).unwrap() = original - h;
        let (minus, _) = probe.loss_and_gradient(&x, target);
        *probe.params_mut().nth(k).unwrap() = original;
        let numeric = (plus - minus) / (h + h);
        let scale = a.abs().max(numeric.abs());
        if scale > floor {
            worst = worst.max((*a - numeric).abs() / scale);
        }
    }
    worst
}

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finite_sum_grad, finite_sum_value, sigmoid, ComponentOracle};
use crate::data::ImageSet;
use crate::error::{Error, Result};
use crate::parallel::Execution;

/// Layer widths of a one-hidden-layer perceptron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

pub const MNIST_ARCHITECTURE: MlpArchitecture = MlpArchitecture { inputs: 784, hidden: 50, outputs: 10 };

impl MlpArchitecture {
    /// Parameter count: `W1 (hidden x inputs)`, `b1`, `W2 (outputs x hidden)`, `b2`, in that order.
    pub fn num_params(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }
}

/// Sigmoid hidden layer, softmax output, mean cross-entropy plus `(lambda/2)||x||^2`.
///
/// Parameters are one flat vector laid out as described in
/// [`MlpArchitecture::num_params`].
#[derive(Debug, Clone)]
pub struct Mlp {
    arch: MlpArchitecture,
    inputs: Vec<f64>,
    // per-sample nonzero input positions; images are mostly background
    nz_ptr: Vec<usize>,
    nz_idx: Vec<usize>,
    labels: Vec<usize>,
    lambda: f64,
}

impl Mlp {
    pub fn new(arch: MlpArchitecture, inputs: Vec<f64>, labels: Vec<usize>, lambda: f64) -> Result<Self> {
        if inputs.len() != labels.len() * arch.inputs {
            return Err(Error::DimensionMismatch { expected: labels.len() * arch.inputs, got: inputs.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= arch.outputs) {
            return Err(Error::Config(format!("label {bad} out of range for {} classes", arch.outputs)));
        }
        let mut nz_ptr = vec![0];
        let mut nz_idx = Vec::new();
        for row in inputs.chunks(arch.inputs.max(1)) {
            nz_idx.extend(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(p, _)| p));
            nz_ptr.push(nz_idx.len());
        }
        nz_ptr.truncate(labels.len() + 1);
        Ok(Self { arch, inputs, nz_ptr, nz_idx, labels, lambda })
    }

    pub fn from_images(images: &ImageSet, labels: &[u8], lambda: f64) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::DimensionMismatch { expected: images.count, got: labels.len() });
        }
        let arch = MlpArchitecture { inputs: images.rows * images.cols, ..MNIST_ARCHITECTURE };
        Self::new(arch, images.pixels.clone(), labels.iter().map(|&l| l as usize).collect(), lambda)
    }

    pub fn architecture(&self) -> MlpArchitecture {
        self.arch
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases for each layer.
    pub fn init_params(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.arch;
        let (_, w2, _) = a.offsets();
        let r1 = 1.0 / (a.inputs as f64).sqrt();
        let r2 = 1.0 / (a.hidden as f64).sqrt();
        DVector::from_fn(a.num_params(), |p, _| {
            let r = if p < w2 { r1 } else { r2 };
            rng.random_range(-r..r)
        })
    }

    fn sample(&self, i: usize) -> (&[f64], &[usize]) {
        let n = self.arch.inputs;
        (&self.inputs[i * n..(i + 1) * n], &self.nz_idx[self.nz_ptr[i]..self.nz_ptr[i + 1]])
    }

    /// Hidden activations and output logits for sample `i`.
    fn forward(&self, i: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.arch;
        let (b1, w2, b2) = a.offsets();
        let (input, nz) = self.sample(i);
        let hidden: Vec<f64> = (0..a.hidden)
            .map(|j| {
                let row = &x[j * a.inputs..(j + 1) * a.inputs];
                let pre: f64 = nz.iter().map(|&p| row[p] * input[p]).sum();
                sigmoid(pre + x[b1 + j])
            })
            .collect();
        let logits = (0..a.outputs)
            .map(|k| {
                let row = &x[w2 + k * a.hidden..w2 + (k + 1) * a.hidden];
                row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + x[b2 + k]
            })
            .collect();
        (hidden, logits)
    }

    /// Class predicted for sample `i`.
    pub fn predict(&self, i: usize, x: &DVector<f64>) -> usize {
        let (_, logits) = self.forward(i, x.as_slice());
        argmax(&logits)
    }

    pub fn accuracy(&self, x: &DVector<f64>) -> f64 {
        let correct = (0..self.len()).filter(|&i| self.predict(i, x) == self.labels[i]).count();
        correct as f64 / self.len() as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (k, &z)| if z > best.1 { (k, z) } else { best }).0
}

/// Softmax probabilities and `-log p[label]`, shifted by the max logit.
fn softmax_xent(logits: &[f64], label: usize) -> (Vec<f64>, f64) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - m);
    (exps.into_iter().map(|e| e / sum).collect(), loss)
}

impl ComponentOracle for Mlp {
    fn dim(&self) -> usize {
        self.arch.num_params()
    }

    fn num_components(&self) -> Option<usize> {
        Some(self.labels.len())
    }

    fn l2(&self) -> f64 {
        self.lambda
    }

    fn data_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        let (_, logits) = self.forward(i, x.as_slice());
        softmax_xent(&logits, self.labels[i]).1
    }

    fn add_data_grad(&self, i: usize, x: &DVector<f64>, out: &mut DVector<f64>) {
        let a = self.arch;
        let (b1, w2, b2) = a.offsets();
        let xs = x.as_slice();
        let (hidden, logits) = self.forward(i, xs);
        let (mut dz, _) = softmax_xent(&logits, self.labels[i]);
        dz[self.labels[i]] -= 1.0;

        let g = out.as_mut_slice();
        let mut dpre = vec![0.0; a.hidden];
        for (k, &dzk) in dz.iter().enumerate() {
            g[b2 + k] += dzk;
            let base = w2 + k * a.hidden;
            for j in 0..a.hidden {
                g[base + j] += dzk * hidden[j];
                dpre[j] += xs[base + j] * dzk;
            }
        }
        let (input, nz) = self.sample(i);
        for j in 0..a.hidden {
            let dj = dpre[j] * hidden[j] * (1.0 - hidden[j]);
            g[b1 + j] += dj;
            let row = &mut g[j * a.inputs..(j + 1) * a.inputs];
            for &p in nz {
                row[p] += dj * input[p];
            }
        }
    }

    fn full_value(&self, x: &DVector<f64>) -> f64 {
        finite_sum_value(self, x, Execution::default()).unwrap_or(f64::NAN)
    }

    fn full_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        finite_sum_grad(self, x, Execution::default()).unwrap_or_else(|_| DVector::from_element(self.dim(), f64::NAN))
    }
}

//! Fully connected Q-network: tanh hidden layers and a linear head.
//!
//! Generic over the float type so training can run in `f32` while gradient
//! checks run the same code in `f64`.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::Float;
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + SampleUniform
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + From<f32>
    + std::iter::Sum
    + std::ops::AddAssign
    + 'static
{
    fn as_f64(self) -> f64;

    /// Hidden-layer activation.
    fn activation(self) -> Self;
}

impl Real for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }

    /// Rational minimax approximation of tanh, within a few ulp of the libm
    /// result and free of branches so it vectorizes.
    fn activation(self) -> f32 {
        const A: [f32; 7] = [
            4.893_524_6e-3,
            6.372_619_3e-4,
            1.485_722_4e-5,
            5.122_297e-8,
            -8.604_672e-11,
            2.000_188e-13,
            -2.760_768_5e-16,
        ];
        const B: [f32; 4] = [4.893_525e-3, 2.268_434_6e-3, 1.185_347e-4, 1.198_258_4e-6];
        let x = self.clamp(-7.905_311, 7.905_311);
        let x2 = x * x;
        let mut p = A[6];
        for &a in A[..6].iter().rev() {
            p = p * x2 + a;
        }
        let mut q = B[3];
        for &b in B[..3].iter().rev() {
            q = q * x2 + b;
        }
        x * p / q
    }
}

impl Real for f64 {
    fn as_f64(self) -> f64 {
        self
    }

    fn activation(self) -> f64 {
        self.tanh()
    }
}

pub fn real<F: Real>(x: f64) -> F {
    <F as num_traits::NumCast>::from(x).expect("finite constant")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Dense<F> {
    /// `(outputs, inputs)`
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Network parameters. Gradients share this type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
}

/// Layer activations from a forward pass, kept for backpropagation.
/// `activations[0]` is the input and the last entry is the linear output.
pub struct Trace<F> {
    pub activations: Vec<Array2<F>>,
}

impl<F> Trace<F> {
    pub fn output(&self) -> &Array2<F> {
        self.activations.last().expect("trace has an output")
    }
}

impl<F: Real> Mlp<F> {
    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers }
    }

    /// Fan-in scaled uniform init: every weight and bias of a layer with `n`
    /// inputs is drawn from `U(-1/√n, 1/√n)`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let bound: F = real(1.0 / (layer.weight.ncols() as f64).sqrt());
            layer.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
            layer.bias.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        net
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes())
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weight.nrows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.dim() == b.bias.dim())
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Q-values for a batch of inputs, one row per sample.
    pub fn forward(&self, input: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(input.ncols())?;
        let last = self.layers.len() - 1;
        let mut h = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = affine(h.view(), layer);
            if i < last {
                h.mapv_inplace(F::activation);
            }
        }
        Ok(h)
    }

    pub fn forward_one(&self, input: &[F]) -> Result<Vec<F>> {
        self.check_input(input.len())?;
        let last = self.layers.len() - 1;
        let mut h = ArrayView1::from(input).to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.weight.dot(&h) + &layer.bias;
            if i < last {
                h.mapv_inplace(F::activation);
            }
        }
        Ok(h.to_vec())
    }

    pub fn forward_trace(&self, input: ArrayView2<F>) -> Result<Trace<F>> {
        self.check_input(input.ncols())?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = affine(activations[i].view(), layer);
            if i < last {
                h.mapv_inplace(F::activation);
            }
            activations.push(h);
        }
        Ok(Trace { activations })
    }

    /// Parameter gradients given `d_output = ∂L/∂output` for a traced batch.
    pub fn backward(&self, trace: &Trace<F>, d_output: ArrayView2<F>) -> Mlp<F> {
        let mut grads: Vec<Dense<F>> = Vec::with_capacity(self.layers.len());
        let mut delta = d_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let h_in = &trace.activations[i];
            grads.push(Dense {
                weight: delta.t().dot(h_in),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weight);
                // tanh'(z) = 1 - tanh(z)²
                Zip::from(&mut back)
                    .and(h_in)
                    .for_each(|d, &h| *d = *d * (F::one() - h * h));
                delta = back;
            }
        }
        grads.reverse();
        Mlp { layers: grads }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Mlp<F>, scale: F) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn scale(&mut self, factor: F) {
        for l in &mut self.layers {
            l.weight.mapv_inplace(|x| x * factor);
            l.bias.mapv_inplace(|x| x * factor);
        }
    }

    pub fn l2_norm(&self) -> F {
        // Eight partial sums let the loop vectorize.
        let sq = |a: &[F]| {
            let mut acc = [F::zero(); 8];
            let chunks = a.chunks_exact(8);
            let tail = chunks.remainder();
            for c in chunks {
                for k in 0..8 {
                    acc[k] += c[k] * c[k];
                }
            }
            let head = acc.iter().fold(F::zero(), |s, &x| s + x);
            tail.iter().fold(head, |s, &x| s + x * x)
        };
        self.layers
            .iter()
            .map(|l| sq(contiguous(&l.weight)) + sq(l.bias.as_slice().expect("contiguous")))
            .fold(F::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mlp<F>) -> F {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                a.weight
                    .iter()
                    .zip(b.weight.iter())
                    .chain(a.bias.iter().zip(b.bias.iter()))
            })
            .fold(F::zero(), |m, (&x, &y)| m.max((x - y).abs()))
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn flat(&self) -> Vec<F> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn flat_mut(&mut self) -> Vec<&mut F> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
            .collect()
    }

    pub fn cast<G: Real>(&self) -> Mlp<G> {
        let conv = |x: &F| real::<G>(x.as_f64());
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.map(conv),
                    bias: l.bias.map(conv),
                })
                .collect(),
        }
    }
}

pub(crate) fn contiguous<F>(a: &Array2<F>) -> &[F] {
    a.as_slice().expect("parameters are in standard layout")
}

fn affine<F: Real>(input: ArrayView2<F>, layer: &Dense<F>) -> Array2<F> {
    let mut out = input.dot(&layer.weight.t());
    out += &layer.bias;
    out
}

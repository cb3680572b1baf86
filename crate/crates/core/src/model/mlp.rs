//! Dense ReLU networks: affine layers with ReLU between them and an affine
//! output layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// `y = W x + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Layer<T> {
    pub weight: Mat<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn new(weight: Mat<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows {
            return Err(Error::DimensionMismatch { expected: weight.rows, got: bias.len() });
        }
        if weight.data.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite layer entry".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Mat::zeros(output, input), bias: vec![T::zero(); output] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weight = Mat::from_fn(output, input, |_, _| T::lit(rng.random_range(-limit..=limit)));
        Self { weight, bias: vec![T::zero(); output] }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = self.weight.matvec(x);
        for (v, &b) in y.iter_mut().zip(&self.bias) {
            *v += b;
        }
        y
    }

    fn nonzeros(&self) -> usize {
        self.weight.data.iter().chain(&self.bias).filter(|&&v| v != T::zero()).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "RawMlp<T>")]
pub struct MLPParams<T> {
    layers: Vec<Layer<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct RawMlp<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> TryFrom<RawMlp<T>> for MLPParams<T> {
    type Error = Error;
    fn try_from(raw: RawMlp<T>) -> Result<Self> {
        for l in &raw.layers {
            Layer::new(l.weight.clone(), l.bias.clone())?;
            if l.weight.data.len() != l.weight.rows * l.weight.cols {
                return Err(Error::DimensionMismatch { expected: l.weight.rows * l.weight.cols, got: l.weight.data.len() });
            }
        }
        Self::new(raw.layers)
    }
}

/// Values recorded by [`MLPParams::forward_trace`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace<T> {
    /// Input of each layer (post-activation of the previous one).
    pub inputs: Vec<Vec<T>>,
    /// Pre-activation output of each layer; the last one is the network output.
    pub pre: Vec<Vec<T>>,
}

impl<T: Real> MlpTrace<T> {
    pub fn output(&self) -> &[T] {
        self.pre.last().expect("network has layers")
    }

    /// Which hidden units are active; used to detect crossing a ReLU kink.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let hidden = self.pre.len().saturating_sub(1);
        self.pre[..hidden].iter().flatten().map(|&v| v > T::zero()).collect()
    }
}

impl<T: Real> MLPParams<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::DimensionMismatch { expected: pair[0].output_dim(), got: pair[1].input_dim() });
            }
        }
        Ok(Self { layers })
    }

    /// Layer sizes `dims = [input, hidden.., output]`, Glorot initialized.
    pub fn glorot<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Self::from_dims(dims, |i, o| Layer::glorot(i, o, rng))
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::from_dims(dims, Layer::zeros)
    }

    fn from_dims(dims: &[usize], mut make: impl FnMut(usize, usize) -> Layer<T>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid layer sizes {dims:?}")));
        }
        Self::new(dims.windows(2).map(|w| make(w[0], w[1])).collect())
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(|l| Layer::zeros(l.input_dim(), l.output_dim())).collect() }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Largest layer size, input included.
    pub fn width(&self) -> usize {
        self.layers.iter().map(Layer::output_dim).fold(self.input_dim(), usize::max)
    }

    /// Nonzero weight and bias entries.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::nonzeros).sum()
    }

    /// Total number of weight and bias entries.
    pub fn dense_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_trace(x)?.pre.pop().expect("network has layers"))
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<MlpTrace<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&current);
            inputs.push(current);
            current = if k + 1 < self.layers.len() { z.iter().map(|&v| v.max(T::zero())).collect() } else { Vec::new() };
            pre.push(z);
        }
        Ok(MlpTrace { inputs, pre })
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input. ReLU'(0) is taken as 0.
    pub fn backward(&self, trace: &MlpTrace<T>, grad_out: &[T], grads: &mut Self) -> Vec<T> {
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &trace.inputs[k];
            for (r, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                g.bias[r] += d;
                let row = &mut g.weight.data[r * layer.weight.cols..(r + 1) * layer.weight.cols];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += d * a;
                }
            }
            let mut back = layer.weight.matvec_t(&delta);
            if k > 0 {
                for (b, &z) in back.iter_mut().zip(&trace.pre[k - 1]) {
                    if z <= T::zero() {
                        *b = T::zero();
                    }
                }
            }
            delta = back;
        }
        delta
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weight.data.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| [l.weight.data.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }
}

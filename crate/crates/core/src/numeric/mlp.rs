//! Fully connected networks with hand-written backprop.
//!
//! Hidden layers apply the net's activation; the output layer is linear.
//! Weights are stored `(out, in)` row-major, one [`Layer`] per affine map.

use serde::{Deserialize, Serialize};

use super::matrix::{axpy, Matrix};
use super::rng::Rng;
use crate::{Error, Result};

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    /// Tanh approximation of GELU.
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh()),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let th = (GELU_K * (x + GELU_C * x * x * x)).tanh();
                0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
            }
        }
    }

    /// Upper bound on `|f'|`.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Tanh | Activation::Relu => 1.0,
            // max of the derivative is 1.12899...
            Activation::Gelu => 1.129,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `(out, in)`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// `out = input · Wᵀ + b`. Rows are processed four at a time so each
    /// weight row is loaded once per block; every output entry is summed in
    /// input order, so a row's result does not depend on its batch.
    fn forward_into(&self, input: &Matrix, out: &mut Matrix) {
        let rows = input.rows();
        let n_out = self.out_dim();
        let mut b = 0;
        while b + 4 <= rows {
            let (x0, x1, x2, x3) = (input.row(b), input.row(b + 1), input.row(b + 2), input.row(b + 3));
            for o in 0..n_out {
                let w = self.weight.row(o);
                let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
                for (i, &wi) in w.iter().enumerate() {
                    s0 += wi * x0[i];
                    s1 += wi * x1[i];
                    s2 += wi * x2[i];
                    s3 += wi * x3[i];
                }
                let bias = self.bias[o];
                out.set(b, o, s0 + bias);
                out.set(b + 1, o, s1 + bias);
                out.set(b + 2, o, s2 + bias);
                out.set(b + 3, o, s3 + bias);
            }
            b += 4;
        }
        for r in b..rows {
            let x = input.row(r);
            for o in 0..n_out {
                let v = seq_dot(self.weight.row(o), x) + self.bias[o];
                out.set(r, o, v);
            }
        }
    }
}

/// `g.weight += deltaᵀ · input`, `g.bias += Σ_b delta_b`, four batch rows
/// per pass over each gradient row.
fn accumulate_weight_grad(delta: &Matrix, input: &Matrix, g: &mut Layer) {
    let rows = input.rows();
    for o in 0..delta.cols() {
        let gw = g.weight.row_mut(o);
        let mut b = 0;
        while b + 4 <= rows {
            let (d0, d1, d2, d3) = (delta.get(b, o), delta.get(b + 1, o), delta.get(b + 2, o), delta.get(b + 3, o));
            let (x0, x1, x2, x3) = (input.row(b), input.row(b + 1), input.row(b + 2), input.row(b + 3));
            for (i, w) in gw.iter_mut().enumerate() {
                *w += d0 * x0[i] + d1 * x1[i] + d2 * x2[i] + d3 * x3[i];
            }
            g.bias[o] += d0 + d1 + d2 + d3;
            b += 4;
        }
        for r in b..rows {
            let d = delta.get(r, o);
            axpy(d, input.row(r), gw);
            g.bias[o] += d;
        }
    }
}

/// `dx = Σ_o dy_o · W_o`, four weight rows per pass over `dx`.
fn input_grad_row(weight: &Matrix, dy: &[f64], dx: &mut [f64]) {
    let n_out = dy.len();
    let mut o = 0;
    while o + 4 <= n_out {
        let (d0, d1, d2, d3) = (dy[o], dy[o + 1], dy[o + 2], dy[o + 3]);
        let (w0, w1, w2, w3) = (weight.row(o), weight.row(o + 1), weight.row(o + 2), weight.row(o + 3));
        for (i, v) in dx.iter_mut().enumerate() {
            *v += d0 * w0[i] + d1 * w1[i] + d2 * w2[i] + d3 * w3[i];
        }
        o += 4;
    }
    for r in o..n_out {
        axpy(dy[r], weight.row(r), dx);
    }
}

#[inline]
fn seq_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Parameter gradients, shaped like the net's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl MlpGrads {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(1.0, b.weight.as_slice(), a.weight.as_mut_slice());
            axpy(1.0, &b.bias, &mut a.bias);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight.as_mut_slice().iter_mut().for_each(|x| *x *= s);
            l.bias.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .into_iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Cached activations of a batched forward pass, consumed by
/// [`MlpNet::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Matrix>,
    output: Matrix,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn input(&self) -> &Matrix {
        &self.inputs[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    widths: Vec<usize>,
    activation: Activation,
    time_embed_width: usize,
    layers: Vec<Layer>,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::invalid("an MLP needs at least input and output widths"));
    }
    // zero-width inputs are legal only as part of a larger input, never alone
    if widths[1..].iter().any(|&w| w == 0) || widths[0] == 0 {
        return Err(Error::invalid(format!("layer widths must be positive: {widths:?}")));
    }
    Ok(())
}

impl MlpNet {
    /// Seeded initialization: weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(widths: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                for x in layer.weight.as_mut_slice() {
                    *x = rng.uniform_range(-bound, bound);
                }
                layer
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            time_embed_width: 0,
            layers,
        })
    }

    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        check_widths(widths)?;
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            time_embed_width: 0,
            layers: widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("an MLP needs at least one layer"))?;
        let mut widths = vec![first.in_dim()];
        for l in &layers {
            let prev = *widths.last().unwrap();
            if l.in_dim() != prev {
                return Err(Error::Shape {
                    context: "consecutive layer widths",
                    expected: prev,
                    actual: l.in_dim(),
                });
            }
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape {
                    context: "bias length",
                    expected: l.out_dim(),
                    actual: l.bias.len(),
                });
            }
            widths.push(l.out_dim());
        }
        check_widths(&widths)?;
        Ok(Self {
            widths,
            activation,
            time_embed_width: 0,
            layers,
        })
    }

    /// Records how many leading input features are a time embedding.
    pub fn with_time_embed_width(mut self, width: usize) -> Self {
        self.time_embed_width = width;
        self
    }

    pub fn time_embed_width(&self) -> usize {
        self.time_embed_width
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Parameter blocks in a fixed order: `layer{i}.weight`, `layer{i}.bias`.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), l.weight.as_slice()),
                    (format!("layer{i}.bias"), l.bias.as_slice()),
                ]
            })
            .collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), l.weight.as_mut_slice()),
                    (format!("layer{i}.bias"), l.bias.as_mut_slice()),
                ]
            })
            .collect()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape {
                context: "mlp input",
                expected: self.input_dim(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y: Vec<f64> = (0..layer.out_dim())
                .map(|o| seq_dot(layer.weight.row(o), &x) + layer.bias[o])
                .collect();
            if i != last {
                y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input.cols())?;
        let last = self.layers.len() - 1;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = Matrix::zeros(x.rows(), layer.out_dim());
            layer.forward_into(&x, &mut y);
            if i != last {
                y.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Matrix) -> Result<Trace> {
        self.check_input(input.cols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(x.rows(), layer.out_dim());
            layer.forward_into(&x, &mut z);
            inputs.push(x);
            if i == last {
                return Ok(Trace {
                    inputs,
                    pre,
                    output: z,
                });
            }
            let mut a = z.clone();
            a.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = self.activation.apply(*v));
            pre.push(z);
            x = a;
        }
        unreachable!("an MLP has at least one layer")
    }

    /// Backprop of `upstream = dL/d(output)` through a cached forward pass.
    /// Returns parameter gradients summed over the batch and the per-row
    /// input gradient.
    pub fn backward(&self, trace: &Trace, upstream: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if upstream.cols() != self.output_dim() {
            return Err(Error::Shape {
                context: "mlp upstream gradient",
                expected: self.output_dim(),
                actual: upstream.cols(),
            });
        }
        if upstream.rows() != trace.output.rows() {
            return Err(Error::Shape {
                context: "mlp upstream batch",
                expected: trace.output.rows(),
                actual: upstream.rows(),
            });
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            let mut d_in = Matrix::zeros(input.rows(), layer.in_dim());
            accumulate_weight_grad(&delta, input, g);
            for b in 0..input.rows() {
                input_grad_row(&layer.weight, delta.row(b), d_in.row_mut(b));
            }
            if l > 0 {
                if self.activation == Activation::Tanh {
                    // tanh' = 1 − tanh², and tanh(z) is this layer's input
                    for (dv, &a) in d_in.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        *dv *= 1.0 - a * a;
                    }
                } else {
                    let z = &trace.pre[l - 1];
                    for (dv, &zv) in d_in.as_mut_slice().iter_mut().zip(z.as_slice()) {
                        *dv *= self.activation.derivative(zv);
                    }
                }
            }
            delta = d_in;
        }
        Ok((grads, delta))
    }

    /// Single-input gradient: parameter gradients of `upstream · f(input)`
    /// and the gradient with respect to the input.
    pub fn grad(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        self.check_input(input.len())?;
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let trace = self.forward_trace(&x)?;
        let up = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
        let (g, dx) = self.backward(&trace, &up)?;
        Ok((g, dx.into_vec()))
    }

    /// Product of per-layer spectral norms and activation Lipschitz bounds;
    /// an upper bound on the Lipschitz constant of the whole map.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        let hidden = self.layers.len() - 1;
        let act = self.activation.lipschitz().powi(hidden as i32);
        self.layers
            .iter()
            // power iteration converges from below; the margin keeps this an upper bound
            .map(|l| l.weight.spectral_norm(500) * (1.0 + 1e-6))
            .product::<f64>()
            * act
    }
}

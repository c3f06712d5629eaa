//! Fully connected networks with hand-written reverse mode.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Logistic => logistic(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One affine layer followed by an activation. Weights are row-major `output x input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Layer { input, output, activation, weights: vec![0.0; input * output], bias: vec![0.0; output] }
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.input * self.output || self.bias.len() != self.output {
            return Err(Error::Dimension { expected: self.input * self.output, got: self.weights.len() });
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameter"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Pre- and post-activation values of every layer for one input.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&self.input)
    }
}

/// Gradients laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).flatten().for_each(|x| *x *= s);
    }

    /// Flattened in parameter order (per layer: weights, then bias).
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| w.iter().chain(b)).copied()
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == 0.0)
    }
}

impl Mlp {
    /// He-initialized network; `sizes` lists every layer width including input and output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut mlp = Mlp::zeros(sizes, hidden, output)?;
        for layer in &mut mlp.layers {
            let std = (2.0 / layer.input as f64).sqrt();
            let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            layer.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        }
        Ok(mlp)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| Layer::zeros(sizes[i], sizes[i + 1], if i + 1 == n { output } else { hidden }))
            .collect();
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            l.validate()?;
            if i > 0 && layers[i - 1].output != l.input {
                return Err(Error::Dimension { expected: layers[i - 1].output, got: l.input });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.output)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).copied()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in &self.layers {
            a = affine(l, &a).into_iter().map(|z| l.activation.apply(z)).collect();
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = post.last().map(Vec::as_slice).unwrap_or(x);
            let z = affine(l, input);
            let a = z.iter().map(|&v| l.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(Trace { input: x.to_vec(), pre, post })
    }

    /// Adds `d(upstream . output)/d(params)` into `grads`.
    pub fn backward_into(&self, trace: &Trace, upstream: &[f64], grads: &mut MlpGrads) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension { expected: self.output_dim(), got: upstream.len() });
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            for (o, d) in delta.iter_mut().enumerate() {
                *d *= l.activation.derivative(trace.pre[i][o], trace.post[i][o]);
            }
            let input = if i == 0 { &trace.input } else { &trace.post[i - 1] };
            let gw = &mut grads.weights[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * l.input..(o + 1) * l.input];
                row.iter_mut().zip(input).for_each(|(g, &x)| *g += d * x);
                grads.bias[i][o] += d;
            }
            if i > 0 {
                let mut next = vec![0.0; l.input];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &l.weights[o * l.input..(o + 1) * l.input];
                    next.iter_mut().zip(row).for_each(|(n, &w)| *n += d * w);
                }
                delta = next;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }
}

fn affine(l: &Layer, x: &[f64]) -> Vec<f64> {
    (0..l.output)
        .map(|o| {
            let row = &l.weights[o * l.input..(o + 1) * l.input];
            l.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

pub fn mlp_forward(m: &Mlp, x: &[f64]) -> Result<Vec<f64>> {
    m.forward(x)
}

/// Parameter gradients of `upstream . m(x)`.
pub fn mlp_backward(m: &Mlp, x: &[f64], upstream: &[f64]) -> Result<MlpGrads> {
    let trace = m.forward_trace(x)?;
    let mut grads = m.zero_grads();
    m.backward_into(&trace, upstream, &mut grads)?;
    Ok(grads)
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    /// One update with learning rate `lr`; `grads` and `params` must line up.
    pub fn step<'a>(&mut self, lr: f64, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = f64>) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

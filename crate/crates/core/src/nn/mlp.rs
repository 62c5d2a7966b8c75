//! Fully connected networks with exact reverse-mode gradients.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// LeakyReLU slope used for hidden layers.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::LeakyRelu(slope) => {
                if x >= T::zero() {
                    x
                } else {
                    x * T::lit(slope)
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::LeakyRelu(slope) => {
                if y >= T::zero() {
                    T::one()
                } else {
                    T::lit(slope)
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Identity => T::one(),
        }
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(s) => write!(f, "leaky_relu:{s}"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            _ => s
                .strip_prefix("leaky_relu:")
                .and_then(|v| v.parse().ok())
                .map(Activation::LeakyRelu)
                .ok_or_else(|| Error::Config(format!("unknown activation tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out × in`
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// A dense network: affine map plus activation per layer.
#[derive(Debug)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    seed: u64,
    /// Changes whenever parameters change; tapes remember it.
    version: u64,
}

impl<T: Real> Clone for Mlp<T> {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            seed: self.seed,
            version: fresh_version(),
        }
    }
}

impl<T: Real> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Layer widths plus one activation per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    /// LeakyReLU on every hidden layer, `output` on the last.
    pub fn dense(widths: &[usize], output: Activation) -> Self {
        let layers = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::LeakyRelu(LEAKY_SLOPE); layers];
        if let Some(last) = activations.last_mut() {
            *last = output;
        }
        Self {
            widths: widths.to_vec(),
            activations,
        }
    }

    /// `Σ (out·in + out)` over layers.
    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.activations.len() != self.widths.len() - 1 {
            return Err(Error::Config(format!(
                "architecture needs ≥2 widths and one activation per layer ({} widths, {} activations)",
                self.widths.len(),
                self.activations.len()
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        Ok(())
    }
}

/// Cached layer inputs/outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Matrix<T>>,
    version: u64,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.acts.last().expect("tape holds the input at least")
    }

    pub fn input(&self) -> &Matrix<T> {
        &self.acts[0]
    }
}

/// Where the backward pass is seeded.
#[derive(Debug, Clone, Copy)]
pub enum Seed<'a, T> {
    /// Gradient with respect to the network output.
    Output(&'a Matrix<T>),
    /// Gradient with respect to the last layer's pre-activation, e.g. the
    /// `(ŷ − y)/N` form of cross-entropy through a sigmoid.
    PreActivation(&'a Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.outputs(), l.inputs()))
                .collect(),
            biases: model.layers.iter().map(|l| vec![T::zero(); l.outputs()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += *y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.as_slice().iter().all(|v| v.is_zero()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_zero()))
    }
}

#[derive(Debug, Clone)]
pub struct Backward<T> {
    /// `None` when parameter gradients were not requested (frozen networks).
    pub params: Option<Gradients<T>>,
    /// `None` when the input gradient was not requested.
    pub input: Option<Matrix<T>>,
}

impl<T: Real> Mlp<T> {
    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .widths
            .windows(2)
            .zip(&arch.activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| T::lit(rng.random_range(-limit..limit)))
                    .collect();
                Layer {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized"),
                    bias: vec![T::zero(); fan_out],
                    activation,
                }
            })
            .collect();
        Ok(Self {
            layers,
            seed,
            version: fresh_version(),
        })
    }

    pub fn from_layers(layers: Vec<Layer<T>>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer widths do not chain: {} → {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
        }
        Ok(Self {
            layers,
            seed,
            version: fresh_version(),
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn architecture(&self) -> Architecture {
        let mut widths = vec![self.input_width()];
        widths.extend(self.layers.iter().map(|l| l.outputs()));
        Architecture {
            widths,
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.rows() * l.weights.cols() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn parameters(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(|v| v.is_finite())
    }

    /// Mutable access; invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<(Matrix<T>, Tape<T>)> {
        if input.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} but network expects {}",
                input.cols(),
                self.input_width()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for layer in &self.layers {
            let mut out = acts.last().expect("non-empty").matmul_nt(&layer.weights);
            let width = layer.outputs();
            let act = layer.activation;
            for row in out.as_mut_slice().chunks_mut(width) {
                for (v, &b) in row.iter_mut().zip(&layer.bias) {
                    *v = act.apply(*v + b);
                }
            }
            acts.push(out);
        }
        let out = acts.last().expect("non-empty").clone();
        Ok((
            out,
            Tape {
                acts,
                version: self.version,
            },
        ))
    }

    /// Inference without keeping a tape.
    pub fn predict_batch(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        if input.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} but network expects {}",
                input.cols(),
                self.input_width()
            )));
        }
        let mut current = None::<Matrix<T>>;
        for layer in &self.layers {
            let src = current.as_ref().unwrap_or(input);
            let mut out = src.matmul_nt(&layer.weights);
            let width = layer.outputs();
            for row in out.as_mut_slice().chunks_mut(width) {
                for (v, &b) in row.iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            current = Some(out);
        }
        Ok(current.expect("non-empty network"))
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, Tape<T>)> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let (out, tape) = self.forward_batch(&m)?;
        Ok((out.into_vec(), tape))
    }

    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.predict_batch(&m)?.into_vec())
    }

    /// Reverse pass over a tape from this exact parameter state.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        seed: Seed<'_, T>,
        want_params: bool,
        want_input: bool,
    ) -> Result<Backward<T>> {
        if tape.version != self.version {
            return Err(Error::Contract(
                "tape was recorded against different parameters".into(),
            ));
        }
        let out = tape.output();
        let mut delta = match seed {
            Seed::Output(g) | Seed::PreActivation(g) => {
                if (g.rows(), g.cols()) != (out.rows(), out.cols()) {
                    return Err(Error::Shape(format!(
                        "seed gradient {}×{} vs output {}×{}",
                        g.rows(),
                        g.cols(),
                        out.rows(),
                        out.cols()
                    )));
                }
                g.clone()
            }
        };
        let last = self.layers.len() - 1;
        if let Seed::Output(_) = seed {
            let act = self.layers[last].activation;
            for (d, &y) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                *d *= act.derivative_from_output(y);
            }
        }
        let mut grads = want_params.then(|| Gradients::zeros_like(self));
        let mut input_grad = None;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let x = &tape.acts[l];
            if let Some(g) = grads.as_mut() {
                delta.matmul_tn_into(x, T::zero(), &mut g.weights[l]);
                let db = &mut g.biases[l];
                for row in delta.as_slice().chunks(layer.outputs()) {
                    for (b, &d) in db.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            if l == 0 && !want_input {
                break;
            }
            let mut upstream = delta.matmul(&layer.weights);
            if l == 0 {
                input_grad = Some(upstream);
                break;
            }
            let act = self.layers[l - 1].activation;
            for (d, &y) in upstream.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *d *= act.derivative_from_output(y);
            }
            delta = upstream;
        }
        Ok(Backward {
            params: grads,
            input: input_grad,
        })
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: Matrix::from_vec(
                    l.weights.rows(),
                    l.weights.cols(),
                    l.weights.as_slice().iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
                )
                .expect("same shape"),
                bias: l.bias.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
                activation: l.activation,
            })
            .collect();
        Mlp {
            layers,
            seed: self.seed,
            version: fresh_version(),
        }
    }
}

//! A small dense-network engine: fully connected layers, relu/sigmoid
//! activations, inverted dropout, MSE and Huber losses, reverse-mode
//! gradients and Adam.
//!
//! Networks are generic over the parameter float type. The pipeline trains
//! `f32` networks; gradient checks run the same code at `f64`. Loss values,
//! bias reductions and Adam moments are always accumulated in `f64`.

mod adam;
mod io;
mod loss;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{Adam, AdamConfig};
pub use io::{read_model, write_model, ModelHeader, MODEL_FORMAT};
pub use loss::{LossKind, LossSpec};

/// Float types a [`DenseNet`] can be instantiated with.
pub trait Scalar:
    LinalgScalar + Float + AddAssign + MulAssign + Send + Sync + Debug + 'static
{
    fn cast_from(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn cast_from(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn cast_from(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(T::zero())),
            Activation::Sigmoid => z.mapv_inplace(|v| T::one() / (T::one() + (-v).exp())),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, given the activation output.
    fn backprop<T: Scalar>(self, grad: &mut Array2<T>, activated: &Array2<T>) {
        match self {
            Activation::Relu => grad.zip_mut_with(activated, |g, &a| {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(activated, |g, &a| *g = *g * a * (T::one() - a)),
            Activation::Identity => {}
        }
    }
}

/// Shape of one dense layer. `dropout` is applied to the layer's output in
/// training mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation, dropout: f64) -> Self {
        Self {
            units,
            activation,
            dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `[out x in]`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
    pub dropout: f64,
}

impl<T: Scalar> Dense<T> {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.nrows(), self.activation, self.dropout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks drawn from `seed`.
    Train { seed: u64 },
    Eval,
}

/// Per-layer values recorded by [`DenseNet::forward`] for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// Post-activation values before dropout.
    pub activated: Vec<Array2<T>>,
    /// Inverted-dropout masks (`0` or `1/(1-p)`), where dropout was applied.
    pub masks: Vec<Option<Array2<T>>>,
    /// Layer outputs after dropout; the last entry is the network output.
    pub outputs: Vec<Array2<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &Array2<T> {
        self.outputs.last().expect("network has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().all(|v| v.is_finite()) && g.bias.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T> {
    input_dim: usize,
    layers: Vec<Dense<T>>,
}

fn init_limit(activation: Activation, fan_in: usize, fan_out: usize) -> f64 {
    match activation {
        Activation::Relu => (6.0 / fan_in as f64).sqrt(),
        Activation::Sigmoid | Activation::Identity => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    }
}

impl<T: Scalar> DenseNet<T> {
    /// He-uniform weights for relu layers, Glorot-uniform otherwise, zero biases.
    pub fn init(input_dim: usize, layers: &[LayerSpec], seed: u64) -> Result<Self> {
        if input_dim == 0 || layers.is_empty() || layers.iter().any(|l| l.units == 0) {
            return Err(Error::InvalidArgument(
                "network dimensions must be positive and non-empty".into(),
            ));
        }
        if let Some(l) = layers.iter().find(|l| !(0.0..1.0).contains(&l.dropout)) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                l.dropout
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input_dim;
        let mut built = Vec::with_capacity(layers.len());
        for spec in layers {
            let limit = init_limit(spec.activation, fan_in, spec.units);
            let weights = Array2::from_shape_simple_fn((spec.units, fan_in), || {
                T::cast_from(rng.random_range(-limit..limit))
            });
            built.push(Dense {
                weights,
                bias: Array1::zeros(spec.units),
                activation: spec.activation,
                dropout: spec.dropout,
            });
            fan_in = spec.units;
        }
        Ok(Self {
            input_dim,
            layers: built,
        })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("network needs a layer".into()))?;
        let input_dim = first.weights.ncols();
        let mut fan_in = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != fan_in || l.bias.len() != l.weights.nrows() {
                return Err(Error::shape(
                    format!("layer {i} with {fan_in} inputs"),
                    format!("{:?} weights, {} biases", l.weights.dim(), l.bias.len()),
                ));
            }
            fan_in = l.weights.nrows();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Dense::spec).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Keeps the first `n` layers, e.g. the encoder half of an autoencoder.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n} of {} layers",
                self.layers.len()
            )));
        }
        Self::from_layers(self.layers[..n].to_vec())
    }

    pub fn cast<U: Scalar>(&self) -> DenseNet<U> {
        DenseNet {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: l.weights.mapv(|v| U::cast_from(v.as_f64())),
                    bias: l.bias.mapv(|v| U::cast_from(v.as_f64())),
                    activation: l.activation,
                    dropout: l.dropout,
                })
                .collect(),
        }
    }

    fn check_input(&self, batch: &ArrayView2<'_, T>) -> Result<()> {
        if batch.ncols() != self.input_dim {
            return Err(Error::shape(
                format!("batch width {}", self.input_dim),
                batch.ncols(),
            ));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Runs the network on `batch` (`[B x in]`), keeping every intermediate.
    ///
    /// Dropout masks depend only on `seed` and layer shapes, so two calls with
    /// the same seed and batch size share masks regardless of parameters.
    pub fn forward(&self, batch: ArrayView2<'_, T>, mode: Mode) -> Result<Trace<T>> {
        self.check_input(&batch)?;
        let mut rng = match mode {
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Eval => None,
        };
        let n = self.layers.len();
        let mut trace = Trace {
            activated: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { batch } else { trace.outputs[i - 1].view() };
            let mut z = input.dot(&layer.weights.t());
            z += &layer.bias;
            layer.activation.apply(&mut z);
            let mask = match rng.as_mut() {
                Some(rng) if layer.dropout > 0.0 => {
                    let keep = T::cast_from(1.0 / (1.0 - layer.dropout));
                    let p = layer.dropout;
                    Some(Array2::from_shape_simple_fn(z.dim(), || {
                        if rng.random::<f64>() < p {
                            T::zero()
                        } else {
                            keep
                        }
                    }))
                }
                _ => None,
            };
            let output = match &mask {
                Some(m) => &z * m,
                None => z.clone(),
            };
            trace.activated.push(z);
            trace.masks.push(mask);
            trace.outputs.push(output);
        }
        Ok(trace)
    }

    /// Eval-mode output only.
    pub fn predict(&self, batch: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(&batch)?;
        let mut current: Option<Array2<T>> = None;
        for layer in &self.layers {
            let input = current.as_ref().map_or(batch, |c| c.view());
            let mut z = input.dot(&layer.weights.t());
            z += &layer.bias;
            layer.activation.apply(&mut z);
            current = Some(z);
        }
        Ok(current.expect("network has at least one layer"))
    }

    /// Mean loss over batch and output dimensions.
    pub fn loss(
        &self,
        batch: ArrayView2<'_, T>,
        targets: ArrayView2<'_, T>,
        loss: LossSpec,
        mode: Mode,
    ) -> Result<f64> {
        let trace = self.forward(batch, mode)?;
        check_targets(trace.output(), &targets)?;
        Ok(loss.value(trace.output().view(), targets))
    }

    /// Loss and reverse-mode gradients for every weight and bias, using the
    /// same dropout masks as the forward pass.
    pub fn loss_and_grad(
        &self,
        batch: ArrayView2<'_, T>,
        targets: ArrayView2<'_, T>,
        loss: LossSpec,
        mode: Mode,
    ) -> Result<(f64, Gradients<T>)> {
        let trace = self.forward(batch, mode)?;
        check_targets(trace.output(), &targets)?;
        let value = loss.value(trace.output().view(), targets);
        let mut delta = loss.gradient(trace.output().view(), targets);
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(mask) = &trace.masks[i] {
                delta *= mask;
            }
            layer.activation.backprop(&mut delta, &trace.activated[i]);
            let input = if i == 0 { batch } else { trace.outputs[i - 1].view() };
            let weights = delta.t().dot(&input);
            let bias = delta
                .axis_iter(Axis(1))
                .map(|col| T::cast_from(col.iter().map(|v| v.as_f64()).sum()))
                .collect();
            if i > 0 {
                delta = delta.dot(&layer.weights);
            }
            grads.push(LayerGrad { weights, bias });
        }
        grads.reverse();
        Ok((value, Gradients { layers: grads }))
    }
}

fn check_targets<T: Scalar>(output: &Array2<T>, targets: &ArrayView2<'_, T>) -> Result<()> {
    if output.dim() != targets.dim() {
        return Err(Error::shape(
            format!("targets {:?}", output.dim()),
            format!("{:?}", targets.dim()),
        ));
    }
    Ok(())
}

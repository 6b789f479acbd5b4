//! Dense network definition, forward pass with tape, and reverse-mode
//! backward passes (per sample and accumulated).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::adam::PerSampleGrads;
use crate::nn::Real;
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    /// Slope 0.2 on the negative side.
    LeakyRelu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<F: Real>(self, z: F) -> F {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > F::zero() {
                    z
                } else {
                    F::zero()
                }
            }
            Activation::LeakyRelu => {
                if z > F::zero() {
                    z
                } else {
                    F::of(0.2) * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    pub fn derivative<F: Real>(self, z: F) -> F {
        match self {
            Activation::Identity => F::one(),
            Activation::Relu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::LeakyRelu => {
                if z > F::zero() {
                    F::one()
                } else {
                    F::of(0.2)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                F::one() - t * t
            }
        }
    }

    /// Second derivative; zero almost everywhere for the piecewise-linear
    /// activations.
    #[inline]
    pub fn second_derivative<F: Real>(self, z: F) -> F {
        match self {
            Activation::Identity | Activation::Relu | Activation::LeakyRelu => F::zero(),
            Activation::Tanh => {
                let t = z.tanh();
                F::of(-2.0) * t * (F::one() - t * t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    /// Additive skip connection from the layer input; requires matching widths.
    pub residual: bool,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        LayerSpec {
            width,
            activation,
            residual: false,
        }
    }

    pub fn residual(width: usize, activation: Activation) -> Self {
        LayerSpec {
            width,
            activation,
            residual: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetSpec {
    pub fn new(input: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = NetSpec { input, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.layers.is_empty() {
            return Err(Error::invalid("net needs input width >= 1 and >= 1 layer"));
        }
        let mut prev = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.width == 0 {
                return Err(Error::invalid(format!("layer {i} has width 0")));
            }
            if layer.residual && layer.width != prev {
                return Err(Error::invalid(format!(
                    "residual layer {i} needs width {prev}, has {}",
                    layer.width
                )));
            }
            prev = layer.width;
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("validated").width
    }

    pub fn param_count(&self) -> usize {
        let mut count = 0;
        let mut prev = self.input;
        for layer in &self.layers {
            count += layer.width * prev + layer.width;
            prev = layer.width;
        }
        count
    }

    /// (weight offset, bias offset, fan-in, fan-out) per layer.
    fn layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut cursor = 0;
        let mut prev = self.input;
        for layer in &self.layers {
            let w_off = cursor;
            let b_off = cursor + layer.width * prev;
            out.push((w_off, b_off, prev, layer.width));
            cursor = b_off + layer.width;
            prev = layer.width;
        }
        out
    }
}

/// Recorded forward pass for one sample: pre-activations and layer outputs.
#[derive(Debug, Clone)]
pub struct Tape<F> {
    pub input: Vec<F>,
    pub pre: Vec<Vec<F>>,
    pub post: Vec<Vec<F>>,
}

impl<F: Real> Tape<F> {
    pub fn output(&self) -> &[F] {
        self.post.last().expect("at least one layer")
    }

    pub(crate) fn layer_input(&self, l: usize) -> &[F] {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Backprop<F> {
    pub param_grad: Vec<F>,
    pub input_grad: Vec<F>,
}

/// A dense multilayer perceptron: spec plus flattened parameters.
///
/// Parameters are a single flat vector (weights row-major, then bias, per
/// layer) so optimizers and the privacy machinery can treat the model as one
/// coordinate vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp<F> {
    pub spec: NetSpec,
    pub params: Vec<F>,
}

impl<F: Real> Mlp<F> {
    /// Glorot-uniform initialization, deterministic per seed.
    pub fn init(spec: NetSpec, seed: u64) -> Self {
        let mut rng = derive_rng(seed, "mlp-init", 0);
        let mut params = vec![F::zero(); spec.param_count()];
        for (w_off, b_off, fan_in, fan_out) in spec.layout() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in params[w_off..b_off].iter_mut() {
                *w = F::of(rng.random_range(-bound..bound));
            }
        }
        Mlp { spec, params }
    }

    pub fn zeroed(spec: NetSpec) -> Self {
        let params = vec![F::zero(); spec.param_count()];
        Mlp { spec, params }
    }

    pub fn forward(&self, x: &[F]) -> Result<Tape<F>> {
        if x.len() != self.spec.input {
            return Err(Error::Shape(format!(
                "input has {} features, net expects {}",
                x.len(),
                self.spec.input
            )));
        }
        let layout = self.spec.layout();
        let mut pre = Vec::with_capacity(self.spec.layers.len());
        let mut post = Vec::with_capacity(self.spec.layers.len());
        let mut h: Vec<F> = x.to_vec();
        for (l, layer) in self.spec.layers.iter().enumerate() {
            let (w_off, b_off, fan_in, fan_out) = layout[l];
            let mut z = vec![F::zero(); fan_out];
            for o in 0..fan_out {
                let row = &self.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                let mut acc = self.params[b_off + o];
                for (w, v) in row.iter().zip(h.iter()) {
                    acc += *w * *v;
                }
                z[o] = acc;
            }
            let mut out: Vec<F> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            if layer.residual {
                for (o, prev) in out.iter_mut().zip(h.iter()) {
                    *o += *prev;
                }
            }
            pre.push(z);
            post.push(out.clone());
            h = out;
        }
        Ok(Tape {
            input: x.to_vec(),
            pre,
            post,
        })
    }

    pub fn forward_only(&self, x: &[F]) -> Result<Vec<F>> {
        let mut tape = self.forward(x)?;
        Ok(tape.post.pop().expect("at least one layer"))
    }

    /// Reverse pass for one sample. `dout` is the loss gradient with respect
    /// to the network output; gradients are accumulated into `param_acc`.
    pub fn backward_into(&self, tape: &Tape<F>, dout: &[F], param_acc: &mut [F]) -> Result<Vec<F>> {
        if dout.len() != self.spec.output_width() {
            return Err(Error::Shape(format!(
                "dout has {} entries, output width is {}",
                dout.len(),
                self.spec.output_width()
            )));
        }
        let layout = self.spec.layout();
        let mut dh: Vec<F> = dout.to_vec();
        for l in (0..self.spec.layers.len()).rev() {
            let layer = &self.spec.layers[l];
            let (w_off, b_off, fan_in, fan_out) = layout[l];
            let z = &tape.pre[l];
            let h_in = tape.layer_input(l);
            let mut dz = vec![F::zero(); fan_out];
            for o in 0..fan_out {
                dz[o] = layer.activation.derivative(z[o]) * dh[o];
            }
            let mut dh_prev = vec![F::zero(); fan_in];
            if layer.residual {
                dh_prev.copy_from_slice(&dh);
            }
            for o in 0..fan_out {
                let row_off = w_off + o * fan_in;
                param_acc[b_off + o] += dz[o];
                for i in 0..fan_in {
                    param_acc[row_off + i] += dz[o] * h_in[i];
                    dh_prev[i] += self.params[row_off + i] * dz[o];
                }
            }
            dh = dh_prev;
        }
        Ok(dh)
    }

    pub fn backward(&self, tape: &Tape<F>, dout: &[F]) -> Result<Backprop<F>> {
        let mut param_grad = vec![F::zero(); self.spec.param_count()];
        let input_grad = self.backward_into(tape, dout, &mut param_grad)?;
        Ok(Backprop {
            param_grad,
            input_grad,
        })
    }

    /// Gradient of a scalar-output network with respect to its input.
    pub fn input_gradient(&self, tape: &Tape<F>) -> Result<Vec<F>> {
        if self.spec.output_width() != 1 {
            return Err(Error::Shape("input_gradient needs a scalar output".into()));
        }
        // Parameter gradients are still accumulated; callers that only need
        // the input gradient pay the small extra cost.
        Ok(self.backward(tape, &[F::one()])?.input_grad)
    }

    pub(crate) fn layer_layout(&self) -> Vec<(usize, usize, usize, usize)> {
        self.spec.layout()
    }
}

/// One gradient row per sample: `rows[i] = d loss_i / d params`.
///
/// `douts[i]` is the gradient of sample i's loss with respect to the network
/// output on sample i's tape.
pub fn backward_per_sample<F: Real>(
    net: &Mlp<F>,
    tapes: &[Tape<F>],
    douts: &[Vec<F>],
) -> Result<PerSampleGrads<F>> {
    if tapes.len() != douts.len() {
        return Err(Error::Shape(format!(
            "{} tapes but {} per-sample loss gradients",
            tapes.len(),
            douts.len()
        )));
    }
    let cols = net.spec.param_count();
    let mut grads = PerSampleGrads::zeros(tapes.len(), cols);
    for (i, (tape, dout)) in tapes.iter().zip(douts.iter()).enumerate() {
        net.backward_into(tape, dout, grads.row_mut(i))?;
    }
    Ok(grads)
}

/// Gradient of the summed loss, accumulated in one buffer.
pub fn backward_batch<F: Real>(
    net: &Mlp<F>,
    tapes: &[Tape<F>],
    douts: &[Vec<F>],
) -> Result<Vec<F>> {
    if tapes.len() != douts.len() {
        return Err(Error::Shape(format!(
            "{} tapes but {} loss gradients",
            tapes.len(),
            douts.len()
        )));
    }
    let mut acc = vec![F::zero(); net.spec.param_count()];
    for (tape, dout) in tapes.iter().zip(douts.iter()) {
        net.backward_into(tape, dout, &mut acc)?;
    }
    Ok(acc)
}

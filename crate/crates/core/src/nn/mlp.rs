use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::Matrix;
use crate::math;
use crate::{Error, Result};

/// Variance epsilon inside the layer-norm square root.
pub const LN_EPSILON: f64 = 1e-6;

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => math::tanh(x),
        }
    }

    /// Derivative expressed through the pre-activation `u` and output `h`.
    #[inline]
    fn derivative(self, u: f64, h: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Shape and nonlinearity choices for an [`MlpNet`].
///
/// Hidden layers run `linear -> layer norm (optional) -> hidden_activation`;
/// the last layer runs `linear -> output_activation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub layer_norm: bool,
}

impl Architecture {
    /// ReLU hidden layers, identity output.
    pub fn relu(layer_sizes: Vec<usize>, layer_norm: bool) -> Self {
        Self {
            layer_sizes,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            layer_norm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "a network needs at least an input and an output size".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn layout(&self) -> (Vec<LayerLayout>, usize) {
        let mut offset = 0;
        let mut layers = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let hidden = l + 1 < self.num_layers();
            let w = offset;
            let b = w + fan_in * fan_out;
            offset = b + fan_out;
            let ln = if hidden && self.layer_norm {
                let g = offset;
                offset += 2 * fan_out;
                Some(g)
            } else {
                None
            };
            layers.push(LayerLayout {
                fan_in,
                fan_out,
                w,
                b,
                ln,
                hidden,
            });
        }
        (layers, offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    /// Weights, stored input-major: row `i` holds the weights leaving input `i`.
    w: usize,
    b: usize,
    /// Offset of the layer-norm gain; the bias follows it.
    ln: Option<usize>,
    hidden: bool,
}

/// A fully connected network with flat parameter storage.
#[derive(Debug, Clone)]
pub struct MlpNet {
    arch: Architecture,
    layout: Vec<LayerLayout>,
    params: Vec<f64>,
    id: u64,
    version: u64,
}

impl PartialEq for MlpNet {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.params == other.params
    }
}

/// Activation record of one forward pass over a batch.
#[derive(Debug, Clone)]
pub struct Tape {
    net_id: u64,
    version: u64,
    batch: usize,
    layers: Vec<LayerTape>,
}

#[derive(Debug, Clone)]
struct LayerTape {
    input: Vec<f64>,
    /// Input to the activation function (after normalization, if any).
    pre: Vec<f64>,
    output: Vec<f64>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Smallest `|pre-activation|` over all hidden ReLU units. Finite
    /// difference checks stay away from the kink using this.
    pub fn min_abs_hidden_preactivation(&self) -> f64 {
        let n = self.layers.len();
        self.layers[..n.saturating_sub(1)]
            .iter()
            .flat_map(|l| l.pre.iter())
            .fold(f64::INFINITY, |m, &u| m.min(u.abs()))
    }

    /// Largest `1 / sqrt(var + eps)` over normalized rows, or 0 without
    /// layer norm. Large values mean a nearly constant row, where the
    /// normalization is too sharp for finite differences.
    pub fn max_inverse_std(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.inv_std.iter())
            .fold(0.0, |m: f64, &s| m.max(s))
    }
}

/// Gradients of `sum(output * output_grad)` summed over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Matrix,
}

impl MlpNet {
    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases, unit layer-norm gain
    /// and zero layer-norm bias.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        net.reinitialize(rng);
        Ok(net)
    }

    /// All parameters zero, including layer-norm gains.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let (layout, len) = arch.layout();
        Ok(Self {
            arch,
            layout,
            params: vec![0.0; len],
            id: NEXT_NET_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
        })
    }

    /// Draws a fresh set of parameters in place.
    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &self.layout {
            let bound = 1.0 / math::sqrt(layer.fan_in as f64);
            let n = layer.fan_in * layer.fan_out;
            for w in &mut self.params[layer.w..layer.w + n] {
                *w = rng.random_range(-bound..bound);
            }
            self.params[layer.b..layer.b + layer.fan_out].fill(0.0);
            if let Some(g) = layer.ln {
                self.params[g..g + layer.fan_out].fill(1.0);
                self.params[g + layer.fan_out..g + 2 * layer.fan_out].fill(0.0);
            }
        }
        self.version += 1;
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameters. Invalidates existing tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        self.version += 1;
        Ok(())
    }

    /// Flat ranges of (weights, biases) for layer `l`.
    pub fn layer_ranges(&self, l: usize) -> (core::ops::Range<usize>, core::ops::Range<usize>) {
        let layer = &self.layout[l];
        (
            layer.w..layer.w + layer.fan_in * layer.fan_out,
            layer.b..layer.b + layer.fan_out,
        )
    }

    /// Range of the layer-norm gain and bias of layer `l`, if normalized.
    pub fn layer_norm_range(&self, l: usize) -> Option<core::ops::Range<usize>> {
        self.layout[l].ln.map(|g| g..g + 2 * self.layout[l].fan_out)
    }

    /// Polyak averaging: `self <- (1 - tau) * self + tau * online`.
    pub fn soft_update_from(&mut self, online: &MlpNet, tau: f64) -> Result<()> {
        if online.params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                what: "polyak source",
                expected: self.params.len(),
                got: online.params.len(),
            });
        }
        let rho = 1.0 - tau;
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = rho * *t + tau * o;
        }
        self.version += 1;
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let (out, tape) = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((out.into_vec(), tape))
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<(Matrix, Tape)> {
        let mut layers = Vec::with_capacity(self.layout.len());
        let out = self.run(input, Some(&mut layers))?;
        Ok((
            out,
            Tape {
                net_id: self.id,
                version: self.version,
                batch: input.rows(),
                layers,
            },
        ))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.run(input, None)
    }

    fn run(&self, input: &Matrix, mut tape: Option<&mut Vec<LayerTape>>) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        if !math::all_finite(input.as_slice()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let batch = input.rows();
        let mut x = input.as_slice().to_vec();
        for layer in &self.layout {
            let (n_in, n_out) = (layer.fan_in, layer.fan_out);
            let w = &self.params[layer.w..layer.w + n_in * n_out];
            let b = &self.params[layer.b..layer.b + n_out];
            let mut z = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            math::gemm(batch, n_in, n_out, &x, false, w, false, 1.0, &mut z);

            let mut normalized = Vec::new();
            let mut inv_std = Vec::new();
            if let Some(g) = layer.ln {
                let gain = &self.params[g..g + n_out];
                let shift = &self.params[g + n_out..g + 2 * n_out];
                if tape.is_some() {
                    normalized = vec![0.0; batch * n_out];
                    inv_std = vec![0.0; batch];
                }
                for r in 0..batch {
                    let zr = &mut z[r * n_out..(r + 1) * n_out];
                    let mean = zr.iter().sum::<f64>() / n_out as f64;
                    let var =
                        zr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_out as f64;
                    let s = 1.0 / math::sqrt(var + LN_EPSILON);
                    for j in 0..n_out {
                        let zhat = (zr[j] - mean) * s;
                        if tape.is_some() {
                            normalized[r * n_out + j] = zhat;
                        }
                        zr[j] = gain[j] * zhat + shift[j];
                    }
                    if tape.is_some() {
                        inv_std[r] = s;
                    }
                }
            }

            let act = if layer.hidden {
                self.arch.hidden_activation
            } else {
                self.arch.output_activation
            };
            let h: Vec<f64> = z.iter().map(|&u| act.apply(u)).collect();
            match tape.as_deref_mut() {
                Some(t) => {
                    let input = core::mem::replace(&mut x, h);
                    t.push(LayerTape {
                        input,
                        pre: z,
                        output: x.clone(),
                        normalized,
                        inv_std,
                    });
                }
                None => x = h,
            }
        }
        Matrix::from_vec(batch, self.output_dim(), x)
    }

    /// Exact gradients of `sum_rows(output . output_grad)` with respect to
    /// every parameter and the input.
    pub fn backward(&self, tape: &Tape, output_grad: &Matrix) -> Result<Gradients> {
        let (params, input) = self.backward_inner(tape, output_grad, true, true)?;
        Ok(Gradients { params, input })
    }

    /// Parameter gradient only; the input gradient is not computed.
    pub fn param_gradient(&self, tape: &Tape, output_grad: &Matrix) -> Result<Vec<f64>> {
        Ok(self.backward_inner(tape, output_grad, true, false)?.0)
    }

    /// Gradient with respect to the input only; parameter gradients are not
    /// accumulated.
    pub fn input_gradient(&self, tape: &Tape, output_grad: &Matrix) -> Result<Matrix> {
        Ok(self.backward_inner(tape, output_grad, false, true)?.1)
    }

    fn backward_inner(
        &self,
        tape: &Tape,
        output_grad: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Vec<f64>, Matrix)> {
        if tape.net_id != self.id || tape.version != self.version {
            return Err(Error::StaleTape);
        }
        if output_grad.rows() != tape.batch || output_grad.cols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                what: "output gradient",
                expected: tape.batch * self.output_dim(),
                got: output_grad.rows() * output_grad.cols(),
            });
        }
        let batch = tape.batch;
        let mut grads = if want_params {
            vec![0.0; self.params.len()]
        } else {
            Vec::new()
        };
        let mut delta = output_grad.as_slice().to_vec();
        for (l, (layer, rec)) in self.layout.iter().zip(&tape.layers).enumerate().rev() {
            let first = l == 0;
            let (n_in, n_out) = (layer.fan_in, layer.fan_out);
            let act = if layer.hidden {
                self.arch.hidden_activation
            } else {
                self.arch.output_activation
            };
            for k in 0..batch * n_out {
                delta[k] *= act.derivative(rec.pre[k], rec.output[k]);
            }

            if let Some(g) = layer.ln {
                let gain = &self.params[g..g + n_out];
                for r in 0..batch {
                    let du = &mut delta[r * n_out..(r + 1) * n_out];
                    let zhat = &rec.normalized[r * n_out..(r + 1) * n_out];
                    if want_params {
                        let (gain_grad, shift_grad) = grads[g..g + 2 * n_out].split_at_mut(n_out);
                        for j in 0..n_out {
                            gain_grad[j] += du[j] * zhat[j];
                            shift_grad[j] += du[j];
                        }
                    }
                    let mut mean_d = 0.0;
                    let mut mean_dz = 0.0;
                    for j in 0..n_out {
                        du[j] *= gain[j];
                        mean_d += du[j];
                        mean_dz += du[j] * zhat[j];
                    }
                    mean_d /= n_out as f64;
                    mean_dz /= n_out as f64;
                    let s = rec.inv_std[r];
                    for j in 0..n_out {
                        du[j] = s * (du[j] - mean_d - zhat[j] * mean_dz);
                    }
                }
            }

            let w = &self.params[layer.w..layer.w + n_in * n_out];
            if want_params {
                let (w_grad, b_grad) = grads[layer.w..layer.b + n_out].split_at_mut(n_in * n_out);
                math::gemm(
                    n_in, batch, n_out, &rec.input, true, &delta, false, 1.0, w_grad,
                );
                for dz in delta.chunks_exact(n_out) {
                    for (bg, d) in b_grad.iter_mut().zip(dz) {
                        *bg += d;
                    }
                }
            }
            let mut dx = vec![0.0; batch * n_in];
            if want_input || !first {
                math::gemm(batch, n_out, n_in, &delta, false, w, true, 0.0, &mut dx);
            }
            delta = dx;
        }
        Ok((grads, Matrix::from_vec(batch, self.input_dim(), delta)?))
    }

    /// Applies one Adam step to this network's parameters.
    pub fn adam_step(&mut self, grads: &[f64], state: &mut super::AdamState) -> Result<()> {
        state.apply(&mut self.params, grads)?;
        self.version += 1;
        Ok(())
    }
}

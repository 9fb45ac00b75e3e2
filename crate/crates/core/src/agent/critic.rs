use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::nn::{AdamState, Architecture, Matrix, MlpNet};
use crate::{Error, Result};

/// `N` online Q-networks over `(state, action, goal)`, their target copies
/// and one Adam state per online network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleCritic {
    pub online: Vec<MlpNet>,
    pub targets: Vec<MlpNet>,
    pub optimizers: Vec<AdamState>,
}

impl EnsembleCritic {
    /// Each member is drawn independently from `rng`; targets start equal to
    /// their online networks.
    pub fn new<R: Rng + ?Sized>(
        size: usize,
        input_dim: usize,
        hidden: &[usize],
        layer_norm: bool,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let arch = Architecture::relu(sizes, layer_norm);
        let mut online = Vec::with_capacity(size);
        for _ in 0..size {
            online.push(MlpNet::new(arch.clone(), rng)?);
        }
        let targets = online.clone();
        let optimizers = online
            .iter()
            .map(|n| AdamState::new(n.num_params(), learning_rate))
            .collect();
        Ok(Self {
            online,
            targets,
            optimizers,
        })
    }

    pub fn len(&self) -> usize {
        self.online.len()
    }

    pub fn is_empty(&self) -> bool {
        self.online.is_empty()
    }

    /// Fresh online parameters, targets copied from them, moments cleared.
    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for net in &mut self.online {
            net.reinitialize(rng);
        }
        for (t, o) in self.targets.iter_mut().zip(&self.online) {
            t.set_params(o.params()).expect("same architecture");
        }
        for opt in &mut self.optimizers {
            opt.zero();
        }
    }

    /// Mean squared error of critic `i` against `y` and its parameter
    /// gradient.
    pub fn loss_and_gradient(
        &self,
        i: usize,
        inputs: &Matrix,
        y: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let net = &self.online[i];
        if y.len() != inputs.rows() {
            return Err(Error::DimensionMismatch {
                what: "critic targets",
                expected: inputs.rows(),
                got: y.len(),
            });
        }
        let (q, tape) = net.forward_batch(inputs)?;
        let b = y.len() as f64;
        let mut loss = 0.0;
        let mut dq = Matrix::zeros(y.len(), 1);
        for (r, &target) in y.iter().enumerate() {
            let err = q.get(r, 0) - target;
            loss += err * err;
            dq.set(r, 0, 2.0 * err / b);
        }
        loss /= b;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "critic {i} loss {loss} (q range {:?})",
                minmax(q.as_slice())
            )));
        }
        let grads = net.param_gradient(&tape, &dq)?;
        Ok((loss, grads))
    }

    /// One Adam step for every critic on its own squared error to the shared
    /// `y`. Returns the losses measured before the step.
    pub fn update(&mut self, inputs: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        let mut losses = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (loss, grads) = self.loss_and_gradient(i, inputs, y)?;
            self.online[i].adam_step(&grads, &mut self.optimizers[i])?;
            losses.push(loss);
        }
        Ok(losses)
    }

    /// `target <- (1 - tau) * target + tau * online` for every member.
    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        for (t, o) in self.targets.iter_mut().zip(&self.online) {
            t.soft_update_from(o, tau)?;
        }
        Ok(())
    }

    /// Online estimates, one column per critic.
    pub fn predict_online(&self, inputs: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.online
            .iter()
            .map(|n| n.predict(inputs).map(|m| m.into_vec()))
            .collect()
    }
}

fn minmax(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

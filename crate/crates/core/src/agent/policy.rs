use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::nn::{AdamState, Architecture, Matrix, MlpNet};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `log(1 - tanh(u)^2)`, stable for large `|u|`.
#[inline]
pub fn log_tanh_jacobian(u: f64) -> f64 {
    2.0 * (core::f64::consts::LN_2 - u - math::softplus(-2.0 * u))
}

/// Log-density of `tanh(mean + exp(log_std) * noise)` for one action.
pub fn squashed_log_prob(noise: &[f64], pre_tanh: &[f64], log_std: &[f64]) -> f64 {
    noise
        .iter()
        .zip(pre_tanh)
        .zip(log_std)
        .map(|((e, u), ls)| -0.5 * e * e - ls - HALF_LN_2PI - log_tanh_jacobian(*u))
        .sum()
}

/// Gaussian policy over `(state, goal)` with `tanh` squashing.
///
/// The trunk outputs the mean followed by the raw log standard deviation,
/// which is clamped to `[LOG_STD_MIN, LOG_STD_MAX]` (zero gradient outside).
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedGaussianPolicy {
    pub net: MlpNet,
    pub optimizer: AdamState,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
}

/// Actions drawn for a batch together with everything needed to evaluate
/// their log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub actions: Matrix,
    pub log_probs: Vec<f64>,
    pub pre_tanh: Matrix,
    pub noise: Matrix,
}

/// Value and policy-parameter gradient of
/// `mean_rows(alpha * log_pi(a) - mean_i Q_i(s, a, g))` at fixed noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyObjective {
    pub loss: f64,
    pub log_probs: Vec<f64>,
    pub grads: Vec<f64>,
}

pub fn concat_columns(parts: &[&Matrix]) -> Result<Matrix> {
    let rows = parts
        .first()
        .map(|m| m.rows())
        .ok_or(Error::Empty("concat"))?;
    let cols: usize = parts.iter().map(|m| m.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let row = out.row_mut(r);
        let mut c = 0;
        for p in parts {
            if p.rows() != rows {
                return Err(Error::DimensionMismatch {
                    what: "concatenated rows",
                    expected: rows,
                    got: p.rows(),
                });
            }
            row[c..c + p.cols()].copy_from_slice(p.row(r));
            c += p.cols();
        }
    }
    Ok(out)
}

impl SquashedGaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        goal_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![state_dim + goal_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        let net = MlpNet::new(Architecture::relu(sizes, false), rng)?;
        let optimizer = AdamState::new(net.num_params(), learning_rate);
        Ok(Self {
            net,
            optimizer,
            state_dim,
            goal_dim,
            action_dim,
        })
    }

    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.net.reinitialize(rng);
        self.optimizer.zero();
    }

    fn inputs(&self, states: &Matrix, goals: &Matrix) -> Result<Matrix> {
        concat_columns(&[states, goals])
    }

    /// `tanh(mean)` for every row.
    pub fn deterministic(&self, states: &Matrix, goals: &Matrix) -> Result<Matrix> {
        let out = self.net.predict(&self.inputs(states, goals)?)?;
        Ok(out.columns(0, self.action_dim).map(math::tanh))
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix {
        let mut noise = Matrix::zeros(rows, self.action_dim);
        for v in noise.as_mut_slice() {
            *v = rng.sample(StandardNormal);
        }
        noise
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        states: &Matrix,
        goals: &Matrix,
        rng: &mut R,
    ) -> Result<PolicySample> {
        let noise = self.draw_noise(states.rows(), rng);
        self.sample_with_noise(states, goals, noise)
    }

    pub fn sample_with_noise(
        &self,
        states: &Matrix,
        goals: &Matrix,
        noise: Matrix,
    ) -> Result<PolicySample> {
        let out = self.net.predict(&self.inputs(states, goals)?)?;
        Ok(self.squash(&out, noise))
    }

    fn squash(&self, out: &Matrix, noise: Matrix) -> PolicySample {
        let (rows, ad) = (out.rows(), self.action_dim);
        let mut actions = Matrix::zeros(rows, ad);
        let mut pre_tanh = Matrix::zeros(rows, ad);
        let mut log_probs = Vec::with_capacity(rows);
        let mut log_std = vec![0.0; ad];
        for r in 0..rows {
            let o = out.row(r);
            for j in 0..ad {
                log_std[j] = o[ad + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let u = o[j] + math::exp(log_std[j]) * noise.get(r, j);
                pre_tanh.set(r, j, u);
                actions.set(r, j, math::tanh(u));
            }
            log_probs.push(squashed_log_prob(noise.row(r), pre_tanh.row(r), &log_std));
        }
        PolicySample {
            actions,
            log_probs,
            pre_tanh,
            noise,
        }
    }

    /// Loss and gradient of the entropy-regularized policy objective with the
    /// reparameterization noise held fixed. Critics are only read.
    pub fn objective(
        &self,
        critics: &[MlpNet],
        alpha: f64,
        states: &Matrix,
        goals: &Matrix,
        noise: Matrix,
    ) -> Result<PolicyObjective> {
        if critics.is_empty() {
            return Err(Error::Empty("policy objective critics"));
        }
        let rows = states.rows();
        let ad = self.action_dim;
        let sd = self.state_dim;
        let (out, tape) = self.net.forward_batch(&self.inputs(states, goals)?)?;
        let sample = self.squash(&out, noise);

        let q_in = concat_columns(&[states, &sample.actions, goals])?;
        let n = critics.len() as f64;
        let b = rows as f64;
        let q_grad = Matrix::from_vec(rows, 1, vec![-1.0 / (n * b); rows])?;
        let mut q_sum = 0.0;
        let mut d_action = Matrix::zeros(rows, ad);
        for critic in critics {
            let (q, ctape) = critic.forward_batch(&q_in)?;
            q_sum += q.as_slice().iter().sum::<f64>();
            let dx = critic.input_gradient(&ctape, &q_grad)?;
            for r in 0..rows {
                let src = &dx.row(r)[sd..sd + ad];
                for (d, s) in d_action.row_mut(r).iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let loss = (alpha * sample.log_probs.iter().sum::<f64>() - q_sum / n) / b;
        if !loss.is_finite() {
            return Err(Error::NonFinite(alloc::format!("policy loss {loss}")));
        }

        let mut d_out = Matrix::zeros(rows, 2 * ad);
        let w = alpha / b;
        for r in 0..rows {
            let o = out.row(r);
            for j in 0..ad {
                let a = sample.actions.get(r, j);
                let du = d_action.get(r, j) * (1.0 - a * a) + w * 2.0 * a;
                let raw = o[ad + j];
                let d_raw = if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                    let sigma = math::exp(raw);
                    du * sigma * sample.noise.get(r, j) - w
                } else {
                    0.0
                };
                d_out.set(r, j, du);
                d_out.set(r, ad + j, d_raw);
            }
        }
        let grads = self.net.param_gradient(&tape, &d_out)?;
        Ok(PolicyObjective {
            loss,
            log_probs: sample.log_probs,
            grads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn policy(seed: u64) -> SquashedGaussianPolicy {
        SquashedGaussianPolicy::new(4, 2, 2, &[16, 16], 3e-4, &mut stream(seed, Stream::Init))
            .unwrap()
    }

    #[test]
    fn zero_policy_is_centered() {
        let mut p = policy(0);
        p.net.params_mut().fill(0.0);
        let a = p
            .deterministic(
                &Matrix::row_vector(&[0.1, 0.2, 0.3, 0.4]),
                &Matrix::row_vector(&[0.5, 0.5]),
            )
            .unwrap();
        assert_eq!(a.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn samples_stay_inside_the_box() {
        let p = policy(1);
        let mut rng = stream(1, Stream::PolicySample);
        let states =
            Matrix::from_vec(1000, 4, (0..4000).map(|i| (i % 7) as f64 * 0.1).collect()).unwrap();
        let goals = Matrix::zeros(1000, 2);
        for _ in 0..100 {
            let s = p.sample(&states, &goals, &mut rng).unwrap();
            assert!(s.actions.as_slice().iter().all(|a| a.abs() < 1.0));
            assert!(s.log_probs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn log_prob_matches_change_of_variables() {
        let p = policy(2);
        let mut rng = stream(2, Stream::PolicySample);
        let states =
            Matrix::from_vec(8, 4, (0..32).map(|i| libm::sin(i as f64)).collect()).unwrap();
        let goals = Matrix::from_vec(8, 2, (0..16).map(|i| libm::cos(i as f64)).collect()).unwrap();
        let s = p.sample(&states, &goals, &mut rng).unwrap();
        let out = p
            .net
            .predict(&concat_columns(&[&states, &goals]).unwrap())
            .unwrap();
        for r in 0..8 {
            // density of a = tanh(u), u ~ N(mean, sigma): p(u) / prod(1 - a^2)
            let mut density = 1.0;
            for j in 0..2 {
                let mean = out.get(r, j);
                let sigma = libm::exp(out.get(r, 2 + j).clamp(LOG_STD_MIN, LOG_STD_MAX));
                let a = s.actions.get(r, j);
                let u = libm::atanh(a);
                let z = (u - mean) / sigma;
                let gauss =
                    libm::exp(-0.5 * z * z) / (sigma * libm::sqrt(2.0 * core::f64::consts::PI));
                density *= gauss / (1.0 - a * a);
            }
            assert!((libm::log(density) - s.log_probs[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobian_term_is_stable() {
        for u in [-30.0, -3.0, 0.0, 0.5, 4.0, 30.0] {
            let direct = libm::log(1.0 - libm::tanh(u) * libm::tanh(u));
            if direct.is_finite() && u.abs() < 10.0 {
                assert!((log_tanh_jacobian(u) - direct).abs() < 1e-12);
            }
            assert!(log_tanh_jacobian(u).is_finite());
        }
    }
}

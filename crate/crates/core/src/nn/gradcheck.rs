use alloc::vec::Vec;

use rand::Rng;

use super::{Architecture, Matrix, MlpNet};
use crate::math;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub trials: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Finite-difference step used by every check in this crate.
pub const FD_STEP: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|)` over whole vectors, in the Euclidean norm.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = math::norm(analytic).max(math::norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        math::norm(&diff) / scale
    }
}

/// Checks `backward` on `trials` random networks of the given architecture.
///
/// Each trial draws fresh parameters (layer-norm gains and biases are
/// perturbed away from their initial values so their gradients are
/// exercised), a batch of three inputs kept away from ReLU kinks and from
/// nearly constant normalized rows, and a random output gradient. Parameter and input gradients are both checked.
pub fn gradcheck<R: Rng + ?Sized>(
    arch: &Architecture,
    trials: usize,
    tolerance: f64,
    rng: &mut R,
) -> GradcheckReport {
    gradcheck_with(arch, trials, tolerance, rng, |g| g)
}

pub(crate) fn gradcheck_with<R: Rng + ?Sized>(
    arch: &Architecture,
    trials: usize,
    tolerance: f64,
    rng: &mut R,
    mut tamper: impl FnMut(Vec<f64>) -> Vec<f64>,
) -> GradcheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let err = one_trial(arch, rng, &mut tamper);
        worst = worst.max(err);
    }
    GradcheckReport {
        trials,
        max_relative_error: worst,
        passed: trials > 0 && worst < tolerance,
    }
}

const BATCH: usize = 3;
const KINK_MARGIN: f64 = 1e-3;
/// Rows with variance below about `1e-3` are resampled.
const MAX_INVERSE_STD: f64 = 30.0;

fn one_trial<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
    tamper: &mut impl FnMut(Vec<f64>) -> Vec<f64>,
) -> f64 {
    let mut net = MlpNet::new(arch.clone(), rng).expect("valid architecture");
    for l in 0..arch.num_layers() {
        if let Some(range) = net.layer_norm_range(l) {
            for p in &mut net.params_mut()[range] {
                *p += rng.random_range(-0.5..0.5);
            }
        }
        let (_, b) = net.layer_ranges(l);
        for p in &mut net.params_mut()[b] {
            *p = rng.random_range(-0.1..0.1);
        }
    }

    let d = arch.input_dim();
    let mut input = Matrix::zeros(BATCH, d);
    let mut tape = None;
    for _ in 0..100 {
        for v in input.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (_, t) = net.forward_batch(&input).unwrap();
        if t.min_abs_hidden_preactivation() > KINK_MARGIN && t.max_inverse_std() < MAX_INVERSE_STD {
            tape = Some(t);
            break;
        }
    }
    let tape = match tape {
        Some(t) => t,
        None => net.forward_batch(&input).unwrap().1,
    };
    let mut out_grad = Matrix::zeros(BATCH, arch.output_dim());
    for v in out_grad.as_mut_slice() {
        *v = rng.random_range(-1.0..1.0);
    }
    let grads = net.backward(&tape, &out_grad).unwrap();
    let analytic_params = tamper(grads.params);

    let objective = |n: &MlpNet, x: &Matrix| -> f64 {
        let y = n.predict(x).unwrap();
        y.as_slice()
            .iter()
            .zip(out_grad.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    };

    let mut numeric = Vec::with_capacity(net.num_params());
    let base = net.params().to_vec();
    let mut probe = net.clone();
    for i in 0..base.len() {
        let p = probe.params_mut();
        p[i] = base[i] + FD_STEP;
        let up = objective(&probe, &input);
        probe.params_mut()[i] = base[i] - FD_STEP;
        let down = objective(&probe, &input);
        probe.params_mut()[i] = base[i];
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    let param_err = relative_error(&analytic_params, &numeric);

    let mut numeric_input = Vec::with_capacity(input.as_slice().len());
    for i in 0..input.as_slice().len() {
        let mut x = input.clone();
        x.as_mut_slice()[i] += FD_STEP;
        let up = objective(&net, &x);
        x.as_mut_slice()[i] -= 2.0 * FD_STEP;
        let down = objective(&net, &x);
        numeric_input.push((up - down) / (2.0 * FD_STEP));
    }
    let input_err = relative_error(grads.input.as_slice(), &numeric_input);
    param_err.max(input_err)
}

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{concat_columns, SquashedGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
use crate::nn::{relative_error, Architecture, GradcheckReport, Matrix, MlpNet, FD_STEP};

const BATCH: usize = 3;
const KINK_MARGIN: f64 = 1e-3;

/// Checks the reparameterized policy gradient on `trials` random problems.
///
/// Each trial draws state, goal and action sizes in `1..=4`, a one- or
/// two-layer policy trunk, one to three layer-normalized critics, a
/// temperature in `[0, 1)` and frozen noise, then compares
/// [`SquashedGaussianPolicy::objective`] against central differences of its
/// loss over every policy parameter.
pub fn policy_gradcheck<R: Rng + ?Sized>(
    trials: usize,
    tolerance: f64,
    rng: &mut R,
) -> GradcheckReport {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        worst = worst.max(policy_trial(rng));
    }
    GradcheckReport {
        trials,
        max_relative_error: worst,
        passed: trials > 0 && worst < tolerance,
    }
}

fn random_hidden<R: Rng + ?Sized>(rng: &mut R) -> Vec<usize> {
    let layers = rng.random_range(1..=2);
    (0..layers).map(|_| rng.random_range(3..=8)).collect()
}

fn jitter<R: Rng + ?Sized>(net: &mut MlpNet, rng: &mut R) {
    for l in 0..net.architecture().num_layers() {
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
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-scale..scale);
    }
    m
}

/// Smallest distance of any kink (ReLU or log-std clamp) from the current
/// evaluation point; zero when a critic row is nearly constant before layer
/// norm.
fn kink_margin(
    policy: &SquashedGaussianPolicy,
    critics: &[MlpNet],
    states: &Matrix,
    goals: &Matrix,
    noise: &Matrix,
) -> f64 {
    let ad = policy.action_dim;
    let (out, tape) = policy
        .net
        .forward_batch(&concat_columns(&[states, goals]).unwrap())
        .unwrap();
    let mut margin = tape.min_abs_hidden_preactivation();
    for r in 0..out.rows() {
        for &raw in &out.row(r)[ad..] {
            margin = margin
                .min((raw - LOG_STD_MIN).abs())
                .min((raw - LOG_STD_MAX).abs());
        }
    }
    let sample = policy
        .sample_with_noise(states, goals, noise.clone())
        .unwrap();
    let q_in = concat_columns(&[states, &sample.actions, goals]).unwrap();
    for c in critics {
        let tape = c.forward_batch(&q_in).unwrap().1;
        margin = margin.min(tape.min_abs_hidden_preactivation());
        if tape.max_inverse_std() > 30.0 {
            margin = 0.0;
        }
    }
    margin
}

fn policy_trial<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let sd = rng.random_range(1..=4);
    let gd = rng.random_range(1..=4);
    let ad = rng.random_range(1..=4);
    let mut policy =
        SquashedGaussianPolicy::new(sd, gd, ad, &random_hidden(rng), 3e-4, rng).unwrap();
    jitter(&mut policy.net, rng);
    let mut sizes = vec![sd + ad + gd];
    sizes.extend(random_hidden(rng));
    sizes.push(1);
    let arch = Architecture::relu(sizes, true);
    let critics: Vec<MlpNet> = (0..rng.random_range(1..=3))
        .map(|_| {
            let mut c = MlpNet::new(arch.clone(), rng).unwrap();
            jitter(&mut c, rng);
            c
        })
        .collect();
    let alpha = rng.random_range(0.0..1.0);

    let mut inputs = None;
    for _ in 0..100 {
        let states = random_matrix(BATCH, sd, 1.0, rng);
        let goals = random_matrix(BATCH, gd, 1.0, rng);
        let noise = policy.draw_noise(BATCH, rng);
        if kink_margin(&policy, &critics, &states, &goals, &noise) > KINK_MARGIN {
            inputs = Some((states, goals, noise));
            break;
        }
    }
    let (states, goals, noise) = inputs.unwrap_or_else(|| {
        let n = policy.draw_noise(BATCH, rng);
        (
            random_matrix(BATCH, sd, 1.0, rng),
            random_matrix(BATCH, gd, 1.0, rng),
            n,
        )
    });

    let analytic = policy
        .objective(&critics, alpha, &states, &goals, noise.clone())
        .unwrap()
        .grads;
    let loss = |p: &SquashedGaussianPolicy| {
        p.objective(&critics, alpha, &states, &goals, noise.clone())
            .unwrap()
            .loss
    };
    let base = policy.net.params().to_vec();
    let mut probe = policy.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        probe.net.params_mut()[i] = base[i] + FD_STEP;
        let up = loss(&probe);
        probe.net.params_mut()[i] = base[i] - FD_STEP;
        let down = loss(&probe);
        probe.net.params_mut()[i] = base[i];
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    relative_error(&analytic, &numeric)
}

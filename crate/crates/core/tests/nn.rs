use hredq_core::nn::{gradcheck, AdamState, Architecture, Matrix, MlpNet, LN_EPSILON};
use hredq_core::rng::{stream, Stream};
use rand::Rng;

/// Row-at-a-time forward pass written from the layer definition alone.
fn naive_forward(net: &MlpNet, x: &[f64]) -> Vec<f64> {
    let arch = net.architecture();
    let p = net.params();
    let mut h = x.to_vec();
    for l in 0..arch.num_layers() {
        let (n_in, n_out) = (arch.layer_sizes[l], arch.layer_sizes[l + 1]);
        let (w, b) = net.layer_ranges(l);
        let mut z: Vec<f64> = (0..n_out)
            .map(|j| {
                p[b.start + j]
                    + (0..n_in)
                        .map(|i| h[i] * p[w.start + i * n_out + j])
                        .sum::<f64>()
            })
            .collect();
        if let Some(g) = net.layer_norm_range(l) {
            let mean = z.iter().sum::<f64>() / n_out as f64;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_out as f64;
            for (j, v) in z.iter_mut().enumerate() {
                let zhat = (*v - mean) / (var + LN_EPSILON).sqrt();
                *v = p[g.start + j] * zhat + p[g.start + n_out + j];
            }
        }
        let hidden = l + 1 < arch.num_layers();
        h = z
            .into_iter()
            .map(|v| if hidden { v.max(0.0) } else { v })
            .collect();
    }
    h
}

fn random_arch<R: Rng>(rng: &mut R, layer_norm: bool) -> Architecture {
    let mut sizes = vec![rng.random_range(1..=10)];
    for _ in 0..rng.random_range(1..=3) {
        sizes.push(rng.random_range(3..=12));
    }
    sizes.push(rng.random_range(1..=3));
    Architecture::relu(sizes, layer_norm)
}

#[test]
fn batched_forward_matches_row_oracle() {
    let mut rng = stream(100, Stream::Init);
    for trial in 0..50 {
        let arch = random_arch(&mut rng, trial % 2 == 0);
        let mut net = MlpNet::new(arch.clone(), &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let rows = rng.random_range(1..=20);
        let data: Vec<f64> = (0..rows * arch.input_dim())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let out = net
            .predict(&Matrix::from_vec(rows, arch.input_dim(), data.clone()).unwrap())
            .unwrap();
        for r in 0..rows {
            let want = naive_forward(
                &net,
                &data[r * arch.input_dim()..(r + 1) * arch.input_dim()],
            );
            for (a, b) in out.row(r).iter().zip(&want) {
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                    "trial {trial}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn layer_norm_critics_pass_gradcheck() {
    let mut rng = stream(101, Stream::Init);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut arch = random_arch(&mut rng, true);
        *arch.layer_sizes.last_mut().unwrap() = 1;
        let report = gradcheck(&arch, 1, 1e-4, &mut rng);
        assert!(report.passed, "{arch:?}: {}", report.max_relative_error);
        worst = worst.max(report.max_relative_error);
    }
    assert!(worst < 1e-4);
}

#[test]
fn input_gradient_matches_the_full_backward() {
    let mut rng = stream(102, Stream::Init);
    let net = MlpNet::new(Architecture::relu(vec![5, 9, 9, 2], true), &mut rng).unwrap();
    let x = Matrix::from_vec(4, 5, (0..20).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let g = Matrix::from_vec(4, 2, (0..8).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap();
    let (_, tape) = net.forward_batch(&x).unwrap();
    let full = net.backward(&tape, &g).unwrap();
    assert_eq!(net.input_gradient(&tape, &g).unwrap(), full.input);
    assert_eq!(net.param_gradient(&tape, &g).unwrap(), full.params);
}

#[test]
fn adam_matches_the_textbook_update() {
    let mut rng = stream(103, Stream::Init);
    let n = 6;
    let mut params: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut oracle = params.clone();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut state = AdamState::new(n, 1e-2);
    for t in 1..=50 {
        let grads: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        state.apply(&mut params, &grads).unwrap();
        for i in 0..n {
            m[i] = 0.9 * m[i] + 0.1 * grads[i];
            v[i] = 0.999 * v[i] + 0.001 * grads[i] * grads[i];
            let mhat = m[i] / (1.0 - 0.9f64.powi(t));
            let vhat = v[i] / (1.0 - 0.999f64.powi(t));
            oracle[i] -= 1e-2 * mhat / (vhat.sqrt() + 1e-8);
        }
    }
    for (a, b) in params.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!(state.step_count, 50);
}

#[test]
fn polyak_averaging_examples() {
    let arch = Architecture::relu(vec![2, 3, 1], false);
    let online = MlpNet::new(arch.clone(), &mut stream(104, Stream::Init)).unwrap();
    let mut target = MlpNet::zeros(arch).unwrap();
    target.soft_update_from(&online, 0.005).unwrap();
    for (t, o) in target.params().iter().zip(online.params()) {
        assert!((t - 0.005 * o).abs() < 1e-15);
    }
    target.soft_update_from(&online, 1.0).unwrap();
    assert_eq!(target.params(), online.params());
}

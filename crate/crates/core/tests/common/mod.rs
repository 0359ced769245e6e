//! Test-only oracles. Nothing here calls into the code paths it checks,
//! except the forward functions being differentiated.

#![allow(dead_code)]

/// Central finite difference of `f` at `x`, one coordinate at a time.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or 0 when both are zero.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Naive triple loop, `a` is m×k and `b` is k×n, both row-major.
pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// Two-pass Pearson: explicit means, then the three centered sums.
pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx: f64 = x.iter().sum::<f64>() / n;
    let my: f64 = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

/// Prints the one-line verdict for an acceptance criterion and fails the
/// test when it did not pass. Written to stderr directly so the line shows
/// up even when the harness captures output.
pub fn verdict(id: u32, title: &str, pass: bool, detail: impl AsRef<str>) {
    use std::io::Write;
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id:>2} [{}] {title}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(pass, "criterion {id} failed: {title}: {}", detail.as_ref());
}

pub mod gradcheck {
    //! Finite-difference checks of every backward pass, in f64.

    use super::{central_diff, rel_error};
    use edbn::layers::{
        concat_cols, embedding_backward, embedding_lookup, linear_backward, linear_forward, mse,
        split_cols, swish, swish_backward, EmbeddingTable, LinearParams,
    };
    use edbn::model::{DualBranchNet, ModelConfig};
    use edbn::rng::RngState;
    use edbn::Matrix;

    pub const STEP: f64 = 1e-5;

    fn random(rng: &mut RngState, rows: usize, cols: usize) -> Matrix<f64> {
        let v = (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect();
        Matrix::from_vec(rows, cols, v).unwrap()
    }

    fn dot(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    /// Max relative error over d_x, d_weight and d_bias of a `b×n_in → n_out` layer.
    pub fn linear(seed: u64, b: usize, n_in: usize, n_out: usize) -> f64 {
        let mut rng = RngState::new(seed);
        let x = random(&mut rng, b, n_in);
        let w = random(&mut rng, n_in, n_out);
        let bias = random(&mut rng, 1, n_out).into_vec();
        let u = random(&mut rng, b, n_out);
        let p = LinearParams::new(w.clone(), bias.clone()).unwrap();
        let (dx, g) = linear_backward(&x, &p, &u).unwrap();

        let objective = |x: &Matrix<f64>, w: &Matrix<f64>, bias: &[f64]| {
            let p = LinearParams::new(w.clone(), bias.to_vec()).unwrap();
            dot(&linear_forward(x, &p).unwrap(), &u)
        };
        let nx = central_diff(x.data(), STEP, |v| {
            objective(&Matrix::from_vec(b, n_in, v.to_vec()).unwrap(), &w, &bias)
        });
        let nw = central_diff(w.data(), STEP, |v| {
            objective(
                &x,
                &Matrix::from_vec(n_in, n_out, v.to_vec()).unwrap(),
                &bias,
            )
        });
        let nb = central_diff(&bias, STEP, |v| objective(&x, &w, v));
        rel_error(dx.data(), &nx)
            .max(rel_error(g.weight.data(), &nw))
            .max(rel_error(&g.bias, &nb))
    }

    pub fn swish_layer(seed: u64) -> f64 {
        let mut rng = RngState::new(seed);
        let x = random(&mut rng, 4, 5).map(|v| 3.0 * v);
        let u = random(&mut rng, 4, 5);
        let analytic = swish_backward(&x, &u).unwrap();
        let numeric = central_diff(x.data(), STEP, |v| {
            dot(&swish(&Matrix::from_vec(4, 5, v.to_vec()).unwrap()), &u)
        });
        rel_error(analytic.data(), &numeric)
    }

    pub fn embedding(seed: u64) -> f64 {
        let mut rng = RngState::new(seed);
        let (v, d) = (6, 3);
        let table = random(&mut rng, v, d);
        // repeats and an unused row on purpose
        let ids = [1usize, 4, 1, 0, 5, 1];
        let u = random(&mut rng, ids.len(), d);
        let analytic = embedding_backward(&ids, &u, v).unwrap();
        let numeric = central_diff(table.data(), STEP, |t| {
            let t = EmbeddingTable::new(Matrix::from_vec(v, d, t.to_vec()).unwrap()).unwrap();
            dot(&embedding_lookup(&ids, &t).unwrap(), &u)
        });
        rel_error(analytic.data(), &numeric)
    }

    pub fn concat(seed: u64) -> f64 {
        let mut rng = RngState::new(seed);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 3, 2);
        let u = random(&mut rng, 3, 6);
        let (da, db) = split_cols(&u, 4).unwrap();
        let na = central_diff(a.data(), STEP, |v| {
            dot(
                &concat_cols(&Matrix::from_vec(3, 4, v.to_vec()).unwrap(), &b).unwrap(),
                &u,
            )
        });
        let nb = central_diff(b.data(), STEP, |v| {
            dot(
                &concat_cols(&a, &Matrix::from_vec(3, 2, v.to_vec()).unwrap()).unwrap(),
                &u,
            )
        });
        rel_error(da.data(), &na).max(rel_error(db.data(), &nb))
    }

    pub fn mse_loss(seed: u64, n: usize) -> f64 {
        let mut rng = RngState::new(seed);
        let pred = random(&mut rng, n, 1).into_vec();
        let target = random(&mut rng, n, 1).into_vec();
        let (_, analytic) = mse(&pred, &target).unwrap();
        let numeric = central_diff(&pred, STEP, |p| mse(p, &target).unwrap().0);
        rel_error(&analytic, &numeric)
    }

    /// Tiny configuration used for whole-network checks.
    pub fn tiny_config(id_branch: bool) -> ModelConfig {
        ModelConfig {
            feature_count: 3,
            id_vocab: 4,
            embed_dim: 2,
            branch_a_widths: vec![4, 4, 4],
            branch_b_widths: vec![2, 2, 2],
            head_widths: vec![5, 3, 2, 1],
            id_branch,
        }
    }

    /// Max relative error over every parameter tensor of the whole network,
    /// with MSE against random targets as the objective.
    pub fn full_network(seed: u64, config: ModelConfig) -> f64 {
        let mut rng = RngState::derive(seed, 100);
        let mut net = DualBranchNet::<f64>::build(config.clone(), &mut rng).unwrap();
        // Zero biases sit every unit at the same point; move them off it.
        for t in net.param_tensors_mut() {
            for v in t.iter_mut() {
                *v += 0.1 * rng.normal(0.0, 1.0);
            }
        }
        let b = 2;
        let x = random(&mut rng, b, config.feature_count);
        let ids: Vec<usize> = (0..b).map(|_| rng.below(config.id_vocab)).collect();
        let target = random(&mut rng, b, 1).into_vec();

        let (pred, cache) = net.forward(&x, &ids).unwrap();
        let (_, d_pred) = mse(pred.data(), &target).unwrap();
        let grads = net
            .backward(&cache, &Matrix::from_vec(b, 1, d_pred).unwrap())
            .unwrap();
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

        let mut worst: f64 = 0.0;
        for (ti, a) in analytic.iter().enumerate() {
            let original = net.param_tensors()[ti].to_vec();
            let numeric = central_diff(&original, STEP, |v| {
                net.param_tensors_mut()[ti].copy_from_slice(v);
                let (p, _) = net.forward(&x, &ids).unwrap();
                mse(p.data(), &target).unwrap().0
            });
            net.param_tensors_mut()[ti].copy_from_slice(&original);
            worst = worst.max(rel_error(a, &numeric));
        }
        worst
    }
}

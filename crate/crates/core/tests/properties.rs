mod common;

use common::{naive_matmul, pearson_two_pass};
use edbn::data::{load_csv, time_split, write_csv, CsvOptions, OOV_INDEX};
use edbn::layers::{concat_cols, embedding_backward, split_cols};
use edbn::metrics::pearson;
use edbn::model::{DualBranchNet, ModelConfig};
use edbn::optim::{adam_step, warmup_lr, AdamHyper, AdamState, WarmupSchedule};
use edbn::rng::RngState;
use edbn::tensor::matmul;
use edbn::{Dataset, Matrix, Vocab};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=16, 1usize..=16, 1usize..=16)
}

fn paired(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
    })
}

fn non_degenerate(x: &[f64]) -> bool {
    x.iter().any(|v| (v - x[0]).abs() > 1e-3)
}

proptest! {
    #[test]
    fn matmul_equals_naive_loop_bitwise(
        ((m, k, n), seed) in (dims(), any::<u64>())
    ) {
        let mut rng = RngState::new(seed);
        let mut draw = |r, c| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
        };
        let a: Matrix<f64> = draw(m, k);
        let b: Matrix<f64> = draw(k, n);
        let expected = naive_matmul(a.data(), b.data(), m, k, n);
        let variants = [
            matmul(&a, &b, false, false).unwrap(),
            matmul(&a.transpose(), &b, true, false).unwrap(),
            matmul(&a, &b.transpose(), false, true).unwrap(),
            matmul(&a.transpose(), &b.transpose(), true, true).unwrap(),
        ];
        for c in &variants {
            prop_assert_eq!(c.data(), &expected[..]);
        }
    }

    #[test]
    fn f32_matmul_close_to_f64_oracle(a in matrix(16, 16), b in matrix(16, 16)) {
        let expected = naive_matmul(a.data(), b.data(), 16, 16, 16);
        let got = matmul(&a.cast::<f32>(), &b.cast::<f32>(), false, false).unwrap();
        for (g, e) in got.data().iter().zip(&expected) {
            prop_assert!(((*g as f64) - e).abs() <= 1e-5 * (1.0 + e.abs()) * 16.0, "{} vs {}", g, e);
        }
    }

    #[test]
    fn pearson_shift_scale_invariant(
        (x, y) in paired(3..60),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        prop_assume!(non_degenerate(&x) && non_degenerate(&y));
        let r = pearson(&x, &y).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
        let x2: Vec<f64> = x.iter().map(|v| -scale * v + shift).collect();
        prop_assert!((r - pearson(&x, &y2).unwrap()).abs() < 1e-10);
        prop_assert!((r + pearson(&x2, &y).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn pearson_symmetric_bounded_and_matches_two_pass((x, y) in paired(2..60)) {
        prop_assume!(non_degenerate(&x) && non_degenerate(&y));
        let r = pearson(&x, &y).unwrap();
        prop_assert_eq!(r, pearson(&y, &x).unwrap());
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((r - pearson_two_pass(&x, &y).clamp(-1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn embedding_gradient_conserves_mass(
        ids in prop::collection::vec(0usize..7, 1..30),
        seed in any::<u64>(),
    ) {
        let mut rng = RngState::new(seed);
        let d = 3;
        let up: Vec<f64> = (0..ids.len() * d).map(|_| rng.normal(0.0, 1.0)).collect();
        let up = Matrix::from_vec(ids.len(), d, up).unwrap();
        let g = embedding_backward(&ids, &up, 7).unwrap();
        for (a, b) in g.column_sums().iter().zip(up.column_sums()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for row in 0..7 {
            if !ids.contains(&row) {
                prop_assert!(g.row(row).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn concat_and_split_are_inverse(a in matrix(4, 3), b in matrix(4, 5)) {
        let c = concat_cols(&a, &b).unwrap();
        let (l, r) = split_cols(&c, 3).unwrap();
        prop_assert_eq!(l, a);
        prop_assert_eq!(r, b);
    }

    #[test]
    fn warmup_is_monotone_and_capped(base in 1e-6f64..1.0, w in 0u64..5000, t in 0u64..10_000) {
        let s = WarmupSchedule::new(base, w).unwrap();
        let (now, next) = (warmup_lr(t, &s), warmup_lr(t + 1, &s));
        prop_assert!(now <= next);
        prop_assert!(next <= base);
        if t >= w {
            prop_assert_eq!(now, base);
        }
    }

    #[test]
    fn adam_keeps_second_moment_nonnegative(
        grads in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 6), 1..20),
        lr in 0.0f64..0.1,
    ) {
        let mut params = vec![0.5f64; 6];
        let mut state = AdamState::new(&[6], AdamHyper::default());
        for g in &grads {
            adam_step(&mut [params.as_mut_slice()], &[g.as_slice()], &mut state, lr).unwrap();
            prop_assert!(state.second_moments()[0].iter().all(|&v| v >= 0.0));
            prop_assert!(params.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn network_is_row_permutation_equivariant(seed in any::<u64>(), rows in 2usize..12) {
        let config = ModelConfig {
            embed_dim: 3,
            branch_a_widths: vec![8, 8],
            branch_b_widths: vec![4],
            head_widths: vec![6, 1],
            ..ModelConfig::new(5, 6)
        };
        let mut rng = RngState::new(seed);
        let net = DualBranchNet::<f32>::build(config, &mut rng).unwrap();
        let x: Vec<f32> = (0..rows * 5).map(|_| rng.normal(0.0, 1.0) as f32).collect();
        let x = Matrix::from_vec(rows, 5, x).unwrap();
        let ids: Vec<usize> = (0..rows).map(|_| rng.below(6)).collect();
        let mut perm: Vec<usize> = (0..rows).collect();
        rng.shuffle(&mut perm);
        let base = net.predict(&x, &ids).unwrap();
        let px = x.select_rows(&perm);
        let pids: Vec<usize> = perm.iter().map(|&i| ids[i]).collect();
        let permuted = net.predict(&px, &pids).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(permuted[k].to_bits(), base[i].to_bits());
        }
    }

    #[test]
    fn time_split_partitions_by_time(times in prop::collection::vec(0i64..20, 2..80), frac in 0.0f64..0.9) {
        let n = times.len();
        let ds = Dataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            times.clone(),
            (0..n as i64).map(|i| i % 5).collect(),
            (0..n).map(|i| i as f64).collect(),
            Matrix::zeros(n, 1),
            vec!["f_0".into()],
        ).unwrap();
        let (train, val) = time_split(&ds, frac).unwrap();
        prop_assert_eq!(train.len() + val.len(), n);
        prop_assert!(!train.is_empty());
        if let (Some(t), Some(v)) = (train.time_id().iter().max(), val.time_id().iter().min()) {
            prop_assert!(t < v);
        }
        let mut rows: Vec<&String> = train.row_ids().iter().chain(val.row_ids()).collect();
        rows.sort();
        let mut all: Vec<&String> = ds.row_ids().iter().collect();
        all.sort();
        prop_assert_eq!(rows, all);
        for &id in val.investment_id() {
            prop_assert_eq!(val.vocab().lookup(id), train.vocab().lookup(id));
        }
    }

    #[test]
    fn vocab_maps_unseen_ids_to_oov(seen in prop::collection::vec(-50i64..50, 1..40), probe in -100i64..100) {
        let v = Vocab::build(seen.iter().copied());
        let idx = v.lookup(probe);
        if seen.contains(&probe) {
            prop_assert!(idx != OOV_INDEX && idx < v.len());
            prop_assert_eq!(v.raw_ids()[idx - 1], probe);
        } else {
            prop_assert_eq!(idx, OOV_INDEX);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_roundtrip_is_exact(
        rows in prop::collection::vec(
            (0i64..5, -3i64..1000, -1e6f64..1e6, prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 3)),
            1..20,
        )
    ) {
        let n = rows.len();
        let ds = Dataset::new(
            rows.iter().map(|r| format!("{}_{}", r.0, r.1)).collect(),
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            Matrix::from_vec(n, 3, rows.iter().flat_map(|r| r.3.clone()).collect()).unwrap(),
            vec!["f_0".into(), "f_1".into(), "f_2".into()],
        ).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&ds, &path).unwrap();
        let back = load_csv(&path, &CsvOptions::default()).unwrap();
        prop_assert_eq!(back.row_ids(), ds.row_ids());
        prop_assert_eq!(back.time_id(), ds.time_id());
        prop_assert_eq!(back.investment_id(), ds.investment_id());
        prop_assert_eq!(back.target(), ds.target());
        prop_assert_eq!(back.features(), ds.features());
    }
}

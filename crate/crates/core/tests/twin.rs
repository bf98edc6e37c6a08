use cdc_core::data::{make_synthetic_with, Dataset, SyntheticSpec};
use cdc_core::models::{SgdConfig, StatsPolicy};
use cdc_core::numerics::{gaussian_smooth, DenseMatrix};
use cdc_core::objectives::{EvalMetric, LossKind};
use cdc_core::twin::{
    counterfactual_distance, counterfactual_weights, train_twins, ModelKind, TwinConfig, TwinTrace,
};
use cdc_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// One-sided Jacobi SVD of a tall matrix `m` (rows ≥ cols), returning
/// `(U, σ, V)` with `m = U·diag(σ)·Vᵀ`.
fn jacobi_svd(m: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let (rows, cols) = m.shape();
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let (a, b) = (u[p][k], u[q][k]);
                    u[p][k] = c * a - s * b;
                    u[q][k] = s * a + c * b;
                }
                for k in 0..cols {
                    let (a, b) = (v[p][k], v[q][k]);
                    v[p][k] = c * a - s * b;
                    v[q][k] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = u.iter().map(|c| dot(c, c).sqrt()).collect();
    for (c, s) in u.iter_mut().zip(&sigma) {
        c.iter_mut().for_each(|x| *x /= s);
    }
    (u, sigma, v)
}

/// Pseudoinverse of a wide full-row-rank `a` through the Jacobi SVD of `aᵀ`.
fn oracle_pinv(a: &DenseMatrix) -> DenseMatrix {
    // aᵀ = U Σ Vᵀ  ⇒  a⁺ = U Σ⁻¹ Vᵀ
    let (u, sigma, v) = jacobi_svd(&a.transpose());
    let (n, h) = a.shape();
    let mut p = DenseMatrix::zeros(h, n);
    for r in 0..sigma.len() {
        for i in 0..h {
            for j in 0..n {
                p.set(i, j, p.get(i, j) + u[r][i] * v[r][j] / sigma[r]);
            }
        }
    }
    p
}

#[test]
fn counterfactual_matches_jacobi_oracle() {
    for seed in 0..3 {
        let a = gaussian(30, 60, seed).map(f64::abs);
        let y1 = gaussian(30, 4, seed + 10);
        let y2 = gaussian(30, 4, seed + 20);
        let cf = counterfactual_weights(&a, &y1, &y2, None).unwrap();
        assert_eq!(cf.rank, 30);
        assert!(!cf.rank_deficient);

        let p = oracle_pinv(&a);
        let w1 = p.matmul(&y1).unwrap();
        let w2 = p.matmul(&y2).unwrap();
        for (got, want) in [(&cf.projected, &w1), (&cf.counterfactual, &w2)] {
            let err = got.sub(want).unwrap().frobenius_norm() / want.frobenius_norm();
            assert!(err < 1e-10, "seed {seed}: relative error {err}");
        }
        let mut want = 0.0;
        for c in 0..4 {
            let (u, v) = (w1.column(c), w2.column(c));
            let d: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            want += 1.0 - d / (nu * nv);
        }
        want /= 4.0;
        let (dist, flag) = counterfactual_distance(&a, &y1, &y2, None).unwrap();
        assert!((dist - want).abs() < 1e-10);
        assert!(!flag);
    }
}

#[test]
fn counterfactual_examples() {
    let a = gaussian(5, 8, 1);
    let y = gaussian(5, 2, 2);
    assert!(counterfactual_distance(&a, &y, &y, None).unwrap().0.abs() < 1e-12);

    let sq = gaussian(6, 6, 3);
    let y = gaussian(6, 3, 4);
    let neg = y.map(|v| -v);
    let (d, flag) = counterfactual_distance(&sq, &y, &neg, None).unwrap();
    assert!((d - 2.0).abs() < 1e-12);
    assert!(!flag);

    let mut dup = gaussian(4, 6, 5);
    let first = dup.row(0).to_vec();
    dup.row_mut(3).copy_from_slice(&first);
    let y = gaussian(4, 2, 6);
    let (_, flag) = counterfactual_distance(&dup, &y, &gaussian(4, 2, 7), None).unwrap();
    assert!(flag);

    let mut zero_col = gaussian(4, 2, 8);
    for i in 0..4 {
        zero_col.set(i, 1, 0.0);
    }
    match counterfactual_weights(&gaussian(4, 6, 9), &zero_col, &gaussian(4, 2, 10), None) {
        Err(Error::ZeroNorm { context }) => assert!(context.contains("column 1"), "{context}"),
        other => panic!("expected zero-norm error, got {other:?}"),
    }
    assert!(counterfactual_distance(&a, &gaussian(4, 2, 0), &gaussian(4, 2, 1), None).is_err());
}

fn small_task(dim: usize, scale: f64) -> (Dataset, Dataset) {
    make_synthetic_with(&SyntheticSpec {
        n_train: 120,
        n_test: 60,
        dim,
        classes: 3,
        separation: 4.0,
        noise_fraction: 0.5,
        input_scale: scale,
        seed: 5,
    })
    .unwrap()
}

fn config(kind: ModelKind, width: usize, seeds: (u64, u64), epochs: usize) -> TwinConfig {
    TwinConfig {
        model_kind: kind,
        width,
        outputs: 3,
        seeds,
        featurizer_seed: 2,
        sgd: SgdConfig {
            learning_rate: 0.05,
            batch_size: 8,
            max_epochs: epochs,
            shuffle_seed: 1,
        },
        loss: LossKind::CrossEntropy,
        eval_metric: EvalMetric::Accuracy,
        counterfactual_every: 2,
        rcond: None,
        disparity_pairs: 5,
        stats: StatsPolicy::default(),
        keep_grad_stats: false,
        track_min_norm: false,
    }
}

#[test]
fn equal_seeds_are_rejected() {
    let (train, test) = small_task(5, 1.0);
    let cfg = config(ModelKind::Linear, 64, (4, 4), 1);
    assert!(matches!(train_twins(&cfg, &train, &test), Err(Error::InvalidConfig(_))));
}

#[test]
fn wide_linear_twins_start_orthogonal() {
    let (train, test) = small_task(5, 1.0);
    let mut cfg = config(ModelKind::Linear, 50_000, (1, 2), 1);
    cfg.outputs = 3;
    let trace = train_twins(&cfg, &train.head(10).unwrap(), &test.head(5).unwrap()).unwrap();
    assert!((0.95..=1.05).contains(&trace.initial_weight_cosdist));
}

#[test]
fn linear_twins_converge_on_noisy_task() {
    let (train, test) = make_synthetic_with(&SyntheticSpec {
        n_train: 300,
        n_test: 100,
        dim: 256,
        classes: 2,
        separation: 6.0,
        noise_fraction: 0.5,
        input_scale: 0.01,
        seed: 3,
    })
    .unwrap();
    let mut cfg = config(ModelKind::Linear, 1024, (1, 2), 400);
    cfg.outputs = 2;
    cfg.sgd.batch_size = 1;
    cfg.sgd.learning_rate = 0.05;
    cfg.stats = StatsPolicy::none();
    let trace = train_twins(&cfg, &train, &test).unwrap();
    let w = trace.weight_cosdist();
    assert!(*w.last().unwrap() < 0.05, "final distance {}", w.last().unwrap());
    let smooth = gaussian_smooth(&w, 5.0);
    assert!(smooth.windows(2).all(|p| p[1] - p[0] <= 0.02));
}

#[test]
fn swapping_seeds_mirrors_the_trace() {
    let (train, test) = small_task(12, 1.0);
    for kind in [ModelKind::Linear, ModelKind::TwoLayer] {
        let a = train_twins(&config(kind, 40, (3, 8), 6), &train, &test).unwrap();
        let b = train_twins(&config(kind, 40, (8, 3), 6), &train, &test).unwrap();
        assert_eq!(a.initial_weight_cosdist, b.initial_weight_cosdist);
        assert_eq!(a.weight_cosdist(), b.weight_cosdist());
        assert_eq!(a.pred_cosdist(), b.pred_cosdist());
        for (ra, rb) in a.records().iter().zip(b.records()) {
            assert_eq!(ra.train_loss1, rb.train_loss2);
            assert_eq!(ra.train_loss2, rb.train_loss1);
        }
    }
}

#[test]
fn two_layer_trace_samples_counterfactuals() {
    let (train, test) = small_task(12, 1.0);
    let trace = train_twins(&config(ModelKind::TwoLayer, 200, (1, 2), 6), &train, &test).unwrap();
    let samples = trace.cf_samples();
    assert_eq!(samples.iter().map(|s| s.0).collect::<Vec<_>>(), vec![2, 4, 6]);
    for r in trace.records() {
        assert_eq!(r.cf_cosdist.is_some(), r.epoch % 2 == 0);
        assert_eq!(r.rank_flag.is_some(), r.epoch % 2 == 0);
        if let Some(d) = r.cf_cosdist {
            assert!((0.0..=2.0).contains(&d));
        }
    }
}

#[test]
fn trace_csv_round_trip() {
    let (train, test) = small_task(12, 1.0);
    let trace = train_twins(&config(ModelKind::TwoLayer, 50, (1, 2), 4), &train, &test).unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(
        "epoch,weight_cosdist,pred_cosdist,cf_cosdist,train_loss1,train_loss2,eval_metric1,grad_norm1,grad_disparity1,rank_flag\n"
    ));
    let back = TwinTrace::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.weight_cosdist(), trace.weight_cosdist());
    assert_eq!(back.eval_metric(), trace.eval_metric());
    assert_eq!(back.cf_samples(), trace.cf_samples());
    assert_eq!(back.disparity(), trace.disparity());
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn runs_are_deterministic() {
    let (train, test) = small_task(12, 1.0);
    let cfg = config(ModelKind::Linear, 64, (1, 2), 5);
    assert_eq!(
        train_twins(&cfg, &train, &test).unwrap(),
        train_twins(&cfg, &train, &test).unwrap()
    );
}

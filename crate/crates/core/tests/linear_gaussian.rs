//! The static linear model turns every stage into Bayesian linear regression,
//! which has closed-form answers.

use nalgebra::{DMatrix, DVector};
use nssm_unc_core::rng;
use nssm_unc_core::trainer::RefineMethod;
use nssm_unc_core::{
    gn_precision, predict_with_uncertainty, train_map, Dataset, DatasetMeta, SequenceModel,
    StaticLinearModel, TrainConfig,
};
use rand_distr::{Distribution, Normal, StandardNormal};

struct Problem {
    x: DMatrix<f64>,
    y: Vec<f64>,
    tau: f64,
    beta: f64,
}

fn problem(n: usize, p: usize, seed: u64) -> Problem {
    let mut r = rng::seeded(seed);
    let x = DMatrix::<f64>::from_fn(n, p, |_, _| StandardNormal.sample(&mut r));
    let truth: Vec<f64> = (0..p).map(|i| 0.5 - 0.3 * i as f64).collect();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let y = (0..n)
        .map(|k| (0..p).map(|j| x[(k, j)] * truth[j]).sum::<f64>() + noise.sample(&mut r))
        .collect();
    Problem { x, y, tau: 0.7, beta: 100.0 }
}

fn flat(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows()).flat_map(|k| x.row(k).iter().copied().collect::<Vec<_>>()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn precision_matches_closed_form() {
    let pb = problem(50, 3, 1);
    let model = StaticLinearModel::new(vec![0.2, -0.1, 0.4]);
    let h = gn_precision(&model, &flat(&pb.x), pb.tau, pb.beta, 0).unwrap().precision();
    let expected = DMatrix::identity(3, 3) * pb.tau + pb.x.transpose() * &pb.x * pb.beta;
    for i in 0..3 {
        for j in 0..=i {
            assert!((h.get(i, j) - expected[(i, j)]).abs() <= 1e-8 * expected[(i, i)]);
        }
    }
}

#[test]
fn map_estimate_is_the_posterior_mean() {
    // Datasets are single-input, so the trained model has one regressor.
    let pb = problem(80, 1, 2);
    let u = flat(&pb.x);
    let sxx: f64 = u.iter().map(|v| v * v).sum();
    let sxy: f64 = u.iter().zip(&pb.y).map(|(a, b)| a * b).sum();
    let mean = pb.beta * sxy / (pb.tau + pb.beta * sxx);

    let ds = Dataset::new(u, pb.y.clone(), 1.0, 0.1, DatasetMeta::default()).unwrap();
    // One full-length batch, then L-BFGS on the quadratic objective.
    let cfg = TrainConfig {
        batch_size: 1,
        subseq_len: 80,
        epochs_adam: 5,
        epochs_refine: 4,
        refine_iters: 50,
        refine: RefineMethod::Lbfgs,
        washout: 0,
        tau: pb.tau,
        beta: pb.beta,
        lr: 1e-2,
        ..TrainConfig::default()
    };
    let report = train_map(&ds, &StaticLinearModel::new(vec![0.0]), &cfg).unwrap();
    assert!(rel(report.theta_map[0], mean) <= 1e-8, "{} vs {mean}", report.theta_map[0]);
}

#[test]
fn predictive_variance_matches_closed_form() {
    let pb = problem(80, 2, 3);
    let h = DMatrix::identity(2, 2) * pb.tau + pb.x.transpose() * &pb.x * pb.beta;
    let h_inv = h.clone().try_inverse().unwrap();
    let mean = &h_inv * pb.x.transpose() * DVector::from_vec(pb.y.clone()) * pb.beta;

    let model = StaticLinearModel::new(mean.iter().copied().collect());
    let post = gn_precision(&model, &flat(&pb.x), pb.tau, pb.beta, 0).unwrap();
    let x_star = [0.3, -1.2, 2.0, 0.5];
    let pred = predict_with_uncertainty(&model, &post, &x_star, 3.0).unwrap();
    for k in 0..2 {
        let xs = DVector::from_column_slice(&x_star[2 * k..2 * k + 2]);
        let var_epi = (xs.transpose() * &h_inv * &xs)[(0, 0)];
        let mean_k = (xs.transpose() * &mean)[(0, 0)];
        assert!(rel(pred.var_epistemic[k], var_epi) <= 1e-8);
        assert!(rel(pred.var_total[k], var_epi + 1.0 / pb.beta) <= 1e-8);
        assert!(rel(pred.y_mean[k], mean_k) <= 1e-8);
    }
    assert_eq!(model.n_params(), 2);
}

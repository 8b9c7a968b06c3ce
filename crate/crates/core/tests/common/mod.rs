#![allow(dead_code)]

use nssm_unc_core::rng;
use nssm_unc_core::{NeuralSSModel, SequenceModel};
use rand_distr::{Distribution, Uniform};

pub fn random_model(n_x: usize, n_hidden: usize, scale: f64, seed: u64) -> NeuralSSModel {
    let mut m = NeuralSSModel::new(n_x, 1, n_hidden, true).unwrap();
    let mut r = rng::seeded(seed);
    let d = Uniform::new_inclusive(-scale, scale).unwrap();
    let theta: Vec<f64> = (0..m.n_params()).map(|_| d.sample(&mut r)).collect();
    m.set_theta(&theta);
    m
}

pub fn random_input(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let d = Uniform::new_inclusive(-1.0, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut r)).collect()
}

/// Output gradients by central differences, `N x n_theta` row-major.
pub fn finite_difference_grads<M: SequenceModel + Clone>(model: &M, u: &[f64], x0: &[f64]) -> Vec<Vec<f64>> {
    let theta = model.theta().to_vec();
    let n = model.sequence_len(u).unwrap();
    let mut out = vec![vec![0.0; theta.len()]; n];
    let mut work = model.clone();
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut p = theta.clone();
        p[i] = theta[i] + h;
        work.set_theta(&p);
        let yp = work.simulate_from(u, x0).unwrap().y_mean;
        p[i] = theta[i] - h;
        work.set_theta(&p);
        let ym = work.simulate_from(u, x0).unwrap().y_mean;
        for k in 0..n {
            out[k][i] = (yp[k] - ym[k]) / (2.0 * h);
        }
    }
    out
}

/// Largest absolute difference divided by the largest reference magnitude.
pub fn max_rel_err(a: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

//! First-order optimizers used by the trainer.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::linalg::{axpy, dot};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Outcome of a batch of quasi-Newton iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOutcome {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    /// True when the line search could not find a decrease.
    pub stalled: bool,
}

/// Limited-memory BFGS with the two-loop recursion and a backtracking line
/// search enforcing sufficient decrease. The curvature memory persists across
/// calls to [`Lbfgs::run`].
#[derive(Debug, Clone)]
pub struct Lbfgs {
    pub memory: usize,
    pub c1: f64,
    pub max_backtracks: usize,
    s_hist: VecDeque<Vec<f64>>,
    y_hist: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Self {
            memory,
            c1: 1e-4,
            max_backtracks: 40,
            s_hist: VecDeque::new(),
            y_hist: VecDeque::new(),
            rho: VecDeque::new(),
        }
    }

    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
        if self.s_hist.is_empty() {
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = if gmax > 1.0 { 1.0 / gmax } else { 1.0 };
            for v in &mut q {
                *v *= scale;
            }
            return q;
        }
        let k = self.s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s_hist[i], &q);
            axpy(-alpha[i], &self.y_hist[i], &mut q);
        }
        let (s, y) = (&self.s_hist[k - 1], &self.y_hist[k - 1]);
        let gamma = dot(s, y) / dot(y, y);
        for v in &mut q {
            *v *= gamma;
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y_hist[i], &q);
            axpy(alpha[i] - beta, &self.s_hist[i], &mut q);
        }
        q
    }

    /// Forgets the stored curvature pairs.
    pub fn reset(&mut self) {
        self.s_hist.clear();
        self.y_hist.clear();
        self.rho.clear();
    }

    /// Runs up to `max_iter` iterations from `x` (value `f`, gradient `g`),
    /// updating all three in place. `objective` returning an error is treated
    /// as a rejected trial point.
    pub fn run<F>(
        &mut self,
        x: &mut Vec<f64>,
        f: &mut f64,
        g: &mut Vec<f64>,
        max_iter: usize,
        mut objective: F,
    ) -> RefineOutcome
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let mut evaluations = 0;
        for it in 0..max_iter {
            let mut d = self.direction(g);
            let mut slope = dot(g, &d);
            if !(slope < 0.0) {
                self.reset();
                d = self.direction(g);
                slope = dot(g, &d);
                if !(slope < 0.0) {
                    return RefineOutcome {
                        iterations: it,
                        evaluations,
                        value: *f,
                        stalled: true,
                    };
                }
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..self.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
                evaluations += 1;
                if let Ok((ft, gt)) = objective(&trial) {
                    if ft.is_finite() && ft <= *f + self.c1 * t * slope {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((x_new, f_new, g_new)) = accepted else {
                return RefineOutcome {
                    iterations: it,
                    evaluations,
                    value: *f,
                    stalled: true,
                };
            };
            let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y) {
                if self.s_hist.len() == self.memory {
                    self.s_hist.pop_front();
                    self.y_hist.pop_front();
                    self.rho.pop_front();
                }
                self.s_hist.push_back(s);
                self.y_hist.push_back(y);
                self.rho.push_back(1.0 / sy);
            }
            *x = x_new;
            *f = f_new;
            *g = g_new;
        }
        RefineOutcome {
            iterations: max_iter,
            evaluations,
            value: *f,
            stalled: false,
        }
    }
}

/// Full-batch gradient descent with the same backtracking line search.
pub fn gradient_descent<F>(
    x: &mut Vec<f64>,
    f: &mut f64,
    g: &mut Vec<f64>,
    max_iter: usize,
    mut objective: F,
) -> RefineOutcome
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut lbfgs = Lbfgs::new(0);
    let mut evaluations = 0;
    for it in 0..max_iter {
        lbfgs.reset();
        let out = lbfgs.run(x, f, g, 1, &mut objective);
        evaluations += out.evaluations;
        if out.stalled {
            return RefineOutcome {
                iterations: it,
                evaluations,
                value: *f,
                stalled: true,
            };
        }
    }
    RefineOutcome {
        iterations: max_iter,
        evaluations,
        value: *f,
        stalled: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut adam = Adam::new(3, 1e-3);
        let mut theta = vec![0.5, -1.0, 2.0];
        for _ in 0..10 {
            adam.step(&mut theta, &[0.0; 3]);
        }
        assert_eq!(theta, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn adam_first_step_has_size_lr() {
        let mut adam = Adam::new(2, 1e-3);
        let mut theta = vec![0.0, 0.0];
        adam.step(&mut theta, &[5.0, -0.01]);
        assert!((theta[0] + 1e-3).abs() < 1e-9);
        assert!((theta[1] - 1e-3).abs() < 1e-6);
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok((f, g))
    }

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let (mut f, mut g) = rosenbrock(&x).unwrap();
        let mut opt = Lbfgs::new(20);
        opt.run(&mut x, &mut f, &mut g, 200, rosenbrock);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn lbfgs_never_increases_objective() {
        let mut x = vec![-1.2, 1.0];
        let (mut f, mut g) = rosenbrock(&x).unwrap();
        let mut opt = Lbfgs::new(5);
        let mut prev = f;
        for _ in 0..20 {
            opt.run(&mut x, &mut f, &mut g, 1, rosenbrock);
            assert!(f <= prev);
            prev = f;
        }
    }

    #[test]
    fn gradient_descent_decreases_quadratic() {
        let obj = |x: &[f64]| Ok((x[0] * x[0] + 10.0 * x[1] * x[1], vec![2.0 * x[0], 20.0 * x[1]]));
        let mut x = vec![1.0, 1.0];
        let (mut f, mut g) = obj(&x).unwrap();
        gradient_descent(&mut x, &mut f, &mut g, 50, obj);
        assert!(f < 1e-6);
    }
}

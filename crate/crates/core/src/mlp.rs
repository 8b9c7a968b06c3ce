//! One-hidden-layer tanh networks with a direct linear input/output term.
//!
//! For an input `z` the network computes
//!
//! ```text
//! out = W2 * tanh(W1 * z + b1) + b2 + A * z
//! ```
//!
//! Parameters live in a flat slice with the fixed layout
//! `[W1 row-major | b1 | W2 row-major | b2 | A row-major]`. The bypass `A` has no
//! bias of its own and is absent when `has_linear_bypass` is false.
//!
//! Dimension mismatches are programming errors and panic.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_HIDDEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub n_hidden: usize,
    pub has_linear_bypass: bool,
}

impl MlpSpec {
    /// Spec with the default 15 hidden units and the bypass enabled.
    pub fn new(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            n_hidden: DEFAULT_HIDDEN,
            has_linear_bypass: true,
        }
    }

    pub fn with_hidden(mut self, n_hidden: usize) -> Self {
        self.n_hidden = n_hidden;
        self
    }

    pub fn with_bypass(mut self, bypass: bool) -> Self {
        self.has_linear_bypass = bypass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 || self.n_hidden == 0 {
            return Err(Error::Config(alloc::format!(
                "network dimensions must be positive (n_in={}, n_out={}, n_hidden={})",
                self.n_in,
                self.n_out,
                self.n_hidden
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let bypass = if self.has_linear_bypass {
            self.n_out * self.n_in
        } else {
            0
        };
        self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1) + bypass
    }

    // Offsets of each block inside the network's own parameter slice.
    #[inline]
    pub fn w1_offset(&self) -> usize {
        0
    }
    #[inline]
    pub fn b1_offset(&self) -> usize {
        self.n_hidden * self.n_in
    }
    #[inline]
    pub fn w2_offset(&self) -> usize {
        self.b1_offset() + self.n_hidden
    }
    #[inline]
    pub fn b2_offset(&self) -> usize {
        self.w2_offset() + self.n_out * self.n_hidden
    }
    #[inline]
    pub fn bypass_offset(&self) -> usize {
        self.b2_offset() + self.n_out
    }
}

/// Location of one network's parameters inside the model-wide parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlice {
    pub offset: usize,
    pub spec: MlpSpec,
}

impl ParamSlice {
    pub fn end(&self) -> usize {
        self.offset + self.spec.param_count()
    }

    pub fn get<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        assert!(self.end() <= theta.len(), "parameter slice out of range");
        &theta[self.offset..self.end()]
    }

    pub fn get_mut<'a>(&self, theta: &'a mut [f64]) -> &'a mut [f64] {
        assert!(self.end() <= theta.len(), "parameter slice out of range");
        &mut theta[self.offset..self.end()]
    }
}

/// Unpacked weights, mostly useful for building networks by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub bypass: Option<Matrix>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            w1: Matrix::zeros(spec.n_hidden, spec.n_in),
            b1: vec![0.0; spec.n_hidden],
            w2: Matrix::zeros(spec.n_out, spec.n_hidden),
            b2: vec![0.0; spec.n_out],
            bypass: spec
                .has_linear_bypass
                .then(|| Matrix::zeros(spec.n_out, spec.n_in)),
        }
    }

    pub fn unpack(spec: &MlpSpec, params: &[f64]) -> Self {
        check_params(spec, params);
        let w1 = Matrix::from_vec(
            spec.n_hidden,
            spec.n_in,
            params[spec.w1_offset()..spec.b1_offset()].to_vec(),
        );
        let b1 = params[spec.b1_offset()..spec.w2_offset()].to_vec();
        let w2 = Matrix::from_vec(
            spec.n_out,
            spec.n_hidden,
            params[spec.w2_offset()..spec.b2_offset()].to_vec(),
        );
        let b2 = params[spec.b2_offset()..spec.bypass_offset()].to_vec();
        let bypass = spec.has_linear_bypass.then(|| {
            Matrix::from_vec(
                spec.n_out,
                spec.n_in,
                params[spec.bypass_offset()..spec.param_count()].to_vec(),
            )
        });
        Self {
            w1,
            b1,
            w2,
            b2,
            bypass,
        }
    }

    pub fn pack(&self, spec: &MlpSpec, out: &mut [f64]) {
        check_params(spec, out);
        assert_eq!((self.w1.rows(), self.w1.cols()), (spec.n_hidden, spec.n_in));
        assert_eq!((self.w2.rows(), self.w2.cols()), (spec.n_out, spec.n_hidden));
        assert_eq!(self.b1.len(), spec.n_hidden);
        assert_eq!(self.b2.len(), spec.n_out);
        assert_eq!(self.bypass.is_some(), spec.has_linear_bypass);
        out[spec.w1_offset()..spec.b1_offset()].copy_from_slice(self.w1.as_slice());
        out[spec.b1_offset()..spec.w2_offset()].copy_from_slice(&self.b1);
        out[spec.w2_offset()..spec.b2_offset()].copy_from_slice(self.w2.as_slice());
        out[spec.b2_offset()..spec.bypass_offset()].copy_from_slice(&self.b2);
        if let Some(a) = &self.bypass {
            out[spec.bypass_offset()..].copy_from_slice(a.as_slice());
        }
    }

    pub fn to_vec(&self, spec: &MlpSpec) -> Vec<f64> {
        let mut out = vec![0.0; spec.param_count()];
        self.pack(spec, &mut out);
        out
    }
}

fn check_params(spec: &MlpSpec, params: &[f64]) {
    assert_eq!(
        params.len(),
        spec.param_count(),
        "parameter slice length does not match network spec"
    );
}

/// Hidden-layer activations kept from a forward pass for Jacobian evaluation.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `tanh(W1 z + b1)`
    pub hidden: Vec<f64>,
    /// `1 - hidden^2`
    pub slope: Vec<f64>,
}

impl Activations {
    pub fn new(spec: &MlpSpec) -> Self {
        Self {
            hidden: vec![0.0; spec.n_hidden],
            slope: vec![0.0; spec.n_hidden],
        }
    }
}

/// Forward pass writing into `out` and recording the activations.
pub fn forward_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    act: &mut Activations,
    out: &mut [f64],
) {
    check_params(spec, params);
    assert_eq!(input.len(), spec.n_in, "network input length");
    assert_eq!(out.len(), spec.n_out, "network output length");
    let (n_in, n_hidden) = (spec.n_in, spec.n_hidden);
    let w1 = &params[spec.w1_offset()..spec.b1_offset()];
    let b1 = &params[spec.b1_offset()..spec.w2_offset()];
    let w2 = &params[spec.w2_offset()..spec.b2_offset()];
    let b2 = &params[spec.b2_offset()..spec.bypass_offset()];
    for j in 0..n_hidden {
        let row = &w1[j * n_in..(j + 1) * n_in];
        let pre = b1[j] + row.iter().zip(input).map(|(w, z)| w * z).sum::<f64>();
        let h = pre.tanh();
        act.hidden[j] = h;
        act.slope[j] = 1.0 - h * h;
    }
    for i in 0..spec.n_out {
        let row = &w2[i * n_hidden..(i + 1) * n_hidden];
        let mut o = b2[i] + row.iter().zip(&act.hidden).map(|(w, h)| w * h).sum::<f64>();
        if spec.has_linear_bypass {
            let a = &params[spec.bypass_offset() + i * n_in..spec.bypass_offset() + (i + 1) * n_in];
            o += a.iter().zip(input).map(|(w, z)| w * z).sum::<f64>();
        }
        out[i] = o;
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut act = Activations::new(spec);
    let mut out = vec![0.0; spec.n_out];
    forward_into(spec, params, input, &mut act, &mut out);
    out
}

/// Writes the first `cols` columns of `d out / d input` into `jac`
/// (row-major, `n_out x cols`). Needs the activations of a prior forward pass.
pub fn input_jacobian_into(
    spec: &MlpSpec,
    params: &[f64],
    act: &Activations,
    cols: usize,
    jac: &mut [f64],
) {
    assert!(cols <= spec.n_in);
    assert_eq!(jac.len(), spec.n_out * cols);
    let (n_in, n_hidden) = (spec.n_in, spec.n_hidden);
    let w1 = &params[spec.w1_offset()..spec.b1_offset()];
    let w2 = &params[spec.w2_offset()..spec.b2_offset()];
    for i in 0..spec.n_out {
        let out_row = &mut jac[i * cols..(i + 1) * cols];
        if spec.has_linear_bypass {
            let a = spec.bypass_offset() + i * n_in;
            out_row.copy_from_slice(&params[a..a + cols]);
        } else {
            out_row.fill(0.0);
        }
        for j in 0..n_hidden {
            let c = w2[i * n_hidden + j] * act.slope[j];
            if c != 0.0 {
                let w1_row = &w1[j * n_in..j * n_in + cols];
                for (o, w) in out_row.iter_mut().zip(w1_row) {
                    *o += c * w;
                }
            }
        }
    }
}

/// Adds `d out / d params` into the columns `col_offset..col_offset + param_count`
/// of the row-major matrix `dest` (row stride `stride`, `n_out` rows).
pub fn add_param_jacobian(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    act: &Activations,
    dest: &mut [f64],
    stride: usize,
    col_offset: usize,
) {
    assert!(col_offset + spec.param_count() <= stride);
    assert!(dest.len() >= spec.n_out * stride);
    let (n_in, n_hidden) = (spec.n_in, spec.n_hidden);
    let w2 = &params[spec.w2_offset()..spec.b2_offset()];
    for i in 0..spec.n_out {
        let row = &mut dest[i * stride + col_offset..i * stride + col_offset + spec.param_count()];
        // W1 and b1: every output depends on every hidden unit.
        for j in 0..n_hidden {
            let c = w2[i * n_hidden + j] * act.slope[j];
            let w1_cols = &mut row[spec.w1_offset() + j * n_in..spec.w1_offset() + (j + 1) * n_in];
            for (o, z) in w1_cols.iter_mut().zip(input) {
                *o += c * z;
            }
            row[spec.b1_offset() + j] += c;
        }
        let w2_cols = &mut row[spec.w2_offset() + i * n_hidden..spec.w2_offset() + (i + 1) * n_hidden];
        for (o, h) in w2_cols.iter_mut().zip(&act.hidden) {
            *o += h;
        }
        row[spec.b2_offset() + i] += 1.0;
        if spec.has_linear_bypass {
            let a_cols = &mut row[spec.bypass_offset() + i * n_in..spec.bypass_offset() + (i + 1) * n_in];
            for (o, z) in a_cols.iter_mut().zip(input) {
                *o += z;
            }
        }
    }
}

/// Analytic Jacobians `(d out/d input, d out/d params)`.
pub fn mlp_jacobians(spec: &MlpSpec, params: &[f64], input: &[f64]) -> (Matrix, Matrix) {
    let mut act = Activations::new(spec);
    let mut out = vec![0.0; spec.n_out];
    forward_into(spec, params, input, &mut act, &mut out);
    let mut jx = Matrix::zeros(spec.n_out, spec.n_in);
    input_jacobian_into(spec, params, &act, spec.n_in, jx.as_mut_slice());
    let n_p = spec.param_count();
    let mut jt = Matrix::zeros(spec.n_out, n_p);
    add_param_jacobian(spec, params, input, &act, jt.as_mut_slice(), n_p, 0);
    (jx, jt)
}

/// Random initial parameters: zero biases, Glorot-uniform weights and a bypass
/// drawn from the same range scaled by 0.1.
pub fn init_params<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Vec<f64> {
    let mut p = MlpParams::zeros(spec);
    let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
    let fill = |m: &mut Matrix, bound: f64, rng: &mut R| {
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for v in m.as_mut_slice() {
            *v = dist.sample(rng);
        }
    };
    fill(&mut p.w1, glorot(spec.n_in, spec.n_hidden), rng);
    fill(&mut p.w2, glorot(spec.n_hidden, spec.n_out), rng);
    if let Some(a) = p.bypass.as_mut() {
        fill(a, 0.1 * glorot(spec.n_in, spec.n_out), rng);
    }
    p.to_vec(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Uniform};

    fn random_vec(n: usize, rng: &mut crate::rng::Rng) -> Vec<f64> {
        let d = Uniform::new_inclusive(-1.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    // Independent element-by-element evaluation used as an oracle.
    fn naive_forward(spec: &MlpSpec, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut idx = 0;
        let mut w1 = vec![vec![0.0; spec.n_in]; spec.n_hidden];
        for r in w1.iter_mut() {
            for v in r.iter_mut() {
                *v = p[idx];
                idx += 1;
            }
        }
        let b1: Vec<f64> = p[idx..idx + spec.n_hidden].to_vec();
        idx += spec.n_hidden;
        let mut w2 = vec![vec![0.0; spec.n_hidden]; spec.n_out];
        for r in w2.iter_mut() {
            for v in r.iter_mut() {
                *v = p[idx];
                idx += 1;
            }
        }
        let b2: Vec<f64> = p[idx..idx + spec.n_out].to_vec();
        idx += spec.n_out;
        let mut y = vec![0.0; spec.n_out];
        for i in 0..spec.n_out {
            let mut acc = b2[i];
            for j in 0..spec.n_hidden {
                let mut pre = b1[j];
                for l in 0..spec.n_in {
                    pre += w1[j][l] * x[l];
                }
                acc += w2[i][j] * pre.tanh();
            }
            if spec.has_linear_bypass {
                for l in 0..spec.n_in {
                    acc += p[idx + i * spec.n_in + l] * x[l];
                }
            }
            y[i] = acc;
        }
        y
    }

    #[test]
    fn param_count_formula() {
        assert_eq!(MlpSpec::new(7, 6).param_count(), 258);
        assert_eq!(MlpSpec::new(6, 1).param_count(), 127);
        assert_eq!(MlpSpec::new(6, 1).with_bypass(false).param_count(), 121);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, 2).with_hidden(4);
        let y = mlp_forward(&spec, &vec![0.0; spec.param_count()], &[0.3, -2.0, 5.0]);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn pure_affine_path() {
        let spec = MlpSpec::new(2, 2).with_hidden(3);
        let mut p = MlpParams::zeros(&spec);
        p.b2 = vec![0.5, -1.5];
        p.bypass = Some(Matrix::identity(2));
        let theta = p.to_vec(&spec);
        let y = mlp_forward(&spec, &theta, &[2.0, 3.0]);
        assert_eq!(y, vec![2.5, 1.5]);
        let (jx, jt) = mlp_jacobians(&spec, &theta, &[2.0, 3.0]);
        assert_eq!(jx, Matrix::identity(2));
        assert_eq!(jt[(0, spec.b2_offset())], 1.0);
        assert_eq!(jt[(1, spec.b2_offset())], 0.0);
    }

    #[test]
    fn matches_naive_loop() {
        let mut r = rng::seeded(1);
        let spec = MlpSpec::new(3, 2).with_hidden(4);
        for _ in 0..20 {
            let p = random_vec(spec.param_count(), &mut r);
            let x = random_vec(3, &mut r);
            let a = mlp_forward(&spec, &p, &x);
            let b = naive_forward(&spec, &p, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn output_bias_column_is_unit_vector() {
        let mut r = rng::seeded(2);
        let spec = MlpSpec::new(3, 2).with_hidden(4);
        let p = random_vec(spec.param_count(), &mut r);
        let (_, jt) = mlp_jacobians(&spec, &p, &[0.1, 0.2, 0.3]);
        for i in 0..2 {
            for k in 0..2 {
                let expected = if i == k { 1.0 } else { 0.0 };
                assert_eq!(jt[(k, spec.b2_offset() + i)], expected);
            }
        }
    }

    fn fd_check(spec: &MlpSpec, p: &[f64], x: &[f64]) -> f64 {
        let h = 1e-5;
        let (jx, jt) = mlp_jacobians(spec, p, x);
        let mut worst: f64 = 0.0;
        for l in 0..spec.n_in {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let (yp, ym) = (naive_forward(spec, p, &xp), naive_forward(spec, p, &xm));
            for i in 0..spec.n_out {
                worst = worst.max(((yp[i] - ym[i]) / (2.0 * h) - jx[(i, l)]).abs());
            }
        }
        for c in 0..spec.param_count() {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[c] += h;
            pm[c] -= h;
            let (yp, ym) = (naive_forward(spec, &pp, x), naive_forward(spec, &pm, x));
            for i in 0..spec.n_out {
                worst = worst.max(((yp[i] - ym[i]) / (2.0 * h) - jt[(i, c)]).abs());
            }
        }
        worst
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut r = rng::seeded(3);
        for trial in 0..100 {
            let n_in = 1 + trial % 4;
            let n_out = 1 + (trial / 4) % 3;
            let spec = MlpSpec::new(n_in, n_out)
                .with_hidden(1 + trial % 5)
                .with_bypass(trial % 3 != 0);
            let p = random_vec(spec.param_count(), &mut r);
            let x = random_vec(n_in, &mut r);
            let err = fd_check(&spec, &p, &x);
            assert!(err <= 1e-6, "trial {trial}: {err}");
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let mut r = rng::seeded(4);
        let spec = MlpSpec::new(7, 6);
        let p = random_vec(spec.param_count(), &mut r);
        let back = MlpParams::unpack(&spec, &p).to_vec(&spec);
        assert_eq!(p, back);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut r = rng::seeded(5);
        let spec = MlpSpec::new(7, 6);
        let p = random_vec(spec.param_count(), &mut r);
        let x = random_vec(7, &mut r);
        let a = mlp_forward(&spec, &p, &x);
        let b = mlp_forward(&spec, &p, &x);
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    #[should_panic]
    fn wrong_input_length_panics() {
        let spec = MlpSpec::new(3, 1).with_hidden(2);
        mlp_forward(&spec, &vec![0.0; spec.param_count()], &[1.0]);
    }

    #[test]
    fn init_has_zero_biases() {
        let spec = MlpSpec::new(7, 6);
        let p = init_params(&spec, &mut rng::seeded(9));
        let u = MlpParams::unpack(&spec, &p);
        assert!(u.b1.iter().chain(&u.b2).all(|&b| b == 0.0));
        let bound = (6.0f64 / 22.0).sqrt();
        assert!(u.w1.as_slice().iter().all(|w| w.abs() <= bound));
    }
}

//! Small dense linear algebra: row-major matrices, packed Cholesky factors
//! and compensated accumulation.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods shadow this trait whenever std is linked in.
#[allow(unused_imports)]
use num_traits::Float;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `self += alpha * v * v^T` (lower and upper triangle).
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        assert_eq!(self.rows, v.len());
        assert_eq!(self.cols, v.len());
        for (i, &vi) in v.iter().enumerate() {
            let a = alpha * vi;
            axpy(a, v, self.row_mut(i));
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Index of `(i, j)`, `j <= i`, in a row-packed lower triangle.
#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric matrix stored as its row-packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPacked {
    n: usize,
    data: Vec<f64>,
}

impl SymPacked {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; packed_len(n)],
        }
    }

    pub fn from_packed(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), packed_len(n));
        Self { n, data }
    }

    /// Lower triangle of a dense (assumed symmetric) matrix.
    pub fn from_dense(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols());
        let n = m.rows();
        let mut data = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            data.extend_from_slice(&m.row(i)[..=i]);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.data[packed_index(i, j)]
        } else {
            self.data[packed_index(j, i)]
        }
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.data[packed_index(i, i)] += value;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[packed_index(i, i)]).sum()
    }

    /// `self += alpha * v * v^T`
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        assert_eq!(v.len(), self.n);
        let mut offset = 0;
        for i in 0..self.n {
            let a = alpha * v[i];
            axpy(a, &v[..=i], &mut self.data[offset..offset + i + 1]);
            offset += i + 1;
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.data[packed_index(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Gershgorin lower bound on the smallest eigenvalue.
    pub fn gershgorin_min(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let off: f64 = (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j).abs())
                    .sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Cholesky factorization `A = L L^T`. On failure returns the offending
    /// pivot value.
    pub fn cholesky(&self) -> Result<Cholesky, f64> {
        let n = self.n;
        let mut l = self.data.clone();
        for i in 0..n {
            let row_i = packed_index(i, 0);
            for j in 0..=i {
                let row_j = packed_index(j, 0);
                let s = dot(&l[row_i..row_i + j], &l[row_j..row_j + j]);
                let v = l[row_i + j] - s;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(v);
                    }
                    l[row_i + i] = v.sqrt();
                } else {
                    l[row_i + j] = v / l[row_j + j];
                }
            }
        }
        Ok(Cholesky { n, data: l })
    }
}

/// Lower-triangular Cholesky factor in row-packed storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    data: Vec<f64>,
}

impl Cholesky {
    pub fn from_packed(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), packed_len(n));
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.data[packed_index(i, j)]
        } else {
            0.0
        }
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut offset = 0;
        for i in 0..self.n {
            let s = dot(&self.data[offset..offset + i], &b[..i]);
            b[i] = (b[i] - s) / self.data[offset + i];
            offset += i + 1;
        }
    }

    /// Solves `L^T z = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let d = self.data[packed_index(i, i)];
            b[i] /= d;
            let bi = b[i];
            let row = packed_index(i, 0);
            axpy(-bi, &self.data[row..row + i], &mut b[..i]);
        }
    }

    /// `A^{-1} b` via two triangular solves.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = b.to_vec();
        self.solve_lower_in_place(&mut z);
        self.solve_upper_in_place(&mut z);
        z
    }

    /// `L L^T` as a symmetric packed matrix.
    pub fn reconstruct(&self) -> SymPacked {
        let n = self.n;
        let mut out = SymPacked::zeros(n);
        for i in 0..n {
            let ri = packed_index(i, 0);
            for j in 0..=i {
                let rj = packed_index(j, 0);
                out.data[packed_index(i, j)] = dot(&self.data[ri..ri + j + 1], &self.data[rj..rj + j + 1]);
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.data[packed_index(i, i)].ln())
            .sum::<f64>()
    }
}

/// Neumaier-compensated running sums over a fixed-length buffer.
#[derive(Debug, Clone)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    pub fn zeros(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    pub fn add(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.sum.len());
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(values) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn finish(self) -> Vec<f64> {
        self.sum
            .into_iter()
            .zip(self.comp)
            .map(|(s, c)| s + c)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cholesky_of_identity_multiple() {
        let mut a = SymPacked::zeros(4);
        a.add_diagonal(9.0);
        let l = a.cholesky().unwrap();
        for i in 0..4 {
            assert_eq!(l.get(i, i), 3.0);
            for j in 0..i {
                assert_eq!(l.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        let pivot = SymPacked::from_dense(&m).cholesky().unwrap_err();
        assert!(pivot < 0.0);
    }

    #[test]
    fn solve_round_trip() {
        let m = Matrix::from_vec(3, 3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = SymPacked::from_dense(&m).cholesky().unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = l.solve(&b);
        let back = m.mul_vec(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
        let rec = l.reconstruct().to_dense();
        for (u, v) in rec.as_slice().iter().zip(m.as_slice()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::zeros(1);
        acc.add(&[1.0]);
        for _ in 0..1000 {
            acc.add(&[1e-17]);
        }
        acc.add(&[-1.0]);
        let s = acc.finish()[0];
        assert!((s - 1e-14).abs() < 1e-20, "{s}");
    }

    #[test]
    fn packed_outer_matches_dense() {
        let v = [1.0, -2.0, 3.0];
        let mut p = SymPacked::zeros(3);
        p.add_outer(0.5, &v);
        let mut d = Matrix::zeros(3, 3);
        d.add_outer(0.5, &v);
        assert_eq!(p.to_dense(), d);
    }
}

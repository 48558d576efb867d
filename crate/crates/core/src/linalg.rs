//! Dense symmetric matrices and Cholesky factors, just enough for GP priors.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense square matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += value;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Lower-triangular Cholesky factor stored row by row (packed).
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    packed: Vec<f64>,
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl Cholesky {
    /// Factorizes a symmetric positive-definite matrix; only the lower
    /// triangle is read.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim();
        let mut packed = vec![0.0; row_start(n)];
        for i in 0..n {
            let (done, rest) = packed.split_at_mut(row_start(i));
            let row_i = &mut rest[..=i];
            for j in 0..=i {
                let row_j: &[f64] = if j < i { &done[row_start(j)..row_start(j) + j + 1] } else { &[] };
                let dot: f64 = if j < i {
                    row_i[..j].iter().zip(&row_j[..j]).map(|(x, y)| x * y).sum()
                } else {
                    row_i[..i].iter().map(|x| x * x).sum()
                };
                let value = a.get(i, j) - dot;
                if j == i {
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(Error::Numerical("matrix is not positive definite"));
                    }
                    row_i[i] = libm::sqrt(value);
                } else {
                    row_i[j] = value / row_j[j];
                }
            }
        }
        Ok(Cholesky { n, packed })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i) + i + 1]
    }

    /// `L z`.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        self.mul_vec_into(z, &mut out);
        out
    }

    pub fn mul_vec_into(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.n).map(|i| self.row(i).iter().zip(z).map(|(a, b)| a * b).sum::<f64>()));
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(&x).map(|(a, b)| a * b).sum();
            x.push((b[i] - dot) / row[i]);
        }
        x
    }

    /// `ln det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| libm::log(self.row(i)[i])).sum::<f64>()
    }

    /// `bᵀ (L Lᵀ)⁻¹ b`.
    pub fn quadratic_form(&self, b: &[f64]) -> f64 {
        self.solve_lower(b).iter().map(|x| x * x).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs_matrix() {
        let a = SquareMatrix::from_fn(4, |i, j| {
            let d = i as f64 - j as f64;
            libm::exp(-0.3 * d * d) + if i == j { 0.1 } else { 0.0 }
        });
        let l = Cholesky::factor(&a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..=i.min(j)).map(|k| l.row(i)[k] * l.row(j)[k]).sum();
                assert!((s - a.get(i, j)).abs() < 1e-12);
            }
        }
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = l.solve_lower(&b);
        let back = l.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SquareMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(Cholesky::factor(&a).is_err());
    }
}

//! Small fixed-capacity vectors and symmetric matrices for pointwise work.
//!
//! Grids are at most two-dimensional, but the pointwise formulas (coefficient
//! tensors, Pucci operators, jets) are written for any `n <= MAX_DIM` so they
//! can be exercised in three dimensions as well. Nothing here allocates.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector {
    dim: usize,
    data: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self {
            dim,
            data: [0.0; MAX_DIM],
        }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut v = Self::zeros(values.len());
        v.data[..values.len()].copy_from_slice(values);
        v
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[axis] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.dim]
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        (0..self.dim).map(|i| self.data[i] * other.data[i]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, s: f64) -> Vector {
        let mut v = *self;
        v.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        v
    }

    pub fn add(&self, other: &Vector) -> Vector {
        let mut v = *self;
        for i in 0..self.dim {
            v.data[i] += other.data[i];
        }
        v
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        let mut v = *self;
        for i in 0..self.dim {
            v.data[i] -= other.data[i];
        }
        v
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

/// Symmetric `n x n` matrix, stored in full so that transposition symmetry is
/// checkable exactly as stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self {
            dim,
            data: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i][i] = *d;
        }
        m
    }

    /// Build from row-major entries; rejects input that is not symmetric.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParams(format!("row {i} has length {}", row.len())));
            }
            m.data[i][..n].copy_from_slice(row);
        }
        if !m.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(m)
    }

    /// `v w^T + w v^T` scaled by one half, i.e. the symmetric part of `v w^T`.
    pub fn sym_outer(v: &Vector, w: &Vector) -> Self {
        let n = v.dim();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i][j] = 0.5 * (v[i] * w[j] + w[i] * v[j]);
            }
        }
        m
    }

    pub fn outer(v: &Vector) -> Self {
        let n = v.dim();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i][j] = v[i] * v[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j] = value;
        self.data[j][i] = value;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.data[i][j] == self.data[j][i]))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i][i]).sum()
    }

    /// Frobenius inner product `A : B = sum_ij A_ij B_ij`.
    pub fn contract(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.data[i][j] * other.data[i][j];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        self.contract(self).sqrt()
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.data[i][j] * v[j]).sum();
        }
        out
    }

    pub fn quad_form(&self, v: &Vector) -> f64 {
        v.dot(&self.mul_vec(v))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] *= s;
            }
        }
        m
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] += other.data[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scale(-1.0))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = match self.dim {
            1 => vec![self.data[0][0]],
            2 => {
                let (a, b, d) = (self.data[0][0], self.data[0][1], self.data[1][1]);
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ => {
                let m = nalgebra::Matrix3::from_fn(|i, j| self.data[i][j]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
        };
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Pointwise triple `(Du, D^2u, u_t)` on which the Bernstein inequalities act.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub q: Vector,
    pub m: SymMatrix,
    pub tau: f64,
}

impl Jet {
    pub fn new(q: Vector, m: SymMatrix, tau: f64) -> Result<Self> {
        if q.dim() != m.dim() {
            return Err(Error::InvalidParams(format!(
                "gradient has dimension {} but Hessian has dimension {}",
                q.dim(),
                m.dim()
            )));
        }
        if !m.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(Self { q, m, tau })
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_2x2_and_3x3() {
        let m = SymMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let ev = m.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);

        let m3 = SymMatrix::diagonal(&[3.0, -1.0, 2.0]);
        let ev = m3.eigenvalues();
        for (a, b) in ev.iter().zip([-1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonsymmetric_rows() {
        assert_eq!(
            SymMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]),
            Err(Error::NotSymmetric)
        );
    }

    #[test]
    fn contraction_and_trace() {
        let i2 = SymMatrix::identity(2);
        let m = SymMatrix::from_rows(&[&[1.0, 4.0], &[4.0, -3.0]]).unwrap();
        assert_eq!(i2.contract(&m), m.trace());
        assert_eq!(m.frobenius(), (1.0f64 + 16.0 + 16.0 + 9.0).sqrt());
    }
}

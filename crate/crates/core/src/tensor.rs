//! Dense component arrays in a coordinate frame.
//!
//! Every tensor is a flat row-major `Vec<f64>` over `dim^R` entries.
//! Index order is the order the components are written in the docs of the
//! producing function, e.g. `Γ^k_{ij}` is stored at `[k, i, j]`.

use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<const R: usize> {
    dim: usize,
    data: Vec<f64>,
}

pub type Vector = Tensor<1>;
pub type Matrix = Tensor<2>;
pub type Tensor3 = Tensor<3>;
pub type Tensor4 = Tensor<4>;

impl<const R: usize> Tensor<R> {
    pub fn zeros(dim: usize) -> Self {
        Tensor {
            dim,
            data: vec![0.0; dim.pow(R as u32)],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut([usize; R]) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for (slot, idx) in t.data.iter_mut().zip(multi_indices::<R>(dim)) {
            *slot = f(idx);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = ([usize; R], f64)> + '_ {
        multi_indices::<R>(self.dim).zip(self.data.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        Tensor {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    fn offset(&self, idx: [usize; R]) -> usize {
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }
}

impl<const R: usize> Index<[usize; R]> for Tensor<R> {
    type Output = f64;
    fn index(&self, idx: [usize; R]) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl<const R: usize> IndexMut<[usize; R]> for Tensor<R> {
    fn index_mut(&mut self, idx: [usize; R]) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

impl Vector {
    pub fn from_vec(v: Vec<f64>) -> Vector {
        Tensor {
            dim: v.len(),
            data: v,
        }
    }
}

impl Matrix {
    pub fn identity(dim: usize) -> Matrix {
        Matrix::from_fn(dim, |[i, j]| if i == j { 1.0 } else { 0.0 })
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.dim, |[i, j]| self[[j, i]])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        Matrix::from_fn(n, |[i, j]| (0..n).map(|m| self[[i, m]] * other[[m, j]]).sum())
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        let n = self.dim;
        Vector::from_vec((0..n).map(|i| (0..n).map(|m| self[[i, m]] * v[[m]]).sum()).collect())
    }
}

/// Row-major enumeration of `[0, dim)^R`.
pub fn multi_indices<const R: usize>(dim: usize) -> impl Iterator<Item = [usize; R]> {
    let total = dim.pow(R as u32);
    (0..total).map(move |mut flat| {
        let mut idx = [0; R];
        for slot in idx.iter_mut().rev() {
            *slot = flat % dim;
            flat /= dim;
        }
        idx
    })
}

/// Max-abs difference scaled by `max(1, |a|_∞, |b|_∞)`.
pub fn normalized_residual<const R: usize>(a: &Tensor<R>, b: &Tensor<R>) -> f64 {
    let scale = 1f64.max(a.max_abs()).max(b.max_abs());
    let diff = a.sub(b).max_abs();
    if diff.is_nan() {
        f64::INFINITY
    } else {
        diff / scale
    }
}

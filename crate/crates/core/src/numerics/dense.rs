//! Small dense matrices and the cyclic Jacobi eigensolver for symmetric input.

use std::ops::{Index, IndexMut};

use crate::error::{OtdError, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(OtdError::Contract(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(OtdError::Contract("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(OtdError::Contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `(A + A^T) / 2`
    pub fn symmetric_part(&self) -> Self {
        assert!(self.is_square(), "symmetric part of a non-square matrix");
        let n = self.rows;
        let half = T::lit(0.5);
        let mut s = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.data)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Sorted in descending order.
    pub values: Vec<T>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: DenseMatrix<T>,
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix,
/// by cyclic Jacobi rotations.
///
/// `tol` bounds the accepted asymmetry relative to the largest entry. Only the
/// upper triangle is used once symmetry has been checked.
pub fn symmetric_eigs<T: Scalar>(a: &DenseMatrix<T>, tol: T) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(OtdError::Contract(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let scale = a.max_abs();
    let mut asym = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > tol * scale {
        return Err(OtdError::NotSymmetric {
            asymmetry: asym.to_f64_lossy(),
            allowed: (tol * scale).to_f64_lossy(),
        });
    }

    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = DenseMatrix::<T>::identity(n);
    let eps = T::epsilon();
    let frob: T = m.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt();

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= eps * frob || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DenseMatrix<f64>, e: &SymmetricEigen<f64>) -> f64 {
        let n = a.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let w = e.vectors.column(i);
            let aw = a.matvec(&w);
            for k in 0..n {
                worst = worst.max((aw[k] - e.values[i] * w[k]).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = symmetric_eigs(&DenseMatrix::<f64>::identity(3), 1e-12).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = symmetric_eigs(&a, 1e-12).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        assert!(residual(&a, &e) < 1e-12);
    }

    #[test]
    fn two_by_two_hand_decomposition() {
        // [[2,1],[1,2]]: (1,1)/sqrt2 -> 3, (1,-1)/sqrt2 -> 1
        let a = DenseMatrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigs(&a, 1e-12).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let w0 = e.vectors.column(0);
        let w1 = e.vectors.column(1);
        assert!((w0[0].abs() - r).abs() < 1e-14 && (w0[0] - w0[1]).abs() < 1e-14);
        assert!((w1[0].abs() - r).abs() < 1e-14 && (w1[0] + w1[1]).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_square() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        assert!(matches!(symmetric_eigs(&a, 1e-12), Err(OtdError::Contract(_))));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            symmetric_eigs(&a, 1e-10),
            Err(OtdError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let a = DenseMatrix::from_rows(&[vec![2.0f32, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigs(&a, 1e-6).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn new_checks_shape_and_finiteness() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}

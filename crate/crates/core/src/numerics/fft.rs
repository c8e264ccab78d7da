//! Discrete Fourier transforms.
//!
//! Convention used everywhere in the crate: the forward transform is the plain
//! unnormalized sum `X_k = sum_j x_j exp(-2 pi i jk/n)`; the inverse divides by
//! `n` (by `n*m` in two dimensions), so `inverse(forward(x)) == x`.

use std::sync::Arc;

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{OtdError, Result};
use crate::scalar::Scalar;

/// Planned complex transform of fixed length.
#[derive(Clone)]
pub struct Fft1d<T: Scalar> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for Fft1d<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft1d").field("n", &self.n).finish()
    }
}

impl<T: Scalar> Fft1d<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(OtdError::Contract(format!(
                "transform of length {} applied to {} samples",
                self.n, len
            )));
        }
        Ok(())
    }

    pub fn forward_in_place(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check(data.len())?;
        self.forward.process(data);
        Ok(())
    }

    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check(data.len())?;
        self.inverse.process(data);
        let scale = T::from_usize_lossy(self.n).recip();
        data.iter_mut().for_each(|c| *c = *c * scale);
        Ok(())
    }
}

/// Unnormalized forward DFT of a complex signal.
pub fn dft_forward<T: Scalar>(field: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = field.to_vec();
    if !out.is_empty() {
        Fft1d::new(out.len())
            .forward_in_place(&mut out)
            .expect("length matches plan");
    }
    out
}

/// Inverse DFT (divides by `n`).
pub fn dft_inverse<T: Scalar>(spectrum: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = spectrum.to_vec();
    if !out.is_empty() {
        Fft1d::new(out.len())
            .inverse_in_place(&mut out)
            .expect("length matches plan");
    }
    out
}

/// Two-dimensional complex transform over a row-major `ny x nx` array.
#[derive(Clone, Debug)]
pub struct Fft2d<T: Scalar> {
    nx: usize,
    ny: usize,
    rows: Fft1d<T>,
    cols: Fft1d<T>,
}

impl<T: Scalar> Fft2d<T> {
    pub fn new(ny: usize, nx: usize) -> Self {
        Self {
            nx,
            ny,
            rows: Fft1d::new(nx),
            cols: Fft1d::new(ny),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.nx * self.ny {
            return Err(OtdError::Contract(format!(
                "{}x{} transform applied to {} samples",
                self.ny, self.nx, len
            )));
        }
        Ok(())
    }

    fn columns(&self, data: &mut [Complex<T>], inverse: bool) -> Result<()> {
        let mut col = vec![Complex::new(T::zero(), T::zero()); self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                col[y] = data[y * self.nx + x];
            }
            if inverse {
                self.cols.inverse_in_place(&mut col)?;
            } else {
                self.cols.forward_in_place(&mut col)?;
            }
            for y in 0..self.ny {
                data[y * self.nx + x] = col[y];
            }
        }
        Ok(())
    }

    pub fn forward_in_place(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check(data.len())?;
        for row in data.chunks_exact_mut(self.nx) {
            self.rows.forward_in_place(row)?;
        }
        self.columns(data, false)
    }

    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.check(data.len())?;
        for row in data.chunks_exact_mut(self.nx) {
            self.rows.inverse_in_place(row)?;
        }
        self.columns(data, true)
    }
}

/// Real-to-complex 2D transform of a row-major `ny x nx` real array.
///
/// The spectrum is stored row-major as `ny x (nx/2 + 1)`: rows are `ky` in DFT
/// order, columns are `kx = 0..=nx/2`.
#[derive(Clone)]
pub struct RealFft2d<T: Scalar> {
    nx: usize,
    ny: usize,
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
    cols: Fft1d<T>,
}

impl<T: Scalar> std::fmt::Debug for RealFft2d<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealFft2d")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl<T: Scalar> RealFft2d<T> {
    pub fn new(ny: usize, nx: usize) -> Self {
        let mut planner = RealFftPlanner::<T>::new();
        Self {
            nx,
            ny,
            r2c: planner.plan_fft_forward(nx),
            c2r: planner.plan_fft_inverse(nx),
            cols: Fft1d::new(ny),
        }
    }

    pub fn half_width(&self) -> usize {
        self.nx / 2 + 1
    }

    /// Unnormalized forward transform; `active_cols` limits the column pass to
    /// `kx < active_cols` (the remaining columns are left with row-pass values).
    pub fn forward(&self, field: &[T], active_cols: usize) -> Result<Vec<Complex<T>>> {
        if field.len() != self.nx * self.ny {
            return Err(OtdError::Contract(format!(
                "{}x{} real transform applied to {} samples",
                self.ny,
                self.nx,
                field.len()
            )));
        }
        let hw = self.half_width();
        let zero = Complex::new(T::zero(), T::zero());
        let mut spec = vec![zero; self.ny * hw];
        let mut row_in = vec![T::zero(); self.nx];
        let mut row_out = vec![zero; hw];
        for y in 0..self.ny {
            row_in.copy_from_slice(&field[y * self.nx..(y + 1) * self.nx]);
            self.r2c
                .process(&mut row_in, &mut row_out)
                .map_err(|e| OtdError::Contract(e.to_string()))?;
            spec[y * hw..(y + 1) * hw].copy_from_slice(&row_out);
        }
        let mut col = vec![zero; self.ny];
        for x in 0..active_cols.min(hw) {
            for y in 0..self.ny {
                col[y] = spec[y * hw + x];
            }
            self.cols.forward_in_place(&mut col)?;
            for y in 0..self.ny {
                spec[y * hw + x] = col[y];
            }
        }
        Ok(spec)
    }

    /// Inverse transform (divides by `nx*ny`). Columns with `kx >= active_cols`
    /// must be zero and are skipped.
    pub fn inverse(&self, spectrum: &[Complex<T>], active_cols: usize) -> Result<Vec<T>> {
        let hw = self.half_width();
        if spectrum.len() != self.ny * hw {
            return Err(OtdError::Contract(format!(
                "half spectrum of {}x{} expected, got {} entries",
                self.ny,
                hw,
                spectrum.len()
            )));
        }
        let zero = Complex::new(T::zero(), T::zero());
        let mut work = spectrum.to_vec();
        let mut col = vec![zero; self.ny];
        for x in 0..active_cols.min(hw) {
            for y in 0..self.ny {
                col[y] = work[y * hw + x];
            }
            self.cols.inverse_in_place(&mut col)?;
            for y in 0..self.ny {
                work[y * hw + x] = col[y];
            }
        }
        let mut out = vec![T::zero(); self.nx * self.ny];
        let scale = T::from_usize_lossy(self.nx).recip();
        for y in 0..self.ny {
            let row = &mut work[y * hw..(y + 1) * hw];
            // c2r requires real DC and Nyquist bins
            row[0].im = T::zero();
            row[hw - 1].im = T::zero();
            self.c2r
                .process(row, &mut out[y * self.nx..(y + 1) * self.nx])
                .map_err(|e| OtdError::Contract(e.to_string()))?;
        }
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn constant_signal() {
        let s = dft_forward(&[c(1.0, 0.0); 4]);
        assert_eq!(s, vec![c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn size_mismatch_is_contract_violation() {
        let f = Fft1d::<f64>::new(8);
        let mut data = vec![c(0.0, 0.0); 4];
        assert!(matches!(f.forward_in_place(&mut data), Err(OtdError::Contract(_))));
    }

    #[test]
    fn round_trip_2d_complex() {
        let (ny, nx) = (6, 8);
        let data: Vec<_> = (0..ny * nx)
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let f = Fft2d::new(ny, nx);
        let mut work = data.clone();
        f.forward_in_place(&mut work).unwrap();
        f.inverse_in_place(&mut work).unwrap();
        for (a, b) in work.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn real_2d_matches_complex_2d() {
        let (ny, nx) = (8, 12);
        let field: Vec<f64> = (0..ny * nx).map(|i| ((i * i) as f64 * 0.013).sin()).collect();
        let r = RealFft2d::new(ny, nx);
        let half = r.forward(&field, nx / 2 + 1).unwrap();
        let mut full: Vec<_> = field.iter().map(|&x| c(x, 0.0)).collect();
        Fft2d::new(ny, nx).forward_in_place(&mut full).unwrap();
        let hw = nx / 2 + 1;
        for y in 0..ny {
            for x in 0..hw {
                assert!((half[y * hw + x] - full[y * nx + x]).norm() < 1e-12);
            }
        }
        let back = r.inverse(&half, hw).unwrap();
        for (a, b) in back.iter().zip(&field) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}

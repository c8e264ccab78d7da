//! Periodic spectral grids, wavenumbers, dealiasing masks and spectral derivatives.

use num_complex::Complex;

use super::fft::Fft1d;
use crate::error::{OtdError, Result};
use crate::scalar::Scalar;

fn check_modes(n: usize, what: &str) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(OtdError::Contract(format!(
            "{what} mode count must be even and >= 8, got {n}"
        )));
    }
    Ok(())
}

/// Integer wavenumbers in DFT order: `0, 1, ..., n/2-1, -n/2, ..., -1`.
pub fn wavenumber_indices(n: usize) -> Vec<i64> {
    let n = n as i64;
    (0..n).map(|j| if j < n / 2 { j } else { j - n }).collect()
}

/// Largest retained `|k|` under the two-thirds rule.
pub fn two_thirds_cutoff(n: usize) -> usize {
    n / 3
}

/// Uniform periodic grid on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid1D<T> {
    n: usize,
    length: T,
}

impl<T: Scalar> SpectralGrid1D<T> {
    pub fn new(n: usize, length: T) -> Result<Self> {
        check_modes(n, "grid")?;
        if !(length > T::zero()) || !length.is_finite() {
            return Err(OtdError::Contract("domain length must be positive".into()));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn dx(&self) -> T {
        self.length / T::from_usize_lossy(self.n)
    }

    pub fn points(&self) -> Vec<T> {
        let dx = self.dx();
        (0..self.n).map(|j| dx * T::from_usize_lossy(j)).collect()
    }

    pub fn wavenumber_indices(&self) -> Vec<i64> {
        wavenumber_indices(self.n)
    }

    /// Physical wavenumbers `2 pi k / L` in DFT order.
    pub fn wavenumbers(&self) -> Vec<T> {
        let base = T::TAU() / self.length;
        self.wavenumber_indices()
            .into_iter()
            .map(|k| base * T::from_i64(k).expect("small integer"))
            .collect()
    }

    /// Two-thirds mask in DFT order: `true` where `|k| <= n/3`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = two_thirds_cutoff(self.n) as i64;
        self.wavenumber_indices().into_iter().map(|k| k.abs() <= cut).collect()
    }
}

/// Uniform periodic grid on `[0, lx) x [0, ly)`, arrays stored row-major with
/// `y` as the slow index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid2D<T> {
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
}

impl<T: Scalar> SpectralGrid2D<T> {
    pub fn new(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        check_modes(nx, "x")?;
        check_modes(ny, "y")?;
        if !(lx > T::zero() && ly > T::zero()) {
            return Err(OtdError::Contract("domain lengths must be positive".into()));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square `n x n` grid on the `2 pi` torus.
    pub fn torus(n: usize) -> Result<Self> {
        Self::new(n, n, T::TAU(), T::TAU())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> T {
        self.lx
    }

    pub fn ly(&self) -> T {
        self.ly
    }

    pub fn cell_area(&self) -> T {
        self.lx * self.ly / T::from_usize_lossy(self.nx * self.ny)
    }

    /// Two-thirds mask over the full `ny x nx` spectrum in DFT order.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cx = two_thirds_cutoff(self.nx) as i64;
        let cy = two_thirds_cutoff(self.ny) as i64;
        let kx = wavenumber_indices(self.nx);
        let ky = wavenumber_indices(self.ny);
        ky.iter()
            .flat_map(|&y| kx.iter().map(move |&x| x.abs() <= cx && y.abs() <= cy))
            .collect()
    }
}

/// Zeroes every spectral entry where `mask` is `false`.
pub fn apply_mask<T: Scalar>(spectrum: &mut [Complex<T>], mask: &[bool]) {
    for (c, &keep) in spectrum.iter_mut().zip(mask) {
        if !keep {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
}

/// `d^order f / dx^order` of a real periodic field. The Nyquist mode is dropped
/// for odd orders.
pub fn spectral_derivative<T: Scalar>(
    grid: &SpectralGrid1D<T>,
    field: &[T],
    order: u32,
) -> Result<Vec<T>> {
    let fft = Fft1d::new(grid.n());
    let mut work: Vec<Complex<T>> = field.iter().map(|&x| Complex::new(x, T::zero())).collect();
    fft.forward_in_place(&mut work)?;
    let nyquist = grid.n() / 2;
    for (j, (c, k)) in work.iter_mut().zip(grid.wavenumbers()).enumerate() {
        if order % 2 == 1 && j == nyquist {
            *c = Complex::new(T::zero(), T::zero());
            continue;
        }
        *c = *c * Complex::new(T::zero(), k).powu(order);
    }
    fft.inverse_in_place(&mut work)?;
    Ok(work.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_ordering() {
        assert_eq!(wavenumber_indices(8), vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn rejects_odd_or_small() {
        assert!(SpectralGrid1D::new(6, 1.0).is_err());
        assert!(SpectralGrid1D::new(9, 1.0).is_err());
        assert!(SpectralGrid2D::new(8, 10, 1.0, 1.0).is_ok());
    }

    #[test]
    fn two_thirds_cutoffs() {
        assert_eq!(two_thirds_cutoff(128), 42);
        assert_eq!(two_thirds_cutoff(12), 4);
        let g = SpectralGrid1D::new(12, 1.0).unwrap();
        let kept: Vec<i64> = g
            .wavenumber_indices()
            .into_iter()
            .zip(g.dealias_mask())
            .filter_map(|(k, keep)| keep.then_some(k))
            .collect();
        assert_eq!(kept, vec![0, 1, 2, 3, 4, -4, -3, -2, -1]);
    }

    #[test]
    fn mask_is_idempotent() {
        let g = SpectralGrid2D::<f64>::torus(16).unwrap();
        let mask = g.dealias_mask();
        let mut s: Vec<_> = (0..256).map(|i| Complex::new(i as f64, 1.0)).collect();
        apply_mask(&mut s, &mask);
        let once = s.clone();
        apply_mask(&mut s, &mask);
        assert_eq!(once, s);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 11 * 11);
    }

    #[test]
    fn derivative_of_sine() {
        let g = SpectralGrid1D::new(64, std::f64::consts::TAU).unwrap();
        let x = g.points();
        let f: Vec<f64> = x.iter().map(|x| x.sin()).collect();
        let d = spectral_derivative(&g, &f, 1).unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - xi.cos()).abs() < 1e-10);
        }
        let d3 = spectral_derivative(&g, &f, 3).unwrap();
        for (xi, di) in x.iter().zip(&d3) {
            assert!((di + xi.cos()).abs() < 1e-10);
        }
    }
}

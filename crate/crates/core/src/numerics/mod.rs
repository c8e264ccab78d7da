//! Low-level numerics shared by the models and the OTD machinery.

pub mod dense;
pub mod fft;
pub mod gram_schmidt;
pub mod grid;

pub use dense::{symmetric_eigs, DenseMatrix, SymmetricEigen};
pub use fft::{dft_forward, dft_inverse, Fft1d, Fft2d, RealFft2d};
pub use gram_schmidt::{gram_error, gram_schmidt, gram_schmidt_in_place};
pub use grid::{
    apply_mask, spectral_derivative, two_thirds_cutoff, wavenumber_indices, SpectralGrid1D,
    SpectralGrid2D,
};

//! Modified Gram-Schmidt with respect to an arbitrary inner product.

use crate::error::{OtdError, Result};
use crate::scalar::{axpy, Scalar};

/// Relative residual norm below which a vector counts as dependent.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Orthonormalizes `vectors` in place, keeping their order and nested spans.
///
/// Each vector is swept twice against its predecessors, which keeps the Gram
/// matrix at the identity to round-off even for badly conditioned input.
pub fn gram_schmidt_in_place<T, F>(vectors: &mut [Vec<T>], inner: F) -> Result<()>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T,
{
    let tol = T::lit(DEGENERACY_TOL);
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let w = &mut rest[0];
        let original = inner(w, w).max(T::zero()).sqrt();
        for _pass in 0..2 {
            for q in done.iter() {
                let c = inner(w, q);
                axpy(-c, q, w);
            }
        }
        let norm = inner(w, w).max(T::zero()).sqrt();
        if !(norm > tol * original) || norm == T::zero() {
            return Err(OtdError::Degenerate {
                index: i,
                norm: norm.to_f64_lossy(),
            });
        }
        let inv = norm.recip();
        w.iter_mut().for_each(|x| *x *= inv);
    }
    Ok(())
}

/// Returns an orthonormal copy of `vectors`; see [`gram_schmidt_in_place`].
pub fn gram_schmidt<T, F>(vectors: &[Vec<T>], inner: F) -> Result<Vec<Vec<T>>>
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T,
{
    let mut out = vectors.to_vec();
    gram_schmidt_in_place(&mut out, inner)?;
    Ok(out)
}

/// Largest deviation of the Gram matrix from the identity.
pub fn gram_error<T, F>(vectors: &[Vec<T>], inner: F) -> T
where
    T: Scalar,
    F: Fn(&[T], &[T]) -> T,
{
    let mut worst = T::zero();
    for i in 0..vectors.len() {
        for j in i..vectors.len() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((inner(&vectors[i], &vectors[j]) - target).abs());
        }
    }
    worst
}

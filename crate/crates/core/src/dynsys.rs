//! The interface every model implements: vector field, linearization, inner
//! product and named observables.
//!
//! States and tangent vectors are flat real slices. Complex fields are stored
//! as interleaved `(re, im)` pairs, and "linear" always means real-linear.

use num_complex::Complex;

use crate::error::{OtdError, Result};
use crate::scalar::{all_finite, Scalar};

/// Tangent vectors share the flat representation of their state.
pub type TangentVector<T> = Vec<T>;

/// A state together with its time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    pub time: T,
    pub data: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(time: T, data: Vec<T>) -> Self {
        Self { time, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProductKind {
    Euclidean,
    /// Uniform-grid quadrature of the L2 integral (real part for complex fields).
    L2Grid,
}

/// Linear map on tangent vectors, typically the Jacobian frozen at a state.
pub trait LinearOperator<T> {
    fn apply(&self, v: &[T], out: &mut [T]) -> Result<()>;
}

/// A finite-dimensional (or discretized) autonomous system `du/dt = F(u)`.
pub trait DynamicalSystem<T: Scalar>: Sync {
    /// Jacobian `L_u` frozen at a state; may cache state-dependent fields.
    type Jacobian<'a>: LinearOperator<T>
    where
        Self: 'a;

    /// Length of the flat real representation.
    fn dim(&self) -> usize;

    fn rhs(&self, u: &[T], out: &mut [T]) -> Result<()>;

    fn jacobian_at<'a>(&'a self, u: &[T]) -> Result<Self::Jacobian<'a>>;

    /// `F(u)` and `L_u` together; models override this to share work.
    fn rhs_and_jacobian<'a>(&'a self, u: &[T], out: &mut [T]) -> Result<Self::Jacobian<'a>> {
        self.rhs(u, out)?;
        self.jacobian_at(u)
    }

    fn inner(&self, a: &[T], b: &[T]) -> T;

    fn inner_product_kind(&self) -> InnerProductKind;

    fn parameters(&self) -> Vec<(&'static str, T)> {
        Vec::new()
    }

    fn observable_names(&self) -> Vec<&'static str>;

    fn observe(&self, u: &[T]) -> Vec<T>;

    /// Observables that depend on the OTD modes (e.g. localization of `v_1`).
    fn mode_observable_names(&self) -> Vec<&'static str> {
        Vec::new()
    }

    fn observe_modes(&self, _modes: &[Vec<T>]) -> Vec<T> {
        Vec::new()
    }

    /// Diagonal stiff linear part for exponential integrators, one complex
    /// entry per interleaved `(re, im)` pair of the flat representation.
    fn linear_symbol(&self) -> Option<Vec<Complex<T>>> {
        None
    }
}

fn check_shape<T: Scalar, S: DynamicalSystem<T> + ?Sized>(sys: &S, len: usize) -> Result<()> {
    if len != sys.dim() {
        return Err(OtdError::Contract(format!(
            "vector of length {len} does not match system dimension {}",
            sys.dim()
        )));
    }
    Ok(())
}

/// `F(u)`, rejecting non-finite output as a blow-up at `u.time`.
pub fn eval_rhs<T: Scalar, S: DynamicalSystem<T> + ?Sized>(
    sys: &S,
    u: &StateVector<T>,
) -> Result<TangentVector<T>> {
    check_shape(sys, u.data.len())?;
    if !all_finite(&u.data) {
        return Err(OtdError::BlowUp {
            time: u.time.to_f64_lossy(),
            what: "non-finite state".into(),
        });
    }
    let mut out = vec![T::zero(); sys.dim()];
    sys.rhs(&u.data, &mut out)?;
    if !all_finite(&out) {
        return Err(OtdError::BlowUp {
            time: u.time.to_f64_lossy(),
            what: "non-finite vector field".into(),
        });
    }
    Ok(out)
}

/// `L_u v`, with the same error policy as [`eval_rhs`].
pub fn eval_linearized<T: Scalar, S: DynamicalSystem<T> + ?Sized>(
    sys: &S,
    u: &StateVector<T>,
    v: &[T],
) -> Result<TangentVector<T>> {
    check_shape(sys, u.data.len())?;
    check_shape(sys, v.len())?;
    let jac = sys.jacobian_at(&u.data)?;
    let mut out = vec![T::zero(); sys.dim()];
    jac.apply(v, &mut out)?;
    if !all_finite(&out) {
        return Err(OtdError::BlowUp {
            time: u.time.to_f64_lossy(),
            what: "non-finite linearized field".into(),
        });
    }
    Ok(out)
}

pub fn inner_product<T: Scalar, S: DynamicalSystem<T> + ?Sized>(sys: &S, a: &[T], b: &[T]) -> T {
    sys.inner(a, b)
}

/// Central-difference directional derivative `(F(u + e v) - F(u - e v)) / 2e`.
pub fn central_difference<T: Scalar, S: DynamicalSystem<T> + ?Sized>(
    sys: &S,
    u: &[T],
    v: &[T],
    eps: T,
) -> Result<Vec<T>> {
    let n = sys.dim();
    let plus: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a + eps * b).collect();
    let minus: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a - eps * b).collect();
    let mut fp = vec![T::zero(); n];
    let mut fm = vec![T::zero(); n];
    sys.rhs(&plus, &mut fp)?;
    sys.rhs(&minus, &mut fm)?;
    let scale = (T::lit(2.0) * eps).recip();
    Ok(fp.iter().zip(&fm).map(|(&a, &b)| (a - b) * scale).collect())
}

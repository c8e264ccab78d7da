//! Three-variable bursting prototype.
//!
//! ```text
//! x' =  a x + w y + a x^2 + 2 w x y + z^2
//! y' = -w x + a y - w x^2 + 2 a x y
//! z' = -l z - (l + b) x z
//! ```
//!
//! The plane `z = 0` is invariant and holds the fixed points `(0,0,0)` and
//! `(-1,0,0)`. Trajectories spiral out of the origin in that plane, creep
//! toward `(-1,0,0)` where `z` is unstable, and burst in `z` before returning.

use crate::dynsys::{DynamicalSystem, InnerProductKind, LinearOperator};
use crate::error::{OtdError, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeParams<T> {
    pub alpha: T,
    pub omega: T,
    pub lambda: T,
    pub beta: T,
}

impl<T: Scalar> Default for PrototypeParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.01),
            omega: T::TAU(),
            lambda: T::lit(0.1),
            beta: T::lit(0.1),
        }
    }
}

impl<T: Scalar> PrototypeParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.omega, self.lambda, self.beta];
        if all.iter().all(|&p| p > T::zero() && p.is_finite()) {
            Ok(())
        } else {
            Err(OtdError::Contract(format!("prototype parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prototype<T> {
    pub params: PrototypeParams<T>,
}

/// Default initial condition near the origin.
pub fn default_initial_state<T: Scalar>() -> Vec<T> {
    vec![T::zero(), T::lit(0.01), T::lit(0.01)]
}

/// Default OTD mode, `(1, 1, 0)/sqrt(2)`.
pub fn default_initial_mode<T: Scalar>() -> Vec<T> {
    let s = T::FRAC_1_SQRT_2();
    vec![s, s, T::zero()]
}

impl<T: Scalar> Prototype<T> {
    pub fn new(params: PrototypeParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn vector_field(&self, u: &[T]) -> [T; 3] {
        let PrototypeParams {
            alpha: a,
            omega: w,
            lambda: l,
            beta: b,
        } = self.params;
        let (x, y, z) = (u[0], u[1], u[2]);
        let two = T::lit(2.0);
        [
            a * x + w * y + a * x * x + two * w * x * y + z * z,
            -w * x + a * y - w * x * x + two * a * x * y,
            -l * z - (l + b) * x * z,
        ]
    }

    pub fn jacobian(&self, u: &[T]) -> DenseMatrix<T> {
        let PrototypeParams {
            alpha: a,
            omega: w,
            lambda: l,
            beta: b,
        } = self.params;
        let (x, y, z) = (u[0], u[1], u[2]);
        let two = T::lit(2.0);
        DenseMatrix::from_rows(&[
            vec![a + two * a * x + two * w * y, w + two * w * x, two * z],
            vec![-w - two * w * x + two * a * y, a + two * a * x, T::zero()],
            vec![-(l + b) * z, T::zero(), -l - (l + b) * x],
        ])
    }
}

/// Jacobian matrix frozen at a state.
pub struct PrototypeJacobian<T>(DenseMatrix<T>);

impl<T: Scalar> LinearOperator<T> for PrototypeJacobian<T> {
    fn apply(&self, v: &[T], out: &mut [T]) -> Result<()> {
        out.copy_from_slice(&self.0.matvec(v));
        Ok(())
    }
}

impl<T: Scalar> DynamicalSystem<T> for Prototype<T> {
    type Jacobian<'a> = PrototypeJacobian<T>;

    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, u: &[T], out: &mut [T]) -> Result<()> {
        out.copy_from_slice(&self.vector_field(u));
        Ok(())
    }

    fn jacobian_at(&self, u: &[T]) -> Result<PrototypeJacobian<T>> {
        Ok(PrototypeJacobian(self.jacobian(u)))
    }

    fn inner(&self, a: &[T], b: &[T]) -> T {
        dot(a, b)
    }

    fn inner_product_kind(&self) -> InnerProductKind {
        InnerProductKind::Euclidean
    }

    fn parameters(&self) -> Vec<(&'static str, T)> {
        vec![
            ("alpha", self.params.alpha),
            ("omega", self.params.omega),
            ("lambda", self.params.lambda),
            ("beta", self.params.beta),
        ]
    }

    fn observable_names(&self) -> Vec<&'static str> {
        vec!["x", "y", "z", "|z|"]
    }

    fn observe(&self, u: &[T]) -> Vec<T> {
        vec![u[0], u[1], u[2], u[2].abs()]
    }

    fn mode_observable_names(&self) -> Vec<&'static str> {
        vec!["v1_z"]
    }

    fn observe_modes(&self, modes: &[Vec<T>]) -> Vec<T> {
        vec![modes.first().map_or(T::nan(), |m| m[2])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto() -> Prototype<f64> {
        Prototype::new(PrototypeParams::default()).unwrap()
    }

    #[test]
    fn fixed_points() {
        let p = proto();
        assert_eq!(p.vector_field(&[0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        let f = p.vector_field(&[-1.0, 0.0, 0.0]);
        assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");
    }

    #[test]
    fn unit_z_substitution() {
        assert_eq!(proto().vector_field(&[0.0, 0.0, 1.0]), [1.0, 0.0, -0.1]);
    }

    #[test]
    fn jacobians_at_fixed_points() {
        let p = proto();
        let w = std::f64::consts::TAU;
        let j1 = p.jacobian(&[0.0, 0.0, 0.0]);
        assert_eq!(j1.as_slice(), &[0.01, w, 0.0, -w, 0.01, 0.0, 0.0, 0.0, -0.1]);
        let j2 = p.jacobian(&[-1.0, 0.0, 0.0]);
        let expect = [-0.01, -w, 0.0, w, -0.01, 0.0, 0.0, 0.0, 0.1];
        for (a, b) in j2.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let bad = PrototypeParams {
            beta: 0.0,
            ..PrototypeParams::default()
        };
        assert!(Prototype::new(bad).is_err());
    }
}

//! Modified nonlinear Schrödinger (Dysthe) envelope equation on `[0, L)`:
//!
//! ```text
//! F(u) = -u_x/2 - (i/8) u_xx + u_xxx/16 - (i/2)|u|^2 u
//!        - (3/2)|u|^2 u_x - (1/4) u^2 (u*)_x - i u Phi(u),
//! Phi(u) = -(1/2) F^-1[ |q| F[|u|^2] ].
//! ```
//!
//! The state is the vector of normalized Fourier coefficients `c_k`
//! (`u(x) = sum_k c_k e^{i q_k x}`, `q_k = 2 pi k / L`) in DFT order, stored as
//! interleaved `(re, im)` pairs. Modes beyond the two-thirds cutoff are kept at
//! zero, and every nonlinear product (including the one inside `Phi`) is
//! truncated to the retained band. The inner product is `Re int v w* dx`,
//! which is `L sum_k Re(c_k d_k*)`.

use num_complex::Complex;

use crate::dynsys::{DynamicalSystem, InnerProductKind, LinearOperator};
use crate::error::{OtdError, Result};
use crate::numerics::{Fft1d, SpectralGrid1D};
use crate::rng::SeededStream;
use crate::scalar::{dot, Scalar};

type C<T> = Complex<T>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MnlsParams<T> {
    pub grid: SpectralGrid1D<T>,
    pub epsilon: T,
    pub sigma: T,
}

impl<T: Scalar> Default for MnlsParams<T> {
    fn default() -> Self {
        Self {
            grid: SpectralGrid1D::new(2048, T::lit(256.0) * T::PI()).expect("valid default grid"),
            epsilon: T::lit(0.05),
            sigma: T::lit(0.2),
        }
    }
}

impl<T: Scalar> MnlsParams<T> {
    pub fn new(length: T, modes: usize, epsilon: T, sigma: T) -> Result<Self> {
        let p = Self {
            grid: SpectralGrid1D::new(modes, length)?,
            epsilon,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon > T::zero() && self.sigma > T::zero() {
            Ok(())
        } else {
            Err(OtdError::Contract("epsilon and sigma must be positive".into()))
        }
    }

    pub fn length(&self) -> T {
        self.grid.length()
    }
}

/// Benjamin-Feir index `2 sqrt(2) epsilon / sigma`.
pub fn bfi<T: Scalar>(epsilon: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(OtdError::Contract("spectral width must be positive".into()));
    }
    Ok(T::lit(2.0) * T::SQRT_2() * epsilon / sigma)
}

#[derive(Debug, Clone)]
pub struct Mnls<T: Scalar> {
    pub params: MnlsParams<T>,
    q: Vec<T>,
    abs_q: Vec<T>,
    mask: Vec<bool>,
    symbol: Vec<C<T>>,
    fft: Fft1d<T>,
}

fn to_complex<T: Scalar>(v: &[T]) -> Vec<C<T>> {
    v.chunks_exact(2).map(|p| C::new(p[0], p[1])).collect()
}

fn write_flat<T: Scalar>(c: &[C<T>], out: &mut [T]) {
    for (pair, z) in out.chunks_exact_mut(2).zip(c) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
}

impl<T: Scalar> Mnls<T> {
    pub fn new(params: MnlsParams<T>) -> Result<Self> {
        params.validate()?;
        let q = params.grid.wavenumbers();
        let i = C::new(T::zero(), T::one());
        let symbol = q
            .iter()
            .map(|&k| {
                let ik = i * k;
                -ik * T::lit(0.5) - i * T::lit(0.125) * (ik * ik) + ik * ik * ik * T::lit(1.0 / 16.0)
            })
            .collect();
        Ok(Self {
            abs_q: q.iter().map(|k| k.abs()).collect(),
            mask: params.grid.dealias_mask(),
            q,
            symbol,
            fft: Fft1d::new(params.grid.n()),
            params,
        })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Grid values from normalized coefficients.
    pub fn to_physical(&self, coef: &[C<T>]) -> Result<Vec<C<T>>> {
        let scale = T::from_usize_lossy(self.n());
        let mut w: Vec<C<T>> = coef.iter().map(|&c| c * scale).collect();
        self.fft.inverse_in_place(&mut w)?;
        Ok(w)
    }

    /// Masked normalized coefficients of grid values.
    pub fn to_spectral(&self, field: &[C<T>]) -> Result<Vec<C<T>>> {
        let mut w = field.to_vec();
        self.fft.forward_in_place(&mut w)?;
        let scale = T::from_usize_lossy(self.n()).recip();
        let zero = C::new(T::zero(), T::zero());
        for (c, &keep) in w.iter_mut().zip(&self.mask) {
            *c = if keep { *c * scale } else { zero };
        }
        Ok(w)
    }

    fn derivative(&self, coef: &[C<T>]) -> Vec<C<T>> {
        coef.iter()
            .zip(&self.q)
            .map(|(&c, &k)| c * C::new(T::zero(), k))
            .collect()
    }

    /// `-(1/2) F^-1[|q| F[s]]` for a real grid function `s`.
    pub fn phi_of(&self, s: &[T]) -> Result<Vec<T>> {
        let cs: Vec<C<T>> = s.iter().map(|&x| C::new(x, T::zero())).collect();
        let mut spec = self.to_spectral(&cs)?;
        for (c, &k) in spec.iter_mut().zip(&self.abs_q) {
            *c = *c * (T::lit(-0.5) * k);
        }
        Ok(self.to_physical(&spec)?.into_iter().map(|z| z.re).collect())
    }

    /// `u` and `u_x` on the grid.
    pub fn fields(&self, v: &[T]) -> Result<(Vec<C<T>>, Vec<C<T>>)> {
        let c = to_complex(v);
        Ok((self.to_physical(&c)?, self.to_physical(&self.derivative(&c))?))
    }

    fn add_linear(&self, v: &[T], nonlinear: &[C<T>], out: &mut [T]) {
        let total: Vec<C<T>> = to_complex(v)
            .into_iter()
            .zip(&self.symbol)
            .zip(nonlinear)
            .map(|((c, &s), &n)| s * c + n)
            .collect();
        write_flat(&total, out);
    }

    fn state_fields(&self, u: &[T]) -> Result<MnlsJacobian<'_, T>> {
        let (up, ux) = self.fields(u)?;
        let m2: Vec<T> = up.iter().map(|z| z.norm_sqr()).collect();
        let phi = self.phi_of(&m2)?;
        Ok(MnlsJacobian {
            sys: self,
            u: up,
            ux,
            m2,
            phi,
        })
    }

    fn rhs_from(&self, st: &MnlsJacobian<'_, T>, u: &[T], out: &mut [T]) -> Result<()> {
        let i = C::new(T::zero(), T::one());
        let half = T::lit(0.5);
        let n: Vec<C<T>> = (0..self.n())
            .map(|j| {
                let (a, ax, m2) = (st.u[j], st.ux[j], st.m2[j]);
                -(i * half) * a * m2 - ax * (T::lit(1.5) * m2) - a * a * ax.conj() * T::lit(0.25)
                    - i * a * st.phi[j]
            })
            .collect();
        let spec = self.to_spectral(&n)?;
        self.add_linear(u, &spec, out);
        Ok(())
    }

    /// Gaussian-spectrum envelope with uniform random phases: coefficients
    /// `sqrt(2 (2 pi/L) N(q_k)) e^{i theta_k}`,
    /// `N(q) = epsilon^2 / (sigma sqrt(2 pi)) exp(-q^2 / (2 sigma^2))`.
    pub fn gaussian_initial_condition(&self, seed: u64) -> Vec<T> {
        let p = &self.params;
        let mut rng = SeededStream::new(seed);
        let dq = T::TAU() / p.length();
        let peak = p.epsilon * p.epsilon / (p.sigma * T::TAU().sqrt());
        let mut out = vec![T::zero(); self.dim()];
        for (k, (&q, &keep)) in self.q.iter().zip(&self.mask).enumerate() {
            let theta = rng.phase::<T>();
            if !keep {
                continue;
            }
            let spectrum = peak * (-(q * q) / (T::lit(2.0) * p.sigma * p.sigma)).exp();
            let amp = (T::lit(2.0) * dq * spectrum).sqrt();
            out[2 * k] = amp * theta.cos();
            out[2 * k + 1] = amp * theta.sin();
        }
        out
    }

    /// `v_i = sqrt(2/L) sin(2 pi i x / L)`, `i = 1..=r`.
    pub fn otd_initial_modes(&self, r: usize) -> Result<Vec<Vec<T>>> {
        let n = self.n();
        if r == 0 || r > crate::numerics::two_thirds_cutoff(n) {
            return Err(OtdError::Contract(format!("cannot build {r} sinusoidal modes")));
        }
        let amp = (T::lit(2.0) / self.params.length()).sqrt() * T::lit(0.5);
        Ok((1..=r)
            .map(|i| {
                let mut v = vec![T::zero(); self.dim()];
                // sin = (e^{iqx} - e^{-iqx}) / 2i
                v[2 * i + 1] = -amp;
                v[2 * (n - i) + 1] = amp;
                v
            })
            .collect())
    }

    /// Grid values of `u` as a complex field.
    pub fn envelope(&self, u: &[T]) -> Result<Vec<C<T>>> {
        self.to_physical(&to_complex(u))
    }

    /// `h(x, t) = Re[u(x) e^{i (x - t)}]` on the grid.
    pub fn surface_elevation(&self, u: &[T], t: T) -> Result<Vec<T>> {
        let env = self.envelope(u)?;
        Ok(env
            .iter()
            .zip(self.params.grid.points())
            .map(|(z, x)| (*z * C::from_polar(T::one(), x - t)).re)
            .collect())
    }

    pub fn max_modulus(&self, v: &[T]) -> T {
        self.envelope(v)
            .map(|e| e.iter().fold(T::zero(), |m, z| m.max(z.norm())))
            .unwrap_or_else(|_| T::nan())
    }
}

/// Linearization at `u`, holding `u`, `u_x`, `|u|^2` and `Phi(u)` on the grid.
pub struct MnlsJacobian<'a, T: Scalar> {
    sys: &'a Mnls<T>,
    u: Vec<C<T>>,
    ux: Vec<C<T>>,
    m2: Vec<T>,
    phi: Vec<T>,
}

impl<T: Scalar> LinearOperator<T> for MnlsJacobian<'_, T> {
    fn apply(&self, v: &[T], out: &mut [T]) -> Result<()> {
        let sys = self.sys;
        let (vp, vx) = sys.fields(v)?;
        // s = u v* + v u*
        let s: Vec<T> = self
            .u
            .iter()
            .zip(&vp)
            .map(|(a, b)| T::lit(2.0) * (a.conj() * b).re)
            .collect();
        let dphi = sys.phi_of(&s)?;
        let i = C::new(T::zero(), T::one());
        let half = T::lit(0.5);
        let lin: Vec<C<T>> = (0..sys.n())
            .map(|j| {
                let (a, ax, m2, sj) = (self.u[j], self.ux[j], self.m2[j], s[j]);
                let (b, bx) = (vp[j], vx[j]);
                -(i * half) * (b * m2 + a * sj)
                    - (bx * m2 + ax * sj) * T::lit(1.5)
                    - (a * b * ax.conj() * T::lit(2.0) + a * a * bx.conj()) * T::lit(0.25)
                    - i * (b * self.phi[j] + a * dphi[j])
            })
            .collect();
        let spec = sys.to_spectral(&lin)?;
        sys.add_linear(v, &spec, out);
        Ok(())
    }
}

impl<T: Scalar> DynamicalSystem<T> for Mnls<T> {
    type Jacobian<'a> = MnlsJacobian<'a, T>;

    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn rhs(&self, u: &[T], out: &mut [T]) -> Result<()> {
        let st = self.state_fields(u)?;
        self.rhs_from(&st, u, out)
    }

    fn jacobian_at<'a>(&'a self, u: &[T]) -> Result<MnlsJacobian<'a, T>> {
        self.state_fields(u)
    }

    fn rhs_and_jacobian<'a>(&'a self, u: &[T], out: &mut [T]) -> Result<MnlsJacobian<'a, T>> {
        let st = self.state_fields(u)?;
        self.rhs_from(&st, u, out)?;
        Ok(st)
    }

    fn inner(&self, a: &[T], b: &[T]) -> T {
        self.params.length() * dot(a, b)
    }

    fn inner_product_kind(&self) -> InnerProductKind {
        InnerProductKind::L2Grid
    }

    fn parameters(&self) -> Vec<(&'static str, T)> {
        vec![
            ("L", self.params.length()),
            ("modes", T::from_usize_lossy(self.n())),
            ("epsilon", self.params.epsilon),
            ("sigma", self.params.sigma),
        ]
    }

    fn observable_names(&self) -> Vec<&'static str> {
        vec!["max_abs_u"]
    }

    fn observe(&self, u: &[T]) -> Vec<T> {
        vec![self.max_modulus(u)]
    }

    fn mode_observable_names(&self) -> Vec<&'static str> {
        vec!["max_abs_v1"]
    }

    fn observe_modes(&self, modes: &[Vec<T>]) -> Vec<T> {
        vec![modes.first().map_or(T::nan(), |v| self.max_modulus(v))]
    }

    fn linear_symbol(&self) -> Option<Vec<C<T>>> {
        Some(self.symbol.clone())
    }
}

//! Two-dimensional Kolmogorov flow on the `2 pi` torus,
//!
//! ```text
//! du/dt = P(-u.grad u + nu lap u + f),   f = sin(n y) e_1,   nu = 1/Re,
//! ```
//!
//! discretized pseudo-spectrally in velocity form with a modewise Leray
//! projection and two-thirds dealiasing.
//!
//! A field is stored as the normalized Fourier coefficients `c_k` (so that
//! `u(x) = sum_k c_k e^{i k.x}`) of both velocity components on the retained
//! half plane `kx > 0` or `kx = 0, ky > 0`, with `|kx|, |ky| <= N/3`. The
//! conjugate half and the (always zero) mean are implied. The flat layout is
//! `[u1 pairs | u2 pairs]` with interleaved `(re, im)` per mode. Because every
//! stored coefficient stands for itself and its conjugate, the L2 inner
//! product is `2 L^2` times the Euclidean dot product of the flat vectors.
//!
//! Advection uses the rotational form: `u.grad u = grad(|u|^2/2) - u x w`,
//! and the gradient part is removed by the projection, so only
//! `(u2 w, -u1 w)` has to be formed on the grid.

use num_complex::Complex;

use crate::dynsys::{DynamicalSystem, InnerProductKind, LinearOperator};
use crate::error::{OtdError, Result};
use crate::numerics::{two_thirds_cutoff, RealFft2d, SpectralGrid2D};
use crate::rng::SeededStream;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovParams<T> {
    /// Forcing wavenumber `n`.
    pub forcing_wavenumber: usize,
    pub reynolds: T,
    pub grid: SpectralGrid2D<T>,
}

impl<T: Scalar> KolmogorovParams<T> {
    pub fn new(forcing_wavenumber: usize, reynolds: T, resolution: usize) -> Result<Self> {
        let p = Self {
            forcing_wavenumber,
            reynolds,
            grid: SpectralGrid2D::torus(resolution)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx() != g.ny() || g.lx() != g.ly() {
            return Err(OtdError::Contract("Kolmogorov grid must be square".into()));
        }
        if self.forcing_wavenumber == 0 || self.forcing_wavenumber > two_thirds_cutoff(g.nx()) {
            return Err(OtdError::Contract(format!(
                "forcing wavenumber {} must lie in 1..={}",
                self.forcing_wavenumber,
                two_thirds_cutoff(g.nx())
            )));
        }
        if !(self.reynolds > T::zero()) {
            return Err(OtdError::Contract("Reynolds number must be positive".into()));
        }
        Ok(())
    }

    pub fn viscosity(&self) -> T {
        self.reynolds.recip()
    }
}

/// Energy, dissipation and energy input, each normalized by the domain area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    pub energy: T,
    pub dissipation: T,
    pub input: T,
}

#[derive(Debug, Clone)]
pub struct KolmogorovFlow<T: Scalar> {
    pub params: KolmogorovParams<T>,
    n: usize,
    kmax: usize,
    nu: T,
    /// Integer wavenumbers of the stored modes.
    modes: Vec<(i64, i64)>,
    kx: Vec<T>,
    ky: Vec<T>,
    k2: Vec<T>,
    /// Position of each mode in the `n x (n/2+1)` half spectrum.
    slot: Vec<usize>,
    /// Slot of the conjugate partner for `kx = 0` modes.
    conj_slot: Vec<Option<usize>>,
    /// Index of the forcing mode `(0, n_f)`.
    forcing_mode: usize,
    fft: RealFft2d<T>,
}

fn cpx<T: Scalar>(v: &[T], m: usize) -> Complex<T> {
    Complex::new(v[2 * m], v[2 * m + 1])
}

fn put<T: Scalar>(v: &mut [T], m: usize, c: Complex<T>) {
    v[2 * m] = c.re;
    v[2 * m + 1] = c.im;
}

impl<T: Scalar> KolmogorovFlow<T> {
    pub fn new(params: KolmogorovParams<T>) -> Result<Self> {
        params.validate()?;
        let n = params.grid.nx();
        let kmax = two_thirds_cutoff(n);
        let km = kmax as i64;
        let mut modes = Vec::new();
        for ky in 1..=km {
            modes.push((0, ky));
        }
        for kx in 1..=km {
            for ky in -km..=km {
                modes.push((kx, ky));
            }
        }
        let hw = n / 2 + 1;
        let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
        let slot = modes.iter().map(|&(kx, ky)| wrap(ky) * hw + kx as usize).collect();
        let conj_slot = modes
            .iter()
            .map(|&(kx, ky)| (kx == 0).then(|| wrap(-ky) * hw))
            .collect();
        let kf = |k: i64| T::from_i64(k).expect("small integer");
        let kx: Vec<T> = modes.iter().map(|m| kf(m.0)).collect();
        let ky: Vec<T> = modes.iter().map(|m| kf(m.1)).collect();
        let k2 = kx.iter().zip(&ky).map(|(&a, &b)| a * a + b * b).collect();
        let nf = params.forcing_wavenumber as i64;
        let forcing_mode = modes
            .iter()
            .position(|&m| m == (0, nf))
            .expect("forcing mode is retained");
        Ok(Self {
            params,
            n,
            kmax,
            nu: params.viscosity(),
            modes,
            kx,
            ky,
            k2,
            slot,
            conj_slot,
            forcing_mode,
            fft: RealFft2d::new(n, n),
        })
    }

    /// Number of stored complex modes per component.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[(i64, i64)] {
        &self.modes
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    fn comp<'v>(&self, v: &'v [T], c: usize) -> &'v [T] {
        let m2 = 2 * self.modes.len();
        &v[c * m2..(c + 1) * m2]
    }

    fn comp_mut<'v>(&self, v: &'v mut [T], c: usize) -> &'v mut [T] {
        let m2 = 2 * self.modes.len();
        &mut v[c * m2..(c + 1) * m2]
    }

    /// Grid values of the real field whose stored coefficients are `coef(m)`.
    fn synthesize(&self, coef: impl Fn(usize) -> Complex<T>) -> Result<Vec<T>> {
        let hw = self.n / 2 + 1;
        let scale = T::from_usize_lossy(self.n * self.n);
        let mut spec = vec![Complex::new(T::zero(), T::zero()); self.n * hw];
        for m in 0..self.modes.len() {
            let c = coef(m) * scale;
            spec[self.slot[m]] = c;
            if let Some(s) = self.conj_slot[m] {
                spec[s] = c.conj();
            }
        }
        self.fft.inverse(&spec, self.kmax + 1)
    }

    /// Stored (dealiased) coefficients of a real grid field.
    fn analyze(&self, field: &[T], out: &mut [T]) -> Result<()> {
        let spec = self.fft.forward(field, self.kmax + 1)?;
        let scale = T::from_usize_lossy(self.n * self.n).recip();
        for m in 0..self.modes.len() {
            put(out, m, spec[self.slot[m]] * scale);
        }
        Ok(())
    }

    fn vorticity_coef(&self, v: &[T], m: usize) -> Complex<T> {
        // w = d_x v2 - d_y v1
        let i = Complex::new(T::zero(), T::one());
        let v1 = cpx(self.comp(v, 0), m);
        let v2 = cpx(self.comp(v, 1), m);
        i * (v2 * self.kx[m] - v1 * self.ky[m])
    }

    /// Velocity components and vorticity on the grid.
    pub fn physical_fields(&self, v: &[T]) -> Result<[Vec<T>; 3]> {
        let a = self.comp(v, 0);
        let b = self.comp(v, 1);
        Ok([
            self.synthesize(|m| cpx(a, m))?,
            self.synthesize(|m| cpx(b, m))?,
            self.synthesize(|m| self.vorticity_coef(v, m))?,
        ])
    }

    /// Both velocity components on the grid, row-major with `y` slow.
    pub fn to_physical(&self, v: &[T]) -> Result<[Vec<T>; 2]> {
        let [a, b, _] = self.physical_fields(v)?;
        Ok([a, b])
    }

    /// Stored coefficients of a grid velocity field (not projected).
    pub fn from_physical(&self, u1: &[T], u2: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dim()];
        self.analyze(u1, self.comp_mut(&mut out, 0))?;
        self.analyze(u2, self.comp_mut(&mut out, 1))?;
        Ok(out)
    }

    /// Leray projection `I - k k^T/|k|^2`, modewise, in place.
    pub fn project(&self, v: &mut [T]) {
        let m2 = 2 * self.modes.len();
        let (a, b) = v.split_at_mut(m2);
        for m in 0..self.modes.len() {
            let (kx, ky, k2) = (self.kx[m], self.ky[m], self.k2[m]);
            let v1 = cpx(a, m);
            let v2 = cpx(b, m);
            let div = (v1 * kx + v2 * ky) / k2;
            put(a, m, v1 - div * kx);
            put(b, m, v2 - div * ky);
        }
    }

    /// `max_k |k.v_k| / max_k |v_k|`.
    pub fn divergence_ratio(&self, v: &[T]) -> T {
        let a = self.comp(v, 0);
        let b = self.comp(v, 1);
        let mut div = T::zero();
        let mut size = T::zero();
        for m in 0..self.modes.len() {
            let v1 = cpx(a, m);
            let v2 = cpx(b, m);
            div = div.max((v1 * self.kx[m] + v2 * self.ky[m]).norm());
            size = size.max(v1.norm().max(v2.norm()));
        }
        if size == T::zero() {
            T::zero()
        } else {
            div / size
        }
    }

    /// Projected dealiased transform of `(a2 w_b + b2 w_a, -a1 w_b - b1 w_a)`;
    /// with `a = b` this is `2 P(u x w)`.
    fn advection(&self, out: &mut [T], n1: Vec<T>, n2: Vec<T>) -> Result<()> {
        self.analyze(&n1, self.comp_mut(out, 0))?;
        self.analyze(&n2, self.comp_mut(out, 1))?;
        self.project(out);
        Ok(())
    }

    /// Adds `-nu |k|^2 v` to `out`.
    fn add_viscous(&self, v: &[T], out: &mut [T]) {
        for c in 0..2 {
            let src = self.comp(v, c).to_vec();
            let dst = self.comp_mut(out, c);
            for m in 0..self.modes.len() {
                let d = -self.nu * self.k2[m];
                dst[2 * m] += d * src[2 * m];
                dst[2 * m + 1] += d * src[2 * m + 1];
            }
        }
    }

    fn rhs_from_fields(&self, u: &[T], phys: &[Vec<T>; 3], out: &mut [T]) -> Result<()> {
        let [u1, u2, w] = phys;
        let n1: Vec<T> = u2.iter().zip(w).map(|(&a, &b)| a * b).collect();
        let n2: Vec<T> = u1.iter().zip(w).map(|(&a, &b)| -a * b).collect();
        self.advection(out, n1, n2)?;
        self.add_viscous(u, out);
        let f = self.forcing_mode;
        out[2 * f + 1] += T::lit(-0.5);
        Ok(())
    }

    /// `f = sin(n y) e_1`.
    pub fn forcing(&self) -> Vec<T> {
        let mut f = vec![T::zero(); self.dim()];
        f[2 * self.forcing_mode + 1] = T::lit(-0.5);
        f
    }

    /// `u_lam = (Re/n^2) sin(n y) e_1`.
    pub fn laminar_state(&self) -> Vec<T> {
        let nf = T::from_usize_lossy(self.params.forcing_wavenumber);
        let amp = self.params.reynolds / (nf * nf);
        self.forcing().into_iter().map(|x| x * amp).collect()
    }

    pub fn diagnostics(&self, u: &[T]) -> Diagnostics<T> {
        let energy = dot(u, u);
        let two = T::lit(2.0);
        let enstrophy_sum: T = (0..self.modes.len())
            .map(|m| self.vorticity_coef(u, m).norm_sqr())
            .sum();
        Diagnostics {
            energy,
            dissipation: two * self.nu * enstrophy_sum,
            input: -u[2 * self.forcing_mode + 1],
        }
    }

    /// Random divergence-free field with spectrum `|k| exp(-|k|^2/8)`,
    /// uniform phases, rescaled to energy `energy_scale`.
    pub fn random_initial_condition(&self, energy_scale: T, seed: u64) -> Vec<T> {
        let mut rng = SeededStream::new(seed);
        let mut u = vec![T::zero(); self.dim()];
        let m2 = 2 * self.modes.len();
        for m in 0..self.modes.len() {
            let k = self.k2[m].sqrt();
            let amp = k * (-self.k2[m] / T::lit(8.0)).exp();
            let c = Complex::from_polar(amp, rng.phase::<T>());
            // direction (-ky, kx)/|k| is orthogonal to k
            put(&mut u[..m2], m, c * (-self.ky[m] / k));
            put(&mut u[m2..], m, c * (self.kx[m] / k));
        }
        let e = self.diagnostics(&u).energy;
        let s = (energy_scale / e).sqrt();
        u.iter_mut().for_each(|x| *x *= s);
        u
    }

    /// `v_k = (sin(k y), 0) / (pi sqrt 2)` for `k = 1..=r`.
    pub fn otd_initial_modes(&self, r: usize) -> Result<Vec<Vec<T>>> {
        if r > self.kmax {
            return Err(OtdError::Contract(format!(
                "at most {} sinusoidal modes fit the grid",
                self.kmax
            )));
        }
        let amp = T::lit(-0.5) / (T::PI() * T::SQRT_2());
        Ok((1..=r)
            .map(|k| {
                let mut v = vec![T::zero(); self.dim()];
                let m = self.modes.iter().position(|&md| md == (0, k as i64)).expect("retained");
                v[2 * m + 1] = amp;
                v
            })
            .collect())
    }
}

/// Linearization frozen at a state: keeps `u` and its vorticity on the grid.
pub struct KolmogorovJacobian<'a, T: Scalar> {
    flow: &'a KolmogorovFlow<T>,
    fields: [Vec<T>; 3],
}

impl<T: Scalar> LinearOperator<T> for KolmogorovJacobian<'_, T> {
    fn apply(&self, v: &[T], out: &mut [T]) -> Result<()> {
        let f = self.flow;
        let [v1, v2, wv] = f.physical_fields(v)?;
        let [u1, u2, wu] = &self.fields;
        let n = v1.len();
        let mut n1 = vec![T::zero(); n];
        let mut n2 = vec![T::zero(); n];
        for j in 0..n {
            n1[j] = u2[j] * wv[j] + v2[j] * wu[j];
            n2[j] = -(u1[j] * wv[j] + v1[j] * wu[j]);
        }
        f.advection(out, n1, n2)?;
        f.add_viscous(v, out);
        Ok(())
    }
}

impl<T: Scalar> DynamicalSystem<T> for KolmogorovFlow<T> {
    type Jacobian<'a> = KolmogorovJacobian<'a, T>;

    fn dim(&self) -> usize {
        4 * self.modes.len()
    }

    fn rhs(&self, u: &[T], out: &mut [T]) -> Result<()> {
        let phys = self.physical_fields(u)?;
        self.rhs_from_fields(u, &phys, out)
    }

    fn jacobian_at<'a>(&'a self, u: &[T]) -> Result<KolmogorovJacobian<'a, T>> {
        Ok(KolmogorovJacobian {
            flow: self,
            fields: self.physical_fields(u)?,
        })
    }

    fn rhs_and_jacobian<'a>(&'a self, u: &[T], out: &mut [T]) -> Result<KolmogorovJacobian<'a, T>> {
        let fields = self.physical_fields(u)?;
        self.rhs_from_fields(u, &fields, out)?;
        Ok(KolmogorovJacobian { flow: self, fields })
    }

    fn inner(&self, a: &[T], b: &[T]) -> T {
        let l = self.params.grid.lx();
        T::lit(2.0) * l * l * dot(a, b)
    }

    fn inner_product_kind(&self) -> InnerProductKind {
        InnerProductKind::L2Grid
    }

    fn parameters(&self) -> Vec<(&'static str, T)> {
        vec![
            ("n", T::from_usize_lossy(self.params.forcing_wavenumber)),
            ("Re", self.params.reynolds),
            ("resolution", T::from_usize_lossy(self.n)),
        ]
    }

    fn observable_names(&self) -> Vec<&'static str> {
        vec!["E", "D", "I"]
    }

    fn observe(&self, u: &[T]) -> Vec<T> {
        let d = self.diagnostics(u);
        vec![d.energy, d.dissipation, d.input]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::max_abs;

    fn flow(n: usize, re: f64, res: usize) -> KolmogorovFlow<f64> {
        KolmogorovFlow::new(KolmogorovParams::new(n, re, res).unwrap()).unwrap()
    }

    #[test]
    fn laminar_is_equilibrium() {
        let k = flow(4, 40.0, 32);
        let mut out = vec![0.0; k.dim()];
        k.rhs(&k.laminar_state(), &mut out).unwrap();
        assert!(max_abs(&out) < 1e-10, "{}", max_abs(&out));
    }

    #[test]
    fn laminar_diagnostics() {
        let k = flow(4, 40.0, 32);
        let d = k.diagnostics(&k.laminar_state());
        assert!((d.energy - 1.5625).abs() < 1e-12);
        assert!((d.dissipation - 1.25).abs() < 1e-12);
        assert!((d.input - 1.25).abs() < 1e-12);
    }

    #[test]
    fn zero_field_gives_forcing() {
        let k = flow(4, 40.0, 16);
        let mut out = vec![0.0; k.dim()];
        k.rhs(&vec![0.0; k.dim()], &mut out).unwrap();
        assert_eq!(out, k.forcing());
        assert_eq!(k.diagnostics(&out.iter().map(|_| 0.0).collect::<Vec<_>>()).energy, 0.0);
    }

    #[test]
    fn physical_round_trip_matches_grid_quadrature() {
        let k = flow(4, 40.0, 24);
        let u = k.random_initial_condition(0.3, 11);
        let [a, b] = k.to_physical(&u).unwrap();
        let back = k.from_physical(&a, &b).unwrap();
        assert!(u.iter().zip(&back).all(|(x, y)| (x - y).abs() < 1e-14));
        // energy from grid quadrature
        let e: f64 = a.iter().zip(&b).map(|(x, y)| x * x + y * y).sum::<f64>() / (2.0 * a.len() as f64);
        assert!((e - 0.3).abs() < 1e-12);
    }

    #[test]
    fn initial_modes_are_orthonormal() {
        let k = flow(4, 40.0, 32);
        let modes = k.otd_initial_modes(8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let g = k.inner(&modes[i], &modes[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
            assert_eq!(k.divergence_ratio(&modes[i]), 0.0);
        }
        // grid-quadrature view of the first mode
        let [a, _] = k.to_physical(&modes[0]).unwrap();
        let area = (2.0 * std::f64::consts::PI).powi(2) / a.len() as f64;
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>() * area;
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(k.otd_initial_modes(11).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KolmogorovParams::new(0, 40.0, 32).is_err());
        assert!(KolmogorovParams::new(4, -1.0, 32).is_err());
        assert!(KolmogorovParams::new(11, 40.0, 32).is_err());
    }
}

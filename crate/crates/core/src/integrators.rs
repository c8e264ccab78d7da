//! Time steppers: the Dormand-Prince 5(4) embedded pair with an elementary
//! step-size controller, and the one-step exponential integrator ETDRK2.

use num_complex::Complex;

use crate::error::{OtdError, Result};
use crate::scalar::{all_finite, Scalar};

/// Adaptive step-size settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub dt_init: T,
    pub dt_min: T,
    pub dt_max: T,
    pub safety: T,
}

impl<T: Scalar> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-5),
            abs_tol: T::lit(1e-5),
            dt_init: T::lit(1e-3),
            dt_min: T::lit(1e-12),
            dt_max: T::lit(0.1),
            safety: T::lit(0.9),
        }
    }
}

impl<T: Scalar> StepControl<T> {
    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > T::zero()
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.rel_tol > T::zero()
            && self.abs_tol > T::zero()
            && self.safety > T::zero()
            && self.safety <= T::one();
        if ok {
            Ok(())
        } else {
            Err(OtdError::Contract(format!("invalid step control {self:?}")))
        }
    }
}

const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of one attempted Dormand-Prince step.
#[derive(Debug, Clone)]
pub struct Rk54Step<T> {
    pub y_new: Vec<T>,
    pub t_new: T,
    /// Proposed size of the next step (or of the retry when rejected).
    pub dt_next: T,
    pub accepted: bool,
    /// Max-norm of the scaled error estimate; `<= 1` on acceptance.
    pub error_norm: T,
}

/// Dormand-Prince 5(4) stepper with reusable stage storage and FSAL reuse.
#[derive(Debug, Clone)]
pub struct DormandPrince<T> {
    k: [Vec<T>; 7],
    stage: Vec<T>,
    fsal_valid: bool,
}

impl<T: Scalar> DormandPrince<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![T::zero(); dim]),
            stage: vec![T::zero(); dim],
            fsal_valid: false,
        }
    }

    /// Must be called whenever the state is modified between steps.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    /// Evaluates the 5th-order solution and the scaled error estimate.
    fn attempt<F>(&mut self, rhs: &mut F, t: T, y: &[T], dt: T, ctrl: &StepControl<T>) -> Result<(Vec<T>, T)>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let n = y.len();
        if !self.fsal_valid {
            rhs(t, y, &mut self.k[0])?;
        }
        for s in 1..7 {
            self.stage.copy_from_slice(y);
            for (j, &a) in A[s].iter().enumerate().take(s) {
                if a != 0.0 {
                    let c = dt * T::lit(a);
                    for (st, &kj) in self.stage.iter_mut().zip(&self.k[j]) {
                        *st += c * kj;
                    }
                }
            }
            let (_, tail) = self.k.split_at_mut(s);
            rhs(t + dt * T::lit(C[s]), &self.stage, &mut tail[0])?;
        }
        // stage 7 is evaluated at the 5th-order solution
        let y_new = self.stage.clone();
        let mut err = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for (s, &w) in E.iter().enumerate() {
                if w != 0.0 {
                    e += T::lit(w) * self.k[s][i];
                }
            }
            let scale = ctrl.abs_tol + ctrl.rel_tol * y[i].abs();
            err = err.max((dt * e).abs() / scale);
        }
        if !err.is_finite() || !all_finite(&y_new) {
            err = T::infinity();
        }
        Ok((y_new, err))
    }

    /// One adaptive step attempt from `(t, y)` with size `dt`.
    pub fn step<F>(&mut self, rhs: &mut F, t: T, y: &[T], dt: T, ctrl: &StepControl<T>) -> Result<Rk54Step<T>>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let (y_new, err) = self.attempt(rhs, t, y, dt, ctrl)?;
        let exponent = T::lit(0.2);
        if err <= T::one() {
            let factor = if err == T::zero() {
                T::lit(MAX_FACTOR)
            } else {
                (ctrl.safety * err.recip().powf(exponent)).max(T::lit(MIN_FACTOR)).min(T::lit(MAX_FACTOR))
            };
            self.k.swap(0, 6);
            self.fsal_valid = true;
            Ok(Rk54Step {
                y_new,
                t_new: t + dt,
                dt_next: (dt * factor).max(ctrl.dt_min).min(ctrl.dt_max),
                accepted: true,
                error_norm: err,
            })
        } else {
            let factor = if err.is_finite() {
                (ctrl.safety * err.recip().powf(exponent)).max(T::lit(MIN_FACTOR))
            } else {
                T::lit(MIN_FACTOR)
            };
            let dt_next = dt * factor;
            // k1 still belongs to (t, y)
            self.fsal_valid = true;
            if dt_next < ctrl.dt_min {
                return Err(OtdError::StepUnderflow {
                    time: t.to_f64_lossy(),
                    dt: dt_next.to_f64_lossy(),
                    dt_min: ctrl.dt_min.to_f64_lossy(),
                });
            }
            Ok(Rk54Step {
                y_new,
                t_new: t,
                dt_next,
                accepted: false,
                error_norm: err,
            })
        }
    }

    /// One step of fixed size, ignoring the error estimate.
    pub fn step_fixed<F>(&mut self, rhs: &mut F, t: T, y: &[T], dt: T) -> Result<Vec<T>>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let ctrl = StepControl::default();
        let (y_new, _) = self.attempt(rhs, t, y, dt, &ctrl)?;
        self.k.swap(0, 6);
        self.fsal_valid = true;
        Ok(y_new)
    }
}

/// Standalone adaptive step, see [`DormandPrince::step`].
pub fn rk54_step<T, F>(rhs: &mut F, y: &[T], t: T, dt: T, ctrl: &StepControl<T>) -> Result<Rk54Step<T>>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    DormandPrince::new(y.len()).step(rhs, t, y, dt, ctrl)
}

/// Statistics of an adaptive integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` adaptively, landing exactly on `t1`.
pub fn integrate_adaptive<T, F>(
    rhs: &mut F,
    t0: T,
    y0: &[T],
    t1: T,
    ctrl: &StepControl<T>,
) -> Result<(Vec<T>, IntegrationStats)>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    ctrl.validate()?;
    let mut stepper = DormandPrince::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut dt = ctrl.dt_init;
    let mut stats = IntegrationStats::default();
    while t < t1 {
        let remaining = t1 - t;
        let last = dt >= remaining;
        let h = if last { remaining } else { dt };
        let step = stepper.step(rhs, t, &y, h, ctrl)?;
        if step.accepted {
            stats.accepted += 1;
            y = step.y_new;
            t = if last { t1 } else { step.t_new };
            if !last || step.dt_next < dt {
                dt = step.dt_next;
            }
        } else {
            stats.rejected += 1;
            dt = step.dt_next;
        }
    }
    Ok((y, stats))
}

/// Precomputed exponential-integrator coefficients for a diagonal linear part.
#[derive(Debug, Clone)]
pub struct EtdCoefficients<T> {
    pub symbol: Vec<Complex<T>>,
    pub dt: T,
    pub exp: Vec<Complex<T>>,
    pub phi1: Vec<Complex<T>>,
    pub phi2: Vec<Complex<T>>,
}

/// Below this `|z|` the phi functions are summed from their Taylor series.
pub const PHI_SERIES_RADIUS: f64 = 0.5;

/// `phi_1(z) = (e^z - 1)/z` and `phi_2(z) = (e^z - 1 - z)/z^2`.
pub fn phi_functions<T: Scalar>(z: Complex<T>) -> (Complex<T>, Complex<T>) {
    if z.norm() < T::lit(PHI_SERIES_RADIUS) {
        phi_series(z, 24)
    } else {
        let one = Complex::new(T::one(), T::zero());
        let ez = z.exp();
        ((ez - one) / z, (ez - one - z) / (z * z))
    }
}

/// Truncated Taylor series of `phi_1` and `phi_2` with `terms` terms.
pub fn phi_series<T: Scalar>(z: Complex<T>, terms: usize) -> (Complex<T>, Complex<T>) {
    // phi_1 = 1 + z/2 (1 + z/3 (1 + ...)), phi_2 = 1/2 (1 + z/3 (1 + z/4 (1 + ...)))
    let one = Complex::new(T::one(), T::zero());
    let mut p1 = one;
    let mut p2 = one;
    for k in (1..terms).rev() {
        p1 = one + z * p1 / T::from_usize_lossy(k + 1);
        p2 = one + z * p2 / T::from_usize_lossy(k + 2);
    }
    (p1, p2 * T::lit(0.5))
}

impl<T: Scalar> EtdCoefficients<T> {
    pub fn new(symbol: Vec<Complex<T>>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(OtdError::Contract("ETD step must be positive".into()));
        }
        let mut exp = Vec::with_capacity(symbol.len());
        let mut phi1 = Vec::with_capacity(symbol.len());
        let mut phi2 = Vec::with_capacity(symbol.len());
        for &l in &symbol {
            let z = l * dt;
            let (p1, p2) = phi_functions(z);
            exp.push(z.exp());
            phi1.push(p1);
            phi2.push(p2);
        }
        Ok(Self {
            symbol,
            dt,
            exp,
            phi1,
            phi2,
        })
    }
}

/// ETDRK2 stepper over a flat vector in which some blocks carry the diagonal
/// linear symbol (as interleaved complex pairs) and the remaining entries have
/// no linear part.
#[derive(Debug, Clone)]
pub struct Etd2<T> {
    coeffs: EtdCoefficients<T>,
    /// Offsets of blocks of length `2 * symbol.len()` that use the symbol.
    blocks: Vec<usize>,
    len: usize,
}

impl<T: Scalar> Etd2<T> {
    pub fn new(coeffs: EtdCoefficients<T>, blocks: Vec<usize>, len: usize) -> Result<Self> {
        let width = 2 * coeffs.symbol.len();
        let mut sorted = blocks.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[1] < w[0] + width {
                return Err(OtdError::Contract("overlapping ETD blocks".into()));
            }
        }
        if sorted.last().is_some_and(|&o| o + width > len) {
            return Err(OtdError::Contract("ETD block exceeds vector length".into()));
        }
        Ok(Self {
            coeffs,
            blocks: sorted,
            len,
        })
    }

    /// Whole vector is one symbol block.
    pub fn single(coeffs: EtdCoefficients<T>) -> Self {
        let len = 2 * coeffs.symbol.len();
        Self {
            coeffs,
            blocks: vec![0],
            len,
        }
    }

    pub fn dt(&self) -> T {
        self.coeffs.dt
    }

    pub fn coefficients(&self) -> &EtdCoefficients<T> {
        &self.coeffs
    }

    /// `out = [E y] + h W n`, with `E = exp(Lh)` when `with_exp` is set and
    /// `W` the per-mode weights on symbol blocks (`plain_weight` elsewhere).
    fn combine(
        &self,
        y: &[T],
        n: &[T],
        weights: &[Complex<T>],
        plain_weight: T,
        with_exp: bool,
        out: &mut [T],
    ) {
        let h = self.coeffs.dt;
        let width = 2 * weights.len();
        let keep = if with_exp { T::one() } else { T::zero() };
        let mut plain_from = 0;
        let plain = |from: usize, to: usize, out: &mut [T]| {
            for i in from..to {
                out[i] = keep * y[i] + h * plain_weight * n[i];
            }
        };
        for &off in &self.blocks {
            plain(plain_from, off, out);
            for (j, w) in weights.iter().enumerate() {
                let i = off + 2 * j;
                let mut v = *w * Complex::new(n[i], n[i + 1]) * h;
                if with_exp {
                    v = v + self.coeffs.exp[j] * Complex::new(y[i], y[i + 1]);
                }
                out[i] = v.re;
                out[i + 1] = v.im;
            }
            plain_from = off + width;
        }
        plain(plain_from, self.len, out);
    }

    /// One ETDRK2 step: `a = e^{Lh}u + h phi1 N(u)`,
    /// `u_new = a + h phi2 (N(a) - N(u))`.
    pub fn step<F>(&self, nonlinear: &mut F, u: &[T], t: T) -> Result<Vec<T>>
    where
        F: FnMut(&[T], &mut [T]) -> Result<()>,
    {
        if u.len() != self.len {
            return Err(OtdError::Contract(format!(
                "ETD stepper of length {} applied to {}",
                self.len,
                u.len()
            )));
        }
        let blow = |what: &str| OtdError::BlowUp {
            time: t.to_f64_lossy(),
            what: what.into(),
        };
        let mut nu = vec![T::zero(); self.len];
        nonlinear(u, &mut nu)?;
        if !all_finite(&nu) {
            return Err(blow("non-finite nonlinear term"));
        }
        let mut a = vec![T::zero(); self.len];
        self.combine(u, &nu, &self.coeffs.phi1, T::one(), true, &mut a);
        let mut na = vec![T::zero(); self.len];
        nonlinear(&a, &mut na)?;
        if !all_finite(&na) {
            return Err(blow("non-finite nonlinear term at predictor"));
        }
        let diff: Vec<T> = na.iter().zip(&nu).map(|(&x, &y)| x - y).collect();
        let mut out = vec![T::zero(); self.len];
        self.combine(&a, &diff, &self.coeffs.phi2, T::lit(0.5), false, &mut out);
        for (o, &ai) in out.iter_mut().zip(&a) {
            *o += ai;
        }
        Ok(out)
    }
}

/// Standalone ETDRK2 step for a vector made of a single symbol block.
pub fn etd2_step<T, F>(etd: &EtdCoefficients<T>, nonlinear: &mut F, u: &[T], t: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]) -> Result<()>,
{
    Etd2::single(etd.clone()).step(nonlinear, u, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl(tol: f64) -> StepControl<f64> {
        StepControl::default().with_tolerances(tol, tol)
    }

    #[test]
    fn exponential_decay() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -y[0];
            Ok(())
        };
        let (y, _) = integrate_adaptive(&mut f, 0.0, &[1.0], 1.0, &ctrl(1e-8)).unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-7);
        let (y, _) = integrate_adaptive(&mut f, 0.0, &[1.0], 1.0, &StepControl::default()).unwrap();
        assert!((y[0] - 0.3678794).abs() < 1e-5);
    }

    #[test]
    fn constant_solution_accepts_every_step() {
        let mut f = |_t: f64, _y: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        };
        let (y, stats) = integrate_adaptive(&mut f, 0.0, &[2.5, -1.0], 10.0, &ctrl(1e-9)).unwrap();
        assert_eq!(y, vec![2.5, -1.0]);
        assert_eq!(stats.rejected, 0);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = y[1];
            out[1] = -y[0];
            Ok(())
        };
        let t1 = 100.0 * std::f64::consts::TAU;
        let (y, _) = integrate_adaptive(&mut f, 0.0, &[1.0, 0.0], t1, &ctrl(1e-8)).unwrap();
        let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((energy - 0.5).abs() / 0.5 < 1e-4);
    }

    #[test]
    fn step_underflow_is_reported() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = y[0] * y[0];
            Ok(())
        };
        let mut c = ctrl(1e-10);
        c.dt_min = 1e-6;
        c.dt_init = 1e-3;
        let err = integrate_adaptive(&mut f, 0.0, &[1.0], 2.0, &c).unwrap_err();
        assert!(matches!(err, OtdError::StepUnderflow { .. } | OtdError::BlowUp { .. }));
    }

    #[test]
    fn rk54_fifth_order() {
        fn solve(n: usize) -> f64 {
            let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
                out[0] = y[1];
                out[1] = -y[0] * y[0] * y[0];
                Ok(())
            };
            let dt = 8.0 / n as f64;
            let mut dp = DormandPrince::new(2);
            let mut y = vec![1.5, 0.0];
            for k in 0..n {
                y = dp.step_fixed(&mut f, k as f64 * dt, &y, dt).unwrap();
            }
            y[0]
        }
        let reference = solve(4096);
        let e1 = (solve(128) - reference).abs();
        let e2 = (solve(256) - reference).abs();
        let order = (e1 / e2).log2();
        assert!((4.5..=5.5).contains(&order), "order {order}");
    }

    #[test]
    fn phi_functions_small_argument() {
        for z in [Complex::new(1e-4, 0.0), Complex::new(0.0, 7e-4), Complex::new(-3e-4, 5e-4)] {
            let (p1, p2) = phi_functions(z);
            let t1 = Complex::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
            let t2 = Complex::new(0.5, 0.0) + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
            assert!((p1 - t1).norm() / t1.norm() < 1e-12);
            assert!((p2 - t2).norm() / t2.norm() < 1e-12);
        }
        let (p1, p2) = phi_functions(Complex::new(0.0, 0.0));
        assert_eq!((p1.re, p2.re), (1.0, 0.5));
        for r in [PHI_SERIES_RADIUS * 0.999, PHI_SERIES_RADIUS * 1.001] {
            let z = Complex::from_polar(r, 2.0);
            let one = Complex::new(1.0, 0.0);
            let direct = ((z.exp() - one) / z, (z.exp() - one - z) / (z * z));
            let (p1, p2) = phi_functions(z);
            assert!((p1 - direct.0).norm() < 1e-13 && (p2 - direct.1).norm() < 1e-13);
        }
    }

    #[test]
    fn etd2_is_exact_for_linear_problems() {
        let etd = EtdCoefficients::new(vec![Complex::new(0.0, 1.0), Complex::new(-0.5, 2.0)], 0.1).unwrap();
        let mut zero = |_u: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        };
        let mut u = vec![1.0, 0.0, 0.3, -0.2];
        for k in 0..100 {
            u = etd2_step(&etd, &mut zero, &u, k as f64 * 0.1).unwrap();
        }
        let want0 = Complex::from_polar(1.0, 10.0);
        let want1 = Complex::new(0.3, -0.2) * (Complex::new(-0.5, 2.0) * 10.0).exp();
        assert!((Complex::new(u[0], u[1]) - want0).norm() < 1e-13);
        assert!((Complex::new(u[2], u[3]) - want1).norm() < 1e-13);
    }

    #[test]
    fn etd2_with_zero_symbol_is_heun() {
        let etd = EtdCoefficients::new(vec![Complex::new(0.0, 0.0)], 0.05).unwrap();
        let g = |u: &[f64]| [u[0] * u[1] - u[0], u[0].sin()];
        let mut n = |u: &[f64], out: &mut [f64]| {
            out.copy_from_slice(&g(u));
            Ok(())
        };
        let u0 = [0.7, -0.4];
        let got = etd2_step(&etd, &mut n, &u0, 0.0).unwrap();
        let k1 = g(&u0);
        let pred = [u0[0] + 0.05 * k1[0], u0[1] + 0.05 * k1[1]];
        let k2 = g(&pred);
        for i in 0..2 {
            let heun = u0[i] + 0.025 * (k1[i] + k2[i]);
            assert!((got[i] - heun).abs() < 1e-14);
        }
    }

    #[test]
    fn etd2_rejects_non_finite_nonlinearity() {
        let etd = EtdCoefficients::new(vec![Complex::new(0.0, 1.0)], 0.1).unwrap();
        let mut bad = |_u: &[f64], out: &mut [f64]| {
            out.fill(f64::NAN);
            Ok(())
        };
        assert!(matches!(etd2_step(&etd, &mut bad, &[1.0, 0.0], 3.0), Err(OtdError::BlowUp { .. })));
    }
}

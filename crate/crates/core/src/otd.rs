//! OTD modes: coupled evolution with the state, the reduced operator `L_r`,
//! its symmetric part `S_r`, and the growth bound it implies.

use std::ops::ControlFlow;

use crate::dynsys::{DynamicalSystem, LinearOperator, StateVector};
use crate::error::{OtdError, Result};
use crate::integrators::{integrate_adaptive, DormandPrince, Etd2, EtdCoefficients, StepControl};
use crate::numerics::{gram_error, gram_schmidt_in_place, symmetric_eigs, DenseMatrix};
use crate::scalar::{all_finite, axpy, Scalar};

/// Gram-matrix error above which a trajectory is aborted.
pub const GRAM_ABORT: f64 = 1e-3;
/// Orthonormality demanded of a basis handed to the OTD operations.
pub const GRAM_INPUT_TOL: f64 = 1e-6;

/// `r` orthonormal tangent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OtdBasis<T> {
    pub modes: Vec<Vec<T>>,
    pub last_reorthonormalization_time: T,
}

impl<T: Scalar> OtdBasis<T> {
    pub fn new(modes: Vec<Vec<T>>) -> Self {
        Self {
            modes,
            last_reorthonormalization_time: T::zero(),
        }
    }

    /// Orthonormalizes arbitrary independent vectors into a basis.
    pub fn orthonormalized<S: DynamicalSystem<T>>(sys: &S, vectors: Vec<Vec<T>>) -> Result<Self> {
        let mut modes = vectors;
        gram_schmidt_in_place(&mut modes, |a, b| sys.inner(a, b))?;
        Ok(Self::new(modes))
    }

    pub fn r(&self) -> usize {
        self.modes.len()
    }

    pub fn gram_error<S: DynamicalSystem<T>>(&self, sys: &S) -> T {
        gram_error(&self.modes, |a, b| sys.inner(a, b))
    }

    pub fn reorthonormalize<S: DynamicalSystem<T>>(&mut self, sys: &S, time: T) -> Result<()> {
        gram_schmidt_in_place(&mut self.modes, |a, b| sys.inner(a, b))?;
        self.last_reorthonormalization_time = time;
        Ok(())
    }

    /// `V eta`
    pub fn lift(&self, eta: &[T]) -> Vec<T> {
        let n = self.modes.first().map_or(0, Vec::len);
        let mut out = vec![T::zero(); n];
        for (v, &c) in self.modes.iter().zip(eta) {
            axpy(c, v, &mut out);
        }
        out
    }
}

/// `L_r = V^T L V`, its symmetric part and the sorted eigenvalues of `S_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOperator<T> {
    pub lr: DenseMatrix<T>,
    pub sr: DenseMatrix<T>,
    /// Eigenvalues of `S_r`, descending.
    pub eigenvalues: Vec<T>,
    pub time: T,
}

impl<T: Scalar> ReducedOperator<T> {
    pub fn from_matrix(lr: DenseMatrix<T>, time: T) -> Result<Self> {
        let sr = lr.symmetric_part();
        let eig = symmetric_eigs(&sr, T::lit(1e-12))?;
        Ok(Self {
            lr,
            sr,
            eigenvalues: eig.values,
            time,
        })
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or(T::nan())
    }

    pub fn lambda_min(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or(T::nan())
    }
}

fn check_basis<T: Scalar, S: DynamicalSystem<T>>(sys: &S, basis: &OtdBasis<T>) -> Result<()> {
    if basis.modes.iter().any(|m| m.len() != sys.dim()) {
        return Err(OtdError::Contract("mode length differs from system dimension".into()));
    }
    let err = basis.gram_error(sys);
    if !(err <= T::lit(GRAM_INPUT_TOL)) {
        return Err(OtdError::Contract(format!(
            "basis not orthonormal: Gram error {err:e}"
        )));
    }
    Ok(())
}

/// Applies the Jacobian to every mode and forms `[L_r]_{ij} = <v_i, L v_j>`.
fn apply_to_modes<T: Scalar, S: DynamicalSystem<T>, J: LinearOperator<T>>(
    sys: &S,
    jac: &J,
    modes: &[&[T]],
) -> Result<(Vec<Vec<T>>, DenseMatrix<T>)> {
    let r = modes.len();
    let mut lv = Vec::with_capacity(r);
    for v in modes {
        let mut out = vec![T::zero(); sys.dim()];
        jac.apply(v, &mut out)?;
        lv.push(out);
    }
    let mut lr = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            lr[(i, j)] = sys.inner(modes[i], &lv[j]);
        }
    }
    Ok((lv, lr))
}

/// `L v_i - sum_k <L v_i, v_k> v_k`, written into `lv` in place.
fn project_out<T: Scalar>(lv: &mut [Vec<T>], modes: &[&[T]], lr: &DenseMatrix<T>) {
    for (i, lvi) in lv.iter_mut().enumerate() {
        for (k, vk) in modes.iter().enumerate() {
            axpy(-lr[(k, i)], vk, lvi);
        }
    }
}

/// Right-hand side of the OTD equation for every mode.
pub fn otd_rhs<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    u: &StateVector<T>,
    basis: &OtdBasis<T>,
) -> Result<Vec<Vec<T>>> {
    check_basis(sys, basis)?;
    let jac = sys.jacobian_at(&u.data)?;
    let modes: Vec<&[T]> = basis.modes.iter().map(Vec::as_slice).collect();
    let (mut lv, lr) = apply_to_modes(sys, &jac, &modes)?;
    project_out(&mut lv, &modes, &lr);
    Ok(lv)
}

/// Reduced operator of `L_u` on the span of an orthonormal basis.
pub fn reduced_operator<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    u: &StateVector<T>,
    basis: &OtdBasis<T>,
) -> Result<ReducedOperator<T>> {
    check_basis(sys, basis)?;
    let jac = sys.jacobian_at(&u.data)?;
    reduced_with(sys, &jac, &basis.modes, u.time)
}

/// Reduced operator with a Jacobian that is already frozen.
pub fn reduced_with<T: Scalar, S: DynamicalSystem<T>, J: LinearOperator<T>>(
    sys: &S,
    jac: &J,
    modes: &[Vec<T>],
    time: T,
) -> Result<ReducedOperator<T>> {
    let refs: Vec<&[T]> = modes.iter().map(Vec::as_slice).collect();
    let (_, lr) = apply_to_modes(sys, jac, &refs)?;
    ReducedOperator::from_matrix(lr, time)
}

/// Time stepper for the coupled state/mode system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator<T> {
    /// Dormand-Prince 5(4) with one controller over the whole coupled vector.
    DormandPrince(StepControl<T>),
    /// Fixed-step ETDRK2 using the system's linear symbol on every field block.
    Etd2 { dt: T },
}

#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    pub t_end: T,
    pub emit_dt: T,
    pub reorth_dt: T,
    pub integrator: Integrator<T>,
    /// Initial coefficients of a reduced solution `eta' = L_r eta`.
    pub probe: Option<Vec<T>>,
    /// Initial full tangent vector evolved with `v' = L_u v`.
    pub tangent_probe: Option<Vec<T>>,
    /// Hold the state fixed (fixed-point studies of the mode dynamics).
    pub freeze_state: bool,
}

impl<T: Scalar> EvolveOptions<T> {
    pub fn new(t_end: T, emit_dt: T, integrator: Integrator<T>) -> Self {
        Self {
            t_end,
            emit_dt,
            reorth_dt: T::one(),
            integrator,
            probe: None,
            tangent_probe: None,
            freeze_state: false,
        }
    }
}

/// One emitted row of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OtdRecord<T> {
    pub t: T,
    /// State observables followed by mode observables.
    pub observables: Vec<T>,
    /// Eigenvalues of `S_r`, descending.
    pub eigenvalues: Vec<T>,
    pub gram_error: T,
    /// `|eta|` of the reduced probe, when one is carried.
    pub probe_norm: Option<T>,
}

/// Everything available to a sink at an emission time.
pub struct Emission<'a, T> {
    pub record: &'a OtdRecord<T>,
    pub state: &'a [T],
    pub basis: &'a OtdBasis<T>,
    pub reduced: &'a ReducedOperator<T>,
    pub probe: Option<&'a [T]>,
    pub tangent_probe: Option<&'a [T]>,
}

/// How a coupled evolution ended.
#[derive(Debug, Clone)]
pub struct EvolveSummary<T> {
    pub final_state: StateVector<T>,
    pub final_basis: OtdBasis<T>,
    pub emitted: usize,
    pub steps: usize,
    pub rejected: usize,
    pub stopped_early: bool,
}

/// Layout of the concatenated vector `[u | v_1 .. v_r | eta | w]`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    r: usize,
    probe: bool,
    tangent: bool,
}

impl Layout {
    fn mode(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.n * (1 + i);
        s..s + self.n
    }
    fn eta(&self) -> std::ops::Range<usize> {
        let s = self.n * (1 + self.r);
        s..s + if self.probe { self.r } else { 0 }
    }
    fn tangent(&self) -> std::ops::Range<usize> {
        let s = self.eta().end;
        s..s + if self.tangent { self.n } else { 0 }
    }
    fn len(&self) -> usize {
        self.tangent().end
    }
    /// Offsets of blocks that carry a field (state, modes, full tangent).
    fn field_blocks(&self) -> Vec<usize> {
        let mut b: Vec<usize> = (0..=self.r).map(|i| i * self.n).collect();
        if self.tangent {
            b.push(self.tangent().start);
        }
        b
    }
}

/// Right-hand side of the coupled system; also returns `L_r` at `y`.
fn coupled_rhs<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    lay: &Layout,
    freeze: bool,
    y: &[T],
    out: &mut [T],
) -> Result<DenseMatrix<T>> {
    let n = lay.n;
    let (u, rest) = y.split_at(n);
    let (du, dmodes) = out.split_at_mut(n);
    let jac = sys.rhs_and_jacobian(u, du)?;
    if freeze {
        du.iter_mut().for_each(|x| *x = T::zero());
    }
    let modes: Vec<&[T]> = (0..lay.r).map(|i| &rest[i * n..(i + 1) * n]).collect();
    let (mut lv, lr) = apply_to_modes(sys, &jac, &modes)?;
    project_out(&mut lv, &modes, &lr);
    for (i, lvi) in lv.iter().enumerate() {
        dmodes[i * n..(i + 1) * n].copy_from_slice(lvi);
    }
    if lay.probe {
        let eta = &y[lay.eta()];
        let d = lr.matvec(eta);
        out[lay.eta()].copy_from_slice(&d);
    }
    if lay.tangent {
        let range = lay.tangent();
        let w = y[range.clone()].to_vec();
        jac.apply(&w, &mut out[range])?;
    }
    Ok(lr)
}

fn split_basis<T: Scalar>(lay: &Layout, y: &[T], time: T) -> OtdBasis<T> {
    let mut b = OtdBasis::new((0..lay.r).map(|i| y[lay.mode(i)].to_vec()).collect());
    b.last_reorthonormalization_time = time;
    b
}

/// Integrates the state and its OTD modes together, emitting a record at
/// every multiple of `emit_dt` (including the initial time) until `t_end` or
/// until the sink breaks.
pub fn evolve_coupled<T, S, F>(
    sys: &S,
    u0: &StateVector<T>,
    basis0: &OtdBasis<T>,
    opts: &EvolveOptions<T>,
    mut sink: F,
) -> Result<EvolveSummary<T>>
where
    T: Scalar,
    S: DynamicalSystem<T>,
    F: FnMut(&Emission<'_, T>) -> Result<ControlFlow<()>>,
{
    check_basis(sys, basis0)?;
    if !(opts.emit_dt > T::zero()) || !(opts.reorth_dt > T::zero()) {
        return Err(OtdError::Contract("emit_dt and reorth_dt must be positive".into()));
    }
    if u0.data.len() != sys.dim() {
        return Err(OtdError::Contract("initial state has wrong dimension".into()));
    }
    let lay = Layout {
        n: sys.dim(),
        r: basis0.r(),
        probe: opts.probe.is_some(),
        tangent: opts.tangent_probe.is_some(),
    };
    let mut y = Vec::with_capacity(lay.len());
    y.extend_from_slice(&u0.data);
    for m in &basis0.modes {
        y.extend_from_slice(m);
    }
    if let Some(eta) = &opts.probe {
        if eta.len() != lay.r {
            return Err(OtdError::Contract("probe length must equal r".into()));
        }
        y.extend_from_slice(eta);
    }
    if let Some(w) = &opts.tangent_probe {
        if w.len() != lay.n {
            return Err(OtdError::Contract("tangent probe has wrong dimension".into()));
        }
        y.extend_from_slice(w);
    }

    let t0 = u0.time;
    let mut t = t0;
    let mut emit_index: usize = 0;
    let mut reorth_index: usize = 1;
    let mut last_reorth = t0;
    let mut emitted = 0;
    let mut steps = 0;
    let mut rejected = 0;
    let mut stopped_early = false;
    let obs_names = sys.observable_names().len() + sys.mode_observable_names().len();
    let tol_t = opts.emit_dt * T::lit(1e-9);

    let emit = |t: T, y: &[T], last_reorth: T, sink: &mut F| -> Result<ControlFlow<()>> {
        let u = &y[..lay.n];
        let basis = split_basis(&lay, y, last_reorth);
        let jac = sys.jacobian_at(u)?;
        let reduced = reduced_with(sys, &jac, &basis.modes, t)?;
        let gram = basis.gram_error(sys);
        let mut observables = sys.observe(u);
        observables.extend(sys.observe_modes(&basis.modes));
        debug_assert_eq!(observables.len(), obs_names);
        let probe = opts.probe.as_ref().map(|_| &y[lay.eta()]);
        let record = OtdRecord {
            t,
            observables,
            eigenvalues: reduced.eigenvalues.clone(),
            gram_error: gram,
            probe_norm: probe.map(|e| e.iter().map(|&x| x * x).sum::<T>().sqrt()),
        };
        let flow = sink(&Emission {
            record: &record,
            state: u,
            basis: &basis,
            reduced: &reduced,
            probe,
            tangent_probe: opts.tangent_probe.as_ref().map(|_| &y[lay.tangent()]),
        })?;
        if !(gram <= T::lit(GRAM_ABORT)) {
            return Err(OtdError::Orthonormality {
                time: t.to_f64_lossy(),
                error: gram.to_f64_lossy(),
            });
        }
        Ok(flow)
    };

    let reorth = |y: &mut [T], t: T| -> Result<()> {
        let mut basis = split_basis(&lay, y, t);
        basis.reorthonormalize(sys, t)?;
        for (i, m) in basis.modes.iter().enumerate() {
            y[lay.mode(i)].copy_from_slice(m);
        }
        Ok(())
    };

    let next_emit = |k: usize| t0 + opts.emit_dt * T::from_usize_lossy(k);
    let next_reorth = |k: usize| t0 + opts.reorth_dt * T::from_usize_lossy(k);

    if emit(t, &y, last_reorth, &mut sink)?.is_break() {
        stopped_early = true;
    } else {
        emitted += 1;
        emit_index = 1;
    }

    match opts.integrator {
        Integrator::DormandPrince(ctrl) => {
            ctrl.validate()?;
            let mut stepper = DormandPrince::new(lay.len());
            let mut rhs = |_t: T, y: &[T], out: &mut [T]| -> Result<()> {
                coupled_rhs(sys, &lay, opts.freeze_state, y, out).map(|_| ())
            };
            let mut dt = ctrl.dt_init;
            while !stopped_early && t < opts.t_end - tol_t {
                let target = next_emit(emit_index).min(opts.t_end);
                let remaining = target - t;
                let hits = dt >= remaining - tol_t;
                let h = if hits { remaining } else { dt };
                let step = stepper.step(&mut rhs, t, &y, h, &ctrl)?;
                if !step.accepted {
                    rejected += 1;
                    dt = step.dt_next;
                    continue;
                }
                steps += 1;
                y = step.y_new;
                if !all_finite(&y) {
                    return Err(OtdError::BlowUp {
                        time: t.to_f64_lossy(),
                        what: "non-finite coupled state".into(),
                    });
                }
                t = if hits { target } else { step.t_new };
                if !hits || step.dt_next < dt {
                    dt = step.dt_next;
                }
                let at_emit = hits && (target - next_emit(emit_index)).abs() <= tol_t;
                if at_emit {
                    emit_index += 1;
                    if emit(t, &y, last_reorth, &mut sink)?.is_break() {
                        stopped_early = true;
                    }
                    emitted += 1;
                }
                if t >= next_reorth(reorth_index) - tol_t {
                    while t >= next_reorth(reorth_index) - tol_t {
                        reorth_index += 1;
                    }
                    reorth(&mut y, t)?;
                    last_reorth = t;
                    stepper.invalidate();
                }
            }
        }
        Integrator::Etd2 { dt } => {
            let symbol = sys.linear_symbol().ok_or_else(|| {
                OtdError::Contract("ETD integration needs a system with a linear symbol".into())
            })?;
            if 2 * symbol.len() != lay.n {
                return Err(OtdError::Contract("linear symbol does not match dimension".into()));
            }
            let ratio = (opts.emit_dt / dt).round();
            if ((opts.emit_dt / dt) - ratio).abs() > T::lit(1e-9) || ratio < T::one() {
                return Err(OtdError::Contract(
                    "emit_dt must be an integer multiple of the ETD step".into(),
                ));
            }
            let per_emit = ratio.to_usize().unwrap_or(1);
            let reorth_every = (opts.reorth_dt / dt).round().max(T::one()).to_usize().unwrap_or(1);
            let etd = Etd2::new(EtdCoefficients::new(symbol.clone(), dt)?, lay.field_blocks(), lay.len())?;
            let blocks = lay.field_blocks();
            let mut nonlinear = |y: &[T], out: &mut [T]| -> Result<()> {
                coupled_rhs(sys, &lay, opts.freeze_state, y, out)?;
                for &off in &blocks {
                    for (j, l) in symbol.iter().enumerate() {
                        let i = off + 2 * j;
                        let lin = *l * num_complex::Complex::new(y[i], y[i + 1]);
                        out[i] -= lin.re;
                        out[i + 1] -= lin.im;
                    }
                }
                if opts.freeze_state {
                    out[..lay.n].iter_mut().for_each(|x| *x = T::zero());
                }
                Ok(())
            };
            let total = ((opts.t_end - t0) / dt).round().to_usize().unwrap_or(0);
            let mut frozen_u = None;
            if opts.freeze_state {
                frozen_u = Some(y[..lay.n].to_vec());
            }
            for k in 1..=total {
                if stopped_early {
                    break;
                }
                y = etd.step(&mut nonlinear, &y, t)?;
                if let Some(u) = &frozen_u {
                    y[..lay.n].copy_from_slice(u);
                }
                steps += 1;
                t = t0 + dt * T::from_usize_lossy(k);
                if k % per_emit == 0 {
                    if emit(t, &y, last_reorth, &mut sink)?.is_break() {
                        stopped_early = true;
                    }
                    emitted += 1;
                }
                if k % reorth_every == 0 {
                    reorth(&mut y, t)?;
                    last_reorth = t;
                }
            }
        }
    }

    Ok(EvolveSummary {
        final_state: StateVector::new(t, y[..lay.n].to_vec()),
        final_basis: split_basis(&lay, &y, last_reorth),
        emitted,
        steps,
        rejected,
        stopped_early,
    })
}

/// Integrates the state alone from `u0.time` to `t_end`.
pub fn evolve_state<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    u0: &StateVector<T>,
    t_end: T,
    integrator: Integrator<T>,
) -> Result<StateVector<T>> {
    if u0.data.len() != sys.dim() {
        return Err(OtdError::Contract("initial state has wrong dimension".into()));
    }
    let data = match integrator {
        Integrator::DormandPrince(ctrl) => {
            let mut rhs = |_t: T, y: &[T], out: &mut [T]| sys.rhs(y, out);
            integrate_adaptive(&mut rhs, u0.time, &u0.data, t_end, &ctrl)?.0
        }
        Integrator::Etd2 { dt } => {
            let symbol = sys.linear_symbol().ok_or_else(|| {
                OtdError::Contract("ETD integration needs a system with a linear symbol".into())
            })?;
            let etd = Etd2::single(EtdCoefficients::new(symbol.clone(), dt)?);
            let mut nonlinear = |y: &[T], out: &mut [T]| -> Result<()> {
                sys.rhs(y, out)?;
                for (j, l) in symbol.iter().enumerate() {
                    let lin = *l * num_complex::Complex::new(y[2 * j], y[2 * j + 1]);
                    out[2 * j] -= lin.re;
                    out[2 * j + 1] -= lin.im;
                }
                Ok(())
            };
            let steps = ((t_end - u0.time) / dt).round().to_usize().unwrap_or(0);
            let mut y = u0.data.clone();
            for k in 0..steps {
                y = etd.step(&mut nonlinear, &y, u0.time + dt * T::from_usize_lossy(k))?;
            }
            y
        }
    };
    if !all_finite(&data) {
        return Err(OtdError::BlowUp {
            time: t_end.to_f64_lossy(),
            what: "non-finite state".into(),
        });
    }
    Ok(StateVector::new(t_end, data))
}

/// Outcome of the growth-bound test on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthWindow<T> {
    pub t0: T,
    pub lambda_min: T,
    pub lambda_max: T,
    /// `ln|eta(t0 + T)| - ln|eta(t0)|` at the last sample of the window.
    pub log_growth: T,
    /// Smallest margin to either bound across the window (negative = violated).
    pub margin: T,
}

/// Checks `|eta(t0)| e^{l_min (t-t0)} <= |eta(t)| <= |eta(t0)| e^{l_max (t-t0)}`
/// on consecutive windows of length `window`, with `l_min`/`l_max` taken from
/// the sampled `lambda_r`/`lambda_1`. The bound is tested in log form with
/// additive `slack`. Samples are `(t, lambda_1, lambda_r, |eta|)`.
pub fn growth_bound_check<T: Scalar>(
    samples: &[(T, T, T, T)],
    window: T,
    slack: T,
) -> Result<Vec<GrowthWindow<T>>> {
    if !(window > T::zero()) {
        return Err(OtdError::Contract("window must be positive".into()));
    }
    let mut out = Vec::new();
    let mut start = 0;
    let tol = window * T::lit(1e-9);
    while start < samples.len() {
        let t0 = samples[start].0;
        let end = samples[start..]
            .iter()
            .position(|s| s.0 > t0 + window + tol)
            .map_or(samples.len(), |p| start + p);
        let win = &samples[start..end];
        if win.len() < 2 {
            break;
        }
        let lmax = win.iter().fold(T::neg_infinity(), |m, s| m.max(s.1));
        let lmin = win.iter().fold(T::infinity(), |m, s| m.min(s.2));
        let log0 = win[0].3.ln();
        let mut margin = T::infinity();
        for s in &win[1..] {
            let dt = s.0 - t0;
            let g = s.3.ln() - log0;
            margin = margin.min(lmax * dt + slack - g).min(g - (lmin * dt - slack));
        }
        let last = win[win.len() - 1];
        out.push(GrowthWindow {
            t0,
            lambda_min: lmin,
            lambda_max: lmax,
            log_growth: last.3.ln() - log0,
            margin,
        });
        if margin < T::zero() {
            return Err(OtdError::GrowthBound {
                t0: t0.to_f64_lossy(),
                detail: format!("margin {margin:e} (lambda in [{lmin}, {lmax}])"),
            });
        }
        // next window starts at this window's last sample
        start = end - 1;
        if end == samples.len() {
            break;
        }
    }
    Ok(out)
}

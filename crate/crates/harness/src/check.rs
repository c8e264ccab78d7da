//! Invariant suite run by `otd check`.
//!
//! Every check is small enough to finish in seconds: the Kolmogorov checks use
//! a 32x32 grid and the MNLS checks 256 modes.

use std::ops::ControlFlow;
use std::time::Instant;

use num_complex::Complex64;
use otd_core::models::prototype::{default_initial_mode, default_initial_state};
use otd_core::numerics::{symmetric_eigs, Fft1d};
use otd_core::otd::{evolve_coupled, growth_bound_check, EvolveOptions, Integrator};
use otd_core::rng::SeededStream;
use otd_core::{
    DenseMatrix, DynamicalSystem, KolmogorovFlow, KolmogorovParams, LinearOperator, Mnls, MnlsParams, OtdBasis,
    OtdError, Prototype, PrototypeParams, StateVector, StepControl,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<28} {:>11.3e} (tol {:.0e}, {:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

type CheckFn = fn() -> Result<(f64, String), OtdError>;

/// `(name, tolerance, check)`; a check returns its worst value and a note.
pub const CHECKS: &[(&str, f64, CheckFn)] = &[
    ("orthonormality drift", 1e-8, orthonormality_drift),
    ("flow invariance", 1e-4, flow_invariance),
    ("reduced/full equivalence", 1e-5, reduced_full_equivalence),
    ("growth bound", 0.0, growth_bound),
    ("energy balance", 1e-4, energy_balance),
    ("jacobian finite differences", 1e-6, jacobian_sweeps),
    ("dft oracle", 1e-10, dft_oracle),
    ("eigensolver oracle", 1e-10, eigensolver_oracle),
];

pub fn run_suite() -> Vec<CheckOutcome> {
    CHECKS.iter().map(|&(name, tol, f)| run_one(name, tol, f)).collect()
}

fn run_one(name: &'static str, tolerance: f64, f: CheckFn) -> CheckOutcome {
    let start = Instant::now();
    let (value, passed, detail) = match f() {
        Ok((v, d)) => (v, v <= tolerance, d),
        Err(e) => (f64::NAN, false, e.to_string()),
    };
    CheckOutcome {
        name,
        value,
        tolerance,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn small_kolmogorov() -> Result<KolmogorovFlow, OtdError> {
    KolmogorovFlow::new(KolmogorovParams::new(4, 40.0, 32)?)
}

fn tight(tol: f64) -> Integrator<f64> {
    Integrator::DormandPrince(StepControl::default().with_tolerances(tol, tol))
}

fn prototype() -> Result<Prototype, OtdError> {
    Prototype::new(PrototypeParams::default())
}

fn random_vector(rng: &mut SeededStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn orthonormality_drift() -> Result<(f64, String), OtdError> {
    let proto = prototype()?;
    let basis = OtdBasis::orthonormalized(&proto, vec![default_initial_mode(), vec![0.0, 0.0, 1.0]])?;
    let mut opts = EvolveOptions::new(300.0, 0.5, tight(1e-10));
    opts.reorth_dt = 1.0;
    let mut worst_p = 0.0f64;
    let u0 = StateVector::new(0.0, default_initial_state());
    evolve_coupled(&proto, &u0, &basis, &opts, |e| {
        worst_p = worst_p.max(e.record.gram_error);
        Ok(ControlFlow::Continue(()))
    })?;

    let k = small_kolmogorov()?;
    let u0 = StateVector::new(0.0, k.random_initial_condition(0.3, 11));
    let basis = OtdBasis::orthonormalized(&k, k.otd_initial_modes(3)?)?;
    let mut opts = EvolveOptions::new(5.0, 0.1, tight(1e-10));
    opts.reorth_dt = 0.2;
    let mut worst_k = 0.0f64;
    evolve_coupled(&k, &u0, &basis, &opts, |e| {
        worst_k = worst_k.max(e.record.gram_error);
        Ok(ControlFlow::Continue(()))
    })?;
    Ok((worst_p.max(worst_k), format!("prototype {worst_p:.1e}, kolmogorov {worst_k:.1e}")))
}

/// Tangent and reduced probes started inside the mode span of a small
/// Kolmogorov run; returns per-emission `(outside-span residual, |V eta - w|)`
/// relative to `|w|`.
fn probe_run() -> Result<Vec<(f64, f64)>, OtdError> {
    let k = small_kolmogorov()?;
    let u0 = StateVector::new(0.0, k.random_initial_condition(0.3, 5));
    let basis = OtdBasis::orthonormalized(&k, k.otd_initial_modes(3)?)?;
    let eta0 = vec![1.0, 0.5, -0.25];
    let mut opts = EvolveOptions::new(4.0, 0.1, tight(1e-11));
    opts.reorth_dt = 0.2;
    opts.tangent_probe = Some(basis.lift(&eta0));
    opts.probe = Some(eta0);
    let mut out = Vec::new();
    evolve_coupled(&k, &u0, &basis, &opts, |e| {
        let w = e.tangent_probe.expect("tangent probe requested");
        let eta = e.probe.expect("probe requested");
        let norm = k.inner(w, w).sqrt();
        let coeffs: Vec<f64> = e.basis.modes.iter().map(|v| k.inner(v, w)).collect();
        let proj = e.basis.lift(&coeffs);
        let outside: Vec<f64> = w.iter().zip(&proj).map(|(a, b)| a - b).collect();
        let lifted = e.basis.lift(eta);
        let diff: Vec<f64> = w.iter().zip(&lifted).map(|(a, b)| a - b).collect();
        out.push((k.inner(&outside, &outside).sqrt() / norm, k.inner(&diff, &diff).sqrt() / norm));
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(out)
}

fn flow_invariance() -> Result<(f64, String), OtdError> {
    let r = probe_run()?;
    let worst = r.iter().fold(0.0f64, |m, x| m.max(x.0));
    Ok((worst, format!("{} samples", r.len())))
}

fn reduced_full_equivalence() -> Result<(f64, String), OtdError> {
    let r = probe_run()?;
    let worst = r.iter().fold(0.0f64, |m, x| m.max(x.1));
    Ok((worst, format!("{} samples", r.len())))
}

/// Returns the negated smallest margin, so a pass means the value is <= 0.
fn growth_bound() -> Result<(f64, String), OtdError> {
    let mut windows = 0;
    let mut margin = f64::INFINITY;
    let proto = prototype()?;
    let basis = OtdBasis::orthonormalized(&proto, vec![default_initial_mode(), vec![0.0, 0.0, 1.0]])?;
    let k = small_kolmogorov()?;
    let kbasis = OtdBasis::orthonormalized(&k, k.otd_initial_modes(3)?)?;
    let runs: [(&dyn Fn(&mut Vec<(f64, f64, f64, f64)>) -> Result<(), OtdError>, f64); 2] = [
        (
            &|s| {
                let mut opts = EvolveOptions::new(200.0, 0.05, tight(1e-10));
                opts.probe = Some(vec![0.6, 0.8]);
                let u0 = StateVector::new(0.0, default_initial_state());
                evolve_coupled(&proto, &u0, &basis, &opts, |e| {
                    push_sample(s, e);
                    Ok(ControlFlow::Continue(()))
                })
                .map(|_| ())
            },
            10.0,
        ),
        (
            &|s| {
                let mut opts = EvolveOptions::new(4.0, 0.01, tight(1e-10));
                opts.reorth_dt = 0.2;
                opts.probe = Some(vec![1.0, -1.0, 0.5]);
                let u0 = StateVector::new(0.0, k.random_initial_condition(0.3, 3));
                evolve_coupled(&k, &u0, &kbasis, &opts, |e| {
                    push_sample(s, e);
                    Ok(ControlFlow::Continue(()))
                })
                .map(|_| ())
            },
            0.5,
        ),
    ];
    for (run, window) in runs {
        let mut samples = Vec::new();
        run(&mut samples)?;
        let w = growth_bound_check(&samples, window, 1e-9)?;
        windows += w.len();
        margin = w.iter().fold(margin, |m, g| m.min(g.margin));
    }
    Ok((-margin, format!("{windows} windows, smallest margin {margin:.3e}")))
}

fn push_sample(s: &mut Vec<(f64, f64, f64, f64)>, e: &otd_core::otd::Emission<'_, f64>) {
    let l = &e.record.eigenvalues;
    s.push((e.record.t, l[0], l[l.len() - 1], e.record.probe_norm.expect("probe requested")));
}

fn energy_balance() -> Result<(f64, String), OtdError> {
    let k = small_kolmogorov()?;
    let u0 = StateVector::new(0.0, k.random_initial_condition(0.3, 7));
    let basis = OtdBasis::orthonormalized(&k, k.otd_initial_modes(1)?)?;
    let dt = 0.005;
    let opts = EvolveOptions::new(2.0, dt, tight(1e-12));
    let mut rows: Vec<[f64; 3]> = Vec::new();
    evolve_coupled(&k, &u0, &basis, &opts, |e| {
        let o = &e.record.observables;
        rows.push([o[0], o[1], o[2]]);
        Ok(ControlFlow::Continue(()))
    })?;
    let mut worst = 0.0f64;
    for i in 2..rows.len() - 2 {
        let de = (-rows[i + 2][0] + 8.0 * rows[i + 1][0] - 8.0 * rows[i - 1][0] + rows[i - 2][0]) / (12.0 * dt);
        worst = worst.max((de - (rows[i][2] - rows[i][1])).abs());
    }
    Ok((worst, format!("{} samples", rows.len())))
}

fn relative_fd_error<S: DynamicalSystem<f64>>(sys: &S, u: &[f64], v: &[f64], eps: f64) -> Result<f64, OtdError> {
    let jac = sys.jacobian_at(u)?;
    let mut jv = vec![0.0; sys.dim()];
    jac.apply(v, &mut jv)?;
    let fd = otd_core::dynsys::central_difference(sys, u, v, eps)?;
    let num: f64 = jv.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = jv.iter().map(|a| a * a).sum();
    Ok((num / den).sqrt())
}

fn jacobian_sweeps() -> Result<(f64, String), OtdError> {
    let mut rng = SeededStream::new(2024);
    let proto = prototype()?;
    let k = small_kolmogorov()?;
    let m = Mnls::new(MnlsParams::new(32.0 * std::f64::consts::PI, 256, 0.05, 0.2)?)?;
    let mut worst = [0.0f64; 3];
    for seed in 0..4u64 {
        let u = random_vector(&mut rng, 3);
        let v = random_vector(&mut rng, 3);
        worst[0] = worst[0].max(relative_fd_error(&proto, &u, &v, 1e-5)?);

        let u = k.random_initial_condition(0.5, seed);
        let v = k.random_initial_condition(1.0, seed + 100);
        worst[1] = worst[1].max(relative_fd_error(&k, &u, &v, 1e-4)?);

        let mut u = m.gaussian_initial_condition(seed);
        u.iter_mut().for_each(|x| *x *= 10.0);
        let v = m.gaussian_initial_condition(seed + 100);
        worst[2] = worst[2].max(relative_fd_error(&m, &u, &v, 1e-4)?);
    }
    let max = worst.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok((max, format!("prototype {:.1e}, kolmogorov {:.1e}, mnls {:.1e}", worst[0], worst[1], worst[2])))
}

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &xj)| xj * Complex64::from_polar(1.0, -std::f64::consts::TAU * ((j * k) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn dft_oracle() -> Result<(f64, String), OtdError> {
    let mut rng = SeededStream::new(99);
    let mut worst = 0.0f64;
    for n in [8usize, 48, 128] {
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        let naive = naive_dft(&x);
        let mut fast = x.clone();
        Fft1d::new(n).forward_in_place(&mut fast)?;
        let scale = naive.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = naive.iter().zip(&fast).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    Ok((worst, "sizes 8, 48, 128".into()))
}

fn eigensolver_oracle() -> Result<(f64, String), OtdError> {
    let mut rng = SeededStream::new(7);
    let mut worst = 0.0f64;
    for n in [2usize, 5, 12] {
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.normal();
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let eig = symmetric_eigs(&a, 1e-12)?;
        let scale = a.max_abs();
        for (c, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(c);
            let av = a.matvec(&v);
            let res = av.iter().zip(&v).map(|(x, y)| (x - lambda * y).abs()).fold(0.0, f64::max);
            worst = worst.max(res / scale);
        }
        let trace_err = (eig.values.iter().sum::<f64>() - a.trace()).abs() / scale;
        worst = worst.max(trace_err);
        if eig.values.windows(2).any(|w| w[0] < w[1]) {
            return Err(OtdError::Contract("eigenvalues not sorted descending".into()));
        }
    }
    Ok((worst, "residual and trace, sizes 2, 5, 12".into()))
}

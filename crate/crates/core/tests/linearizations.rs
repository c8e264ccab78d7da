use otd_core::dynsys::{central_difference, eval_linearized, DynamicalSystem, StateVector};
use otd_core::models::kolmogorov::{KolmogorovFlow, KolmogorovParams};
use otd_core::models::mnls::{Mnls, MnlsParams};
use otd_core::models::prototype::{Prototype, PrototypeParams};
use otd_core::scalar::max_abs;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff.iter().map(|x| x * x).sum::<f64>().sqrt() / na
}

fn forward_difference<S: DynamicalSystem<f64>>(sys: &S, u: &[f64], v: &[f64], eps: f64) -> Vec<f64> {
    let mut f0 = vec![0.0; sys.dim()];
    let mut f1 = vec![0.0; sys.dim()];
    let shifted: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    sys.rhs(u, &mut f0).unwrap();
    sys.rhs(&shifted, &mut f1).unwrap();
    f1.iter().zip(&f0).map(|(a, b)| (a - b) / eps).collect()
}

fn kolmogorov(n: usize, res: usize) -> KolmogorovFlow<f64> {
    KolmogorovFlow::new(KolmogorovParams::new(n, 40.0, res).unwrap()).unwrap()
}

#[test]
fn kolmogorov_linearization_matches_central_difference() {
    let k = kolmogorov(4, 32);
    let u: Vec<f64> = k
        .random_initial_condition(0.5, 3)
        .iter()
        .zip(k.laminar_state())
        .map(|(a, b)| a + 0.1 * b)
        .collect();
    let v = k.random_initial_condition(1.0, 4);
    let lin = eval_linearized(&k, &StateVector::new(0.0, u.clone()), &v).unwrap();
    let fd = central_difference(&k, &u, &v, 1e-4).unwrap();
    // the field is quadratic, so the central difference is exact up to round-off
    assert!(rel_err(&lin, &fd) < 1e-9, "{}", rel_err(&lin, &fd));
}

#[test]
fn kolmogorov_linearization_at_laminar_state() {
    let k = kolmogorov(1, 16);
    let u = k.laminar_state();
    let lin = eval_linearized(&k, &StateVector::new(0.0, u.clone()), &u).unwrap();
    let fd = central_difference(&k, &u, &u, 1e-3).unwrap();
    assert!(rel_err(&lin, &fd) < 1e-9);
}

#[test]
fn kolmogorov_tendency_is_divergence_free() {
    let k = kolmogorov(4, 32);
    let u = k.random_initial_condition(0.3, 8);
    assert!(k.divergence_ratio(&u) < 1e-12);
    let mut out = vec![0.0; k.dim()];
    k.rhs(&u, &mut out).unwrap();
    assert!(k.divergence_ratio(&out) < 1e-10);
}

#[test]
fn forcing_growth_rate_is_independent_of_state() {
    let k = kolmogorov(4, 32);
    let f = k.forcing();
    for seed in 0..4 {
        let u = k.random_initial_condition(0.2 + seed as f64, seed);
        let lf = eval_linearized(&k, &StateVector::new(0.0, u), &f).unwrap();
        let g = k.inner(&f, &lf);
        assert!((g + 16.0 * 2.0 * std::f64::consts::PI.powi(2) / 40.0).abs() < 1e-9, "{g}");
    }
}

#[test]
fn random_initial_condition_is_reproducible() {
    let k = kolmogorov(4, 32);
    let a = k.random_initial_condition(0.3, 5);
    assert_eq!(a, k.random_initial_condition(0.3, 5));
    assert_ne!(a, k.random_initial_condition(0.3, 6));
    assert!((k.diagnostics(&a).energy - 0.3).abs() < 1e-10);
}

fn mnls() -> Mnls<f64> {
    Mnls::new(MnlsParams::new(64.0 * std::f64::consts::PI, 256, 0.05, 0.2).unwrap()).unwrap()
}

fn scaled(v: Vec<f64>, s: f64) -> Vec<f64> {
    v.into_iter().map(|x| x * s).collect()
}

#[test]
fn mnls_linearization_matches_forward_difference() {
    let m = mnls();
    let u = scaled(m.gaussian_initial_condition(1), 4.0);
    let v = scaled(m.gaussian_initial_condition(2), 10.0);
    let lin = eval_linearized(&m, &StateVector::new(0.0, u.clone()), &v).unwrap();
    let fd = forward_difference(&m, &u, &v, 1e-6);
    assert!(rel_err(&lin, &fd) < 1e-4, "{}", rel_err(&lin, &fd));
    let cd = central_difference(&m, &u, &v, 1e-4).unwrap();
    assert!(rel_err(&lin, &cd) < 1e-6, "{}", rel_err(&lin, &cd));
}

#[test]
fn mnls_linearization_is_real_linear() {
    let m = mnls();
    let u = scaled(m.gaussian_initial_condition(1), 4.0);
    let v = m.gaussian_initial_condition(2);
    let w = m.gaussian_initial_condition(3);
    let st = StateVector::new(0.0, u);
    let (a, b) = (0.7, -1.3);
    let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
    let lc = eval_linearized(&m, &st, &combo).unwrap();
    let lv = eval_linearized(&m, &st, &v).unwrap();
    let lw = eval_linearized(&m, &st, &w).unwrap();
    let sum: Vec<f64> = lv.iter().zip(&lw).map(|(x, y)| a * x + b * y).collect();
    assert!(rel_err(&lc, &sum) < 1e-12);
    let zero = eval_linearized(&m, &st, &vec![0.0; m.dim()]).unwrap();
    assert_eq!(max_abs(&zero), 0.0);
}

#[test]
fn prototype_jacobian_matches_central_difference() {
    let p = Prototype::<f64>::new(PrototypeParams::default()).unwrap();
    for u in [[0.3f64, -0.2, 0.5], [-1.0, 0.0, 0.0], [0.1, 0.7, -0.4]] {
        for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, -0.3, 0.9]] {
            let lin = eval_linearized(&p, &StateVector::new(0.0, u.to_vec()), &v).unwrap();
            let fd = central_difference(&p, &u, &v, 1e-5).unwrap();
            assert!(lin.iter().zip(&fd).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }
}

use num_complex::Complex;
use proptest::prelude::*;

use otd_core::dmd::compute_dmd;
use otd_core::models::kolmogorov::{KolmogorovFlow, KolmogorovParams};
use otd_core::numerics::{gram_error, gram_schmidt, symmetric_eigs, DenseMatrix, Fft1d};
use otd_core::stats::{conditional_pdf, p_ee, running_future_max, Bins, PredictionWindow};
use otd_core::{DynamicalSystem, LinearOperator};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn symmetric(n: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = v[i * n + j];
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigs_preserve_trace_and_solve(m in (1usize..9).prop_flat_map(symmetric)) {
        let n = m.rows();
        let e = symmetric_eigs(&m, 1e-12).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - m.trace()).abs() <= 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..n {
            let v = e.vectors.column(i);
            let mv = m.matvec(&v);
            let r = mv.iter().zip(&v).fold(0.0f64, |acc, (a, b)| acc.max((a - e.values[i] * b).abs()));
            prop_assert!(r <= 1e-10, "residual {r:e}");
            for j in 0..n {
                let g = dot(&v, &e.vectors.column(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g - expected).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn fft_parseval_and_round_trip(
        log_n in 1u32..8,
        seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128),
    ) {
        let n = 1usize << log_n;
        let x: Vec<Complex<f64>> = seed[..n].iter().map(|&(a, b)| Complex::new(a, b)).collect();
        let fft = Fft1d::new(n);
        let mut y = x.clone();
        fft.forward_in_place(&mut y).unwrap();
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        prop_assert!((ex - ey).abs() <= 1e-12 * ex.max(1.0));
        fft.inverse_in_place(&mut y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-13);
        }
    }

    #[test]
    fn gram_schmidt_gives_identity_gram(
        dim in 2usize..10,
        raw in prop::collection::vec(-1.0f64..1.0, 90),
        k in 1usize..5,
    ) {
        let k = k.min(dim);
        let vs: Vec<Vec<f64>> = (0..k).map(|i| raw[i * dim..(i + 1) * dim].to_vec()).collect();
        if let Ok(q) = gram_schmidt(&vs, dot) {
            prop_assert!(gram_error(&q, dot) <= 1e-12);
        }
    }

    #[test]
    fn running_max_dominates_window(
        values in prop::collection::vec(-5.0f64..5.0, 10..200),
        t_i in 1usize..4,
        len in 1usize..4,
    ) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64 * 0.5).collect();
        let (a, b) = (t_i as f64 * 0.5, (t_i + len) as f64 * 0.5);
        let out = running_future_max(&times, &values, PredictionWindow::new(a, b).unwrap()).unwrap();
        for (i, &(t, q)) in out.iter().enumerate() {
            prop_assert_eq!(t, times[i]);
            let window = &values[i + t_i..=i + t_i + len];
            prop_assert!(window.iter().all(|&v| q >= v));
            prop_assert!(window.contains(&q));
        }
    }

    #[test]
    fn bin_index_is_in_range(lo in -10.0f64..10.0, width in 0.1f64..10.0, count in 1usize..60, x in -50.0f64..50.0) {
        let bins = Bins::uniform(lo, lo + width, count).unwrap();
        let i = bins.index(x);
        prop_assert!(i < count);
        if x >= lo && x < lo + width {
            prop_assert!(bins.edges[i] <= x && x <= bins.edges[i + 1] + 1e-12);
        }
    }

    #[test]
    fn p_ee_decreases_with_threshold(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 50..400),
        q1 in -0.2f64..1.2,
        q2 in -0.2f64..1.2,
    ) {
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let d = conditional_pdf(&pairs, Bins::uniform(0.0, 1.0, 5).unwrap(), Bins::uniform(0.0, 1.0, 10).unwrap()).unwrap();
        let a = p_ee(&d, lo, 1);
        let b = p_ee(&d, hi, 1);
        for (pa, pb) in a.probability.iter().zip(&b.probability) {
            if let (Some(pa), Some(pb)) = (pa, pb) {
                prop_assert!(*pb <= *pa + 1e-12);
                prop_assert!((0.0..=1.0).contains(pa));
            }
        }
    }

    #[test]
    fn dmd_recovers_diagonal_generator(
        rates in prop::collection::vec(0.3f64..1.0, 3),
        weights in prop::collection::vec(0.5f64..2.0, 3),
    ) {
        let mut r = rates.clone();
        r.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assume!(r.windows(2).all(|w| w[0] - w[1] > 0.05));
        let snaps: Vec<Vec<f64>> = (0..12)
            .map(|k| (0..3).map(|i| weights[i] * rates[i].powi(k)).collect())
            .collect();
        let d = compute_dmd(&snaps).unwrap();
        let mut ev: Vec<f64> = d.eigenvalues.iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(ev.len(), 3);
        for (e, x) in ev.iter().zip(&r) {
            prop_assert!((e - x).abs() <= 1e-7, "{ev:?} vs {r:?}");
        }
        prop_assert!(d.eigenvalues.iter().all(|z| z.im.abs() <= 1e-7));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kolmogorov_jacobian_is_linear(s in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let k: KolmogorovFlow<f64> = KolmogorovFlow::new(KolmogorovParams::new(4, 40.0, 16).unwrap()).unwrap();
        let u = k.random_initial_condition(0.5, s);
        let v = k.random_initial_condition(1.0, s + 1);
        let w = k.random_initial_condition(1.0, s + 2);
        let jac = k.jacobian_at(&u).unwrap();
        let apply = |x: &[f64]| {
            let mut out = vec![0.0; x.len()];
            jac.apply(x, &mut out).unwrap();
            out
        };
        let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = apply(&combo);
        let (lv, lw) = (apply(&v), apply(&w));
        let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - a * lv[i] - b * lw[i]).abs() <= 1e-12 * scale);
        }
    }
}

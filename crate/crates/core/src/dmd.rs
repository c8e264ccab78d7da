//! Dynamic mode decomposition of uniformly spaced snapshot sequences, and the
//! restriction of a linearized operator to the span of the dominant modes.
//!
//! The decomposition follows the projected (Schmid) variant: the economy SVD of
//! `X1 = [x_0 .. x_{m-2}]` is obtained from the eigen-decomposition of the
//! Gram matrix `X1^T X1`, the companion operator is `A = U^T X2 V S^-1`, and
//! DMD modes are `U w` for the eigenvectors `w` of `A`. Eigenvalues of the
//! non-symmetric companion come from a complex Schur form.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::dynsys::{DynamicalSystem, StateVector};
use crate::error::{OtdError, Result};
use crate::numerics::{gram_schmidt, symmetric_eigs, DenseMatrix};
use crate::otd::{reduced_with, ReducedOperator};
use crate::scalar::{dot, Scalar};

type C64 = Complex<f64>;

/// Singular values below this fraction of the largest are truncated.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DmdResult<T> {
    /// Ritz values of the companion operator.
    pub eigenvalues: Vec<Complex<T>>,
    /// Least-squares amplitudes of the modes against the first snapshot.
    pub amplitudes: Vec<Complex<T>>,
    /// Retained singular values of `X1`, descending.
    pub singular_values: Vec<T>,
    /// Left singular vectors (POD basis) of `X1`.
    pub basis: Vec<Vec<T>>,
    /// Eigenvectors of the companion operator in the POD basis, unit length.
    pub coefficients: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> DmdResult<T> {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// DMD mode `i` as a complex field.
    pub fn mode(&self, i: usize) -> Vec<Complex<T>> {
        let n = self.basis.first().map_or(0, Vec::len);
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for (u, &w) in self.basis.iter().zip(&self.coefficients[i]) {
            for (o, &x) in out.iter_mut().zip(u) {
                *o += w * x;
            }
        }
        out
    }

    /// `sum_i b_i phi_i`, which approximates the first snapshot.
    pub fn reconstruct_first(&self) -> Vec<Complex<T>> {
        let n = self.basis.first().map_or(0, Vec::len);
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for i in 0..self.len() {
            for (o, m) in out.iter_mut().zip(self.mode(i)) {
                *o += m * self.amplitudes[i];
            }
        }
        out
    }
}

fn to_c<T: Scalar>(z: C64) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// Eigenvalues and unit eigenvectors (columns) of a real square matrix.
fn eig_general(a: &DMatrix<f64>) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let r = a.nrows();
    let ac: DMatrix<C64> = a.map(|x| C64::new(x, 0.0));
    let schur = nalgebra::Schur::try_new(ac, f64::EPSILON, 10_000)
        .ok_or_else(|| OtdError::Contract("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let floor = scale * f64::EPSILON;
    let values: Vec<C64> = (0..r).map(|i| t[(i, i)]).collect();
    let mut y = DMatrix::<C64>::zeros(r, r);
    for k in 0..r {
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - t[(k, k)];
            if d.norm() < floor {
                d = C64::new(floor, 0.0);
            }
            y[(i, k)] = -s / d;
        }
    }
    let mut x = q * y;
    for mut col in x.column_iter_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.iter_mut().for_each(|z| *z /= n);
    }
    Ok((values, x))
}

/// Projected DMD of a snapshot sequence `x_0, ..., x_{m-1}`.
pub fn compute_dmd<T: Scalar>(snapshots: &[Vec<T>]) -> Result<DmdResult<T>> {
    let m = snapshots.len();
    if m < 2 {
        return Err(OtdError::Contract(format!("DMD needs at least 2 snapshots, got {m}")));
    }
    let n = snapshots[0].len();
    if n == 0 || snapshots.iter().any(|s| s.len() != n) {
        return Err(OtdError::Contract("snapshots must share a nonzero length".into()));
    }
    let x1 = &snapshots[..m - 1];
    let x2 = &snapshots[1..];
    let k = m - 1;
    let mut gram = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let g = dot(&x1[i], &x1[j]);
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = symmetric_eigs(&gram, T::lit(1e-12))?;
    let lmax = eig.values[0];
    // the Gram route cannot resolve singular values below its round-off floor
    let noise = lmax * T::lit(f64::EPSILON) * T::from_usize_lossy(k);
    let smax = lmax.max(T::zero()).sqrt();
    let keep: Vec<usize> = (0..k)
        .filter(|&i| {
            let l = eig.values[i];
            l > noise && l.sqrt() > T::lit(RANK_TOL) * smax
        })
        .collect();
    let r = keep.len();
    if r == 0 {
        return Err(OtdError::RankCollapse { rank: 0, needed: 1 });
    }
    let sigma: Vec<T> = keep.iter().map(|&i| eig.values[i].sqrt()).collect();
    let vcol = |c: usize| eig.vectors.column(keep[c]);
    let combine = |xs: &[Vec<T>], w: &[T]| {
        let mut out = vec![T::zero(); n];
        for (x, &c) in xs.iter().zip(w) {
            for (o, &v) in out.iter_mut().zip(x) {
                *o += c * v;
            }
        }
        out
    };
    let basis: Vec<Vec<T>> = (0..r)
        .map(|c| {
            let s = sigma[c].recip();
            combine(x1, &vcol(c)).into_iter().map(|v| v * s).collect()
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(r, r);
    for j in 0..r {
        let y = combine(x2, &vcol(j));
        for i in 0..r {
            a[(i, j)] = (dot(&basis[i], &y) / sigma[j]).to_f64_lossy();
        }
    }
    let (values, w) = eig_general(&a)?;
    // U^T x_0 = S V^T e_0
    let proj = nalgebra::DVector::<C64>::from_iterator(
        r,
        (0..r).map(|c| C64::new((sigma[c] * vcol(c)[0]).to_f64_lossy(), 0.0)),
    );
    let b = w
        .clone()
        .lu()
        .solve(&proj)
        .ok_or(OtdError::RankCollapse { rank: r, needed: r })?;
    Ok(DmdResult {
        eigenvalues: values.into_iter().map(to_c).collect(),
        amplitudes: b.iter().map(|&z| to_c(z)).collect(),
        singular_values: sigma,
        basis,
        coefficients: (0..r).map(|c| w.column(c).iter().map(|&z| to_c(z)).collect()).collect(),
    })
}

/// Ordering used to pick the dominant DMD modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DmdRanking {
    /// Largest `|b_i|` first, ties broken by `|lambda_i|`.
    #[default]
    Amplitude,
    /// Largest `|lambda_i|` first, ties broken by `|b_i|`.
    RitzModulus,
}

/// Indices of the modes in dominance order.
pub fn rank_modes<T: Scalar>(dmd: &DmdResult<T>, ranking: DmdRanking) -> Vec<usize> {
    let key = |i: usize| {
        let b = dmd.amplitudes[i].norm().to_f64_lossy();
        let l = dmd.eigenvalues[i].norm().to_f64_lossy();
        match ranking {
            DmdRanking::Amplitude => (b, l),
            DmdRanking::RitzModulus => (l, b),
        }
    };
    let mut idx: Vec<usize> = (0..dmd.len()).collect();
    idx.sort_by(|&i, &j| key(j).partial_cmp(&key(i)).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Orthonormal real basis of dimension `count` spanned by the real and
/// imaginary parts of the dominant modes. A complex-conjugate pair
/// contributes one (real, imaginary) pair of directions.
pub fn dmd_subspace<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    dmd: &DmdResult<T>,
    count: usize,
    ranking: DmdRanking,
) -> Result<Vec<Vec<T>>> {
    if count == 0 {
        return Err(OtdError::Contract("DMD subspace dimension must be positive".into()));
    }
    let order = rank_modes(dmd, ranking);
    let mut used = vec![false; dmd.len()];
    let mut vectors: Vec<Vec<T>> = Vec::with_capacity(count + 1);
    for &i in &order {
        if vectors.len() >= count {
            break;
        }
        if used[i] {
            continue;
        }
        used[i] = true;
        let lam = dmd.eigenvalues[i];
        let mode = dmd.mode(i);
        vectors.push(mode.iter().map(|z| z.re).collect());
        let complex = lam.im.abs() > T::lit(1e-10) * lam.norm().max(T::lit(1e-300));
        if complex {
            vectors.push(mode.iter().map(|z| z.im).collect());
            let target = lam.conj();
            let partner = (0..dmd.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| {
                    let da = (dmd.eigenvalues[a] - target).norm();
                    let db = (dmd.eigenvalues[b] - target).norm();
                    da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                });
            if let Some(j) = partner {
                used[j] = true;
            }
        }
    }
    if vectors.len() < count {
        return Err(OtdError::RankCollapse {
            rank: vectors.len(),
            needed: count,
        });
    }
    vectors.truncate(count);
    gram_schmidt(&vectors, |a, b| sys.inner(a, b))
}

/// `L_u` restricted to the span of the `count` dominant DMD modes.
pub fn reduce_to_dmd_subspace<T: Scalar, S: DynamicalSystem<T>>(
    sys: &S,
    u: &StateVector<T>,
    dmd: &DmdResult<T>,
    count: usize,
    ranking: DmdRanking,
) -> Result<ReducedOperator<T>> {
    let basis = dmd_subspace(sys, dmd, count, ranking)?;
    let jac = sys.jacobian_at(&u.data)?;
    reduced_with(sys, &jac, &basis, u.time)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_sequence(a: &[[f64; 2]; 2], x0: [f64; 2], m: usize) -> Vec<Vec<f64>> {
        let mut out = vec![x0.to_vec()];
        for _ in 1..m {
            let x = out.last().unwrap();
            out.push(vec![
                a[0][0] * x[0] + a[0][1] * x[1],
                a[1][0] * x[0] + a[1][1] * x[1],
            ]);
        }
        out
    }

    fn sorted_re(d: &DmdResult<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = d.eigenvalues.iter().map(|z| z.re).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    #[test]
    fn diagonal_generator() {
        let snaps = linear_sequence(&[[0.9, 0.0], [0.0, 0.5]], [1.0, 0.7], 6);
        let d = compute_dmd(&snaps).unwrap();
        let ev = sorted_re(&d);
        assert!((ev[0] - 0.9).abs() < 1e-8 && (ev[1] - 0.5).abs() < 1e-8, "{ev:?}");
        assert!(d.eigenvalues.iter().all(|z| z.im.abs() < 1e-10));
        let rec = d.reconstruct_first();
        assert!((rec[0].re - 1.0).abs() < 1e-8 && (rec[1].re - 0.7).abs() < 1e-8);
        assert!(rec.iter().all(|z| z.im.abs() < 1e-8));
    }

    #[test]
    fn rotation_gives_conjugate_pair() {
        let (c, s) = (0.3f64.cos() * 0.95, 0.3f64.sin() * 0.95);
        let snaps = linear_sequence(&[[c, -s], [s, c]], [1.0, 0.0], 8);
        let d = compute_dmd(&snaps).unwrap();
        assert_eq!(d.len(), 2);
        for z in &d.eigenvalues {
            assert!((z.norm() - 0.95).abs() < 1e-8);
            assert!((z.im.abs() - 0.3f64.sin() * 0.95).abs() < 1e-8);
        }
    }

    #[test]
    fn stationary_sequence() {
        let snaps = vec![vec![1.0, 2.0, 3.0]; 5];
        let d = compute_dmd(&snaps).unwrap();
        assert_eq!(d.rank(), 1);
        assert!((d.eigenvalues[0] - Complex::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(compute_dmd::<f64>(&[vec![1.0]]).is_err());
        assert!(matches!(
            compute_dmd(&vec![vec![0.0, 0.0]; 4]),
            Err(OtdError::RankCollapse { .. })
        ));
    }

    #[test]
    fn ranking_orders() {
        let snaps = linear_sequence(&[[0.9, 0.0], [0.0, 0.5]], [0.1, 5.0], 6);
        let d = compute_dmd(&snaps).unwrap();
        let by_amp = rank_modes(&d, DmdRanking::Amplitude);
        let by_ritz = rank_modes(&d, DmdRanking::RitzModulus);
        assert!((d.eigenvalues[by_amp[0]].re - 0.5).abs() < 1e-8);
        assert!((d.eigenvalues[by_ritz[0]].re - 0.9).abs() < 1e-8);
    }
}

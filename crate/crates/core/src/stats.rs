//! Conditional statistics for scoring an indicator `alpha(t)` as a predictor
//! of a future running maximum `q_bar(t) = max q` over `[t + t_i, t + t_f]`.

use std::collections::VecDeque;

use crate::error::{OtdError, Result};
use crate::scalar::Scalar;

/// Offsets `(t_i, t_f)` of the future window, `0 < t_i < t_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionWindow<T> {
    pub t_i: T,
    pub t_f: T,
}

impl<T: Scalar> PredictionWindow<T> {
    pub fn new(t_i: T, t_f: T) -> Result<Self> {
        if t_i > T::zero() && t_f > t_i {
            Ok(Self { t_i, t_f })
        } else {
            Err(OtdError::Contract(format!("prediction window needs 0 < t_i < t_f, got ({t_i}, {t_f})")))
        }
    }
}

fn grid_offset<T: Scalar>(offset: T, dt: T) -> Result<usize> {
    let steps = offset / dt;
    let rounded = steps.round();
    if (steps - rounded).abs() > T::lit(1e-6) * rounded.max(T::one()) {
        return Err(OtdError::Contract(format!(
            "window offset {offset} is not a multiple of the sampling step {dt}"
        )));
    }
    Ok(rounded.to_usize().unwrap_or(0))
}

/// Future running maximum of a uniformly sampled series. Returns the pairs
/// `(t, q_bar(t))` for every sample whose full window lies inside the series.
pub fn running_future_max<T: Scalar>(
    times: &[T],
    values: &[T],
    window: PredictionWindow<T>,
) -> Result<Vec<(T, T)>> {
    if times.len() != values.len() {
        return Err(OtdError::Contract("times and values differ in length".into()));
    }
    if times.len() < 2 {
        log::warn!("series of {} samples is too short for a prediction window", times.len());
        return Ok(Vec::new());
    }
    let dt = times[1] - times[0];
    if !(dt > T::zero()) {
        return Err(OtdError::Contract("sample times must increase".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let tol = T::lit(1e-6) * span.max(T::one());
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= tol);
    if !uniform {
        return Err(OtdError::Contract("series is not uniformly sampled".into()));
    }
    let lo = grid_offset(window.t_i, dt)?;
    let hi = grid_offset(window.t_f, dt)?;
    let n = values.len();
    if hi >= n {
        log::warn!("prediction window ({}, {}) exceeds series span", window.t_i, window.t_f);
        return Ok(Vec::new());
    }
    // sliding maximum over indices [i + lo, i + hi]
    let mut out = Vec::with_capacity(n - hi);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = lo;
    for i in 0..n - hi {
        while next <= i + hi {
            while deque.back().is_some_and(|&b| values[b] <= values[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&f| f < i + lo) {
            deque.pop_front();
        }
        out.push((times[i], values[*deque.front().expect("window is nonempty")]));
    }
    Ok(out)
}

/// Linear-interpolated percentile (`p` in `[0, 100]`) of unsorted data.
pub fn percentile<T: Scalar>(data: &[T], p: f64) -> Result<T> {
    if data.is_empty() {
        return Err(OtdError::Empty("percentile of no data".into()));
    }
    let mut s = data.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = (p.clamp(0.0, 100.0) / 100.0) * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(s.len() - 1);
    let w = T::lit(pos - i as f64);
    Ok(s[i] + (s[j] - s[i]) * w)
}

/// Uniform bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins<T> {
    pub edges: Vec<T>,
}

impl<T: Scalar> Bins<T> {
    pub fn uniform(lo: T, hi: T, count: usize) -> Result<Self> {
        if count == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(OtdError::Contract(format!("cannot bin [{lo}, {hi}] into {count} bins")));
        }
        let w = (hi - lo) / T::from_usize_lossy(count);
        let mut edges: Vec<T> = (0..count).map(|i| lo + w * T::from_usize_lossy(i)).collect();
        edges.push(hi);
        Ok(Self { edges })
    }

    /// Bins over `[P_lo, P_hi]` percentiles of the data.
    pub fn percentile_range(data: &[T], count: usize, lo_pct: f64, hi_pct: f64) -> Result<Self> {
        let lo = percentile(data, lo_pct)?;
        let hi = percentile(data, hi_pct)?;
        Self::uniform(lo, hi, count)
    }

    /// Bins over the full data range.
    pub fn spanning(data: &[T], count: usize) -> Result<Self> {
        Self::percentile_range(data, count, 0.0, 100.0)
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn width(&self, i: usize) -> T {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn center(&self, i: usize) -> T {
        (self.edges[i] + self.edges[i + 1]) * T::lit(0.5)
    }

    /// Bin of `x`, with values outside the edges clamped into the end bins.
    pub fn index(&self, x: T) -> usize {
        let n = self.count();
        let lo = self.edges[0];
        let w = (self.edges[n] - lo) / T::from_usize_lossy(n);
        let f = ((x - lo) / w).floor();
        if f < T::zero() {
            0
        } else {
            f.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }
}

/// Histogram estimate of `p(q_bar | alpha)` and of the `alpha` marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDensity<T> {
    pub alpha_bins: Bins<T>,
    pub q_bins: Bins<T>,
    /// `counts[a][q]`.
    pub counts: Vec<Vec<usize>>,
    /// Samples per alpha column.
    pub column_counts: Vec<usize>,
    /// `p(q_bar | alpha)` per column; `None` for empty columns.
    pub conditional: Vec<Option<Vec<T>>>,
    pub alpha_marginal: Vec<T>,
    pub total: usize,
}

/// Bins `(alpha, q_bar)` pairs and normalizes each alpha column.
pub fn conditional_pdf<T: Scalar>(
    pairs: &[(T, T)],
    alpha_bins: Bins<T>,
    q_bins: Bins<T>,
) -> Result<ConditionalDensity<T>> {
    if pairs.is_empty() {
        return Err(OtdError::Empty("conditional density of no samples".into()));
    }
    let (na, nq) = (alpha_bins.count(), q_bins.count());
    let mut counts = vec![vec![0usize; nq]; na];
    for &(a, q) in pairs {
        if !a.is_finite() || !q.is_finite() {
            return Err(OtdError::Contract("non-finite sample in conditional density".into()));
        }
        counts[alpha_bins.index(a)][q_bins.index(q)] += 1;
    }
    let total = pairs.len();
    let column_counts: Vec<usize> = counts.iter().map(|c| c.iter().sum()).collect();
    let conditional = counts
        .iter()
        .zip(&column_counts)
        .map(|(col, &n)| {
            (n > 0).then(|| {
                col.iter()
                    .enumerate()
                    .map(|(k, &c)| T::from_usize_lossy(c) / (T::from_usize_lossy(n) * q_bins.width(k)))
                    .collect()
            })
        })
        .collect();
    let alpha_marginal = column_counts
        .iter()
        .enumerate()
        .map(|(j, &n)| T::from_usize_lossy(n) / (T::from_usize_lossy(total) * alpha_bins.width(j)))
        .collect();
    Ok(ConditionalDensity {
        alpha_bins,
        q_bins,
        counts,
        column_counts,
        conditional,
        alpha_marginal,
        total,
    })
}

impl<T: Scalar> ConditionalDensity<T> {
    /// Joint density `p(alpha, q_bar)` in bin `(a, q)`.
    pub fn joint(&self, a: usize, q: usize) -> T {
        T::from_usize_lossy(self.counts[a][q])
            / (T::from_usize_lossy(self.total) * self.alpha_bins.width(a) * self.q_bins.width(q))
    }

    /// Bin-width weighted integral of each nonempty column.
    pub fn column_integrals(&self) -> Vec<Option<T>> {
        self.conditional
            .iter()
            .map(|c| {
                c.as_ref().map(|col| {
                    col.iter()
                        .enumerate()
                        .map(|(k, &p)| p * self.q_bins.width(k))
                        .sum()
                })
            })
            .collect()
    }

    /// Conditional densities smoothed along `q_bar` with a Gaussian kernel of
    /// `bandwidth` bins, renormalized per column.
    pub fn smoothed(&self, bandwidth: f64) -> Vec<Option<Vec<T>>> {
        let nq = self.q_bins.count();
        let reach = (3.0 * bandwidth).ceil() as isize;
        self.conditional
            .iter()
            .map(|c| {
                c.as_ref().map(|col| {
                    let mut out: Vec<T> = (0..nq as isize)
                        .map(|k| {
                            let mut acc = T::zero();
                            let mut wsum = T::zero();
                            for d in -reach..=reach {
                                let j = k + d;
                                if j < 0 || j >= nq as isize {
                                    continue;
                                }
                                let w = T::lit((-0.5 * (d as f64 / bandwidth).powi(2)).exp());
                                acc += w * col[j as usize];
                                wsum += w;
                            }
                            acc / wsum
                        })
                        .collect();
                    let total: T = out.iter().enumerate().map(|(k, &p)| p * self.q_bins.width(k)).sum();
                    if total > T::zero() {
                        out.iter_mut().for_each(|p| *p /= total);
                    }
                    out
                })
            })
            .collect()
    }
}

/// Extreme-event probability per alpha bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PeeCurve<T> {
    pub alpha: Vec<T>,
    /// `None` where the column holds fewer than the minimum sample count.
    pub probability: Vec<Option<T>>,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub std_error: Vec<Option<T>>,
    pub counts: Vec<usize>,
}

impl<T: Scalar> PeeCurve<T> {
    /// `(alpha, P_EE, standard error)` for the reported bins.
    pub fn populated(&self) -> Vec<(T, T, T)> {
        self.alpha
            .iter()
            .zip(&self.probability)
            .zip(&self.std_error)
            .filter_map(|((&a, p), e)| Some((a, (*p)?, (*e)?)))
            .collect()
    }
}

/// Default minimum number of samples in an alpha column for a reported value.
pub const MIN_COLUMN_COUNT: usize = 20;

/// `P_EE(alpha) = int_{q_c}^inf p(q_bar | alpha) dq_bar`, integrating the
/// piecewise-constant density exactly (a partial bin at `q_c` counts by its
/// overlap).
pub fn p_ee<T: Scalar>(density: &ConditionalDensity<T>, q_c: T, min_count: usize) -> PeeCurve<T> {
    let bins = &density.q_bins;
    let na = density.alpha_bins.count();
    let mut probability = Vec::with_capacity(na);
    let mut std_error = Vec::with_capacity(na);
    for j in 0..na {
        let n = density.column_counts[j];
        let p = match &density.conditional[j] {
            Some(col) if n >= min_count.max(1) => {
                let tail: T = (0..bins.count())
                    .map(|k| {
                        let (lo, hi) = (bins.edges[k], bins.edges[k + 1]);
                        let overlap = (hi - lo.max(q_c)).max(T::zero()).min(hi - lo);
                        col[k] * overlap
                    })
                    .sum();
                Some(tail.max(T::zero()).min(T::one()))
            }
            _ => None,
        };
        std_error.push(p.map(|p| (p * (T::one() - p) / T::from_usize_lossy(n)).sqrt()));
        probability.push(p);
    }
    PeeCurve {
        alpha: (0..na).map(|j| density.alpha_bins.center(j)).collect(),
        probability,
        std_error,
        counts: density.column_counts.clone(),
    }
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`; empty when an interval is reversed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    pub x: (T, T),
    pub y: (T, T),
}

impl<T: Scalar> Region<T> {
    /// `x <= x_max` and `y <= y_max`.
    pub fn below(x_max: T, y_max: T) -> Self {
        Self {
            x: (T::neg_infinity(), x_max),
            y: (T::neg_infinity(), y_max),
        }
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        self.x.0 <= x && x <= self.x.1 && self.y.0 <= y && y <= self.y.1
    }
}

/// Fraction of `(x, y)` records that fall inside `region`.
pub fn event_fraction<T: Scalar>(points: &[(T, T)], region: &Region<T>) -> Result<T> {
    if points.is_empty() {
        return Err(OtdError::Empty("event fraction of no records".into()));
    }
    let inside = points.iter().filter(|&&(x, y)| region.contains(x, y)).count();
    Ok(T::from_usize_lossy(inside) / T::from_usize_lossy(points.len()))
}

/// Fraction of values at or above `threshold`.
pub fn exceedance_fraction<T: Scalar>(values: &[T], threshold: T) -> Result<T> {
    if values.is_empty() {
        return Err(OtdError::Empty("exceedance of no records".into()));
    }
    let n = values.iter().filter(|&&v| v >= threshold).count();
    Ok(T::from_usize_lossy(n) / T::from_usize_lossy(values.len()))
}

fn ranks<T: Scalar>(x: &[T]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties); `NaN` when either
/// input is constant.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(OtdError::Contract("rank correlation needs two equal series of length >= 2".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// True when each step of `values` decreases by at most `k` combined
/// standard errors.
pub fn monotone_within_error<T: Scalar>(values: &[T], std_error: &[T], k: T) -> bool {
    values.windows(2).zip(std_error.windows(2)).all(|(v, e)| {
        let allowed = k * (e[0] * e[0] + e[1] * e[1]).sqrt();
        v[1] >= v[0] - allowed
    })
}

/// First `alpha` at which a piecewise-linear curve reaches `level`.
pub fn first_crossing<T: Scalar>(points: &[(T, T)], level: T) -> Option<T> {
    if let Some(&(a, p)) = points.first() {
        if p >= level {
            return Some(a);
        }
    }
    points.windows(2).find_map(|w| {
        let ((a0, p0), (a1, p1)) = (w[0], w[1]);
        (p0 < level && p1 >= level).then(|| a0 + (a1 - a0) * (level - p0) / (p1 - p0))
    })
}

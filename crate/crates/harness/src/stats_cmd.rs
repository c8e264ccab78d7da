//! Conditional densities and extreme-event probability curves from record files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use otd_core::stats::{conditional_pdf, p_ee, percentile, running_future_max, spearman, Bins, PeeCurve, PredictionWindow, MIN_COLUMN_COUNT};
use otd_core::ConditionalDensity;

use crate::error::HarnessError;
use crate::records::RecordTable;
use crate::run::RECORDS_FILE;

#[derive(Debug, Clone, PartialEq)]
pub struct StatsOptions {
    /// Column used as the indicator `alpha`.
    pub indicator: String,
    /// Column whose future running maximum is predicted.
    pub observable: String,
    pub t_i: f64,
    pub t_f: f64,
    /// Extreme-event threshold on the running maximum.
    pub threshold: f64,
    pub alpha_bins: usize,
    pub q_bins: usize,
    /// Percentile range of the indicator covered by the alpha bins.
    pub alpha_range: (f64, f64),
    /// Records before this time are ignored.
    pub t_min: f64,
    pub min_count: usize,
    /// File looked up inside directories given as inputs.
    pub records_name: String,
}

impl StatsOptions {
    pub fn new(indicator: &str, observable: &str, t_i: f64, t_f: f64, threshold: f64) -> Self {
        Self {
            indicator: indicator.to_string(),
            observable: observable.to_string(),
            t_i,
            t_f,
            threshold,
            alpha_bins: 50,
            q_bins: 50,
            alpha_range: (0.5, 99.5),
            t_min: f64::NEG_INFINITY,
            min_count: MIN_COLUMN_COUNT,
            records_name: RECORDS_FILE.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StatsResult {
    pub files: Vec<PathBuf>,
    /// `(alpha, q_bar)` pairs pooled over all files.
    pub pairs: Vec<(f64, f64)>,
    pub density: ConditionalDensity,
    pub pee: PeeCurve<f64>,
}

impl StatsResult {
    /// Spearman correlation between bin centre and `P_EE` over the reported bins.
    pub fn rank_correlation(&self) -> f64 {
        let pts = self.pee.populated();
        if pts.len() < 2 {
            return f64::NAN;
        }
        let a: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let p: Vec<f64> = pts.iter().map(|p| p.1).collect();
        spearman(&a, &p).unwrap_or(f64::NAN)
    }
}

/// Expands directories into the record files they hold: the directory's own
/// `records_name`, or that file inside each `traj_*` subdirectory.
pub fn expand_inputs(inputs: &[PathBuf], records_name: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files = Vec::new();
    for input in inputs {
        if !input.is_dir() {
            files.push(input.clone());
            continue;
        }
        let direct = input.join(records_name);
        if direct.is_file() {
            files.push(direct);
            continue;
        }
        let mut subs: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| HarnessError::io(input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("traj_")))
            .map(|p| p.join(records_name))
            .filter(|p| p.is_file())
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(HarnessError::Usage(format!("{}: no {records_name} found", input.display())));
        }
        files.extend(subs);
    }
    if files.is_empty() {
        return Err(HarnessError::Usage("no record files given".into()));
    }
    Ok(files)
}

/// `(alpha(t), q_bar(t))` pairs of one file.
pub fn file_pairs(path: &Path, opts: &StatsOptions) -> Result<Vec<(f64, f64)>, HarnessError> {
    let table = RecordTable::read(path)?.after(opts.t_min);
    let alpha = table.column(&opts.indicator)?;
    let q = table.column(&opts.observable)?;
    let times = table.times();
    let window = PredictionWindow::new(opts.t_i, opts.t_f)?;
    let qbar = running_future_max(&times, &q, window).map_err(|e| HarnessError::schema(path, &e.to_string()))?;
    Ok(qbar.iter().zip(&alpha).map(|(&(_, qb), &a)| (a, qb)).collect())
}

/// Bins over a percentile range; a degenerate range becomes one narrow bin.
fn bins_for(data: &[f64], count: usize, lo_pct: f64, hi_pct: f64) -> Result<Bins<f64>, HarnessError> {
    let lo = percentile(data, lo_pct)?;
    let hi = percentile(data, hi_pct)?;
    if hi > lo {
        Ok(Bins::uniform(lo, hi, count)?)
    } else {
        let d = 1e-9 * lo.abs().max(1.0);
        Ok(Bins::uniform(lo - d, lo + d, 1)?)
    }
}

pub fn compute_stats(inputs: &[PathBuf], opts: &StatsOptions) -> Result<StatsResult, HarnessError> {
    let files = expand_inputs(inputs, &opts.records_name)?;
    let mut header: Option<(PathBuf, Vec<String>)> = None;
    let mut pairs = Vec::new();
    for f in &files {
        let cols = RecordTable::read(f)?.columns;
        match &header {
            None => header = Some((f.clone(), cols)),
            Some((first, h)) if *h != cols => {
                return Err(HarnessError::schema(
                    f,
                    &format!("columns differ from {}", first.display()),
                ))
            }
            _ => {}
        }
        pairs.extend(file_pairs(f, opts)?);
    }
    if pairs.is_empty() {
        return Err(HarnessError::Usage("no samples with a complete prediction window".into()));
    }
    let alphas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let qs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let alpha_bins = bins_for(&alphas, opts.alpha_bins, opts.alpha_range.0, opts.alpha_range.1)?;
    let q_bins = bins_for(&qs, opts.q_bins, 0.0, 100.0)?;
    let density = conditional_pdf(&pairs, alpha_bins, q_bins)?;
    let pee = p_ee(&density, opts.threshold, opts.min_count);
    Ok(StatsResult {
        files,
        pairs,
        density,
        pee,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

/// `alpha_lo,alpha_hi,q_lo,q_hi,density,joint,count`; empty columns hold `nan`.
pub fn density_csv(d: &ConditionalDensity) -> String {
    let mut s = String::from("alpha_lo,alpha_hi,q_lo,q_hi,density,joint,count\n");
    for a in 0..d.alpha_bins.count() {
        for q in 0..d.q_bins.count() {
            let cond = d.conditional[a].as_ref().map(|c| c[q]);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                d.alpha_bins.edges[a],
                d.alpha_bins.edges[a + 1],
                d.q_bins.edges[q],
                d.q_bins.edges[q + 1],
                opt(cond),
                d.joint(a, q),
                d.counts[a][q]
            );
        }
    }
    s
}

/// `alpha,p_ee,std_error,count`; bins below the occupancy minimum hold `nan`.
pub fn pee_csv(p: &PeeCurve<f64>) -> String {
    let mut s = String::from("alpha,p_ee,std_error,count\n");
    for i in 0..p.alpha.len() {
        let _ = writeln!(s, "{},{},{},{}", p.alpha[i], opt(p.probability[i]), opt(p.std_error[i]), p.counts[i]);
    }
    s
}

/// Runs the pipeline and writes `density.csv` and `pee.csv` into `out`.
pub fn stats_command(inputs: &[PathBuf], opts: &StatsOptions, out: &Path) -> Result<StatsResult, HarnessError> {
    let result = compute_stats(inputs, opts)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let dpath = out.join("density.csv");
    std::fs::write(&dpath, density_csv(&result.density)).map_err(|e| HarnessError::io(&dpath, e))?;
    let ppath = out.join("pee.csv");
    std::fs::write(&ppath, pee_csv(&result.pee)).map_err(|e| HarnessError::io(&ppath, e))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{RecordWriter, Source};

    fn write_series(path: &Path, f: impl Fn(usize) -> (f64, f64)) {
        let mut w = RecordWriter::create(path, &["q".into(), "lambda_1".into()], Source::Otd).unwrap();
        for i in 0..2000 {
            let (q, a) = f(i);
            w.write(i as f64 * 0.5, &[q, a]).unwrap();
        }
    }

    #[test]
    fn constant_observable_gives_degenerate_density() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_series(&path, |i| (0.7, (i % 37) as f64));
        let mut opts = StatsOptions::new("lambda_1", "q", 1.0, 2.0, 0.5);
        opts.alpha_bins = 5;
        let r = compute_stats(&[path.clone()], &opts).unwrap();
        assert_eq!(r.density.q_bins.count(), 1);
        assert!(r.pee.populated().iter().all(|p| p.1 == 1.0));
        opts.threshold = 0.9;
        let r = compute_stats(&[path], &opts).unwrap();
        assert!(r.pee.populated().iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn missing_indicator_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_series(&path, |i| (i as f64, 0.0));
        let opts = StatsOptions::new("lambda_3", "q", 1.0, 2.0, 0.5);
        let err = compute_stats(&[path], &opts).unwrap_err();
        assert!(matches!(err, HarnessError::Schema { .. }));
        assert!(err.to_string().contains("records.csv") && err.to_string().contains("lambda_3"));
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_series(&path, |i| (((i * 7919) % 1000) as f64 / 1000.0, ((i * 104729) % 997) as f64));
        let opts = StatsOptions::new("lambda_1", "q", 1.0, 2.0, 0.5);
        let r = stats_command(&[dir.path().to_path_buf()], &opts, &dir.path().join("stats")).unwrap();
        let pee = std::fs::read_to_string(dir.path().join("stats/pee.csv")).unwrap();
        assert_eq!(pee.lines().count(), 51);
        let density = std::fs::read_to_string(dir.path().join("stats/density.csv")).unwrap();
        assert_eq!(density.lines().count(), 1 + 50 * 50);
        assert_eq!(r.pairs.len(), 1996);
    }
}

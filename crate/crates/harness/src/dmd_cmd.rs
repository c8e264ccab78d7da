//! Offline DMD of archived Kolmogorov snapshots.
//!
//! For each trajectory the first `dmd_snapshots` archived fields (every
//! `dmd_spacing / snapshot_dt`-th one) define the DMD basis; every archived
//! field is then scored with the eigenvalues of the Jacobian restricted to
//! that basis. Results go to `records_dmd_offline.csv` and the Ritz spectrum
//! to `dmd_spectrum.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use otd_core::dmd::{compute_dmd, dmd_subspace, rank_modes};
use otd_core::otd::reduced_with;
use otd_core::{DynamicalSystem, KolmogorovFlow, KolmogorovParams};

use crate::config::{parse_config, ModelSettings};
use crate::error::HarnessError;
use crate::records::{lambda_columns, RecordWriter, Source};
use crate::snapshot::{read_snapshot, DType};

pub const OFFLINE_FILE: &str = "records_dmd_offline.csv";
pub const SPECTRUM_FILE: &str = "dmd_spectrum.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct DmdSummary {
    pub dir: PathBuf,
    pub rank: usize,
    pub records: usize,
}

fn snapshot_index(dir: &Path) -> Result<Vec<(f64, PathBuf)>, HarnessError> {
    let path = dir.join("snapshots.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("index,t,file") {
        return Err(HarnessError::schema(&path, "expected header index,t,file"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            match (f.len(), f.get(1).and_then(|t| t.parse::<f64>().ok())) {
                (3, Some(t)) => Ok((t, dir.join(f[2]))),
                _ => Err(HarnessError::schema(&path, &format!("bad row {l:?}"))),
            }
        })
        .collect()
}

/// Runs the offline DMD for every trajectory directory under `out`.
pub fn dmd_command(out: &Path) -> Result<Vec<DmdSummary>, HarnessError> {
    let cpath = out.join("config.txt");
    let text = std::fs::read_to_string(&cpath).map_err(|e| HarnessError::io(&cpath, e))?;
    let cfg = parse_config(&text)?;
    let ModelSettings::Kolmogorov(k) = &cfg.model else {
        return Err(HarnessError::Usage("offline DMD is defined for Kolmogorov runs only".into()));
    };
    if cfg.snapshot_dt <= 0.0 {
        return Err(HarnessError::Usage("the run archived no snapshots (snapshot_dt = 0)".into()));
    }
    let ratio = k.dmd_spacing / cfg.snapshot_dt;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(HarnessError::Usage(format!(
            "dmd_spacing = {} is not a multiple of snapshot_dt = {}",
            k.dmd_spacing, cfg.snapshot_dt
        )));
    }
    let stride = ratio.round() as usize;
    let sys = KolmogorovFlow::new(KolmogorovParams::new(k.n, k.re, k.resolution)?)?;
    let res = k.resolution as u32;

    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(|e| HarnessError::io(out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("snapshots.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(HarnessError::Usage(format!("{}: no trajectories with snapshots", out.display())));
    }

    let load = |path: &Path| -> Result<Vec<f64>, HarnessError> {
        let s = read_snapshot(path)?;
        if s.dims != [2, res, res] || s.dtype != DType::Real {
            return Err(HarnessError::schema(path, &format!("expected a real 2x{res}x{res} field, found {:?}", s.dims)));
        }
        let half = s.data.len() / 2;
        Ok(sys.from_physical(&s.data[..half], &s.data[half..])?)
    };

    let mut summaries = Vec::new();
    for dir in dirs {
        let index = snapshot_index(&dir)?;
        let needed = (k.dmd_snapshots - 1) * stride + 1;
        if index.len() < needed {
            return Err(HarnessError::Usage(format!(
                "{}: {} snapshots archived, {needed} needed",
                dir.display(),
                index.len()
            )));
        }
        let snaps = index[..needed]
            .iter()
            .step_by(stride)
            .map(|(_, p)| load(p))
            .collect::<Result<Vec<_>, _>>()?;
        let dmd = compute_dmd(&snaps)?;
        let basis = dmd_subspace(&sys, &dmd, k.dmd_count, k.dmd_ranking)?;

        let mut spec = String::from("rank,re,im,amplitude\n");
        for (pos, i) in rank_modes(&dmd, k.dmd_ranking).into_iter().enumerate() {
            let l = dmd.eigenvalues[i];
            let _ = writeln!(spec, "{pos},{},{},{}", l.re, l.im, dmd.amplitudes[i].norm());
        }
        let spath = dir.join(SPECTRUM_FILE);
        std::fs::write(&spath, spec).map_err(|e| HarnessError::io(&spath, e))?;

        let mut columns: Vec<String> = sys.observable_names().into_iter().map(str::to_string).collect();
        columns.extend(lambda_columns(k.dmd_count));
        let rpath = dir.join(OFFLINE_FILE);
        let mut w = RecordWriter::create(&rpath, &columns, Source::Dmd)?;
        for (t, p) in &index {
            let u = load(p)?;
            let jac = sys.jacobian_at(&u)?;
            let red = reduced_with(&sys, &jac, &basis, *t)?;
            let mut row = sys.observe(&u);
            row.extend_from_slice(&red.eigenvalues);
            w.write(*t, &row).map_err(|e| HarnessError::io(&rpath, e))?;
        }
        log::info!("{}: DMD rank {}, {} records", dir.display(), dmd.rank(), w.rows());
        summaries.push(DmdSummary {
            dir,
            rank: dmd.rank(),
            records: w.rows(),
        });
    }
    Ok(summaries)
}

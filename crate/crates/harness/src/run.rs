//! Single trajectories and seeded ensembles.
//!
//! Layout of an output directory:
//!
//! ```text
//! out/config.txt                 canonical config (seed = base seed)
//! out/manifest.csv               one row per trajectory with its status
//! out/traj_0000/records.csv      OTD indicator records
//! out/traj_0000/records_dmd.csv  DMD indicator records (when enabled)
//! out/traj_0000/snapshots.csv    index of field snapshots (when enabled)
//! out/traj_0000/snapshots/*.otdf
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use otd_core::dmd::{compute_dmd, dmd_subspace, DmdRanking};
use otd_core::models::prototype::{default_initial_mode, default_initial_state};
use otd_core::otd::{evolve_coupled, evolve_state, reduced_with, EvolveOptions, Integrator};
use otd_core::{DynamicalSystem, KolmogorovFlow, KolmogorovParams, Mnls, MnlsParams, OtdBasis, Prototype, PrototypeParams, StateVector, StepControl};

use crate::config::{ModelSettings, RunConfig};
use crate::error::HarnessError;
use crate::records::{lambda_columns, RecordWriter, Source};
use crate::snapshot::{write_snapshot, DType, Snapshot};

pub const RECORDS_FILE: &str = "records.csv";
pub const DMD_RECORDS_FILE: &str = "records_dmd.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";

pub fn trajectory_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("traj_{index:04}"))
}

/// What one trajectory produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub records: usize,
    pub dmd_records: usize,
    pub snapshots: usize,
    pub final_time: f64,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub index: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub outcome: Result<TrajectorySummary, String>,
}

impl TrajectoryReport {
    pub fn ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

struct DmdPlan {
    count: usize,
    snapshots: usize,
    stride: usize,
    ranking: DmdRanking,
}

type SnapshotFn<'a> = dyn Fn(&[f64]) -> Result<Snapshot, HarnessError> + 'a;

fn step_control(cfg: &RunConfig) -> StepControl {
    let mut ctrl = StepControl::default().with_tolerances(cfg.rtol, cfg.atol);
    ctrl.dt_max = cfg.dt_max;
    ctrl.dt_init = ctrl.dt_init.min(cfg.dt_max);
    ctrl.dt_min = ctrl.dt_min.min(ctrl.dt_init);
    ctrl
}

/// Runs one trajectory with the given seed into `dir`.
pub fn simulate(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<TrajectorySummary, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let dp = Integrator::DormandPrince(step_control(cfg));
    match &cfg.model {
        ModelSettings::Prototype(p) => {
            let sys = Prototype::new(PrototypeParams {
                alpha: p.alpha,
                omega: p.omega,
                lambda: p.lambda,
                beta: p.beta,
            })?;
            let candidates = [
                default_initial_mode::<f64>(),
                vec![0.0, 0.0, 1.0],
                vec![1.0, -1.0, 0.0],
            ];
            let modes = candidates[..cfg.r].to_vec();
            drive(&sys, default_initial_state(), modes, dp, cfg, dir, None, None)
        }
        ModelSettings::Kolmogorov(k) => {
            let sys = KolmogorovFlow::new(KolmogorovParams::new(k.n, k.re, k.resolution)?)?;
            let u0 = sys.random_initial_condition(k.energy_scale, seed);
            let modes = sys.otd_initial_modes(cfg.r)?;
            let res = k.resolution as u32;
            let snap = |u: &[f64]| -> Result<Snapshot, HarnessError> {
                let [u1, u2] = sys.to_physical(u)?;
                let mut data = u1;
                data.extend_from_slice(&u2);
                Ok(Snapshot {
                    model: cfg.kind(),
                    dims: vec![2, res, res],
                    dtype: DType::Real,
                    data,
                })
            };
            let plan = k.dmd_indicator.then(|| DmdPlan {
                count: k.dmd_count,
                snapshots: k.dmd_snapshots,
                stride: (k.dmd_spacing / cfg.emit_dt).round() as usize,
                ranking: k.dmd_ranking,
            });
            drive(&sys, u0, modes, dp, cfg, dir, Some(&snap), plan)
        }
        ModelSettings::Mnls(m) => {
            let sys = Mnls::new(MnlsParams::new(m.length, m.modes, m.epsilon, m.sigma)?)?;
            let u0 = sys.gaussian_initial_condition(seed);
            let modes = sys.otd_initial_modes(cfg.r)?;
            let n = sys.n() as u32;
            let snap = |u: &[f64]| -> Result<Snapshot, HarnessError> {
                let field = sys.envelope(u)?;
                Ok(Snapshot {
                    model: cfg.kind(),
                    dims: vec![n],
                    dtype: DType::Complex,
                    data: field.iter().flat_map(|z| [z.re, z.im]).collect(),
                })
            };
            let etd = Integrator::Etd2 { dt: m.etd_dt };
            drive(&sys, u0, modes, etd, cfg, dir, Some(&snap), None)
        }
    }
}

/// Emission counter relative to `record_start`, or `None` before it.
fn record_index(t: f64, cfg: &RunConfig) -> Option<usize> {
    let k = (t - cfg.record_start) / cfg.emit_dt;
    (k > -1e-6).then(|| k.round().max(0.0) as usize)
}

struct DmdState<'a, S> {
    sys: &'a S,
    plan: DmdPlan,
    writer: RecordWriter,
    pending: Vec<(f64, Vec<f64>, Vec<f64>)>,
    basis: Option<Vec<Vec<f64>>>,
}

impl<S: DynamicalSystem<f64>> DmdState<'_, S> {
    fn push(&mut self, t: f64, obs: &[f64], state: &[f64]) -> Result<(), HarnessError> {
        if let Some(basis) = &self.basis {
            return write_dmd_row(self.sys, basis, &mut self.writer, t, obs, state);
        }
        self.pending.push((t, obs.to_vec(), state.to_vec()));
        let held = self.pending.len().div_ceil(self.plan.stride);
        if held < self.plan.snapshots {
            return Ok(());
        }
        let snaps: Vec<Vec<f64>> = self
            .pending
            .iter()
            .step_by(self.plan.stride)
            .map(|p| p.2.clone())
            .collect();
        let dmd = compute_dmd(&snaps)?;
        log::info!("DMD of {} snapshots: rank {}", snaps.len(), dmd.rank());
        let basis = dmd_subspace(self.sys, &dmd, self.plan.count, self.plan.ranking)?;
        for (t, obs, state) in std::mem::take(&mut self.pending) {
            write_dmd_row(self.sys, &basis, &mut self.writer, t, &obs, &state)?;
        }
        self.basis = Some(basis);
        Ok(())
    }
}

fn write_dmd_row<S: DynamicalSystem<f64>>(
    sys: &S,
    basis: &[Vec<f64>],
    writer: &mut RecordWriter,
    t: f64,
    obs: &[f64],
    state: &[f64],
) -> Result<(), HarnessError> {
    let jac = sys.jacobian_at(state)?;
    let red = reduced_with(sys, &jac, basis, t)?;
    let mut row = obs.to_vec();
    row.extend_from_slice(&red.eigenvalues);
    writer.write(t, &row).map_err(|e| HarnessError::io(Path::new(DMD_RECORDS_FILE), e))
}

#[allow(clippy::too_many_arguments)]
fn drive<S: DynamicalSystem<f64>>(
    sys: &S,
    u0: Vec<f64>,
    modes: Vec<Vec<f64>>,
    integrator: Integrator<f64>,
    cfg: &RunConfig,
    dir: &Path,
    snapshot: Option<&SnapshotFn<'_>>,
    dmd: Option<DmdPlan>,
) -> Result<TrajectorySummary, HarnessError> {
    let mut state = StateVector::new(0.0, u0);
    if cfg.spinup > 0.0 {
        log::info!("{}: spin-up to t = {}", dir.display(), cfg.spinup);
        state = evolve_state(sys, &state, cfg.spinup, integrator)?;
    }
    let basis = OtdBasis::orthonormalized(sys, modes)?;

    let mut obs_columns: Vec<String> = sys
        .observable_names()
        .into_iter()
        .chain(sys.mode_observable_names())
        .map(str::to_string)
        .collect();
    let mut columns = obs_columns.clone();
    columns.extend(lambda_columns(cfg.r));
    let records_path = dir.join(RECORDS_FILE);
    let mut writer = RecordWriter::create(&records_path, &columns, Source::Otd)?;

    let mut dmd_state = match dmd {
        Some(plan) => {
            obs_columns.extend(lambda_columns(plan.count));
            let w = RecordWriter::create(&dir.join(DMD_RECORDS_FILE), &obs_columns, Source::Dmd)?;
            Some(DmdState {
                sys,
                plan,
                writer: w,
                pending: Vec::new(),
                basis: None,
            })
        }
        None => None,
    };

    let snapshot_stride = (cfg.snapshot_dt > 0.0 && snapshot.is_some()).then(|| (cfg.snapshot_dt / cfg.emit_dt).round() as usize);
    let mut snapshot_index: Option<BufWriter<File>> = None;
    let mut snapshots = 0usize;
    if snapshot_stride.is_some() {
        let sdir = dir.join("snapshots");
        std::fs::create_dir_all(&sdir).map_err(|e| HarnessError::io(&sdir, e))?;
        let ipath = dir.join("snapshots.csv");
        let f = File::create(&ipath).map_err(|e| HarnessError::io(&ipath, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "index,t,file").map_err(|e| HarnessError::io(&ipath, e))?;
        snapshot_index = Some(w);
    }

    let mut opts = EvolveOptions::new(cfg.t_end, cfg.emit_dt, integrator);
    opts.reorth_dt = cfg.reorth_dt;
    let span = cfg.t_end - state.time;
    let mut next_report = 0.1;
    let mut failure: Option<HarnessError> = None;

    let mut sink = |e: &otd_core::otd::Emission<'_, f64>| -> otd_core::Result<ControlFlow<()>> {
        let t = e.record.t;
        let Some(k) = record_index(t, cfg) else {
            return Ok(ControlFlow::Continue(()));
        };
        let mut step = || -> Result<(), HarnessError> {
            let mut row = e.record.observables.clone();
            row.extend_from_slice(&e.record.eigenvalues);
            writer.write(t, &row).map_err(|err| HarnessError::io(&records_path, err))?;
            if let Some(d) = dmd_state.as_mut() {
                d.push(t, &e.record.observables, e.state)?;
            }
            if let (Some(stride), Some(f)) = (snapshot_stride, snapshot) {
                if k % stride == 0 {
                    let name = format!("snapshots/snap_{snapshots:06}.otdf");
                    write_snapshot(&dir.join(&name), &f(e.state)?)?;
                    let ipath = dir.join("snapshots.csv");
                    let w = snapshot_index.as_mut().expect("index opened with stride");
                    writeln!(w, "{snapshots},{t},{name}")
                        .and_then(|_| w.flush())
                        .map_err(|err| HarnessError::io(&ipath, err))?;
                    snapshots += 1;
                }
            }
            Ok(())
        };
        if let Err(err) = step() {
            failure = Some(err);
            return Ok(ControlFlow::Break(()));
        }
        let frac = (t - (cfg.t_end - span)) / span;
        if frac >= next_report {
            log::info!("{}: t = {t:.1} ({:.0}%)", dir.display(), 100.0 * frac);
            next_report += 0.1;
        }
        Ok(ControlFlow::Continue(()))
    };
    let summary = evolve_coupled(sys, &state, &basis, &opts, &mut sink)?;
    if let Some(err) = failure {
        return Err(err);
    }
    let dmd_records = match &dmd_state {
        Some(d) if d.basis.is_none() => {
            return Err(HarnessError::Usage(format!(
                "run ended after {} emissions, before {} DMD snapshots were collected",
                d.pending.len(),
                d.plan.snapshots
            )))
        }
        Some(d) => d.writer.rows(),
        None => 0,
    };
    Ok(TrajectorySummary {
        records: writer.rows(),
        dmd_records,
        snapshots,
        final_time: summary.final_state.time,
        steps: summary.steps,
        rejected: summary.rejected,
    })
}

/// Runs `n` trajectories with seeds `base_seed + index` on `jobs` workers.
/// Failed members are recorded in the manifest and do not stop the others.
pub fn run_ensemble(
    cfg: &RunConfig,
    n: usize,
    base_seed: u64,
    jobs: usize,
    out: &Path,
) -> Result<Vec<TrajectoryReport>, HarnessError> {
    cfg.validate()?;
    if n == 0 {
        return Err(HarnessError::Usage("at least one trajectory is required".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut canonical = cfg.clone();
    canonical.seed = base_seed;
    canonical.out = out.to_path_buf();
    let cpath = out.join("config.txt");
    std::fs::write(&cpath, canonical.serialize()).map_err(|e| HarnessError::io(&cpath, e))?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<TrajectoryReport>();
    let workers = jobs.clamp(1, n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= n {
                    break;
                }
                let seed = base_seed.wrapping_add(index as u64);
                let dir = trajectory_dir(out, index);
                let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| simulate(cfg, seed, &dir)));
                let outcome = match result {
                    Ok(Ok(s)) => Ok(s),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(_) => Err("worker panicked".to_string()),
                };
                if let Err(msg) = &outcome {
                    log::error!("trajectory {index} (seed {seed}) failed: {msg}");
                }
                let _ = tx.send(TrajectoryReport { index, seed, dir, outcome });
            });
        }
    });
    drop(tx);
    let mut reports: Vec<TrajectoryReport> = rx.into_iter().collect();
    reports.sort_by_key(|r| r.index);
    write_manifest(&out.join(MANIFEST_FILE), &reports)?;
    Ok(reports)
}

fn write_manifest(path: &Path, reports: &[TrajectoryReport]) -> Result<(), HarnessError> {
    let mut s = String::from("index,seed,status,records,final_time,message\n");
    for r in reports {
        let dir = r.dir.file_name().map(|d| d.to_string_lossy().into_owned()).unwrap_or_default();
        match &r.outcome {
            Ok(sum) => s.push_str(&format!("{},{},ok,{},{},{dir}\n", r.index, r.seed, sum.records, sum.final_time)),
            Err(msg) => {
                let clean = msg.replace(['\n', ','], ";");
                s.push_str(&format!("{},{},failed,0,,{clean}\n", r.index, r.seed));
            }
        }
    }
    std::fs::write(path, s).map_err(|e| HarnessError::io(path, e))
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AuditSection, ExperimentConfig};
use super::io::{
    create_dir, file_entry, read_json, verify_entry, write_atomic, write_audit_csv, write_json,
    write_trajectory_csv, FileEntry, AUDIT_FILE, SIMULATION_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
use crate::bounds::{BoundsReport, FlowConfig};
use crate::diagnostics::{
    energy_inequality_audit, fluctuation, fprime_trace_cap, ito_residual, trace_lemma_check,
    DissipationStats, InequalityLedger, ItoResidual, MartingaleSummary, TraceCheck,
};
use crate::error::{Error, Result};
use crate::ou::OuPath;
use crate::solver::snapshot::save_snapshot;
use crate::solver::{simulate_trajectory, Simulation, TrajectoryRecord};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const STATS_FILE: &str = "stats.json";
pub const BOUNDS_FILE: &str = "bounds.json";
pub const LEDGER_FILE: &str = "ledger.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Relative tolerance on the trace inequality, for rounding only.
const TRACE_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Pending,
    Completed,
    BlownUp {
        step: usize,
        time: f64,
        reason: String,
    },
    Failed {
        reason: String,
    },
}

impl TrajectoryStatus {
    /// Rerunning would reproduce the same outcome.
    fn is_final(&self) -> bool {
        matches!(
            self,
            TrajectoryStatus::Completed | TrajectoryStatus::BlownUp { .. }
        )
    }
}

/// Trace inequality on the final state, for `G = Lf` and `G = f′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub wall_speed: f64,
    pub generator: TraceCheck,
    pub fprime: TraceCheck,
    pub fprime_cap: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub seed: u64,
    pub status: TrajectoryStatus,
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
    /// `⟨ε⟩` over the simulated span.
    pub mean_dissipation: Option<f64>,
    pub mean_energy: Option<f64>,
    pub mean_wall_power: Option<f64>,
    pub energy_inequality: Option<InequalityLedger>,
    /// Itô-formula residual of the wall path at half the mean layer height.
    pub ito: Option<ItoResidual>,
    pub trace: Option<TraceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub index: usize,
    pub seed: u64,
    pub status: TrajectoryStatus,
    pub files: Vec<FileEntry>,
}

/// Index of a run directory. Holds no timestamps, so equal runs give equal
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub trajectories: Vec<TrajectoryEntry>,
    /// Ensemble-level artifacts.
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn completed(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.status == TrajectoryStatus::Completed)
            .count()
    }

    /// Entries whose files are missing or altered.
    pub fn corrupted(&self, root: &Path) -> Vec<String> {
        self.trajectories
            .iter()
            .flat_map(|t| &t.files)
            .chain(&self.outputs)
            .filter(|f| !verify_entry(root, f))
            .map(|f| f.path.clone())
            .collect()
    }
}

/// `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub requested: usize,
    pub completed: usize,
    pub blown_up: usize,
    pub failed: usize,
    /// Over completed trajectories only.
    pub dissipation: Option<DissipationStats>,
    pub jensen_holds: bool,
    pub martingale: Option<MartingaleSummary>,
}

/// `bounds.json`: closed-form bounds against the ensemble estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub bounds: BoundsReport,
    pub mean_plus_3se: Option<f64>,
    pub mean_within_bound: Option<bool>,
    pub second_moment_plus_3se: Option<f64>,
    pub second_moment_within_bound: Option<bool>,
    /// `mean_bound / mean`, how loose the bound is on this ensemble.
    pub mean_slack_factor: Option<f64>,
}

/// `ledger.json`: per-trajectory audits and their pass rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLedger {
    pub tolerance_constant: f64,
    pub energy_inequality: Vec<InequalityLedger>,
    pub energy_pass_rate: Option<f64>,
    pub quadratic_variation_pass_rate: Option<f64>,
    pub trace: Vec<TraceSummary>,
    pub trace_holds: bool,
    pub ito: Vec<ItoResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub summaries: Vec<TrajectorySummary>,
    pub stats: EnsembleStats,
    pub comparison: BoundComparison,
    pub ledger: AuditLedger,
    /// Trajectories taken from an earlier run instead of recomputed.
    pub reused: usize,
}

impl EnsembleReport {
    /// Violated hard invariants: Jensen, the trace inequality and the
    /// martingale mean on ensembles large enough to judge it.
    pub fn hard_failures(&self) -> Vec<String> {
        hard_failures(&self.stats, &self.ledger)
    }
}

pub(crate) fn hard_failures(stats: &EnsembleStats, ledger: &AuditLedger) -> Vec<String> {
    let mut out = Vec::new();
    if !stats.jensen_holds {
        out.push("Jensen: second moment below squared mean".into());
    }
    if !ledger.trace_holds {
        out.push("trace inequality violated on a final state".into());
    }
    if let Some(m) = &stats.martingale {
        if m.conclusive && !m.passed {
            out.push(format!(
                "martingale mean is {:.2} standard errors from 0",
                m.z_score
            ));
        }
    }
    out
}

pub fn trajectory_dir_name(index: usize) -> String {
    format!("traj_{index:04}")
}

fn wall_path(sim: &Simulation, rec: &TrajectoryRecord) -> OuPath {
    let n = rec.increments.len() + 1;
    OuPath {
        params: sim.flow.ou,
        init: sim.wall_init,
        seed: sim.seed,
        times: rec.times[..n].to_vec(),
        values: rec.wall_speed[..n].to_vec(),
        increments: rec.increments.clone(),
    }
}

fn trace_summary(rec: &TrajectoryRecord, flow: &FlowConfig) -> Result<TraceSummary> {
    let bp = &flow.background;
    let x = rec.final_state.wall_speed;
    let v = fluctuation(&rec.final_state, x, bp);
    let delta = v.delta;
    let generator = trace_lemma_check(&v, |z| {
        bp.generator_lf(x, z.min(delta), &flow.ou).unwrap_or(0.0)
    })?;
    let slope = (3.0 * x * x + bp.b) / bp.a;
    let fprime = trace_lemma_check(&v, |z| 1.0 - z * slope)?;
    let fprime_cap = fprime_trace_cap(&v);
    let ok = |c: &TraceCheck| c.holds(TRACE_ROUNDING * c.rhs.max(f64::MIN_POSITIVE));
    let holds = ok(&generator) && ok(&fprime) && fprime.rhs <= fprime_cap * (1.0 + TRACE_ROUNDING);
    Ok(TraceSummary {
        wall_speed: x,
        generator,
        fprime,
        fprime_cap,
        holds,
    })
}

fn failed_summary(index: usize, seed: u64, reason: String) -> TrajectorySummary {
    TrajectorySummary {
        index,
        seed,
        status: TrajectoryStatus::Failed { reason },
        steps: 0,
        dt: 0.0,
        horizon: 0.0,
        mean_dissipation: None,
        mean_energy: None,
        mean_wall_power: None,
        energy_inequality: None,
        ito: None,
        trace: None,
    }
}

/// Simulates one trajectory into `dir`: `simulation.json`,
/// `trajectory.csv`, `audit.csv` when `sim.audit` is set, snapshots and
/// `summary.json`. Returns the summary and the names of the files written.
pub fn simulate_to_dir(
    sim: &Simulation,
    audits: &AuditSection,
    index: usize,
    dir: &Path,
) -> Result<(TrajectorySummary, Vec<String>)> {
    create_dir(dir)?;
    let mut files = vec![SIMULATION_FILE.to_string(), TRAJECTORY_FILE.to_string()];
    write_json(&dir.join(SIMULATION_FILE), sim)?;
    let rec = simulate_trajectory(sim)?;
    write_trajectory_csv(&dir.join(TRAJECTORY_FILE), &rec)?;
    if rec.audit.is_some() {
        write_audit_csv(&dir.join(AUDIT_FILE), &rec)?;
        files.push(AUDIT_FILE.into());
    }
    for (k, snap) in rec.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:04}.bin");
        save_snapshot(snap, &dir.join(&name))?;
        files.push(name);
    }

    let completed = rec.completed();
    let status = match &rec.blow_up {
        None => TrajectoryStatus::Completed,
        Some(b) => TrajectoryStatus::BlownUp {
            step: b.step,
            time: b.time,
            reason: b.reason.clone(),
        },
    };
    let spans = rec.times.len() > 1;
    let avg = |s: &[f64]| spans.then(|| rec.time_average(s));
    let energy_inequality = if audits.energy_inequality && completed && rec.audit.is_some() {
        Some(energy_inequality_audit(
            &rec,
            &sim.flow,
            audits.tolerance_constant,
        )?)
    } else {
        None
    };
    let ito = (audits.ito && spans).then(|| {
        let x3 = 0.5 * sim.flow.background.delta(sim.flow.ou.mean_speed);
        ito_residual(
            &wall_path(sim, &rec),
            &sim.flow.background,
            &sim.flow.ou,
            x3,
        )
    });
    let trace = if audits.trace_lemma {
        Some(trace_summary(&rec, &sim.flow)?)
    } else {
        None
    };
    let summary = TrajectorySummary {
        index,
        seed: sim.seed,
        status,
        steps: rec.times.len() - 1,
        dt: rec.dt,
        horizon: rec.horizon(),
        mean_dissipation: avg(&rec.dissipation),
        mean_energy: avg(&rec.energy),
        mean_wall_power: avg(&rec.wall_power),
        energy_inequality,
        ito,
        trace,
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    files.push(SUMMARY_FILE.into());
    Ok((summary, files))
}

/// Runs member `index` and checksums its files. Failures become a
/// summary with a `failed` status rather than an error.
fn run_member(
    cfg: &ExperimentConfig,
    root: &Path,
    index: usize,
) -> (TrajectorySummary, Vec<FileEntry>) {
    let seed = cfg.trajectory_seed(index);
    let dir_name = trajectory_dir_name(index);
    let dir = root.join(&dir_name);
    let result = cfg
        .simulation(index)
        .and_then(|sim| simulate_to_dir(&sim, &cfg.audit, index, &dir))
        .and_then(|(summary, names)| {
            let files = names
                .iter()
                .map(|name| file_entry(root, &format!("{dir_name}/{name}")))
                .collect::<Result<Vec<_>>>()?;
            Ok((summary, files))
        });
    match result {
        Ok(v) => v,
        Err(e) => {
            let summary = failed_summary(index, seed, e.to_string());
            let stored = create_dir(&dir)
                .and_then(|_| write_json(&dir.join(SUMMARY_FILE), &summary))
                .and_then(|_| file_entry(root, &format!("{dir_name}/{SUMMARY_FILE}")));
            (summary, stored.into_iter().collect())
        }
    }
}

/// Summaries of members an earlier run finished, keyed by index. A member
/// is reused only if every listed file still matches its checksum.
fn reusable(
    cfg: &ExperimentConfig,
    root: &Path,
    hash: &str,
) -> Result<BTreeMap<usize, (TrajectorySummary, TrajectoryEntry)>> {
    let mut out = BTreeMap::new();
    if !root.join(MANIFEST_FILE).exists() {
        return Ok(out);
    }
    let old = RunManifest::load(root)?;
    if old.config_hash != hash {
        return Err(Error::Config(format!(
            "{} holds a run of a different configuration (hash {})",
            root.display(),
            old.config_hash
        )));
    }
    for entry in old.trajectories {
        let intact = entry.index < cfg.run.trajectories
            && entry.status.is_final()
            && entry.seed == cfg.trajectory_seed(entry.index)
            && entry.files.iter().all(|f| verify_entry(root, f));
        if !intact {
            continue;
        }
        let path = root
            .join(trajectory_dir_name(entry.index))
            .join(SUMMARY_FILE);
        if let Ok(summary) = read_json::<TrajectorySummary>(&path) {
            if summary.status == entry.status && summary.index == entry.index {
                out.insert(entry.index, (summary, entry));
            }
        }
    }
    Ok(out)
}

fn write_manifest(root: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&root.join(MANIFEST_FILE), manifest)
}

/// Statistics, bound comparison and audit ledger from member summaries.
pub fn aggregate(
    cfg: &ExperimentConfig,
    summaries: &[TrajectorySummary],
) -> Result<(EnsembleStats, BoundComparison, AuditLedger)> {
    let flow = cfg.flow()?;
    let count =
        |f: fn(&TrajectoryStatus) -> bool| summaries.iter().filter(|s| f(&s.status)).count();
    let completed: Vec<&TrajectorySummary> = summaries
        .iter()
        .filter(|s| s.status == TrajectoryStatus::Completed)
        .collect();
    let values: Vec<f64> = completed
        .iter()
        .filter_map(|s| s.mean_dissipation)
        .collect();

    let (dissipation, jensen_holds) = if values.is_empty() {
        (None, true)
    } else {
        match DissipationStats::from_time_averages(cfg.run.t_end, values) {
            Ok(s) => (Some(s), true),
            Err(Error::Invariant(_)) => (None, false),
            Err(e) => return Err(e),
        }
    };

    let energy: Vec<InequalityLedger> = completed
        .iter()
        .filter_map(|s| s.energy_inequality.clone())
        .collect();
    let m_values: Vec<f64> = energy.iter().map(|l| l.m_t).collect();
    let martingale = if m_values.len() >= 2 {
        Some(MartingaleSummary::from_values(
            &m_values,
            cfg.audit.martingale_max_z,
        )?)
    } else {
        None
    };
    let rate = |pass: fn(&InequalityLedger) -> bool| {
        (!energy.is_empty())
            .then(|| energy.iter().filter(|l| pass(l)).count() as f64 / energy.len() as f64)
    };
    let trace: Vec<TraceSummary> = summaries.iter().filter_map(|s| s.trace).collect();
    let ledger = AuditLedger {
        tolerance_constant: cfg.audit.tolerance_constant,
        energy_pass_rate: rate(|l| l.passed),
        quadratic_variation_pass_rate: rate(|l| l.quadratic_variation_passed),
        energy_inequality: energy,
        trace_holds: trace.iter().all(|t| t.holds),
        trace,
        ito: summaries.iter().filter_map(|s| s.ito).collect(),
    };

    let bounds = BoundsReport::evaluate(&flow)?;
    let plus = |e: Option<crate::diagnostics::Estimate>| e.map(|e| e.mean + 3.0 * e.standard_error);
    let mean_plus_3se = plus(dissipation.as_ref().map(|d| d.mean));
    let second_moment_plus_3se = plus(dissipation.as_ref().map(|d| d.second_moment));
    let comparison = BoundComparison {
        bounds,
        mean_within_bound: mean_plus_3se.map(|v| v <= bounds.mean_bound.value),
        second_moment_within_bound: second_moment_plus_3se
            .map(|v| v <= bounds.second_moment_bound.value),
        mean_plus_3se,
        second_moment_plus_3se,
        mean_slack_factor: dissipation
            .as_ref()
            .map(|d| bounds.mean_bound.value / d.mean.mean),
    };

    let stats = EnsembleStats {
        requested: cfg.run.trajectories,
        completed: completed.len(),
        blown_up: count(|s| matches!(s, TrajectoryStatus::BlownUp { .. })),
        failed: count(|s| matches!(s, TrajectoryStatus::Failed { .. })),
        dissipation,
        jensen_holds,
        martingale,
    };
    Ok((stats, comparison, ledger))
}

/// Runs (or resumes) the ensemble described by `cfg` in its output
/// directory.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleReport> {
    cfg.validate()?;
    let root = cfg
        .run
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("run.output_dir is not set".into()))?;
    create_dir(&root)?;
    let hash = cfg.hash()?;
    let mut done = reusable(cfg, &root, &hash)?;
    let reused = done.len();
    write_atomic(
        &root.join(CONFIG_FILE),
        cfg.canonical().to_toml()?.as_bytes(),
    )?;

    let n = cfg.run.trajectories;
    let mut entries: Vec<TrajectoryEntry> = (0..n)
        .map(|i| match done.get(&i) {
            Some((_, e)) => e.clone(),
            None => TrajectoryEntry {
                index: i,
                seed: cfg.trajectory_seed(i),
                status: TrajectoryStatus::Pending,
                files: Vec::new(),
            },
        })
        .collect();
    let mut manifest = RunManifest {
        version: MANIFEST_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        master_seed: cfg.run.master_seed,
        trajectories: entries.clone(),
        outputs: Vec::new(),
    };
    write_manifest(&root, &manifest)?;

    let pending: Vec<usize> = (0..n).filter(|i| !done.contains_key(i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(TrajectorySummary, Vec<FileEntry>)>();
    let written: Result<()> = std::thread::scope(|scope| {
        let root = &root;
        scope.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, &i| {
                    // The receiver only goes away if the writer failed.
                    let _ = tx.send(run_member(cfg, root, i));
                });
            });
        });
        // Single writer: the only place the manifest changes.
        for (summary, files) in rx {
            let i = summary.index;
            entries[i].status = summary.status.clone();
            entries[i].files = files.clone();
            manifest.trajectories = entries.clone();
            write_manifest(root, &manifest)?;
            done.insert(i, (summary, entries[i].clone()));
        }
        Ok(())
    });
    written?;

    let summaries: Vec<TrajectorySummary> = done.into_values().map(|(s, _)| s).collect();
    let (stats, comparison, ledger) = aggregate(cfg, &summaries)?;
    write_json(&root.join(STATS_FILE), &stats)?;
    write_json(&root.join(BOUNDS_FILE), &comparison)?;
    write_json(&root.join(LEDGER_FILE), &ledger)?;
    manifest.outputs = [CONFIG_FILE, STATS_FILE, BOUNDS_FILE, LEDGER_FILE]
        .iter()
        .map(|f| file_entry(&root, f))
        .collect::<Result<_>>()?;
    write_manifest(&root, &manifest)?;

    Ok(EnsembleReport {
        output_dir: root,
        manifest,
        summaries,
        stats,
        comparison,
        ledger,
        reused,
    })
}

/// Result of re-checking a finished run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleVerification {
    pub config_hash_matches: bool,
    pub corrupted_files: Vec<String>,
    pub stats: EnsembleStats,
    pub comparison: BoundComparison,
    pub ledger: AuditLedger,
    /// Energy audits recomputed from the stored series that disagree with
    /// the stored ledgers.
    pub ledger_mismatches: Vec<usize>,
    pub hard_failures: Vec<String>,
}

/// Re-reads a run directory, verifies checksums, recomputes the energy
/// audits from the stored series and the ensemble statistics.
pub fn verify_ensemble(root: &Path, cfg: &ExperimentConfig) -> Result<EnsembleVerification> {
    let manifest = RunManifest::load(root)?;
    let config_hash_matches = manifest.config_hash == cfg.hash()?;
    let corrupted_files = manifest.corrupted(root);
    let mut summaries = Vec::new();
    let mut ledger_mismatches = Vec::new();
    for entry in &manifest.trajectories {
        let dir = root.join(trajectory_dir_name(entry.index));
        let summary: TrajectorySummary = match read_json(&dir.join(SUMMARY_FILE)) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if let Some(stored) = &summary.energy_inequality {
            let again = super::io::StoredTrajectory::load(&dir)
                .and_then(|t| t.energy_audit(cfg.audit.tolerance_constant));
            if again.as_ref().ok() != Some(stored) {
                ledger_mismatches.push(entry.index);
            }
        }
        summaries.push(summary);
    }
    let (stats, comparison, ledger) = aggregate(cfg, &summaries)?;
    let mut hard = hard_failures(&stats, &ledger);
    if !config_hash_matches {
        hard.push("manifest was produced by a different configuration".into());
    }
    if !corrupted_files.is_empty() {
        hard.push(format!(
            "{} artifacts fail their checksum",
            corrupted_files.len()
        ));
    }
    if !ledger_mismatches.is_empty() {
        hard.push(format!(
            "{} stored energy ledgers are not reproduced by their series",
            ledger_mismatches.len()
        ));
    }
    Ok(EnsembleVerification {
        config_hash_matches,
        corrupted_files,
        stats,
        comparison,
        ledger,
        ledger_mismatches,
        hard_failures: hard,
    })
}

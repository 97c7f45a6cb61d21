//! Experiment configuration, ensemble orchestration and persistence.
//!
//! A run directory holds `config.toml`, one `traj_XXXX/` directory per
//! member (`simulation.json`, `trajectory.csv`, optional `audit.csv` and
//! snapshots, `summary.json`), the ensemble outputs `stats.json`,
//! `bounds.json` and `ledger.json`, and `manifest.json` listing every file
//! with its SHA-256. Rerunning a configuration in the same directory skips
//! members whose files are intact.

mod config;
mod ensemble;
pub mod io;
mod sweep;

pub use config::{
    AuditSection, BackgroundSection, ExperimentConfig, FluidSection, OuSection, RunSection,
};
pub use ensemble::{
    aggregate, run_ensemble, simulate_to_dir, trajectory_dir_name, verify_ensemble, AuditLedger,
    BoundComparison, EnsembleReport, EnsembleStats, EnsembleVerification, RunManifest,
    TraceSummary, TrajectoryEntry, TrajectoryStatus, TrajectorySummary, BOUNDS_FILE, CONFIG_FILE,
    LEDGER_FILE, MANIFEST_FILE, STATS_FILE,
};
pub use io::{FileEntry, StoredTrajectory};
pub use sweep::{sweep, sweep_points, SweepGrid, SweepPoint, SweepRow, SweepTable, TrendSummary};

use crate::error::Result;
use crate::ou::{sample_path, uniform_times, OuParams, OuPath, PathInit};
use crate::rng::derive_seed;

/// `paths` independent wall paths on a uniform grid, path `i` seeded by
/// `(seed, i)`. Stationary OU paths, or `X = σW` from 0 when `wiener`.
pub fn sample_wall_paths(
    p: &OuParams,
    t_end: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    wiener: bool,
) -> Result<Vec<OuPath>> {
    let times = uniform_times(t_end, dt)?;
    let init = if wiener {
        PathInit::Wiener
    } else {
        PathInit::Stationary
    };
    (0..paths)
        .map(|i| sample_path(p, &times, derive_seed(seed, i as u64), init))
        .collect()
}

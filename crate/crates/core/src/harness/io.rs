//! CSV and JSON persistence. Floats go through the shortest round-trip
//! decimal form, so reading an artifact back gives the same bits.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{audit_series, AuditInput, InequalityLedger};
use crate::error::{Error, Result};
use crate::ou::OuPath;
use crate::solver::{AuditSeries, Grid, Simulation, TrajectoryRecord};

/// An artifact with its content checksum, path relative to the run root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&data)), data.len() as u64))
}

/// Checksums `root/relative`.
pub fn file_entry(root: &Path, relative: &str) -> Result<FileEntry> {
    let (sha256, bytes) = sha256_file(&root.join(relative))?;
    Ok(FileEntry {
        path: relative.to_string(),
        sha256,
        bytes,
    })
}

/// Whether the file still exists with the recorded checksum.
pub fn verify_entry(root: &Path, entry: &FileEntry) -> bool {
    matches!(sha256_file(&root.join(&entry.path)), Ok((sum, n)) if sum == entry.sha256 && n == entry.bytes)
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        what: "json",
        reason: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "json",
        reason: format!("{}: {e}", path.display()),
    })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format {
        what: "csv",
        reason: e.to_string(),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format {
        what: "csv",
        reason: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x_wall: f64,
    pub dissipation: f64,
    pub energy: f64,
    pub wall_power: f64,
}

/// `increment` is the Brownian increment over `[t, t + Δt]`, empty on the
/// final row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: f64,
    pub grad_v_sq: f64,
    pub layer_integral: f64,
    pub v_norm_sq: f64,
    pub increment: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path_id: usize,
    pub t: f64,
    pub x: f64,
}

pub fn write_trajectory_csv(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    write_rows(
        path,
        (0..rec.times.len()).map(|n| TrajectoryRow {
            t: rec.times[n],
            x_wall: rec.wall_speed[n],
            dissipation: rec.dissipation[n],
            energy: rec.energy[n],
            wall_power: rec.wall_power[n],
        }),
    )
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    read_rows(path)
}

/// Writes the audit series; a record without one is rejected.
pub fn write_audit_csv(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let a = rec.audit.as_ref().ok_or(Error::MissingIncrements)?;
    write_rows(
        path,
        (0..rec.times.len()).map(|n| AuditRow {
            t: rec.times[n],
            grad_v_sq: a.grad_v_sq[n],
            layer_integral: a.layer_integral[n],
            v_norm_sq: a.v_norm_sq[n],
            increment: rec.increments.get(n).copied(),
        }),
    )
}

pub fn read_audit_csv(path: &Path) -> Result<Vec<AuditRow>> {
    read_rows(path)
}

pub fn write_paths_csv(path: &Path, paths: &[OuPath]) -> Result<()> {
    write_rows(
        path,
        paths.iter().enumerate().flat_map(|(id, p)| {
            p.times
                .iter()
                .zip(&p.values)
                .map(move |(&t, &x)| PathRow { path_id: id, t, x })
        }),
    )
}

/// A trajectory as stored on disk, enough to re-run its audits.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrajectory {
    pub simulation: Simulation,
    pub rows: Vec<TrajectoryRow>,
    pub audit: Option<Vec<AuditRow>>,
}

pub const SIMULATION_FILE: &str = "simulation.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const AUDIT_FILE: &str = "audit.csv";
pub const SUMMARY_FILE: &str = "summary.json";

impl StoredTrajectory {
    pub fn load(dir: &Path) -> Result<Self> {
        let simulation: Simulation = read_json(&dir.join(SIMULATION_FILE))?;
        let rows = read_trajectory_csv(&dir.join(TRAJECTORY_FILE))?;
        let audit_path = dir.join(AUDIT_FILE);
        let audit = if audit_path.exists() {
            Some(read_audit_csv(&audit_path)?)
        } else {
            None
        };
        Ok(StoredTrajectory {
            simulation,
            rows,
            audit,
        })
    }

    /// `⟨ε⟩_T` from the stored series.
    pub fn mean_dissipation(&self) -> f64 {
        let times: Vec<f64> = self.rows.iter().map(|r| r.t).collect();
        let eps: Vec<f64> = self.rows.iter().map(|r| r.dissipation).collect();
        let span = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
        crate::solver::trapezoid(&times, &eps) / span
    }

    /// Re-evaluates the energy inequality from the stored series.
    pub fn energy_audit(&self, tolerance_constant: f64) -> Result<InequalityLedger> {
        let audit = self.audit.as_ref().ok_or(Error::MissingIncrements)?;
        if audit.len() != self.rows.len() || audit.iter().zip(&self.rows).any(|(a, r)| a.t != r.t) {
            return Err(Error::Format {
                what: "audit series",
                reason: "rows do not match the trajectory times".into(),
            });
        }
        let times: Vec<f64> = self.rows.iter().map(|r| r.t).collect();
        let wall: Vec<f64> = self.rows.iter().map(|r| r.x_wall).collect();
        let increments: Vec<f64> = audit.iter().filter_map(|a| a.increment).collect();
        let series = AuditSeries {
            grad_v_sq: audit.iter().map(|a| a.grad_v_sq).collect(),
            layer_integral: audit.iter().map(|a| a.layer_integral).collect(),
            v_norm_sq: audit.iter().map(|a| a.v_norm_sq).collect(),
        };
        let sim = &self.simulation;
        let grid = Grid::new(&sim.flow.geometry, &sim.grid);
        let dt = if times.len() > 1 {
            times[1] - times[0]
        } else {
            sim.grid.dt
        };
        let input = AuditInput {
            seed: sim.seed,
            dt,
            max_spacing: grid.dx1.max(grid.dx2).max(grid.dz),
            times: &times,
            wall_speed: &wall,
            increments: &increments,
            series: &series,
        };
        audit_series(&input, &sim.flow, tolerance_constant)
    }
}

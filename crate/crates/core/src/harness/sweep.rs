use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::ensemble::run_ensemble;
use super::io::{create_dir, write_json};
use crate::bounds::BoundsReport;
use crate::diagnostics::DissipationStats;
use crate::error::{Error, Result};

/// Values to scan. An empty axis keeps the base configuration's value.
/// Reynolds numbers are realized by changing `ν` at fixed `U` and `h`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub reynolds: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty() && self.theta.is_empty() && self.reynolds.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub theta: f64,
    pub reynolds: f64,
    pub viscosity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub bounds: Option<BoundsReport>,
    pub stats: Option<DissipationStats>,
    /// Why the point was not evaluated.
    pub skipped: Option<String>,
}

/// Monotone-trend flags of `mean_bound`; `None` when no slice of the grid
/// varies the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendSummary {
    /// Nondecreasing in `σ` along every slice of fixed `(θ, Re)`.
    pub bound_nondecreasing_in_sigma: Option<bool>,
    /// Nonincreasing in `θ` along every slice of fixed `(σ, Re)`.
    pub bound_nonincreasing_in_theta: Option<bool>,
    /// Larger at the smallest `θ` than at the largest, on every slice with
    /// `σ > 0`.
    pub bound_grows_as_theta_shrinks: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub trends: TrendSummary,
}

fn axis(values: &[f64], base: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Cartesian product of the grid axes.
pub fn sweep_points(base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid has no values".into()));
    }
    let u = base.ou.mean_speed;
    let h = base.geometry.height;
    let base_re = u * h / base.fluid.viscosity;
    let mut points = Vec::new();
    for &sigma in &axis(&grid.sigma, base.ou.noise_amplitude) {
        for &theta in &axis(&grid.theta, base.ou.reversion_rate) {
            for &reynolds in &axis(&grid.reynolds, base_re) {
                points.push(SweepPoint {
                    sigma,
                    theta,
                    reynolds,
                    viscosity: u * h / reynolds,
                });
            }
        }
    }
    Ok(points)
}

fn configure(base: &ExperimentConfig, p: &SweepPoint) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.ou.noise_amplitude = p.sigma;
    cfg.ou.reversion_rate = p.theta;
    cfg.fluid.viscosity = p.viscosity;
    cfg
}

/// Checks `pred(prev, next)` along every slice that groups rows by `key`
/// and orders them by `coord`.
fn slice_trend<K: PartialEq + Copy>(
    rows: &[(SweepPoint, f64)],
    key: impl Fn(&SweepPoint) -> K,
    coord: impl Fn(&SweepPoint) -> f64,
    check: impl Fn(&[(SweepPoint, f64)]) -> bool,
) -> Option<bool> {
    let mut keys: Vec<K> = Vec::new();
    for (p, _) in rows {
        if !keys.contains(&key(p)) {
            keys.push(key(p));
        }
    }
    let mut verdict = None;
    for k in keys {
        let mut slice: Vec<(SweepPoint, f64)> =
            rows.iter().filter(|(p, _)| key(p) == k).copied().collect();
        slice.sort_by(|a, b| coord(&a.0).total_cmp(&coord(&b.0)));
        slice.dedup_by(|a, b| coord(&a.0) == coord(&b.0));
        if slice.len() < 2 {
            continue;
        }
        verdict = Some(verdict.unwrap_or(true) && check(&slice));
    }
    verdict
}

fn trends(rows: &[SweepRow]) -> TrendSummary {
    let evaluated: Vec<(SweepPoint, f64)> = rows
        .iter()
        .filter_map(|r| r.bounds.map(|b| (r.point, b.mean_bound.value)))
        .collect();
    let bits = |x: f64| x.to_bits();
    let monotone = |up: bool| {
        move |s: &[(SweepPoint, f64)]| {
            s.windows(2).all(|w| {
                if up {
                    w[1].1 >= w[0].1
                } else {
                    w[1].1 <= w[0].1
                }
            })
        }
    };
    let noisy: Vec<(SweepPoint, f64)> = evaluated
        .iter()
        .copied()
        .filter(|(p, _)| p.sigma > 0.0)
        .collect();
    TrendSummary {
        bound_nondecreasing_in_sigma: slice_trend(
            &evaluated,
            |p| (bits(p.theta), bits(p.reynolds)),
            |p| p.sigma,
            monotone(true),
        ),
        bound_nonincreasing_in_theta: slice_trend(
            &evaluated,
            |p| (bits(p.sigma), bits(p.reynolds)),
            |p| p.theta,
            monotone(false),
        ),
        bound_grows_as_theta_shrinks: slice_trend(
            &noisy,
            |p| (bits(p.sigma), bits(p.reynolds)),
            |p| p.theta,
            |s| s[0].1 > s[s.len() - 1].1,
        ),
    }
}

/// Evaluates the bounds at every grid point and, when `simulate` is set,
/// runs the base ensemble there too, in `point_XXXX` under the base output
/// directory. The table is written to `sweep.json` in that directory when
/// one is configured.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid, simulate: bool) -> Result<SweepTable> {
    let points = sweep_points(base, grid)?;
    let root = base.run.output_dir.clone();
    if simulate && root.is_none() {
        return Err(Error::Config(
            "a simulating sweep needs run.output_dir".into(),
        ));
    }
    let mut rows = Vec::with_capacity(points.len());
    for (k, point) in points.into_iter().enumerate() {
        let mut cfg = configure(base, &point);
        let evaluated = cfg
            .validate()
            .and_then(|_| BoundsReport::evaluate(&cfg.flow()?));
        let bounds = match evaluated {
            Ok(b) => b,
            Err(e) => {
                rows.push(SweepRow {
                    point,
                    bounds: None,
                    stats: None,
                    skipped: Some(e.to_string()),
                });
                continue;
            }
        };
        let mut stats = None;
        let mut skipped = None;
        if simulate {
            cfg.run.output_dir = root.as_deref().map(|r| point_dir(r, k));
            match run_ensemble(&cfg) {
                Ok(report) => stats = report.stats.dissipation,
                Err(e) => skipped = Some(format!("ensemble failed: {e}")),
            }
        }
        rows.push(SweepRow {
            point,
            bounds: Some(bounds),
            stats,
            skipped,
        });
    }
    let table = SweepTable {
        trends: trends(&rows),
        rows,
    };
    if let Some(root) = root {
        create_dir(&root)?;
        write_json(&root.join("sweep.json"), &table)?;
    }
    Ok(table)
}

fn point_dir(root: &Path, k: usize) -> std::path::PathBuf {
    root.join(format!("point_{k:04}"))
}

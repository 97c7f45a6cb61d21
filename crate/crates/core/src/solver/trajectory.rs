use serde::{Deserialize, Serialize};

use super::field::{InitialCondition, VelocityField};
use super::grid::GridSpec;
use super::{dissipation, wall_power, Solver};
use crate::bounds::FlowConfig;
use crate::diagnostics::AuditSample;
use crate::error::{ensure_positive, Error, Result};
use crate::ou::{PathInit, WallNoise};

/// Everything that determines one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub flow: FlowConfig,
    pub grid: GridSpec,
    pub t_end: f64,
    pub seed: u64,
    pub initial: InitialCondition,
    #[serde(default)]
    pub wall_init: PathInit,
    /// Record the per-step quantities the energy-inequality audit needs.
    #[serde(default)]
    pub audit: bool,
    /// Keep a full field copy every this many steps (and at the end).
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

/// Per-time quantities of the fluctuation `v = u − Φ`, sampled alongside
/// the main series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSeries {
    /// `‖∇v‖²`.
    pub grad_v_sq: Vec<f64>,
    /// `∫_{D_δ} v₁ f′(X) dx`, the integrand of the stochastic integral.
    pub layer_integral: Vec<f64>,
    /// `‖v‖²`.
    pub v_norm_sq: Vec<f64>,
}

impl AuditSeries {
    fn push(&mut self, s: AuditSample) {
        self.grad_v_sq.push(s.grad_v_sq);
        self.layer_integral.push(s.layer_integral);
        self.v_norm_sq.push(s.v_norm_sq);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport {
    /// Index of the step that failed.
    pub step: usize,
    /// Time of the last stable state.
    pub time: f64,
    pub reason: String,
}

/// Time series of one simulated trajectory. `increments[n]` is the Brownian
/// increment that moved the wall from `wall_speed[n]` to `wall_speed[n+1]`,
/// so it is one shorter than the other series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub wall_speed: Vec<f64>,
    /// `ν‖∇u‖²/|D|`.
    pub dissipation: Vec<f64>,
    /// `½‖u‖²`.
    pub energy: Vec<f64>,
    pub wall_power: Vec<f64>,
    pub increments: Vec<f64>,
    pub audit: Option<AuditSeries>,
    pub snapshots: Vec<VelocityField>,
    /// Last stable state; the field at `T` for a completed run.
    pub final_state: VelocityField,
    pub blow_up: Option<BlowUpReport>,
}

impl TrajectoryRecord {
    pub fn completed(&self) -> bool {
        self.blow_up.is_none()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Trapezoid-rule time average of a series sampled on `times`.
    pub fn time_average(&self, series: &[f64]) -> f64 {
        let t = self.horizon() - self.times[0];
        if t <= 0.0 {
            return series.first().copied().unwrap_or(f64::NAN);
        }
        trapezoid(&self.times, series) / t
    }

    /// `⟨ε⟩_T`.
    pub fn mean_dissipation(&self) -> f64 {
        self.time_average(&self.dissipation)
    }
}

pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Integrates one trajectory. The step is shrunk to `T/⌈T/dt⌉` so the
/// horizon is hit exactly. A blow-up ends the run early; the record then
/// holds the last stable state and the report.
pub fn simulate_trajectory(sim: &Simulation) -> Result<TrajectoryRecord> {
    let flow = &sim.flow;
    flow.validate()?;
    sim.grid.validate()?;
    ensure_positive("t_end", sim.t_end)?;
    if sim.snapshot_every == Some(0) {
        return Err(Error::invalid("snapshot_every", "must be at least 1"));
    }
    let steps = (sim.t_end / sim.grid.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = sim.t_end / steps as f64;

    let mut solver = Solver::new(&flow.geometry, &sim.grid, flow.viscosity)?;
    let (mut noise, x0) = WallNoise::start(flow.ou, sim.wall_init, sim.seed)?;
    let mut field = solver.init_field(&sim.initial, x0)?;
    let speed = field.max_speed().max(flow.ou.mean_speed.abs());
    let limit = solver
        .grid()
        .stable_dt(flow.viscosity, speed, sim.grid.cfl_safety);
    if dt > limit {
        return Err(Error::Stability { dt, limit });
    }

    let nu = flow.viscosity;
    let mut rec = TrajectoryRecord {
        seed: sim.seed,
        dt,
        times: Vec::with_capacity(steps + 1),
        wall_speed: Vec::with_capacity(steps + 1),
        dissipation: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        wall_power: Vec::with_capacity(steps + 1),
        increments: Vec::with_capacity(steps),
        audit: sim.audit.then(AuditSeries::default),
        snapshots: Vec::new(),
        final_state: field.clone(),
        blow_up: None,
    };
    let observe = |rec: &mut TrajectoryRecord, field: &VelocityField| {
        rec.times.push(field.time);
        rec.wall_speed.push(field.wall_speed);
        rec.dissipation.push(dissipation(field, nu));
        rec.energy.push(field.kinetic_energy());
        rec.wall_power.push(wall_power(field, nu));
        if let Some(audit) = rec.audit.as_mut() {
            audit.push(AuditSample::measure(field, &flow.background));
        }
    };
    observe(&mut rec, &field);
    if sim.snapshot_every.is_some() {
        rec.snapshots.push(field.clone());
    }

    let mut previous = field.clone();
    for n in 0..steps {
        let (x_next, dw) = noise.advance(field.wall_speed, dt);
        previous.clone_from(&field);
        if let Err(e) = solver.step(&mut field, x_next, dt) {
            let reason = match e {
                Error::BlowUp { reason, .. } => reason,
                other => other.to_string(),
            };
            rec.blow_up = Some(BlowUpReport {
                step: n,
                time: previous.time,
                reason,
            });
            rec.final_state = previous;
            return Ok(rec);
        }
        // The last step lands on T up to rounding; pin it.
        if n + 1 == steps {
            field.time = sim.t_end;
        }
        rec.increments.push(dw);
        observe(&mut rec, &field);
        if let Some(every) = sim.snapshot_every {
            if (n + 1) % every == 0 || n + 1 == steps {
                rec.snapshots.push(field.clone());
            }
        }
    }
    rec.final_state = field;
    Ok(rec)
}

/// Discrete energy balance `dE/dt + ν‖∇u‖² − P = 0` along a record, with
/// `P` the wall power. Time derivatives are forward differences and the
/// other terms are averaged over each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetResidual {
    pub max_abs: f64,
    pub rms: f64,
    /// Largest total dissipation rate `ν‖∇u‖²` along the record.
    pub scale: f64,
}

pub fn energy_budget_residual(rec: &TrajectoryRecord, volume: f64) -> BudgetResidual {
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0;
    let n = rec.times.len().saturating_sub(1);
    for s in 0..n {
        let dt = rec.times[s + 1] - rec.times[s];
        let de = (rec.energy[s + 1] - rec.energy[s]) / dt;
        let diss = 0.5 * volume * (rec.dissipation[s] + rec.dissipation[s + 1]);
        let power = 0.5 * (rec.wall_power[s] + rec.wall_power[s + 1]);
        let r = de + diss - power;
        max_abs = max_abs.max(r.abs());
        sum_sq += r * r;
    }
    let scale = rec
        .dissipation
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs() * volume));
    BudgetResidual {
        max_abs,
        rms: if n > 0 {
            (sum_sq / n as f64).sqrt()
        } else {
            0.0
        },
        scale,
    }
}

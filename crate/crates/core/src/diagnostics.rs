//! Pathwise and ensemble checks of the energy method on simulated data.
//!
//! Everything here works with the fluctuation `v = u − Φ`, where
//! `Φ = (φ(x₃, X), 0, 0)` is the background shear layer of thickness
//! `δ = δ(X)`. Profiles across the gap are reconstructed piecewise linearly
//! through the cell centers and the wall values, and integrals over the
//! layer are split at `x₃ = δ` so the kink in `φ` is integrated exactly.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundParams;
use crate::bounds::FlowConfig;
use crate::error::{Error, Result};
use crate::ou::{OuParams, OuPath};
use crate::quadrature::Quadrature;
use crate::solver::{
    face_weight, grad_norm_sq, vertical_derivatives, AuditSeries, TrajectoryRecord, VelocityField,
};

const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Three-point Gauss–Legendre on `[a, b]`; exact for quintics.
fn gl3<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL3_NODES
        .iter()
        .zip(GL3_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// A tangential component along one column, linear between the wall
/// values and the cell centers.
struct ColumnProfile<'a> {
    values: &'a [f64],
    bottom: f64,
    top: f64,
    dz: f64,
}

impl ColumnProfile<'_> {
    fn height(&self) -> f64 {
        self.values.len() as f64 * self.dz
    }

    /// Node heights and values: the walls and every cell center.
    fn node(&self, m: usize) -> (f64, f64) {
        let n = self.values.len();
        match m {
            0 => (0.0, self.bottom),
            m if m == n + 1 => (self.height(), self.top),
            m => ((m as f64 - 0.5) * self.dz, self.values[m - 1]),
        }
    }

    /// `∫ g(x₃, w(x₃)) dx₃` over `[0, upper]`, segment by segment, with an
    /// extra breakpoint at `split`.
    fn integrate<G: Fn(f64, f64) -> f64>(&self, upper: f64, split: f64, g: G) -> f64 {
        let n = self.values.len();
        let mut total = 0.0;
        for m in 0..=n {
            let (za, wa) = self.node(m);
            let (zb, wb) = self.node(m + 1);
            if za >= upper {
                break;
            }
            let slope = (wb - wa) / (zb - za);
            let w = |z: f64| wa + slope * (z - za);
            let end = zb.min(upper);
            if za < split && split < end {
                total += gl3(|z| g(z, w(z)), za, split) + gl3(|z| g(z, w(z)), split, end);
            } else {
                total += gl3(|z| g(z, w(z)), za, end);
            }
        }
        total
    }
}

/// `v = u − Φ` on the staggered grid of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationField {
    /// The velocity the fluctuation was taken from.
    pub source: VelocityField,
    /// `v` itself: `u₁ − φ` at the `u₁` points, `u₂` and `u₃` unchanged.
    pub v: VelocityField,
    pub x_wall: f64,
    /// Layer thickness `δ(X)`.
    pub delta: f64,
    pub background: BackgroundParams,
    /// Cells whose centers lie inside the layer `D_δ`.
    pub layer_cells: usize,
}

/// Subtracts the background flow for wall speed `x_wall`.
pub fn fluctuation(field: &VelocityField, x_wall: f64, bp: &BackgroundParams) -> FluctuationField {
    let g = &field.grid;
    let mut v = field.clone();
    v.wall_speed = 0.0;
    let phi: Vec<f64> = (0..g.n3)
        .map(|k| bp.phi_unchecked(g.zc(k), x_wall))
        .collect();
    for (n, u) in v.u1.data.iter_mut().enumerate() {
        *u -= phi[n % g.n3];
    }
    let delta = bp.delta(x_wall);
    FluctuationField {
        source: field.clone(),
        v,
        x_wall,
        delta,
        background: *bp,
        layer_cells: (0..g.n3).filter(|&k| g.zc(k) < delta).count(),
    }
}

impl FluctuationField {
    fn profile<'a>(&'a self, i: usize, j: usize) -> ColumnProfile<'a> {
        ColumnProfile {
            values: self.source.u1.column(i, j),
            bottom: self.x_wall,
            top: 0.0,
            dz: self.source.grid.dz,
        }
    }

    /// Horizontal mean of `u₁` as a column.
    fn mean_u1(&self) -> Vec<f64> {
        let g = &self.source.grid;
        let mut mean = vec![0.0; g.n3];
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                for (m, u) in mean.iter_mut().zip(self.source.u1.column(i, j)) {
                    *m += u;
                }
            }
        }
        let cols = (g.n1 * g.n2) as f64;
        mean.iter_mut().for_each(|m| *m /= cols);
        mean
    }

    /// Wall values of `v₁` implied by the ghost-cell data, largest in
    /// magnitude over both walls. Zero up to rounding.
    pub fn wall_residual(&self) -> f64 {
        let bottom = self.x_wall - self.background.phi_unchecked(0.0, self.x_wall);
        let top = -self
            .background
            .phi_unchecked(self.source.grid.geometry.height, self.x_wall);
        bottom
            .abs()
            .max(top.abs())
            .max(self.v.wall_normal_residual())
    }

    /// `‖v‖²`. The `v₁` part integrates the linear reconstruction exactly,
    /// splitting at `δ`.
    pub fn norm_sq(&self) -> f64 {
        let g = &self.source.grid;
        let area = g.dx1 * g.dx2;
        let sq = |f: &crate::solver::Field3| f.data.iter().map(|x| x * x).sum::<f64>();
        let mut v1 = 0.0;
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let p = self.profile(i, j);
                v1 += p.integrate(p.height(), self.delta, |z, u| {
                    let d = u - self.background.phi_unchecked(z, self.x_wall);
                    d * d
                });
            }
        }
        v1 * area + g.cell_volume() * (sq(&self.v.u2) + sq(&self.v.u3))
    }

    /// `‖∇v‖²`, using the same stencils and weights as the dissipation of
    /// `u`. Only `∂₃v₁` differs from `∇u`; each face's dual cell is split at
    /// `δ`, where `∂₃φ` jumps from `−X/δ` to 0.
    pub fn grad_norm_sq(&self) -> f64 {
        let g = &self.source.grid;
        let (n3, dz) = (g.n3, g.dz);
        let l2 = g.geometry.wall_area();
        let x = self.x_wall;
        let mut deriv = vec![0.0; n3 + 1];
        vertical_derivatives(&self.mean_u1(), x, 0.0, dz, &mut deriv);
        let mut cross = 0.0;
        for (k, d) in deriv.iter().enumerate() {
            let lo = (k as f64 * dz - 0.5 * dz).max(0.0);
            let hi = lo + face_weight(k, n3, dz);
            let overlap = (hi.min(self.delta) - lo).max(0.0);
            cross += d * overlap;
        }
        let shift = 2.0 * (x / self.delta) * cross * l2 + l2 * x * x / self.delta;
        (grad_norm_sq(&self.source) + shift).max(0.0)
    }

    /// `∫_{D_δ} v₁ G(x₃) dx`. Exact for `G` quadratic in `x₃`.
    pub fn layer_integral<G: Fn(f64) -> f64>(&self, g_profile: G) -> f64 {
        let mean = self.mean_u1();
        let p = ColumnProfile {
            values: &mean,
            bottom: self.x_wall,
            top: 0.0,
            dz: self.source.grid.dz,
        };
        let l2 = self.source.grid.geometry.wall_area();
        let d = self.delta;
        l2 * p.integrate(d, d, |z, u| {
            (u - self.background.phi_unchecked(z, self.x_wall)) * g_profile(z)
        })
    }

    /// `∫_{D_δ} v₁ f′(X) dx`, the integrand of the martingale term.
    pub fn layer_integral_fprime(&self) -> f64 {
        let slope = (3.0 * self.x_wall * self.x_wall + self.background.b) / self.background.a;
        self.layer_integral(|z| 1.0 - z * slope)
    }
}

/// Quantities sampled once per recorded time for the energy audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSample {
    pub grad_v_sq: f64,
    pub layer_integral: f64,
    pub v_norm_sq: f64,
}

impl AuditSample {
    pub fn measure(field: &VelocityField, bp: &BackgroundParams) -> Self {
        let f = fluctuation(field, field.wall_speed, bp);
        AuditSample {
            grad_v_sq: f.grad_norm_sq(),
            layer_integral: f.layer_integral_fprime(),
            v_norm_sq: f.norm_sq(),
        }
    }
}

/// Both sides of `|∫_{D_δ} v₁ G| ≤ ‖∇v‖ δ L (∫₀^δ G²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl TraceCheck {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.lhs <= self.rhs + tolerance
    }
}

/// Trace inequality for a layer profile `G` on `(0, δ)`.
pub fn trace_lemma_check<G: Fn(f64) -> f64>(
    v: &FluctuationField,
    g_profile: G,
) -> Result<TraceCheck> {
    let lhs = v.layer_integral(&g_profile).abs();
    let g_sq = Quadrature::with_rel_tol(1e-10)
        .integrate(|z| g_profile(z).powi(2), 0.0, v.delta)?
        .value;
    let rhs = v.grad_norm_sq().sqrt() * v.delta * v.source.grid.geometry.length * g_sq.sqrt();
    Ok(TraceCheck { lhs, rhs })
}

/// The `G = f′` case bounded by its uniform cap `√3 ‖∇v‖ L (A/B)^{3/2}`.
pub fn fprime_trace_cap(v: &FluctuationField) -> f64 {
    let bp = &v.background;
    3f64.sqrt() * v.grad_norm_sq().sqrt() * bp.geometry.length * (bp.a / bp.b).powf(1.5)
}

/// Itô-formula residual along one path at fixed height `x₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    pub residual: f64,
    /// `f(X_T) − f(X_0)`, the size of what is being balanced.
    pub increment: f64,
    /// Steps whose left endpoint put `x₃` outside the layer.
    pub skipped: usize,
}

/// `Σ [f(X_{n+1}) − f(X_n) − Lf(X_n)Δt − σ f′(X_n)ΔW_n]` over the steps
/// whose left endpoint has `x₃ ≤ δ(X_n)`. With no skips this is
/// `f(X_T) − f(X_0) − ∫Lf dt − σ∫f′ dW` in left-endpoint form.
pub fn ito_residual(path: &OuPath, bp: &BackgroundParams, p: &OuParams, x3: f64) -> ItoResidual {
    let f = |z: f64| (1.0 - x3 / bp.delta(z)) * z;
    let mut residual = 0.0;
    let mut skipped = 0;
    for n in 0..path.increments.len() {
        let (x0, x1) = (path.values[n], path.values[n + 1]);
        let dt = path.times[n + 1] - path.times[n];
        match bp.f_derivatives(x0, x3) {
            Ok(s) => {
                let lf = crate::background::lf_from(&s, p);
                residual +=
                    f(x1) - f(x0) - lf * dt - p.noise_amplitude * s.f_prime * path.increments[n];
            }
            Err(_) => skipped += 1,
        }
    }
    let last = path.values.len() - 1;
    ItoResidual {
        residual,
        increment: f(path.values[last]) - f(path.values[0]),
        skipped,
    }
}

/// Per-trajectory terms of the pathwise energy inequality
/// `∫ν‖∇v‖² + 4M_T ≤ 2‖v(0)‖² − 2‖v(T)‖² + Y_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityLedger {
    pub seed: u64,
    pub horizon: f64,
    /// `∫₀ᵀ ν‖∇v‖² dt`.
    pub dissipation_integral: f64,
    /// `2‖v(0)‖²`.
    pub initial_term: f64,
    /// `2‖v(T)‖²`.
    pub final_term: f64,
    pub y_t: f64,
    /// `σ Σ I_n ΔW_n` with `I_n = ∫_{D_δ} v₁ f′(X_n) dx` at the left end.
    pub m_t: f64,
    /// `σ² Σ I_n² Δt`.
    pub quadratic_variation: f64,
    /// `3σ²L²(A/B)³ Σ ‖∇v_n‖² Δt`.
    pub quadratic_variation_cap: f64,
    /// `RHS − LHS`.
    pub slack: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub quadratic_variation_passed: bool,
}

/// Deterministic part of `Y_T`: `4L²T[(3/2)A/B + (6/ν)(A/B)³σ²/B]σ²`.
fn y_constant_rate(cfg: &FlowConfig) -> f64 {
    let bp = &cfg.background;
    let r = bp.a / bp.b;
    let s2 = cfg.ou.noise_amplitude.powi(2);
    let l2 = cfg.geometry.wall_area();
    4.0 * l2 * (1.5 * r + 6.0 / cfg.viscosity * r.powi(3) * s2 / bp.b) * s2
}

/// Integrand of the path-dependent part of `Y_T` at wall speed `x`.
fn y_integrand(cfg: &FlowConfig, x: f64) -> f64 {
    let bp = &cfg.background;
    let r = bp.a / bp.b;
    let nu = cfg.viscosity;
    let theta = cfg.ou.reversion_rate;
    let l2 = cfg.geometry.wall_area();
    let du = cfg.ou.mean_speed - x;
    4.0 * l2 * (nu * x * x / bp.delta(x) + 6.0 / nu * r.powi(3) * theta * theta * du * du)
}

/// `Y_T` along a recorded wall path, trapezoid rule in time.
pub fn y_functional(cfg: &FlowConfig, times: &[f64], wall_speed: &[f64]) -> f64 {
    let t = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    let integrand: Vec<f64> = wall_speed.iter().map(|&x| y_integrand(cfg, x)).collect();
    y_constant_rate(cfg) * t + crate::solver::trapezoid(times, &integrand)
}

/// Audit tolerance `C·(√(Δt U/h) + (Δx/h)²)·|Y_T|`, with `Δx` the coarsest
/// spacing.
pub fn audit_tolerance(
    constant: f64,
    cfg: &FlowConfig,
    dt: f64,
    max_spacing: f64,
    y_t: f64,
) -> f64 {
    let h = cfg.geometry.height;
    let u = cfg.ou.mean_speed.abs();
    constant * ((dt * u / h).sqrt() + (max_spacing / h).powi(2)) * y_t.abs()
}

/// The stored series an energy-inequality audit reads.
#[derive(Debug, Clone, Copy)]
pub struct AuditInput<'a> {
    pub seed: u64,
    /// Time step, for the tolerance.
    pub dt: f64,
    /// Coarsest grid spacing, for the tolerance.
    pub max_spacing: f64,
    pub times: &'a [f64],
    pub wall_speed: &'a [f64],
    pub increments: &'a [f64],
    pub series: &'a AuditSeries,
}

/// Evaluates the energy inequality on a recorded trajectory.
pub fn energy_inequality_audit(
    rec: &TrajectoryRecord,
    cfg: &FlowConfig,
    tolerance_constant: f64,
) -> Result<InequalityLedger> {
    let series = rec.audit.as_ref().ok_or(Error::MissingIncrements)?;
    let g = &rec.final_state.grid;
    let input = AuditInput {
        seed: rec.seed,
        dt: rec.dt,
        max_spacing: g.dx1.max(g.dx2).max(g.dz),
        times: &rec.times,
        wall_speed: &rec.wall_speed,
        increments: &rec.increments,
        series,
    };
    audit_series(&input, cfg, tolerance_constant)
}

/// Evaluates the energy inequality on stored series.
pub fn audit_series(
    input: &AuditInput<'_>,
    cfg: &FlowConfig,
    tolerance_constant: f64,
) -> Result<InequalityLedger> {
    let audit = input.series;
    let n = input.times.len();
    let lengths_ok = n >= 2
        && input.wall_speed.len() == n
        && input.increments.len() == n - 1
        && audit.grad_v_sq.len() == n
        && audit.layer_integral.len() == n
        && audit.v_norm_sq.len() == n;
    if !lengths_ok {
        return Err(Error::MissingIncrements);
    }
    let nu = cfg.viscosity;
    let sigma = cfg.ou.noise_amplitude;
    let bp = &cfg.background;
    let l2 = cfg.geometry.wall_area();

    let dissipation: Vec<f64> = audit.grad_v_sq.iter().map(|g| nu * g).collect();
    let dissipation_integral = crate::solver::trapezoid(&input.times, &dissipation);
    let y_t = y_functional(cfg, &input.times, &input.wall_speed);

    let mut m_t = 0.0;
    let mut qv = 0.0;
    let mut grad_left = 0.0;
    for s in 0..n - 1 {
        let dt = input.times[s + 1] - input.times[s];
        let i_n = audit.layer_integral[s];
        m_t += i_n * input.increments[s];
        qv += i_n * i_n * dt;
        grad_left += audit.grad_v_sq[s] * dt;
    }
    m_t *= sigma;
    qv *= sigma * sigma;
    let cap = 3.0 * sigma * sigma * l2 * (bp.a / bp.b).powi(3) * grad_left;

    let initial_term = 2.0 * audit.v_norm_sq[0];
    let final_term = 2.0 * audit.v_norm_sq[n - 1];
    let lhs = dissipation_integral + 4.0 * m_t;
    let rhs = initial_term - final_term + y_t;
    let slack = rhs - lhs;

    let spacing = input.max_spacing;
    let tolerance = audit_tolerance(tolerance_constant, cfg, input.dt, spacing, y_t);
    let qv_tolerance = audit_tolerance(tolerance_constant, cfg, input.dt, spacing, cap);
    let ledger = InequalityLedger {
        seed: input.seed,
        horizon: input.times[n - 1],
        dissipation_integral,
        initial_term,
        final_term,
        y_t,
        m_t,
        quadratic_variation: qv,
        quadratic_variation_cap: cap,
        slack,
        tolerance,
        passed: slack >= -tolerance,
        quadratic_variation_passed: qv <= cap + qv_tolerance,
    };
    let finite = [
        dissipation_integral,
        initial_term,
        final_term,
        y_t,
        m_t,
        qv,
        cap,
        slack,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Invariant(
            "non-finite entry in inequality ledger".into(),
        ));
    }
    Ok(ledger)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl Estimate {
    /// A single sample carries no spread information; its standard error
    /// is reported as zero.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::invalid("samples", "need at least one"));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Ok(Estimate {
                mean,
                standard_error: 0.0,
            });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Estimate {
            mean,
            standard_error: (var / n as f64).sqrt(),
        })
    }

    /// `|mean| / SE`; infinite for a nonzero mean with zero spread.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.standard_error
        }
    }
}

/// Ensemble statistics of `⟨ε⟩_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationStats {
    pub horizon: f64,
    pub count: usize,
    pub per_trajectory: Vec<f64>,
    /// Estimate of `E⟨ε⟩_T`.
    pub mean: Estimate,
    /// Estimate of `E[⟨ε⟩_T²]`.
    pub second_moment: Estimate,
}

impl DissipationStats {
    /// From per-trajectory time averages over a common horizon.
    pub fn from_time_averages(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let mean = Estimate::from_samples(&values)?;
        let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
        let second_moment = Estimate::from_samples(&squares)?;
        let stats = DissipationStats {
            horizon,
            count: values.len(),
            per_trajectory: values,
            mean,
            second_moment,
        };
        if !stats.jensen_holds() {
            return Err(Error::Invariant(format!(
                "second moment {} below squared mean {}",
                stats.second_moment.mean,
                stats.mean.mean.powi(2)
            )));
        }
        Ok(stats)
    }

    /// `E[⟨ε⟩²] ≥ (E⟨ε⟩)²` up to rounding.
    pub fn jensen_holds(&self) -> bool {
        let m2 = self.mean.mean * self.mean.mean;
        self.second_moment.mean >= m2 * (1.0 - 1e-12)
    }

    pub fn variance(&self) -> f64 {
        (self.second_moment.mean - self.mean.mean.powi(2)).max(0.0)
    }
}

/// Statistics over completed records sharing the horizon `t_end`.
pub fn ensemble_stats(records: &[TrajectoryRecord], t_end: f64) -> Result<DissipationStats> {
    let mut values = Vec::with_capacity(records.len());
    for r in records {
        let found = r.horizon();
        if (found - t_end).abs() > 1e-9 * t_end.abs().max(1.0) {
            return Err(Error::HorizonMismatch {
                expected: t_end,
                found,
            });
        }
        values.push(r.mean_dissipation());
    }
    DissipationStats::from_time_averages(t_end, values)
}

/// Ensemble summary of `M_T`, which has mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSummary {
    pub count: usize,
    pub estimate: Estimate,
    /// `|mean| / SE`.
    pub z_score: f64,
    pub passed: bool,
    /// Enough samples for the normal approximation behind the z-test.
    pub conclusive: bool,
}

impl MartingaleSummary {
    /// Smallest ensemble whose z-score is treated as a verdict.
    pub const MIN_CONCLUSIVE: usize = 30;

    pub fn from_values(values: &[f64], max_z: f64) -> Result<Self> {
        let estimate = Estimate::from_samples(values)?;
        let z_score = estimate.z_score(0.0);
        Ok(MartingaleSummary {
            count: values.len(),
            estimate,
            z_score,
            passed: z_score <= max_z,
            conclusive: values.len() >= Self::MIN_CONCLUSIVE,
        })
    }
}

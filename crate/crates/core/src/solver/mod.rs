//! Incompressible Navier–Stokes in the periodic channel `(0,L)² × (0,h)`
//! with a sliding bottom wall, on a staggered grid with pressure projection.

mod field;
mod grid;
mod poisson;
pub mod snapshot;
mod trajectory;

pub use field::{InitialCondition, VelocityField};
pub use grid::{Field3, Grid, GridSpec};
pub use trajectory::{
    energy_budget_residual, simulate_trajectory, AuditSeries, BlowUpReport, BudgetResidual,
    Simulation, TrajectoryRecord,
};

use grid::{next, prev};
use poisson::Poisson;
pub(crate) use trajectory::trapezoid;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::geometry::Geometry;

/// Builds the initial field for `initial` with bottom-wall speed
/// `wall_speed`. The result satisfies the wall conditions and is discretely
/// divergence-free.
pub fn init_field(
    geometry: &Geometry,
    spec: &GridSpec,
    initial: &InitialCondition,
    wall_speed: f64,
) -> Result<VelocityField> {
    let mut solver = Solver::new(geometry, spec, 1.0)?;
    solver.init_field(initial, wall_speed)
}

/// Time stepper for one trajectory. Owns the transform plans and scratch
/// storage, so reuse it across steps.
#[derive(Debug)]
pub struct Solver {
    grid: Grid,
    viscosity: f64,
    safety: f64,
    poisson: Poisson,
    k1: [Field3; 3],
    stage: [Field3; 3],
    divergence: Field3,
    potential: Field3,
}

impl Solver {
    pub fn new(geometry: &Geometry, spec: &GridSpec, viscosity: f64) -> Result<Self> {
        geometry.validate()?;
        spec.validate()?;
        ensure_positive("viscosity", viscosity)?;
        let grid = Grid::new(geometry, spec);
        let (n1, n2, n3) = (grid.n1, grid.n2, grid.n3);
        let velocity = || {
            [
                Field3::zeros(n1, n2, n3),
                Field3::zeros(n1, n2, n3),
                Field3::zeros(n1, n2, n3 + 1),
            ]
        };
        Ok(Solver {
            grid,
            viscosity,
            safety: spec.cfl_safety,
            poisson: Poisson::new(&grid),
            k1: velocity(),
            stage: velocity(),
            divergence: Field3::zeros(n1, n2, n3),
            potential: Field3::zeros(n1, n2, n3),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    /// Stability limit for the current field and the next wall speed.
    pub fn stable_dt(&self, field: &VelocityField, wall_speed_next: f64) -> f64 {
        let speed = field.max_speed().max(wall_speed_next.abs());
        self.grid.stable_dt(self.viscosity, speed, self.safety)
    }

    pub fn init_field(
        &mut self,
        initial: &InitialCondition,
        wall_speed: f64,
    ) -> Result<VelocityField> {
        let mut field = VelocityField::zeros(&self.grid);
        if field::fill_initial(&mut field, initial, wall_speed)? {
            self.project(&mut field.u1, &mut field.u2, &mut field.u3);
        }
        Ok(field)
    }

    /// Removes the divergent part of `(u1, u2, u3)` in place. Wall faces of
    /// `u3` are untouched, which is the Neumann condition on the potential.
    fn project(&mut self, u1: &mut Field3, u2: &mut Field3, u3: &mut Field3) {
        let g = self.grid;
        let (n1, n2, n3) = (g.n1, g.n2, g.n3);
        for i in 0..n1 {
            let ip = next(i, n1);
            for j in 0..n2 {
                let jp = next(j, n2);
                let (c1, e1) = (u1.column(i, j), u1.column(ip, j));
                let (c2, n2c) = (u2.column(i, j), u2.column(i, jp));
                let c3 = u3.column(i, j);
                let out = self.divergence.column_mut(i, j);
                for k in 0..n3 {
                    out[k] = (e1[k] - c1[k]) / g.dx1
                        + (n2c[k] - c2[k]) / g.dx2
                        + (c3[k + 1] - c3[k]) / g.dz;
                }
            }
        }
        self.poisson.solve(&self.divergence, &mut self.potential);
        let phi = &self.potential;
        for i in 0..n1 {
            let im = prev(i, n1);
            for j in 0..n2 {
                let jm = prev(j, n2);
                let (pc, pw, ps) = (phi.column(i, j), phi.column(im, j), phi.column(i, jm));
                let a = u1.column_mut(i, j);
                for k in 0..n3 {
                    a[k] -= (pc[k] - pw[k]) / g.dx1;
                }
                let b = u2.column_mut(i, j);
                for k in 0..n3 {
                    b[k] -= (pc[k] - ps[k]) / g.dx2;
                }
                let c = u3.column_mut(i, j);
                for k in 1..n3 {
                    c[k] -= (pc[k] - pc[k - 1]) / g.dz;
                }
            }
        }
    }

    /// Advances `field` by `dt` with the bottom wall moving at
    /// `wall_speed_next` throughout the step (Heun's method, projected after
    /// each stage).
    pub fn step(&mut self, field: &mut VelocityField, wall_speed_next: f64, dt: f64) -> Result<()> {
        ensure_finite("wall speed", wall_speed_next)?;
        ensure_positive("dt", dt)?;
        if !field.all_finite() {
            return Err(Error::BlowUp {
                step: 0,
                time: field.time,
                reason: "non-finite velocity on entry".into(),
            });
        }
        let limit = self.stable_dt(field, wall_speed_next);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability { dt, limit });
        }
        let nu = self.viscosity;
        let g = self.grid;

        let [a1, a2, a3] = &mut self.k1;
        tendency(
            &g,
            nu,
            wall_speed_next,
            [&field.u1, &field.u2, &field.u3],
            [a1, a2, a3],
        );
        {
            let [s1, s2, s3] = &mut self.stage;
            combine(s1, &field.u1, dt, &self.k1[0]);
            combine(s2, &field.u2, dt, &self.k1[1]);
            combine(s3, &field.u3, dt, &self.k1[2]);
        }
        let mut stage = std::mem::replace(&mut self.stage, empty_triplet());
        {
            let [s1, s2, s3] = &mut stage;
            self.project(s1, s2, s3);
        }
        let [a1, a2, a3] = &mut self.k1;
        tendency(
            &g,
            nu,
            wall_speed_next,
            [&stage[0], &stage[1], &stage[2]],
            [a1, a2, a3],
        );
        average_into(&mut field.u1, &stage[0], dt, &self.k1[0]);
        average_into(&mut field.u2, &stage[1], dt, &self.k1[1]);
        average_into(&mut field.u3, &stage[2], dt, &self.k1[2]);
        self.stage = stage;
        self.project(&mut field.u1, &mut field.u2, &mut field.u3);
        for (p, phi) in field.p.data.iter_mut().zip(&self.potential.data) {
            *p = 2.0 * phi / dt;
        }
        field.time += dt;
        field.wall_speed = wall_speed_next;
        if !field.all_finite() {
            return Err(Error::BlowUp {
                step: 0,
                time: field.time,
                reason: "non-finite velocity after step".into(),
            });
        }
        Ok(())
    }
}

fn empty_triplet() -> [Field3; 3] {
    [
        Field3::zeros(0, 0, 0),
        Field3::zeros(0, 0, 0),
        Field3::zeros(0, 0, 0),
    ]
}

/// `out = u + dt·k`.
fn combine(out: &mut Field3, u: &Field3, dt: f64, k: &Field3) {
    for ((o, a), b) in out.data.iter_mut().zip(&u.data).zip(&k.data) {
        *o = a + dt * b;
    }
}

/// `u ← ½(u + s + dt·k)`.
fn average_into(u: &mut Field3, s: &Field3, dt: f64, k: &Field3) {
    for ((a, b), c) in u.data.iter_mut().zip(&s.data).zip(&k.data) {
        *a = 0.5 * (*a + b + dt * c);
    }
}

/// Right-hand side `ν∆u − ∇·(u⊗u)` before projection. The advective flux
/// uses centered averages in divergence form, which conserves discrete
/// kinetic energy for divergence-free data. Tangential wall values enter
/// through ghost cells, `2X − u₀` at the bottom and `−u` at the top.
fn tendency(g: &Grid, nu: f64, wall: f64, u: [&Field3; 3], out: [&mut Field3; 3]) {
    let (n1, n2, n3) = (g.n1, g.n2, g.n3);
    let (r1, r2, rz) = (1.0 / g.dx1, 1.0 / g.dx2, 1.0 / g.dz);
    let (v1, v2, vz) = (nu * r1 * r1, nu * r2 * r2, nu * rz * rz);
    let [u1, u2, u3] = u;
    let [f1, f2, f3] = out;
    for i in 0..n1 {
        let ip = next(i, n1);
        let im = prev(i, n1);
        for j in 0..n2 {
            let jp = next(j, n2);
            let jm = prev(j, n2);

            // x₁ momentum at (i, j+½, k+½).
            {
                let a = u1.column(i, j);
                let (e, w, n, s) = (
                    u1.column(ip, j),
                    u1.column(im, j),
                    u1.column(i, jp),
                    u1.column(i, jm),
                );
                let (vn, vnw, vs, vsw) = (
                    u2.column(i, jp),
                    u2.column(im, jp),
                    u2.column(i, j),
                    u2.column(im, j),
                );
                let (wc, ww) = (u3.column(i, j), u3.column(im, j));
                let o = f1.column_mut(i, j);
                for k in 0..n3 {
                    let c = a[k];
                    let fe = 0.5 * (c + e[k]);
                    let fw = 0.5 * (w[k] + c);
                    let fnn = 0.5 * (c + n[k]) * 0.5 * (vn[k] + vnw[k]);
                    let fs = 0.5 * (s[k] + c) * 0.5 * (vs[k] + vsw[k]);
                    let top = if k + 1 == n3 {
                        0.0
                    } else {
                        0.5 * (c + a[k + 1])
                    };
                    let bottom = if k == 0 { wall } else { 0.5 * (a[k - 1] + c) };
                    let ft = top * 0.5 * (wc[k + 1] + ww[k + 1]);
                    let fb = bottom * 0.5 * (wc[k] + ww[k]);
                    let below = if k == 0 { 2.0 * wall - c } else { a[k - 1] };
                    let above = if k + 1 == n3 { -c } else { a[k + 1] };
                    let lap = (e[k] - 2.0 * c + w[k]) * v1
                        + (n[k] - 2.0 * c + s[k]) * v2
                        + (above - 2.0 * c + below) * vz;
                    let adv = (fe * fe - fw * fw) * r1 + (fnn - fs) * r2 + (ft - fb) * rz;
                    o[k] = lap - adv;
                }
            }

            // x₂ momentum at (i+½, j, k+½).
            {
                let a = u2.column(i, j);
                let (e, w, n, s) = (
                    u2.column(ip, j),
                    u2.column(im, j),
                    u2.column(i, jp),
                    u2.column(i, jm),
                );
                let (ue, ues, uw, uws) = (
                    u1.column(ip, j),
                    u1.column(ip, jm),
                    u1.column(i, j),
                    u1.column(i, jm),
                );
                let (wc, ws) = (u3.column(i, j), u3.column(i, jm));
                let o = f2.column_mut(i, j);
                for k in 0..n3 {
                    let c = a[k];
                    let fe = 0.5 * (c + e[k]) * 0.5 * (ue[k] + ues[k]);
                    let fw = 0.5 * (w[k] + c) * 0.5 * (uw[k] + uws[k]);
                    let fnn = 0.5 * (c + n[k]);
                    let fs = 0.5 * (s[k] + c);
                    let top = if k + 1 == n3 {
                        0.0
                    } else {
                        0.5 * (c + a[k + 1])
                    };
                    let bottom = if k == 0 { 0.0 } else { 0.5 * (a[k - 1] + c) };
                    let ft = top * 0.5 * (wc[k + 1] + ws[k + 1]);
                    let fb = bottom * 0.5 * (wc[k] + ws[k]);
                    let below = if k == 0 { -c } else { a[k - 1] };
                    let above = if k + 1 == n3 { -c } else { a[k + 1] };
                    let lap = (e[k] - 2.0 * c + w[k]) * v1
                        + (n[k] - 2.0 * c + s[k]) * v2
                        + (above - 2.0 * c + below) * vz;
                    let adv = (fe - fw) * r1 + (fnn * fnn - fs * fs) * r2 + (ft - fb) * rz;
                    o[k] = lap - adv;
                }
            }

            // x₃ momentum at (i+½, j+½, k), interior faces only.
            {
                let a = u3.column(i, j);
                let (e, w, n, s) = (
                    u3.column(ip, j),
                    u3.column(im, j),
                    u3.column(i, jp),
                    u3.column(i, jm),
                );
                let (ue, uw) = (u1.column(ip, j), u1.column(i, j));
                let (vn, vs) = (u2.column(i, jp), u2.column(i, j));
                let o = f3.column_mut(i, j);
                o[0] = 0.0;
                o[n3] = 0.0;
                for k in 1..n3 {
                    let c = a[k];
                    let fe = 0.5 * (c + e[k]) * 0.5 * (ue[k - 1] + ue[k]);
                    let fw = 0.5 * (w[k] + c) * 0.5 * (uw[k - 1] + uw[k]);
                    let fnn = 0.5 * (c + n[k]) * 0.5 * (vn[k - 1] + vn[k]);
                    let fs = 0.5 * (s[k] + c) * 0.5 * (vs[k - 1] + vs[k]);
                    let up = 0.5 * (c + a[k + 1]);
                    let down = 0.5 * (a[k - 1] + c);
                    let lap = (e[k] - 2.0 * c + w[k]) * v1
                        + (n[k] - 2.0 * c + s[k]) * v2
                        + (a[k + 1] - 2.0 * c + a[k - 1]) * vz;
                    let adv = (fe - fw) * r1 + (fnn - fs) * r2 + (up * up - down * down) * rz;
                    o[k] = lap - adv;
                }
            }
        }
    }
}

/// One-sided `∂₃` at a wall from the wall value `w` and the first three
/// cell centers inward (cubic through `0, dz/2, 3dz/2, 5dz/2`). Positive
/// `dz` gives the bottom wall; pass `−dz` with the mirrored column for the
/// top.
#[inline]
pub(crate) fn wall_derivative(w: f64, c0: f64, c1: f64, c2: f64, dz: f64) -> f64 {
    (-184.0 * w + 225.0 * c0 - 50.0 * c1 + 9.0 * c2) / (60.0 * dz)
}

/// `∂₃` of a tangential component at the `n3 + 1` horizontal faces
/// `x₃ = k·dz`, given cell-centered values and the wall data.
pub(crate) fn vertical_derivatives(col: &[f64], bottom: f64, top: f64, dz: f64, out: &mut [f64]) {
    let n = col.len();
    out[0] = wall_derivative(bottom, col[0], col[1], col[2], dz);
    for k in 1..n {
        out[k] = (col[k] - col[k - 1]) / dz;
    }
    out[n] = wall_derivative(top, col[n - 1], col[n - 2], col[n - 3], -dz);
}

/// Quadrature weight of horizontal face `k` in the trapezoid rule across
/// the gap.
#[inline]
pub(crate) fn face_weight(k: usize, n3: usize, dz: f64) -> f64 {
    if k == 0 || k == n3 {
        0.5 * dz
    } else {
        dz
    }
}

/// `‖∇u‖²` over the channel: centered differences inside, one-sided
/// stencils at the walls, midpoint weights in cells and trapezoid weights
/// across the gap.
pub fn grad_norm_sq(field: &VelocityField) -> f64 {
    let g = &field.grid;
    let (n1, n2, n3) = (g.n1, g.n2, g.n3);
    let area = g.dx1 * g.dx2;
    let dv = area * g.dz;
    let (u1, u2, u3) = (&field.u1, &field.u2, &field.u3);
    let mut cells = 0.0;
    let mut faces = 0.0;
    let mut dz_buf = vec![0.0; n3 + 1];
    for i in 0..n1 {
        let ip = next(i, n1);
        for j in 0..n2 {
            let jp = next(j, n2);
            let (a, ae, an) = (u1.column(i, j), u1.column(ip, j), u1.column(i, jp));
            let (b, be, bn) = (u2.column(i, j), u2.column(ip, j), u2.column(i, jp));
            let (c, ce, cn) = (u3.column(i, j), u3.column(ip, j), u3.column(i, jp));
            for k in 0..n3 {
                let d11 = (ae[k] - a[k]) / g.dx1;
                let d21 = (an[k] - a[k]) / g.dx2;
                let d12 = (be[k] - b[k]) / g.dx1;
                let d22 = (bn[k] - b[k]) / g.dx2;
                let d33 = (c[k + 1] - c[k]) / g.dz;
                cells += d11 * d11 + d21 * d21 + d12 * d12 + d22 * d22 + d33 * d33;
            }
            for k in 1..n3 {
                let d13 = (ce[k] - c[k]) / g.dx1;
                let d23 = (cn[k] - c[k]) / g.dx2;
                faces += (d13 * d13 + d23 * d23) * g.dz;
            }
            vertical_derivatives(a, field.wall_speed, 0.0, g.dz, &mut dz_buf);
            for (k, d) in dz_buf.iter().enumerate() {
                faces += d * d * face_weight(k, n3, g.dz);
            }
            vertical_derivatives(b, 0.0, 0.0, g.dz, &mut dz_buf);
            for (k, d) in dz_buf.iter().enumerate() {
                faces += d * d * face_weight(k, n3, g.dz);
            }
        }
    }
    cells * dv + faces * area
}

/// Instantaneous dissipation per unit volume, `ν‖∇u‖²/|D|`.
pub fn dissipation(field: &VelocityField, viscosity: f64) -> f64 {
    viscosity * grad_norm_sq(field) / field.grid.geometry.volume()
}

/// Rate of work done by the bottom wall on the fluid,
/// `−ν X ∫_{x₃=0} ∂₃u₁ dA`.
pub fn wall_power(field: &VelocityField, viscosity: f64) -> f64 {
    let g = &field.grid;
    let x = field.wall_speed;
    let mut shear = 0.0;
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let a = field.u1.column(i, j);
            shear += wall_derivative(x, a[0], a[1], a[2], g.dz);
        }
    }
    -viscosity * x * shear * g.dx1 * g.dx2
}

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::grid::{next, Field3, Grid};
use crate::error::{ensure_finite, Error, Result};
use crate::rng::stream;

/// Velocity on the staggered grid plus the wall speed it was built with.
///
/// `u1[i,j,k]` sits at `(i·dx₁, (j+½)dx₂, (k+½)dz)`, `u2` on the `x₂` faces,
/// `u3[i,j,k]` at `((i+½)dx₁, (j+½)dx₂, k·dz)` for `k = 0..=n3` with both
/// wall faces held at zero. `p` is cell-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Grid,
    pub u1: Field3,
    pub u2: Field3,
    pub u3: Field3,
    pub p: Field3,
    pub time: f64,
    /// Bottom-wall speed `X` imposed through the ghost cells.
    pub wall_speed: f64,
}

/// Initial velocity inside the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialCondition {
    Rest,
    /// `u₁ = U₀(1 − x₃/h)`.
    Couette {
        speed: f64,
    },
    /// Couette plus a random divergence-free perturbation of relative size
    /// `amplitude` that vanishes at the walls.
    Perturbed {
        speed: f64,
        amplitude: f64,
        seed: u64,
    },
    /// Couette plus the slowest diffusive mode, `amplitude·U₀·sin(πx₃/h)`.
    /// Horizontally uniform, so the evolution is exactly one-dimensional.
    ShearMode {
        speed: f64,
        amplitude: f64,
    },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Rest => Ok(()),
            InitialCondition::Couette { speed } => ensure_finite("speed", speed).map(|_| ()),
            InitialCondition::Perturbed {
                speed, amplitude, ..
            }
            | InitialCondition::ShearMode { speed, amplitude } => {
                ensure_finite("speed", speed)?;
                ensure_finite("amplitude", amplitude)?;
                Ok(())
            }
        }
    }
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        let (n1, n2, n3) = (grid.n1, grid.n2, grid.n3);
        VelocityField {
            grid: *grid,
            u1: Field3::zeros(n1, n2, n3),
            u2: Field3::zeros(n1, n2, n3),
            u3: Field3::zeros(n1, n2, n3 + 1),
            p: Field3::zeros(n1, n2, n3),
            time: 0.0,
            wall_speed: 0.0,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.u1.all_finite() && self.u2.all_finite() && self.u3.all_finite()
    }

    pub fn max_speed(&self) -> f64 {
        self.u1
            .max_abs()
            .max(self.u2.max_abs())
            .max(self.u3.max_abs())
            .max(self.wall_speed.abs())
    }

    /// Discrete divergence in cell `(i, j, k)`.
    pub fn divergence_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let g = &self.grid;
        let ip = next(i, g.n1);
        let jp = next(j, g.n2);
        (self.u1.get(ip, j, k) - self.u1.get(i, j, k)) / g.dx1
            + (self.u2.get(i, jp, k) - self.u2.get(i, j, k)) / g.dx2
            + (self.u3.get(i, j, k + 1) - self.u3.get(i, j, k)) / g.dz
    }

    pub fn divergence(&self) -> Field3 {
        let g = &self.grid;
        let mut out = Field3::zeros(g.n1, g.n2, g.n3);
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    out.set(i, j, k, self.divergence_at(i, j, k));
                }
            }
        }
        out
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence().max_abs()
    }

    /// Largest deviation from the wall conditions: `u₃ = 0` on both wall
    /// faces. Tangential data enter only through the ghost cells, so they
    /// hold by construction.
    pub fn wall_normal_residual(&self) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                worst = worst
                    .max(self.u3.get(i, j, 0).abs())
                    .max(self.u3.get(i, j, g.n3).abs());
            }
        }
        worst
    }

    /// `½‖u‖²` with each face value weighted by one cell volume.
    pub fn kinetic_energy(&self) -> f64 {
        let sum = |f: &Field3| f.data.iter().map(|v| v * v).sum::<f64>();
        0.5 * self.grid.cell_volume() * (sum(&self.u1) + sum(&self.u2) + sum(&self.u3))
    }

    /// Mirror image under `x₂ → −x₂`: `u₂` changes sign, the wall speed is
    /// unchanged.
    pub fn mirrored_x2(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let jc = g.n2 - 1 - j;
                let jf = (g.n2 - j) % g.n2;
                for k in 0..g.n3 {
                    out.u1.set(i, jc, k, self.u1.get(i, j, k));
                    out.u2.set(i, jf, k, -self.u2.get(i, j, k));
                    out.p.set(i, jc, k, self.p.get(i, j, k));
                }
                for k in 0..=g.n3 {
                    out.u3.set(i, jc, k, self.u3.get(i, j, k));
                }
            }
        }
        out
    }

    /// Mirror image under `x₁ → −x₁`: `u₁` and the wall speed change sign.
    pub fn mirrored_x1(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        out.wall_speed = -self.wall_speed;
        for i in 0..g.n1 {
            let ic = g.n1 - 1 - i;
            let iface = (g.n1 - i) % g.n1;
            for j in 0..g.n2 {
                for k in 0..g.n3 {
                    out.u1.set(iface, j, k, -self.u1.get(i, j, k));
                    out.u2.set(ic, j, k, self.u2.get(i, j, k));
                    out.p.set(ic, j, k, self.p.get(i, j, k));
                }
                for k in 0..=g.n3 {
                    out.u3.set(ic, j, k, self.u3.get(i, j, k));
                }
            }
        }
        out
    }

    /// Largest componentwise difference from `other`.
    pub fn max_difference(&self, other: &VelocityField) -> f64 {
        let diff = |a: &Field3, b: &Field3| {
            a.data
                .iter()
                .zip(&b.data)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        diff(&self.u1, &other.u1)
            .max(diff(&self.u2, &other.u2))
            .max(diff(&self.u3, &other.u3))
    }
}

/// Fills `field` with the requested initial velocity. Returns whether the
/// data still need a projection.
pub(crate) fn fill_initial(
    field: &mut VelocityField,
    initial: &InitialCondition,
    wall_speed: f64,
) -> Result<bool> {
    initial.validate()?;
    ensure_finite("wall speed", wall_speed)?;
    let g = field.grid;
    let h = g.geometry.height;
    field.wall_speed = wall_speed;
    let couette = |speed: f64, k: usize| speed * (1.0 - g.zc(k) / h);
    match *initial {
        InitialCondition::Rest => Ok(false),
        InitialCondition::Couette { speed } => {
            for (n, v) in field.u1.data.iter_mut().enumerate() {
                *v = couette(speed, n % g.n3);
            }
            Ok(false)
        }
        InitialCondition::ShearMode { speed, amplitude } => {
            for (n, v) in field.u1.data.iter_mut().enumerate() {
                let k = n % g.n3;
                *v = couette(speed, k) + amplitude * speed * (PI * g.zc(k) / h).sin();
            }
            Ok(false)
        }
        InitialCondition::Perturbed {
            speed,
            amplitude,
            seed,
        } => {
            if g.n1 == 1 && g.n2 == 1 {
                return Err(Error::invalid(
                    "initial",
                    "a perturbed start needs horizontal resolution",
                ));
            }
            let mut rng = stream(seed);
            let scale = amplitude * speed.abs().max(f64::MIN_POSITIVE);
            for (n, v) in field.u1.data.iter_mut().enumerate() {
                let k = n % g.n3;
                let envelope = (PI * g.zc(k) / h).sin();
                let r: f64 = rng.sample(StandardNormal);
                *v = couette(speed, k) + scale * envelope * r;
            }
            for (n, v) in field.u2.data.iter_mut().enumerate() {
                let k = n % g.n3;
                let envelope = (PI * g.zc(k) / h).sin();
                let r: f64 = rng.sample(StandardNormal);
                *v = scale * envelope * r;
            }
            let nz = g.n3 + 1;
            for (n, v) in field.u3.data.iter_mut().enumerate() {
                let k = n % nz;
                let r: f64 = rng.sample(StandardNormal);
                *v = if k == 0 || k == g.n3 {
                    0.0
                } else {
                    scale * (PI * k as f64 * g.dz / h).sin() * r
                };
            }
            Ok(true)
        }
    }
}

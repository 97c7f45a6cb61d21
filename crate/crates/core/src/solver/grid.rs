use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::geometry::Geometry;

/// Discretization of the channel on a uniform staggered (MAC) grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells along `x₁`; a power of two (1 gives the one-dimensional mode).
    pub n1: usize,
    /// Cells along `x₂`; a power of two.
    pub n2: usize,
    /// Cells across the gap, at least 8.
    pub n3: usize,
    pub dt: f64,
    /// Fraction of the explicit stability limit actually used, in `(0, 1]`.
    pub cfl_safety: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n1", self.n1), ("n2", self.n2)] {
            if !n.is_power_of_two() {
                return Err(Error::invalid(
                    name,
                    format!("must be a power of two, got {n}"),
                ));
            }
        }
        if self.n3 < 8 {
            return Err(Error::invalid(
                "n3",
                format!("must be at least 8, got {}", self.n3),
            ));
        }
        ensure_positive("dt", self.dt)?;
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::invalid(
                "cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        Ok(())
    }

    /// Largest step allowed by `dt ≤ safety · min(dx/|u|_max, dx_min²/(4ν))`.
    pub fn stable_dt(&self, geometry: &Geometry, viscosity: f64, max_speed: f64) -> f64 {
        let grid = Grid::new(geometry, self);
        grid.stable_dt(viscosity, max_speed, self.cfl_safety)
    }
}

/// Spacing and sizes derived from a [`Geometry`] and a [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub geometry: Geometry,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub dx1: f64,
    pub dx2: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(geometry: &Geometry, spec: &GridSpec) -> Self {
        Grid {
            geometry: *geometry,
            n1: spec.n1,
            n2: spec.n2,
            n3: spec.n3,
            dx1: geometry.length / spec.n1 as f64,
            dx2: geometry.length / spec.n2 as f64,
            dz: geometry.height / spec.n3 as f64,
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx1 * self.dx2 * self.dz
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx1.min(self.dx2).min(self.dz)
    }

    /// Height of the `k`-th cell center.
    pub fn zc(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dz
    }

    pub fn stable_dt(&self, viscosity: f64, max_speed: f64, safety: f64) -> f64 {
        let dx = self.min_spacing();
        let diffusive = 0.25 * dx * dx / viscosity;
        let advective = if max_speed > 0.0 {
            dx / max_speed
        } else {
            f64::INFINITY
        };
        safety * diffusive.min(advective)
    }

    /// Values per horizontal column of a cell-centered quantity.
    pub fn cells(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }
}

/// Scalar array on the grid, stored column-major in `x₃`:
/// `index = (i·n2 + j)·nz + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub n1: usize,
    pub n2: usize,
    pub nz: usize,
    pub data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(n1: usize, n2: usize, nz: usize) -> Self {
        Field3 {
            n1,
            n2,
            nz,
            data: vec![0.0; n1 * n2 * nz],
        }
    }

    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n2 + j) * self.nz + k
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = v;
    }

    /// Contiguous column at horizontal position `(i, j)`.
    #[inline(always)]
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n2 + j) * self.nz;
        &self.data[start..start + self.nz]
    }

    #[inline(always)]
    pub fn column_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.n2 + j) * self.nz;
        &mut self.data[start..start + self.nz]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &Field3) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }
}

#[inline(always)]
pub(crate) fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline(always)]
pub(crate) fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec {
            n1: 8,
            n2: 4,
            n3: 16,
            dt: 1e-3,
            cfl_safety: 0.5,
        }
    }

    #[test]
    fn validation() {
        assert!(spec().validate().is_ok());
        assert!(GridSpec { n1: 6, ..spec() }.validate().is_err());
        assert!(GridSpec { n3: 4, ..spec() }.validate().is_err());
        assert!(GridSpec {
            cfl_safety: 1.5,
            ..spec()
        }
        .validate()
        .is_err());
        assert!(GridSpec { dt: 0.0, ..spec() }.validate().is_err());
        assert!(GridSpec {
            n1: 1,
            n2: 1,
            ..spec()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn stability_rule() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let s = spec();
        // dz = 1/16 is the smallest spacing.
        let dz = 1.0 / 16.0;
        let dt = s.stable_dt(&g, 0.1, 1.0);
        assert!((dt - 0.5 * (0.25 * dz * dz / 0.1f64).min(dz / 1.0)).abs() < 1e-15);
    }
}

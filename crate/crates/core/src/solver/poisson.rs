//! Pressure Poisson solve for the projection step: Fourier in `x₁, x₂`,
//! tridiagonal in `x₃` with homogeneous Neumann conditions at both walls.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{Field3, Grid};

pub(crate) struct Poisson {
    n1: usize,
    n2: usize,
    n3: usize,
    dz: f64,
    forward1: Arc<dyn Fft<f64>>,
    inverse1: Arc<dyn Fft<f64>>,
    forward2: Arc<dyn Fft<f64>>,
    inverse2: Arc<dyn Fft<f64>>,
    /// Eigenvalues of the periodic second difference, per horizontal mode.
    lambda1: Vec<f64>,
    lambda2: Vec<f64>,
    plane: Vec<Complex64>,
    transposed: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    /// Spectral data, `(m2·n1 + m1)·n3 + k`.
    spectrum: Vec<Complex64>,
    sweep: Vec<f64>,
}

impl std::fmt::Debug for Poisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Poisson")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("n3", &self.n3)
            .finish_non_exhaustive()
    }
}

fn eigenvalues(n: usize, dx: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let s = (PI * m as f64 / n as f64).sin();
            -4.0 * s * s / (dx * dx)
        })
        .collect()
}

impl Poisson {
    pub(crate) fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward1 = planner.plan_fft_forward(grid.n1);
        let inverse1 = planner.plan_fft_inverse(grid.n1);
        let forward2 = planner.plan_fft_forward(grid.n2);
        let inverse2 = planner.plan_fft_inverse(grid.n2);
        let scratch_len = [&forward1, &inverse1, &forward2, &inverse2]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let plane_len = grid.n1 * grid.n2;
        Poisson {
            n1: grid.n1,
            n2: grid.n2,
            n3: grid.n3,
            dz: grid.dz,
            forward1,
            inverse1,
            forward2,
            inverse2,
            lambda1: eigenvalues(grid.n1, grid.dx1),
            lambda2: eigenvalues(grid.n2, grid.dx2),
            plane: vec![Complex64::default(); plane_len],
            transposed: vec![Complex64::default(); plane_len],
            fft_scratch: vec![Complex64::default(); scratch_len],
            spectrum: vec![Complex64::default(); plane_len * grid.n3],
            sweep: vec![0.0; grid.n3],
        }
    }

    /// Solves `∇ₕ·∇ₕ p = rhs` for cell-centered `p`, with zero normal
    /// gradient at the walls. The constant mode is fixed by `p = 0` in the
    /// bottom cell of the horizontal mean column; `rhs` must have zero sum.
    pub(crate) fn solve(&mut self, rhs: &Field3, out: &mut Field3) {
        let (n1, n2, n3) = (self.n1, self.n2, self.n3);
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..n2 {
                    self.plane[i * n2 + j] = Complex64::new(rhs.get(i, j, k), 0.0);
                }
            }
            self.forward2
                .process_with_scratch(&mut self.plane, &mut self.fft_scratch);
            transpose(&self.plane, &mut self.transposed, n1, n2);
            self.forward1
                .process_with_scratch(&mut self.transposed, &mut self.fft_scratch);
            for (mode, v) in self.transposed.iter().enumerate() {
                self.spectrum[mode * n3 + k] = *v;
            }
        }

        let inv_dz2 = 1.0 / (self.dz * self.dz);
        for m2 in 0..n2 {
            for m1 in 0..n1 {
                let mode = m2 * n1 + m1;
                let column = &mut self.spectrum[mode * n3..(mode + 1) * n3];
                if mode == 0 {
                    solve_mean_column(column, self.dz);
                } else {
                    let lambda = self.lambda1[m1] + self.lambda2[m2];
                    thomas_neumann(column, inv_dz2, lambda, &mut self.sweep);
                }
            }
        }

        let scale = 1.0 / (n1 * n2) as f64;
        for k in 0..n3 {
            for (mode, v) in self.transposed.iter_mut().enumerate() {
                *v = self.spectrum[mode * n3 + k];
            }
            self.inverse1
                .process_with_scratch(&mut self.transposed, &mut self.fft_scratch);
            transpose(&self.transposed, &mut self.plane, n2, n1);
            self.inverse2
                .process_with_scratch(&mut self.plane, &mut self.fft_scratch);
            for i in 0..n1 {
                for j in 0..n2 {
                    out.set(i, j, k, self.plane[i * n2 + j].re * scale);
                }
            }
        }
    }
}

/// `dst[c·rows + r] = src[r·cols + c]` for a `rows × cols` source.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Horizontally uniform mode: the Neumann problem is singular, so integrate
/// the flux upward from `p₀ = 0`.
fn solve_mean_column(column: &mut [Complex64], dz: f64) {
    let dz2 = dz * dz;
    let mut flux = Complex64::default();
    let mut p = Complex64::default();
    for r in column.iter_mut() {
        let rhs = *r;
        *r = p;
        flux += rhs * dz2;
        p += flux;
    }
}

/// Thomas sweep for `(p_{k+1} − 2p_k + p_{k−1})/dz² + λ p_k = r_k` with
/// ghost values mirroring the end cells.
fn thomas_neumann(column: &mut [Complex64], inv_dz2: f64, lambda: f64, c_prime: &mut [f64]) {
    let n = column.len();
    let off = inv_dz2;
    let diag = |k: usize| {
        let ends = usize::from(k == 0) + usize::from(k == n - 1);
        -(2.0 - ends as f64) * inv_dz2 + lambda
    };
    let mut denom = diag(0);
    c_prime[0] = off / denom;
    column[0] /= denom;
    for k in 1..n {
        denom = diag(k) - off * c_prime[k - 1];
        c_prime[k] = off / denom;
        let prev = column[k - 1];
        column[k] = (column[k] - prev * off) / denom;
    }
    for k in (0..n - 1).rev() {
        let next = column[k + 1];
        column[k] -= next * c_prime[k];
    }
}

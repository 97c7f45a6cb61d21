//! Adaptive Gauss–Kronrod (7/15) quadrature and fixed Gauss–Legendre rules.
//!
//! Used as the independent numeric oracle for the background-flow calculus and
//! for normalizing Gibbs densities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the 7-point rule living on the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_depth: 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - r * x);
        let f2 = f(c + r * x);
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

impl Quadrature {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Quadrature {
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]` by recursive bisection until each panel's
    /// Kronrod–Gauss difference meets its share of the tolerance.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite interval [{a}, {b}]")));
        }
        if a == b {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
        let (whole, err) = gk15(&f, a, b);
        let target = self.abs_tol.max(self.rel_tol * whole.abs());
        let mut stack = vec![(a, b, whole, err, 0u32)];
        let mut value = 0.0;
        let mut error = 0.0;
        let width = (b - a).abs();
        while let Some((lo, hi, v, e, depth)) = stack.pop() {
            let share = target * ((hi - lo).abs() / width);
            if e <= share || e <= 1e-15 * v.abs() {
                value += v;
                error += e;
                continue;
            }
            if depth >= self.max_depth {
                return Err(Error::Quadrature(format!(
                    "panel [{lo}, {hi}] still has error {e:e} after {depth} bisections"
                )));
            }
            let mid = 0.5 * (lo + hi);
            let (v1, e1) = gk15(&f, lo, mid);
            let (v2, e2) = gk15(&f, mid, hi);
            if !(v1.is_finite() && v2.is_finite()) {
                return Err(Error::Quadrature(format!(
                    "integrand not finite on [{lo}, {hi}]"
                )));
            }
            stack.push((lo, mid, v1, e1, depth + 1));
            stack.push((mid, hi, v2, e2, depth + 1));
        }
        Ok(Estimate { value, error })
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = Quadrature::default();
        let est = q
            .integrate(|x| 3.0 * x * x - 2.0 * x + 1.0, 0.0, 2.0)
            .unwrap();
        assert!((est.value - 6.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let q = Quadrature::default();
        let est = q.integrate(|x: f64| (-x * x).exp(), -12.0, 12.0).unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn kinked_integrand_converges() {
        let q = Quadrature::default();
        let est = q.integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0).unwrap();
        assert!((est.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((s - exact).abs() < 1e-13, "n={n} s={s} exact={exact}");
        }
    }
}

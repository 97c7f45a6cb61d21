//! Random boundary-layer background flow.
//!
//! For wall speed `z` the layer thickness is `δ(z) = A/(z² + B)` and the
//! background profile is linear across the layer:
//! `φ(x₃, z) = (1 − x₃/δ(z))·z` for `x₃ ≤ δ(z)`, zero above. Viewed as a
//! function of `z` at fixed height, `f(z) = φ(x₃, z)` is what Itô's formula
//! acts on, with generator `Lf = f′θ(U − z) + (σ²/2) f″`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::geometry::Geometry;
use crate::ou::OuParams;
use crate::rng::stream;

/// Relative slack granted to inequalities that hold exactly in real
/// arithmetic.
pub const ROUNDING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    /// Numerator `A` of `δ` (velocity·length).
    pub a: f64,
    /// Shift `B` of `δ` (velocity²).
    pub b: f64,
    pub geometry: Geometry,
}

/// `f`, `f′`, `f″` (and optionally `Lf`) at one height and wall speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub z: f64,
    pub x3: f64,
    pub delta: f64,
    pub f: f64,
    pub f_prime: f64,
    pub f_second: f64,
    pub lf: Option<f64>,
}

impl BackgroundParams {
    pub fn new(a: f64, b: f64, geometry: Geometry) -> Result<Self> {
        ensure_positive("A", a)?;
        ensure_positive("B", b)?;
        geometry.validate()?;
        Ok(BackgroundParams { a, b, geometry })
    }

    /// `A = νU`, `B = U²`.
    pub fn standard(viscosity: f64, mean_speed: f64, geometry: Geometry) -> Result<Self> {
        ensure_positive("viscosity", viscosity)?;
        ensure_finite("mean_speed", mean_speed)?;
        Self::new(
            viscosity * mean_speed.abs(),
            mean_speed * mean_speed,
            geometry,
        )
    }

    /// Checks `A/B < h` and `A ≤ ν√B`, under which `δ < h` and the
    /// dissipation margin stays in `[¼, ½]` for every wall speed.
    pub fn check_admissible(&self, viscosity: f64) -> Result<()> {
        let cap = self.a / self.b;
        if !(cap < self.geometry.height) {
            return Err(Error::Inadmissible {
                a: self.a,
                b: self.b,
                reason: format!("A/B = {cap} is not below h = {}", self.geometry.height),
            });
        }
        let limit = viscosity * self.b.sqrt();
        if self.a > limit * (1.0 + ROUNDING_TOLERANCE) {
            return Err(Error::Inadmissible {
                a: self.a,
                b: self.b,
                reason: format!("A exceeds ν√B = {limit}"),
            });
        }
        Ok(())
    }

    pub fn delta(&self, z: f64) -> f64 {
        self.a / (z * z + self.b)
    }

    /// Upper bound `A/B` of the layer thickness.
    pub fn max_delta(&self) -> f64 {
        self.a / self.b
    }

    pub fn delta_prime(&self, z: f64) -> f64 {
        let d = z * z + self.b;
        -2.0 * self.a * z / (d * d)
    }

    pub fn delta_second(&self, z: f64) -> f64 {
        let d = z * z + self.b;
        2.0 * self.a * (3.0 * z * z - self.b) / (d * d * d)
    }

    pub fn phi(&self, x3: f64, z: f64) -> Result<f64> {
        let h = self.geometry.height;
        if !(0.0..=h).contains(&x3) {
            return Err(Error::OutOfDomain {
                quantity: "x3",
                value: x3,
                domain: format!("[0, {h}]"),
            });
        }
        Ok(self.phi_unchecked(x3, z))
    }

    pub(crate) fn phi_unchecked(&self, x3: f64, z: f64) -> f64 {
        let delta = self.delta(z);
        if x3 < delta {
            (1.0 - x3 / delta) * z
        } else {
            0.0
        }
    }

    /// `(3z² + B)/A`, the `x₃`-slope of `f′`.
    fn slope(&self, z: f64) -> f64 {
        (3.0 * z * z + self.b) / self.a
    }

    /// `f(z) = (1 − x₃/δ(z)) z` and its first two `z`-derivatives inside the
    /// layer. Heights above `δ(z)` are rejected: the profile has a kink there.
    pub fn f_derivatives(&self, z: f64, x3: f64) -> Result<ProfileSample> {
        ensure_finite("z", z)?;
        let delta = self.delta(z);
        if !(0.0..=delta).contains(&x3) {
            return Err(Error::OutOfDomain {
                quantity: "x3",
                value: x3,
                domain: format!("[0, δ(z) = {delta}]"),
            });
        }
        Ok(ProfileSample {
            z,
            x3,
            delta,
            f: (1.0 - x3 / delta) * z,
            f_prime: 1.0 - x3 * self.slope(z),
            f_second: -6.0 * x3 * z / self.a,
            lf: None,
        })
    }

    /// OU generator applied to `f` at height `x₃`.
    pub fn generator_lf(&self, z: f64, x3: f64, ou: &OuParams) -> Result<f64> {
        let s = self.f_derivatives(z, x3)?;
        Ok(lf_from(&s, ou))
    }

    /// `∫₀^δ (f′)² dx₃ = δ − δ²c + δ³c²/3` with `c = (3z²+B)/A`.
    pub fn int_fprime_sq(&self, z: f64) -> f64 {
        let delta = self.delta(z);
        let q = delta * self.slope(z);
        delta * (1.0 - q + q * q / 3.0)
    }

    /// `∫₀^δ |Lf|² dx₃`; `Lf` is affine in `x₃`, `α − βx₃`.
    pub fn int_lf_sq(&self, z: f64, ou: &OuParams) -> f64 {
        let delta = self.delta(z);
        let drift = ou.reversion_rate * (ou.mean_speed - z);
        let sigma2 = ou.noise_amplitude * ou.noise_amplitude;
        let alpha = drift;
        let beta = drift * self.slope(z) + 3.0 * sigma2 * z / self.a;
        alpha * alpha * delta - alpha * beta * delta * delta + beta * beta * delta.powi(3) / 3.0
    }

    /// `‖∇Φ‖² = L² z²/δ(z) = L²(z⁴ + Bz²)/A`.
    pub fn grad_phi_norm_sq(&self, z: f64) -> f64 {
        let l = self.geometry.length;
        l * l * (z * z * z * z + self.b * z * z) / self.a
    }

    /// `½ − δ(z)|z|/(2ν)`, the coefficient left on `ν‖∇v‖²`.
    pub fn delta_inequality_margin(&self, z: f64, viscosity: f64) -> f64 {
        0.5 - self.delta(z) * z.abs() / (2.0 * viscosity)
    }
}

pub(crate) fn lf_from(s: &ProfileSample, ou: &OuParams) -> f64 {
    s.f_prime * ou.reversion_rate * (ou.mean_speed - s.z)
        + 0.5 * ou.noise_amplitude * ou.noise_amplitude * s.f_second
}

/// Extremes of one inequality's margin (`rhs − lhs`) over a sample of wall
/// speeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub min_margin: f64,
    pub max_margin: f64,
    pub violations: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundReport {
    pub a: f64,
    pub b: f64,
    pub viscosity: f64,
    pub height: f64,
    pub admissible: bool,
    pub checks: Vec<InequalityCheck>,
    pub all_passed: bool,
}

struct Tracker {
    check: InequalityCheck,
}

impl Tracker {
    fn new(name: &'static str, statement: &'static str) -> Self {
        Tracker {
            check: InequalityCheck {
                name,
                statement,
                min_margin: f64::INFINITY,
                max_margin: f64::NEG_INFINITY,
                violations: 0,
                samples: 0,
            },
        }
    }

    /// Records `rhs − lhs`; negative beyond rounding counts as a violation.
    fn record(&mut self, lhs: f64, rhs: f64) {
        let margin = rhs - lhs;
        let c = &mut self.check;
        c.samples += 1;
        c.min_margin = c.min_margin.min(margin);
        c.max_margin = c.max_margin.max(margin);
        if margin < -ROUNDING_TOLERANCE * lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE) {
            c.violations += 1;
        }
    }

    fn record_strict(&mut self, lhs: f64, rhs: f64) {
        let margin = rhs - lhs;
        let c = &mut self.check;
        c.samples += 1;
        c.min_margin = c.min_margin.min(margin);
        c.max_margin = c.max_margin.max(margin);
        if !(margin > 0.0) {
            c.violations += 1;
        }
    }
}

/// Evaluates every pointwise inequality of the background calculus on
/// `samples` wall speeds: half drawn from the stationary law, half spread
/// uniformly over a wide symmetric range, plus `0` and `±√B`.
pub fn verify_inequalities(
    bp: &BackgroundParams,
    ou: &OuParams,
    viscosity: f64,
    samples: usize,
    seed: u64,
) -> Result<BackgroundReport> {
    ensure_positive("viscosity", viscosity)?;
    ou.validate()?;
    let admissible = bp.check_admissible(viscosity).is_ok();
    let mut rng = stream(seed);
    let sd = ou.stationary_variance().sqrt();
    let spread = 10.0 * ou.mean_speed.abs().max(sd).max(bp.b.sqrt());
    let mut zs = vec![0.0, bp.b.sqrt(), -bp.b.sqrt()];
    for i in 0..samples {
        let z = if i % 2 == 0 {
            let xi: f64 = rng.sample(StandardNormal);
            ou.mean_speed + sd * xi
        } else {
            rng.random_range(-spread..spread)
        };
        zs.push(z);
    }

    let cap = bp.max_delta();
    let h = bp.geometry.height;
    let mut trackers = vec![
        Tracker::new("delta_cap", "δ(z) ≤ A/B"),
        Tracker::new("delta_below_height", "δ(z) < h"),
        Tracker::new("slope_bound", "(3z²+B)/A ≤ 3/δ(z)"),
        Tracker::new("speed_bound", "z² ≤ A/δ(z)"),
        Tracker::new("int_fprime_sq_cap", "∫₀^δ (f′)² dx₃ ≤ 3A/B"),
        Tracker::new("int_lf_sq_cap", "∫₀^δ |Lf|² dx₃ ≤ 6(A/B)θ²(U−z)² + 6σ⁴A/B²"),
        Tracker::new("margin_lower", "½ − δ|z|/(2ν) ≥ ¼"),
        Tracker::new("margin_upper", "½ − δ|z|/(2ν) ≤ ½"),
    ];
    let theta = ou.reversion_rate;
    let sigma4 = ou.noise_amplitude.powi(4);
    for &z in &zs {
        let delta = bp.delta(z);
        trackers[0].record(delta, cap);
        trackers[1].record_strict(delta, h);
        trackers[2].record((3.0 * z * z + bp.b) / bp.a, 3.0 / delta);
        trackers[3].record(z * z, bp.a / delta);
        trackers[4].record(bp.int_fprime_sq(z), 3.0 * cap);
        let lf_cap = 6.0 * cap * theta * theta * (ou.mean_speed - z).powi(2)
            + 6.0 * sigma4 * bp.a / (bp.b * bp.b);
        trackers[5].record(bp.int_lf_sq(z, ou), lf_cap);
        let margin = bp.delta_inequality_margin(z, viscosity);
        trackers[6].record(0.25, margin);
        trackers[7].record(margin, 0.5);
    }
    let checks: Vec<InequalityCheck> = trackers.into_iter().map(|t| t.check).collect();
    // The margin bounds are only promised for admissible (A, B).
    let all_passed = checks
        .iter()
        .filter(|c| admissible || !c.name.starts_with("margin") && c.name != "delta_below_height")
        .all(|c| c.violations == 0);
    Ok(BackgroundReport {
        a: bp.a,
        b: bp.b,
        viscosity,
        height: h,
        admissible,
        checks,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Quadrature;

    fn geom() -> Geometry {
        Geometry::new(1.0, 1.0).unwrap()
    }

    fn standard(nu: f64, u: f64) -> BackgroundParams {
        BackgroundParams::standard(nu, u, geom()).unwrap()
    }

    #[test]
    fn delta_at_zero_is_cap() {
        let bp = BackgroundParams::new(0.3, 2.0, geom()).unwrap();
        assert_eq!(bp.delta(0.0), 0.15);
        assert_eq!(bp.delta(1.0), bp.delta(-1.0));
        assert!(bp.delta(2.0) < bp.delta(1.0));
    }

    #[test]
    fn delta_at_mean_speed() {
        let (nu, u) = (0.05, 2.0);
        let bp = standard(nu, u);
        assert!((bp.delta(u) - nu / (2.0 * u)).abs() < 1e-17);
    }

    #[test]
    fn phi_profile_endpoints() {
        let bp = standard(0.1, 1.0);
        let z = 1.0;
        let d = bp.delta(z);
        assert_eq!(bp.phi(0.0, z).unwrap(), z);
        assert_eq!(bp.phi(d, z).unwrap(), 0.0);
        assert!((bp.phi(d / 2.0, z).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(bp.phi(0.9, z).unwrap(), 0.0);
        assert!(bp.phi(-0.1, z).is_err());
        assert!(bp.phi(1.1, z).is_err());
    }

    #[test]
    fn derivatives_at_wall_and_layer_top() {
        let bp = BackgroundParams::new(0.2, 0.5, geom()).unwrap();
        let s = bp.f_derivatives(1.7, 0.0).unwrap();
        assert_eq!((s.f_prime, s.f_second), (1.0, 0.0));
        let z = 0.8;
        let top = bp.f_derivatives(z, bp.delta(z)).unwrap();
        let expected = -2.0 * z * z / (z * z + bp.b);
        assert!((top.f_prime - expected).abs() < 1e-14);
        assert!(bp.f_derivatives(z, bp.delta(z) * 1.001).is_err());
    }

    #[test]
    fn generator_special_cases() {
        let bp = standard(0.1, 1.0);
        let still = OuParams::new(1.0, 2.0, 0.0).unwrap();
        assert_eq!(bp.generator_lf(1.0, 0.01, &still).unwrap(), 0.0);
        let ou = OuParams::new(1.0, 2.0, 0.7).unwrap();
        let lf = bp.generator_lf(0.3, 0.0, &ou).unwrap();
        assert!((lf - 2.0 * (1.0 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn int_fprime_sq_at_zero_speed() {
        let bp = BackgroundParams::new(0.3, 1.5, geom()).unwrap();
        assert!((bp.int_fprime_sq(0.0) - bp.max_delta() / 3.0).abs() < 1e-16);
    }

    #[test]
    fn int_fprime_sq_matches_quadrature() {
        let bp = standard(0.1, 1.0);
        let q = Quadrature::default();
        for z in [-3.0, -0.4, 0.0, 0.6, 2.0, 7.5] {
            let s = bp.slope(z);
            let num = q
                .integrate(|x| (1.0 - x * s).powi(2), 0.0, bp.delta(z))
                .unwrap()
                .value;
            let closed = bp.int_fprime_sq(z);
            assert!(((closed - num) / num).abs() < 1e-10, "z={z}");
            assert!(closed <= 3.0 * bp.max_delta());
        }
    }

    #[test]
    fn int_lf_sq_matches_quadrature() {
        let bp = standard(0.1, 1.0);
        let ou = OuParams::new(1.0, 1.3, 0.8).unwrap();
        let q = Quadrature::default();
        for z in [-2.0, 0.1, 1.0, 3.0] {
            let num = q
                .integrate(
                    |x| bp.generator_lf(z, x.min(bp.delta(z)), &ou).unwrap().powi(2),
                    0.0,
                    bp.delta(z),
                )
                .unwrap()
                .value;
            let closed = bp.int_lf_sq(z, &ou);
            let scale = num.abs().max(1e-300);
            assert!(
                ((closed - num) / scale).abs() < 1e-10,
                "z={z}: {closed} vs {num}"
            );
        }
    }

    #[test]
    fn grad_phi_worked_value() {
        let bp = BackgroundParams::new(1.0, 1.0, geom()).unwrap();
        assert_eq!(bp.grad_phi_norm_sq(0.0), 0.0);
        assert_eq!(bp.grad_phi_norm_sq(1.0), 2.0);
    }

    #[test]
    fn margin_extremes() {
        let (nu, b) = (0.3f64, 4.0f64);
        let bp = BackgroundParams::new(nu * b.sqrt(), b, geom()).unwrap();
        assert_eq!(bp.delta_inequality_margin(0.0, nu), 0.5);
        assert!((bp.delta_inequality_margin(b.sqrt(), nu) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn admissibility_requires_reynolds_above_one() {
        let g = geom();
        // h = 1, U = 1: Re = 1/ν
        assert!(BackgroundParams::standard(0.5, 1.0, g)
            .unwrap()
            .check_admissible(0.5)
            .is_ok());
        assert!(BackgroundParams::standard(1.0, 1.0, g)
            .unwrap()
            .check_admissible(1.0)
            .is_err());
        let too_big = BackgroundParams::new(0.5, 1.0, g).unwrap();
        assert!(too_big.check_admissible(0.1).is_err());
    }

    #[test]
    fn verify_report_passes_for_standard_choice() {
        let bp = standard(0.02, 1.0);
        let ou = OuParams::new(1.0, 1.0, 0.25).unwrap();
        let report = verify_inequalities(&bp, &ou, 0.02, 2000, 5).unwrap();
        assert!(report.admissible);
        assert!(report.all_passed, "{report:#?}");
        assert_eq!(report.checks.len(), 8);
    }
}

//! Closed-form upper bounds on the time-averaged dissipation rate.
//!
//! `mean_bound` and `second_moment_bound` each have two independent codings:
//! one keeps general `(A, B)` and the stationary moments symbolic, the other
//! is the fully expanded expression for `A = νU`, `B = U²`. Tests hold them
//! against each other.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundParams;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::Geometry;
use crate::ou::{centered_moment, stationary_moment, OuParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub geometry: Geometry,
    /// Kinematic viscosity `ν`.
    pub viscosity: f64,
    pub ou: OuParams,
    pub background: BackgroundParams,
}

impl FlowConfig {
    /// Configuration with the standard background `A = νU`, `B = U²`.
    pub fn new(geometry: Geometry, viscosity: f64, ou: OuParams) -> Result<Self> {
        let background = BackgroundParams::standard(viscosity, ou.mean_speed, geometry)?;
        let cfg = FlowConfig {
            geometry,
            viscosity,
            ou,
            background,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_background(mut self, background: BackgroundParams) -> Result<Self> {
        self.background = background;
        self.validate()?;
        Ok(self)
    }

    /// `Re = Uh/ν`.
    pub fn reynolds(&self) -> f64 {
        self.ou.mean_speed * self.geometry.height / self.viscosity
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        ensure_positive("viscosity", self.viscosity)?;
        self.ou.validate()?;
        ensure_positive("mean_speed", self.ou.mean_speed)?;
        if self.background.geometry != self.geometry {
            return Err(Error::Config(
                "background geometry differs from flow geometry".into(),
            ));
        }
        let re = self.reynolds();
        if !(re > 1.0) {
            return Err(Error::ReynoldsTooSmall(re));
        }
        self.background.check_admissible(self.viscosity)
    }

    fn uses_standard_background(&self) -> bool {
        let u = self.ou.mean_speed;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs();
        close(self.background.a, self.viscosity * u) && close(self.background.b, u * u)
    }
}

/// Upper bound on `limsup E⟨ε⟩_T` for the standard background:
/// `32U³/h + 2(6/Re + 28U/(hθ) + 12 hθ/(Re²U) + 24 hσ²/(Re²U³) + 6σ²/(hUθ²))σ²`.
pub fn mean_bound(cfg: &FlowConfig) -> Result<f64> {
    cfg.validate()?;
    let (u, h) = (cfg.ou.mean_speed, cfg.geometry.height);
    let (theta, sigma) = (cfg.ou.reversion_rate, cfg.ou.noise_amplitude);
    let re = cfg.reynolds();
    let s2 = sigma * sigma;
    let bracket = 6.0 / re
        + 28.0 * u / (h * theta)
        + 12.0 / (re * re) * h * theta / u
        + 24.0 / (re * re) * h * s2 / u.powi(3)
        + 6.0 * s2 / (h * u * theta * theta);
    Ok(32.0 * u.powi(3) / h + 2.0 * bracket * s2)
}

/// The same bound before substituting `A = νU`, `B = U²`; valid for any
/// admissible background.
pub fn mean_bound_general(cfg: &FlowConfig) -> Result<f64> {
    cfg.validate()?;
    let (a, b) = (cfg.background.a, cfg.background.b);
    let nu = cfg.viscosity;
    let h = cfg.geometry.height;
    let (theta, sigma) = (cfg.ou.reversion_rate, cfg.ou.noise_amplitude);
    let s2 = sigma * sigma;
    let ratio = a / b;
    let m2 = stationary_moment(&cfg.ou, 2)?;
    let m4 = stationary_moment(&cfg.ou, 4)?;
    let noise = 8.0 / h * (1.5 * ratio + 6.0 / nu * s2 / b * ratio.powi(3)) * s2;
    let drift =
        8.0 / h * (2.0 * nu / a * (m4 + b * m2) + 6.0 / nu * ratio.powi(3) * s2 * theta / 2.0);
    Ok(noise + drift)
}

/// Explicit upper bound on `limsup E[⟨ε⟩_T²]`, general-`(A, B)` form.
pub fn second_moment_bound(cfg: &FlowConfig) -> Result<f64> {
    cfg.validate()?;
    let (a, b) = (cfg.background.a, cfg.background.b);
    let nu = cfg.viscosity;
    let h = cfg.geometry.height;
    let (theta, sigma) = (cfg.ou.reversion_rate, cfg.ou.noise_amplitude);
    let s2 = sigma * sigma;
    let ratio = a / b;
    let bracket = 1.5 * ratio + 6.0 / nu * ratio.powi(3) * s2 / b;
    let c4 = centered_moment(&cfg.ou, 4)?;
    let m4 = stationary_moment(&cfg.ou, 4)?;
    let m8 = stationary_moment(&cfg.ou, 8)?;
    let fluctuation = 3072.0 / (h * h)
        * (bracket * bracket * s2 * s2 + 72.0 / (nu * nu) * ratio.powi(6) * theta.powi(4) * c4);
    let background = 12320.0 * nu * nu / (h * h * a * a) * (m8 + b * b * m4);
    Ok(fluctuation + background)
}

/// The second-moment bound as the expanded polynomial for `A = νU`, `B = U²`:
/// `24640U⁶/h² + σ²P(σ)`. Rejects non-standard backgrounds.
pub fn second_moment_bound_polynomial(cfg: &FlowConfig) -> Result<f64> {
    cfg.validate()?;
    if !cfg.uses_standard_background() {
        return Err(Error::Config(
            "expanded second-moment polynomial assumes A = νU, B = U²".into(),
        ));
    }
    let u = cfg.ou.mean_speed;
    let nu = cfg.viscosity;
    let h = cfg.geometry.height;
    let (theta, sigma) = (cfg.ou.reversion_rate, cfg.ou.noise_amplitude);
    let s2 = sigma * sigma;
    let v = s2 / (2.0 * theta);
    let inner = 1.5 * nu / u + 6.0 * s2 * nu * nu / u.powi(5);
    let first = 3072.0 / (h * h)
        * (inner * inner * s2 * s2 + 216.0 * nu.powi(4) / u.powi(6) * theta.powi(4) * v * v);
    let poly = 2.0 * u.powi(8)
        + 34.0 * u.powi(6) * v
        + 213.0 * u.powi(4) * v * v
        + 420.0 * u * u * v.powi(3)
        + 105.0 * v.powi(4);
    Ok(first + 12320.0 / (h * h * u * u) * poly)
}

/// `(1/h)(U³ + UŨ² + Ũ⁴/U)` with `Ũ = σ/√θ`, the large-noise simplification.
pub fn large_noise_bound(cfg: &FlowConfig) -> f64 {
    let u = cfg.ou.mean_speed;
    let ut2 = cfg.ou.noise_amplitude.powi(2) / cfg.ou.reversion_rate;
    (u.powi(3) + u * ut2 + ut2 * ut2 / u) / cfg.geometry.height
}

/// `E[Y_T]/T` from the stationary moments; predicts the ensemble mean of the
/// energy-inequality forcing term.
pub fn expected_y_rate(cfg: &FlowConfig) -> f64 {
    let (a, b) = (cfg.background.a, cfg.background.b);
    let nu = cfg.viscosity;
    let l2 = cfg.geometry.length.powi(2);
    let (theta, sigma) = (cfg.ou.reversion_rate, cfg.ou.noise_amplitude);
    let s2 = sigma * sigma;
    let ratio = a / b;
    let var = cfg.ou.stationary_variance();
    let u = cfg.ou.mean_speed;
    let m2 = u * u + var;
    let m4 = u.powi(4) + 6.0 * u * u * var + 3.0 * var * var;
    4.0 * l2 * (1.5 * ratio + 6.0 / nu * ratio.powi(3) * s2 / b) * s2
        + 4.0 * l2 * (nu / a * (m4 + b * m2) + 6.0 / nu * ratio.powi(3) * theta * theta * var)
}

/// A scalar with its physical dimension, `L` length and `T` time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub reynolds: Quantity,
    pub mean_bound: Quantity,
    pub second_moment_bound: Quantity,
    pub large_noise_bound: Quantity,
    pub kolmogorov_scale_u3_over_h: Quantity,
}

impl BoundsReport {
    pub fn evaluate(cfg: &FlowConfig) -> Result<Self> {
        let u = cfg.ou.mean_speed;
        let q = |value, unit| Quantity { value, unit };
        Ok(BoundsReport {
            reynolds: q(cfg.reynolds(), "1"),
            mean_bound: q(mean_bound(cfg)?, "L^2 T^-3"),
            second_moment_bound: q(second_moment_bound(cfg)?, "L^4 T^-6"),
            large_noise_bound: q(large_noise_bound(cfg), "L^2 T^-3"),
            kolmogorov_scale_u3_over_h: q(u.powi(3) / cfg.geometry.height, "L^2 T^-3"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(u: f64, h: f64, nu: f64, theta: f64, sigma: f64) -> FlowConfig {
        let g = Geometry::new(1.0, h).unwrap();
        FlowConfig::new(g, nu, OuParams::new(u, theta, sigma).unwrap()).unwrap()
    }

    #[test]
    fn zero_noise_limits_are_exact() {
        let c = cfg(1.0, 1.0, 0.5, 1.0, 0.0);
        assert_eq!(mean_bound(&c).unwrap(), 32.0);
        assert_eq!(second_moment_bound(&c).unwrap(), 24640.0);
        assert_eq!(second_moment_bound_polynomial(&c).unwrap(), 24640.0);
        assert_eq!(large_noise_bound(&c), 1.0);
    }

    #[test]
    fn worked_point() {
        let c = cfg(1.0, 1.0, 0.5, 1.0, 1.0);
        assert!((mean_bound(&c).unwrap() - 124.0).abs() < 1e-12);
        assert!((mean_bound_general(&c).unwrap() - 124.0).abs() < 1e-12);
        let (a, b) = (
            second_moment_bound(&c).unwrap(),
            second_moment_bound_polynomial(&c).unwrap(),
        );
        assert!(((a - b) / a).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn reynolds_hypothesis_enforced() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let ou = OuParams::new(1.0, 1.0, 0.1).unwrap();
        assert!(matches!(
            FlowConfig::new(g, 1.0, ou),
            Err(Error::ReynoldsTooSmall(_))
        ));
    }

    #[test]
    fn large_noise_arithmetic() {
        // Ũ² = σ²/θ
        let c = cfg(1.0, 1.0, 0.5, 1.0, 1.0);
        assert!((large_noise_bound(&c) - 3.0).abs() < 1e-15);
        let c = cfg(1.0, 1.0, 0.5, 1.0, 2.0);
        assert!((large_noise_bound(&c) - 21.0).abs() < 1e-15);
    }

    #[test]
    fn expected_y_rate_without_noise() {
        let c = cfg(1.3, 1.0, 0.1, 1.0, 0.0);
        let expected = 8.0 * 1.3f64.powi(3);
        assert!((expected_y_rate(&c) - expected).abs() < 1e-12);
    }

    #[test]
    fn general_background_is_evaluated() {
        let g = Geometry::new(1.0, 1.0).unwrap();
        let ou = OuParams::new(1.0, 1.0, 0.5).unwrap();
        let base = FlowConfig::new(g, 0.1, ou).unwrap();
        let alt = base
            .with_background(BackgroundParams::new(0.05, 0.8, g).unwrap())
            .unwrap();
        assert!(second_moment_bound(&alt).unwrap().is_finite());
        assert!(mean_bound_general(&alt).unwrap().is_finite());
        assert!(second_moment_bound_polynomial(&alt).is_err());
    }

    #[test]
    fn report_units() {
        let c = cfg(1.0, 1.0, 0.5, 1.0, 0.3);
        let r = BoundsReport::evaluate(&c).unwrap();
        assert_eq!(r.mean_bound.unit, "L^2 T^-3");
        assert_eq!(r.kolmogorov_scale_u3_over_h.value, 1.0);
        let json = serde_json::to_value(r).unwrap();
        assert_eq!(json["second_moment_bound"]["unit"], "L^4 T^-6");
    }
}

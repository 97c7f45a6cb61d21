//! Stationary Ornstein–Uhlenbeck wall-speed process.
//!
//! The wall speed obeys `dX = θ(U − X) dt + σ dW`. Paths are generated with
//! the exact Gaussian transition, so no time-discretization bias enters
//! anything coupled to the solver. Alongside each transition the matching
//! Brownian increment is drawn from its exact conditional law, which lets the
//! diagnostics discretize Itô integrals against the noise that actually drove
//! the path.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::quadrature::Quadrature;
use crate::rng::{stream, StreamRng};

/// Parameters `(U, θ, σ)` of the wall-speed process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    /// Mean wall speed `U` (velocity).
    pub mean_speed: f64,
    /// Mean-reversion rate `θ` (1/time).
    pub reversion_rate: f64,
    /// Noise amplitude `σ` (velocity/√time).
    pub noise_amplitude: f64,
}

impl OuParams {
    pub fn new(mean_speed: f64, reversion_rate: f64, noise_amplitude: f64) -> Result<Self> {
        let p = OuParams {
            mean_speed,
            reversion_rate,
            noise_amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mean_speed", self.mean_speed)?;
        ensure_positive("reversion_rate", self.reversion_rate)?;
        ensure_finite("noise_amplitude", self.noise_amplitude)?;
        if self.noise_amplitude < 0.0 {
            return Err(Error::invalid(
                "noise_amplitude",
                format!("must be >= 0, got {}", self.noise_amplitude),
            ));
        }
        Ok(())
    }

    /// Stationary variance `σ²/(2θ)`.
    pub fn stationary_variance(&self) -> f64 {
        self.noise_amplitude * self.noise_amplitude / (2.0 * self.reversion_rate)
    }
}

/// One exact OU transition over `dt` driven by the standard normal draw `xi`.
pub fn exact_step(x: f64, dt: f64, p: &OuParams, xi: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("dt", dt)?;
    ensure_finite("xi", xi)?;
    p.validate()?;
    if dt < 0.0 {
        return Err(Error::invalid("dt", format!("must be >= 0, got {dt}")));
    }
    let tr = Transition::new(p, dt);
    Ok(tr.mean(x) + tr.spread * xi)
}

/// Exact joint law of `(X_{t+dt}, W_{t+dt} − W_t)` given `X_t`.
///
/// With `Z = ∫ e^{−θ(dt−s)} dW_s` the new state is `U + (x−U)e^{−θdt} + σZ`;
/// `(Z, ΔW)` is a centered Gaussian pair with `Var Z = (1−e^{−2θdt})/(2θ)`,
/// `Var ΔW = dt` and `Cov = (1−e^{−θdt})/θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    dt: f64,
    mean_speed: f64,
    sigma: f64,
    relaxed: f64,
    spread: f64,
    z_sd: f64,
    coupling: f64,
    residual_sd: f64,
}

impl Transition {
    pub fn new(p: &OuParams, dt: f64) -> Self {
        let theta = p.reversion_rate;
        let var_z = -(-2.0 * theta * dt).exp_m1() / (2.0 * theta);
        let cov = -(-theta * dt).exp_m1() / theta;
        let z_sd = var_z.sqrt();
        let (coupling, residual_var) = if var_z > 0.0 {
            (cov / var_z, (dt - cov * cov / var_z).max(0.0))
        } else {
            (0.0, 0.0)
        };
        Transition {
            dt,
            mean_speed: p.mean_speed,
            sigma: p.noise_amplitude,
            relaxed: -(-theta * dt).exp_m1(),
            spread: p.noise_amplitude * z_sd,
            z_sd,
            coupling,
            residual_sd: residual_var.sqrt(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Conditional mean of the next state.
    pub fn mean(&self, x: f64) -> f64 {
        x + (self.mean_speed - x) * self.relaxed
    }

    /// Conditional variance of the next state.
    pub fn variance(&self) -> f64 {
        self.spread * self.spread
    }

    /// Next state and the Brownian increment from two independent standard
    /// normal draws.
    pub fn apply(&self, x: f64, xi: f64, eta: f64) -> (f64, f64) {
        let z = self.z_sd * xi;
        let dw = self.coupling * z + self.residual_sd * eta;
        (self.mean(x) + self.sigma * z, dw)
    }
}

/// Draw from the stationary law `N(U, σ²/(2θ))`.
pub fn stationary_sample<R: Rng + ?Sized>(p: &OuParams, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let xi: f64 = rng.sample(StandardNormal);
    Ok(p.mean_speed + p.stationary_variance().sqrt() * xi)
}

/// How a path starts, and whether it follows the OU dynamics at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "law", content = "value")]
pub enum PathInit {
    /// `X_0 ~ N(U, σ²/(2θ))`.
    #[default]
    Stationary,
    /// `X_0` fixed; the OU dynamics follow.
    Fixed(f64),
    /// `X_t = σ W_t` with `W_0 = 0`, ignoring `θ` and `U`. Contrast case
    /// with unbounded mean square.
    Wiener,
}

/// Incremental generator of wall speeds and the Brownian increments that
/// drove them. One per trajectory.
#[derive(Debug, Clone)]
pub struct WallNoise {
    params: OuParams,
    wiener: bool,
    rng: StreamRng,
    cached: Option<Transition>,
}

impl WallNoise {
    /// Builds the generator and draws the initial wall speed.
    pub fn start(params: OuParams, init: PathInit, seed: u64) -> Result<(Self, f64)> {
        params.validate()?;
        let mut rng = stream(seed);
        let x0 = match init {
            PathInit::Stationary => stationary_sample(&params, &mut rng)?,
            PathInit::Fixed(x) => ensure_finite("initial value", x)?,
            PathInit::Wiener => 0.0,
        };
        Ok((
            WallNoise {
                params,
                wiener: matches!(init, PathInit::Wiener),
                rng,
                cached: None,
            },
            x0,
        ))
    }

    /// Advances `x` by `dt`, returning `(x_next, ΔW)`.
    pub fn advance(&mut self, x: f64, dt: f64) -> (f64, f64) {
        if self.wiener {
            let dw = dt.sqrt() * self.rng.sample::<f64, _>(StandardNormal);
            return (x + self.params.noise_amplitude * dw, dw);
        }
        let tr = match self.cached {
            Some(tr) if tr.dt == dt => tr,
            _ => {
                let tr = Transition::new(&self.params, dt);
                self.cached = Some(tr);
                tr
            }
        };
        let xi = self.rng.sample(StandardNormal);
        let eta = self.rng.sample(StandardNormal);
        tr.apply(x, xi, eta)
    }
}

/// A sampled wall-speed trajectory together with its driving increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuPath {
    pub params: OuParams,
    pub init: PathInit,
    pub seed: u64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `increments[i] = W(times[i+1]) − W(times[i])`.
    pub increments: Vec<f64>,
}

impl OuPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Uniform grid `0, dt, …, n·dt` with `n = round(t_end/dt)`.
pub fn uniform_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    ensure_positive("t_end", t_end)?;
    ensure_positive("dt", dt)?;
    let n = (t_end / dt).round().max(1.0) as usize;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

pub fn sample_path(p: &OuParams, times: &[f64], seed: u64, init: PathInit) -> Result<OuPath> {
    if times.is_empty() {
        return Err(Error::EmptyTimeGrid);
    }
    if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::TimeGridOrder);
    }
    let (mut noise, mut x) = WallNoise::start(*p, init, seed)?;
    let mut values = Vec::with_capacity(times.len());
    let mut increments = Vec::with_capacity(times.len() - 1);
    values.push(x);
    for w in times.windows(2) {
        let (next, dw) = noise.advance(x, w[1] - w[0]);
        x = next;
        values.push(x);
        increments.push(dw);
    }
    Ok(OuPath {
        params: *p,
        init,
        seed,
        times: times.to_vec(),
        values,
        increments,
    })
}

/// Realized quadratic variation `Σ (X_{t_{i+1}} − X_{t_i})²`.
pub fn quadratic_variation(path: &OuPath) -> f64 {
    path.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Largest moment order handled with exact integer coefficients.
pub const MAX_MOMENT_ORDER: u32 = 40;

/// One term `coefficient · U^u_power · (σ²/2θ)^variance_power` of a raw
/// Gaussian moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentTerm {
    pub coefficient: u128,
    pub u_power: u32,
    pub variance_power: u32,
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn double_factorial_odd(m: u32) -> u128 {
    // (2m−1)!!
    (1..=m).fold(1u128, |acc, i| acc * (2 * i - 1) as u128)
}

/// Terms of `E[X^k]` for `X ~ N(U, s)`: `Σ_j C(k,2j)(2j−1)!! U^{k−2j} s^j`.
pub fn raw_moment_terms(k: u32) -> Result<Vec<MomentTerm>> {
    if k == 0 || k > MAX_MOMENT_ORDER {
        return Err(Error::invalid(
            "k",
            format!("moment order must lie in 1..={MAX_MOMENT_ORDER}, got {k}"),
        ));
    }
    Ok((0..=k / 2)
        .map(|j| MomentTerm {
            coefficient: binomial(k, 2 * j) * double_factorial_odd(j),
            u_power: k - 2 * j,
            variance_power: j,
        })
        .collect())
}

/// Raw stationary moment `E[X^k]`.
pub fn stationary_moment(p: &OuParams, k: u32) -> Result<f64> {
    p.validate()?;
    let s = p.stationary_variance();
    Ok(raw_moment_terms(k)?
        .iter()
        .map(|t| {
            t.coefficient as f64
                * p.mean_speed.powi(t.u_power as i32)
                * s.powi(t.variance_power as i32)
        })
        .sum())
}

/// Centered stationary moment `E[(U − X)^k]`: `(k−1)!!·s^{k/2}` for even `k`,
/// zero for odd `k`.
pub fn centered_moment(p: &OuParams, k: u32) -> Result<f64> {
    p.validate()?;
    if k == 0 || k > MAX_MOMENT_ORDER {
        return Err(Error::invalid(
            "k",
            format!("moment order must lie in 1..={MAX_MOMENT_ORDER}, got {k}"),
        ));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    Ok(double_factorial_odd(k / 2) as f64 * p.stationary_variance().powi((k / 2) as i32))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-dimensional gradient diffusion `dX = −h′(X) dt + σ dW`.
#[derive(Clone)]
pub struct GradientSystem {
    pub label: String,
    potential: ScalarFn,
    gradient: ScalarFn,
    pub noise_amplitude: f64,
}

impl std::fmt::Debug for GradientSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradientSystem")
            .field("label", &self.label)
            .field("noise_amplitude", &self.noise_amplitude)
            .finish()
    }
}

impl GradientSystem {
    pub fn new(
        label: impl Into<String>,
        potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64) -> f64 + Send + Sync + 'static,
        noise_amplitude: f64,
    ) -> Result<Self> {
        ensure_positive("noise_amplitude", noise_amplitude)?;
        Ok(GradientSystem {
            label: label.into(),
            potential: Arc::new(potential),
            gradient: Arc::new(gradient),
            noise_amplitude,
        })
    }

    /// `h(x) = θ(x − U)²/2`, whose Gibbs law is the OU stationary law.
    pub fn ou(p: &OuParams) -> Result<Self> {
        p.validate()?;
        let (u, theta) = (p.mean_speed, p.reversion_rate);
        Self::new(
            "ou",
            move |x| 0.5 * theta * (x - u) * (x - u),
            move |x| theta * (x - u),
            p.noise_amplitude,
        )
    }

    /// `h(x) = (x² − 1)²`.
    pub fn double_well(noise_amplitude: f64) -> Result<Self> {
        Self::new(
            "double_well",
            |x| (x * x - 1.0).powi(2),
            |x| 4.0 * x * (x * x - 1.0),
            noise_amplitude,
        )
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    pub fn gradient(&self, x: f64) -> f64 {
        (self.gradient)(x)
    }

    /// `exp(−2h(x)/σ²)` before normalization.
    pub fn gibbs_weight(&self, x: f64) -> f64 {
        (-2.0 * self.potential(x) / (self.noise_amplitude * self.noise_amplitude)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsSettings {
    /// Window carrying essentially all Gibbs mass; also the histogram range.
    pub window: (f64, f64),
    pub bins: usize,
    /// Starting point; defaults to the grid minimizer of `h` on the window.
    pub start: Option<f64>,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        GibbsSettings {
            window: (-8.0, 8.0),
            bins: 4000,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsCheck {
    pub label: String,
    pub noise_amplitude: f64,
    pub normalizer: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Gibbs CDF at each histogram edge.
    pub gibbs_cdf: Vec<f64>,
    /// Largest |empirical − Gibbs| CDF gap over the edges.
    pub ks_distance: f64,
    pub samples: u64,
    pub outside_window: u64,
    pub occupation_mean: f64,
    pub occupation_variance: f64,
}

/// Normalizing constant `Z = ∫ exp(−2h/σ²) dx` over the window.
pub fn gibbs_normalizer(g: &GradientSystem, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Config(format!("empty Gibbs window [{lo}, {hi}]")));
    }
    let q = Quadrature::with_rel_tol(1e-12);
    let z = q
        .integrate(|x| g.gibbs_weight(x), lo, hi)
        .map_err(|e| Error::Config(format!("Gibbs normalizer: {e}")))?
        .value;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Config(format!("Gibbs normalizer is {z}")));
    }
    let edge = g.gibbs_weight(lo).max(g.gibbs_weight(hi));
    let peak = (0..=1000)
        .map(|i| g.gibbs_weight(lo + (hi - lo) * i as f64 / 1000.0))
        .fold(0.0f64, f64::max);
    if edge > 1e-14 * peak {
        return Err(Error::Config(format!(
            "Gibbs window [{lo}, {hi}] truncates the density (edge/peak = {:e})",
            edge / peak
        )));
    }
    Ok(z)
}

/// Euler–Maruyama run of the gradient system; compares the time-occupation
/// histogram to the Gibbs law `exp(−2h/σ²)/Z` by Kolmogorov–Smirnov distance
/// at the histogram edges.
pub fn gibbs_longrun_check(
    g: &GradientSystem,
    t_end: f64,
    dt: f64,
    seed: u64,
    settings: &GibbsSettings,
) -> Result<GibbsCheck> {
    ensure_positive("t_end", t_end)?;
    ensure_positive("dt", dt)?;
    if settings.bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let (lo, hi) = settings.window;
    let z = gibbs_normalizer(g, settings.window)?;
    let width = (hi - lo) / settings.bins as f64;
    let edges: Vec<f64> = (0..=settings.bins).map(|i| lo + i as f64 * width).collect();

    let q = Quadrature::with_rel_tol(1e-10);
    let mut gibbs_cdf = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    gibbs_cdf.push(0.0);
    for w in edges.windows(2) {
        acc += q
            .integrate(|x| g.gibbs_weight(x), w[0], w[1])
            .map_err(|e| Error::Config(format!("Gibbs CDF: {e}")))?
            .value;
        gibbs_cdf.push(acc / z);
    }

    let start = settings.start.unwrap_or_else(|| {
        edges
            .iter()
            .copied()
            .min_by(|a, b| g.potential(*a).total_cmp(&g.potential(*b)))
            .unwrap_or(0.0)
    });
    let steps = (t_end / dt).round() as u64;
    let mut rng = stream(seed);
    let diffusion = g.noise_amplitude * dt.sqrt();
    let mut counts = vec![0u64; settings.bins];
    let mut outside_below = 0u64;
    let mut outside_above = 0u64;
    let (mut mean, mut m2) = (0.0, 0.0);
    let mut x = start;
    for n in 0..steps {
        let xi: f64 = rng.sample(StandardNormal);
        x += -g.gradient(x) * dt + diffusion * xi;
        if !x.is_finite() {
            return Err(Error::BlowUp {
                step: n as usize,
                time: n as f64 * dt,
                reason: "Euler–Maruyama iterate is not finite".into(),
            });
        }
        let delta = x - mean;
        mean += delta / (n + 1) as f64;
        m2 += delta * (x - mean);
        if x < lo {
            outside_below += 1;
        } else if x >= hi {
            outside_above += 1;
        } else {
            let b = (((x - lo) / width) as usize).min(settings.bins - 1);
            counts[b] += 1;
        }
    }
    let total = steps as f64;
    let mut ks: f64 = 0.0;
    let mut cum = outside_below as f64;
    ks = ks.max((cum / total - gibbs_cdf[0]).abs());
    for (c, f) in counts.iter().zip(&gibbs_cdf[1..]) {
        cum += *c as f64;
        ks = ks.max((cum / total - f).abs());
    }
    Ok(GibbsCheck {
        label: g.label.clone(),
        noise_amplitude: g.noise_amplitude,
        normalizer: z,
        edges,
        counts,
        gibbs_cdf,
        ks_distance: ks,
        samples: steps,
        outside_window: outside_below + outside_above,
        occupation_mean: mean,
        occupation_variance: if steps > 1 { m2 / (total - 1.0) } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params(u: f64, theta: f64, sigma: f64) -> OuParams {
        OuParams::new(u, theta, sigma).unwrap()
    }

    #[test]
    fn zero_time_step_is_identity() {
        let p = params(1.0, 2.0, 1.0);
        assert_eq!(exact_step(3.7, 0.0, &p, 0.8).unwrap(), 3.7);
    }

    #[test]
    fn deterministic_decay_halves_at_ln2() {
        let p = params(0.0, 1.0, 0.0);
        let x = exact_step(1.0, std::f64::consts::LN_2, &p, 1.3).unwrap();
        assert!((x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let p = params(0.0, 1.0, 1.0);
        assert!(exact_step(f64::NAN, 0.1, &p, 0.0).is_err());
        assert!(exact_step(0.0, f64::INFINITY, &p, 0.0).is_err());
        assert!(exact_step(0.0, -0.1, &p, 0.0).is_err());
        assert!(OuParams::new(0.0, 0.0, 1.0).is_err());
        assert!(OuParams::new(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn transition_composes_in_mean_and_variance() {
        let p = params(1.3, 0.7, 0.9);
        for &(d1, d2) in &[(0.1, 0.3), (1.0, 2.5), (1e-4, 3.0)] {
            let (a, b, c) = (
                Transition::new(&p, d1),
                Transition::new(&p, d2),
                Transition::new(&p, d1 + d2),
            );
            let x = -0.4;
            assert!((b.mean(a.mean(x)) - c.mean(x)).abs() < 1e-14);
            // Var after two steps: decay_2² Var_1 + Var_2
            let decay2 = (-p.reversion_rate * d2).exp();
            let composed = decay2 * decay2 * a.variance() + b.variance();
            assert!((composed - c.variance()).abs() < 1e-14);
        }
    }

    #[test]
    fn increment_coupling_matches_covariances() {
        let p = params(0.0, 1.5, 1.0);
        let dt = 0.2;
        let tr = Transition::new(&p, dt);
        // Var ΔW = coupling² Var Z + residual² must equal dt.
        let var_dw =
            tr.coupling * tr.coupling * tr.z_sd * tr.z_sd + tr.residual_sd * tr.residual_sd;
        assert!((var_dw - dt).abs() < 1e-15);
        let cov = tr.coupling * tr.z_sd * tr.z_sd;
        assert!((cov - (1.0 - (-1.5f64 * dt).exp()) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_stationary_sample_is_mean() {
        let p = params(2.5, 1.0, 0.0);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        assert_eq!(stationary_sample(&p, &mut rng).unwrap(), 2.5);
    }

    #[test]
    fn constant_path_without_noise() {
        let p = params(1.5, 1.0, 0.0);
        let times = uniform_times(1.0, 0.01).unwrap();
        let path = sample_path(&p, &times, 1, PathInit::Fixed(1.5)).unwrap();
        assert!(path.values.iter().all(|&x| x == 1.5));
        assert_eq!(quadratic_variation(&path), 0.0);
    }

    #[test]
    fn time_grid_validation() {
        let p = params(1.0, 1.0, 1.0);
        assert!(matches!(
            sample_path(&p, &[], 1, PathInit::Stationary),
            Err(Error::EmptyTimeGrid)
        ));
        assert!(matches!(
            sample_path(&p, &[0.0, 0.5, 0.5], 1, PathInit::Stationary),
            Err(Error::TimeGridOrder)
        ));
        assert!(sample_path(&p, &[0.1, 0.5], 1, PathInit::Stationary).is_err());
    }

    #[test]
    fn paths_are_bit_reproducible() {
        let p = params(1.0, 1.0, 0.5);
        let times = uniform_times(2.0, 0.01).unwrap();
        let a = sample_path(&p, &times, 99, PathInit::Stationary).unwrap();
        let b = sample_path(&p, &times, 99, PathInit::Stationary).unwrap();
        assert_eq!(a, b);
        let c = sample_path(&p, &times, 100, PathInit::Stationary).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn wiener_mode_is_scaled_brownian_motion() {
        let p = params(5.0, 3.0, 2.0);
        let times = uniform_times(1.0, 0.1).unwrap();
        let path = sample_path(&p, &times, 4, PathInit::Wiener).unwrap();
        assert_eq!(path.values[0], 0.0);
        let mut x = 0.0;
        for (i, dw) in path.increments.iter().enumerate() {
            x += 2.0 * dw;
            assert!((path.values[i + 1] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_centered_moment_is_three() {
        // s = σ²/(2θ) = 1
        let p = params(0.0, 0.5, 1.0);
        assert_eq!(centered_moment(&p, 4).unwrap(), 3.0);
        assert_eq!(centered_moment(&p, 3).unwrap(), 0.0);
    }

    #[test]
    fn raw_moment_coefficients_match_closed_forms() {
        let coeffs = |k| {
            raw_moment_terms(k)
                .unwrap()
                .iter()
                .map(|t| t.coefficient)
                .collect::<Vec<_>>()
        };
        assert_eq!(coeffs(2), vec![1, 1]);
        assert_eq!(coeffs(4), vec![1, 6, 3]);
        assert_eq!(coeffs(6), vec![1, 15, 45, 15]);
        assert_eq!(coeffs(8), vec![1, 28, 210, 420, 105]);
    }

    #[test]
    fn eighth_moment_worked_value() {
        let p = params(1.0, 0.5, 1.0);
        assert_eq!(stationary_moment(&p, 4).unwrap(), 10.0);
        assert_eq!(stationary_moment(&p, 8).unwrap(), 764.0);
        assert!(stationary_moment(&p, 0).is_err());
        assert!(stationary_moment(&p, MAX_MOMENT_ORDER + 1).is_err());
    }

    #[test]
    fn ou_potential_normalizer_is_gaussian() {
        let p = params(1.0, 2.0, 1.0);
        let g = GradientSystem::ou(&p).unwrap();
        let z = gibbs_normalizer(&g, (-10.0, 12.0)).unwrap();
        // ∫ exp(−θ(x−U)²/σ²) = √(πσ²/θ)
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((z - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn truncating_window_is_a_configuration_error() {
        let g = GradientSystem::double_well(1.0).unwrap();
        assert!(matches!(
            gibbs_normalizer(&g, (-1.0, 1.0)),
            Err(Error::Config(_))
        ));
    }
}

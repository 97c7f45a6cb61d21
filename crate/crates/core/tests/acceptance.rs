//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p shearlab-core --test acceptance -- 1 5`.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use shearlab_core::background::BackgroundParams;
use shearlab_core::bounds::{
    mean_bound, mean_bound_general, second_moment_bound, second_moment_bound_polynomial,
};
use shearlab_core::diagnostics::{energy_inequality_audit, Estimate};
use shearlab_core::harness::{run_ensemble, sample_wall_paths, ExperimentConfig};
use shearlab_core::ou::{
    centered_moment, gibbs_longrun_check, quadratic_variation, sample_path, stationary_moment,
    stationary_sample, uniform_times, GibbsSettings, GradientSystem, OuParams, PathInit,
};
use shearlab_core::rng::{derive_seed, stream};
use shearlab_core::solver::{simulate_trajectory, GridSpec, InitialCondition, Simulation};
use shearlab_core::{FlowConfig, Geometry};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = Option<fn() -> Outcome>;

fn main() {
    // Criteria 7 and 11 share one ensemble run and are handled together.
    let criteria: [(&str, Check); 11] = [
        ("OU moment identities", Some(c1_moments)),
        ("quadratic variation", Some(c2_quadratic_variation)),
        ("boundary-layer margin scan", Some(c3_margin_scan)),
        ("background calculus oracles", Some(c4_background_oracles)),
        ("bound arithmetic", Some(c5_bound_arithmetic)),
        ("laminar solver convergence", Some(c6_laminar)),
        ("desk ensemble within bounds", None),
        ("martingale audit", Some(c8_martingale)),
        ("over-dissipation demo", Some(c9_over_dissipation)),
        ("Gibbs occupation law", Some(c10_gibbs)),
        ("energy-inequality audit", None),
    ];
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);

    let mut failures = 0;
    let mut report = |k: usize, name: &str, o: Outcome, took: Duration| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {k:>2} {name} ({:.1}s): {}",
            took.as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failures += 1;
        }
    };

    for (i, (name, check)) in criteria.iter().enumerate() {
        let k = i + 1;
        let Some(check) = check.filter(|_| run(k)) else {
            continue;
        };
        let start = Instant::now();
        let o = check();
        report(k, name, o, start.elapsed());
    }
    if run(7) || run(11) {
        let start = Instant::now();
        let (c7, c11) = c7_c11_desk_ensemble();
        let took = start.elapsed();
        if run(7) {
            report(7, criteria[6].0, c7, took);
        }
        if run(11) {
            report(11, criteria[10].0, c11, took);
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn within_runtime(took: Duration, limit_s: f64) -> bool {
    took.as_secs_f64() < limit_s
}

/// Sample moments `E[X^k]` and `E[(U−X)^k]` against the closed forms with
/// `s = σ²/(2θ)`.
fn c1_moments() -> Outcome {
    let start = Instant::now();
    let (u, theta, sigma) = (1.0, 1.0, 1.0);
    let p = OuParams::new(u, theta, sigma).unwrap();
    let s = sigma * sigma / (2.0 * theta);
    let exact = [
        ("X^2", u * u + s),
        ("X^4", u.powi(4) + 6.0 * u * u * s + 3.0 * s * s),
        (
            "X^6",
            u.powi(6) + 15.0 * u.powi(4) * s + 45.0 * u * u * s * s + 15.0 * s.powi(3),
        ),
        (
            "X^8",
            u.powi(8)
                + 28.0 * u.powi(6) * s
                + 210.0 * u.powi(4) * s * s
                + 420.0 * u * u * s.powi(3)
                + 105.0 * s.powi(4),
        ),
        ("(U-X)^2", s),
        ("(U-X)^4", 3.0 * s * s),
    ];

    let n = 1_000_000;
    let mut rng = stream(20_240_601);
    let xs: Vec<f64> = (0..n)
        .map(|_| stationary_sample(&p, &mut rng).unwrap())
        .collect();
    let statistic = |name: &str, x: f64| match name {
        "X^2" => x.powi(2),
        "X^4" => x.powi(4),
        "X^6" => x.powi(6),
        "X^8" => x.powi(8),
        "(U-X)^2" => (u - x).powi(2),
        _ => (u - x).powi(4),
    };

    let library = [
        stationary_moment(&p, 2),
        stationary_moment(&p, 4),
        stationary_moment(&p, 6),
        stationary_moment(&p, 8),
        centered_moment(&p, 2),
        centered_moment(&p, 4),
    ];
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    let mut parts = Vec::new();
    for ((name, value), lib) in exact.iter().zip(library) {
        let samples: Vec<f64> = xs.iter().map(|&x| statistic(name, x)).collect();
        let est = Estimate::from_samples(&samples).unwrap();
        let z = est.z_score(*value);
        worst_z = worst_z.max(z);
        let lib = lib.unwrap();
        let lib_ok = (lib - value).abs() <= 1e-12 * value.abs();
        pass &= z <= 4.0 && lib_ok;
        parts.push(format!("{name} z={z:.2}"));
    }
    let took = start.elapsed();
    pass &= within_runtime(took, 60.0);
    outcome(
        pass,
        format!(
            "max z {worst_z:.2} over 10^6 samples [{}]",
            parts.join(", ")
        ),
    )
}

fn c2_quadratic_variation() -> Outcome {
    let start = Instant::now();
    let (sigma, t_end) = (0.7, 1.0);
    let p = OuParams::new(1.0, 2.0, sigma).unwrap();
    let paths = sample_wall_paths(&p, t_end, 1e-4, 100, 31, false).unwrap();
    let mean_qv = paths.iter().map(quadratic_variation).sum::<f64>() / paths.len() as f64 / t_end;
    let rel = (mean_qv / (sigma * sigma) - 1.0).abs();
    let took = start.elapsed();
    outcome(
        rel <= 0.02 && within_runtime(took, 60.0),
        format!(
            "QV/T = {mean_qv:.5} vs σ² = {:.5}, rel err {rel:.2e}",
            sigma * sigma
        ),
    )
}

fn c3_margin_scan() -> Outcome {
    let (u, h) = (1.0, 1.0);
    let geometry = Geometry::new(1.0, h).unwrap();
    let mut rng = stream(3);
    let mut violations = 0usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut report_violations = 0usize;
    for re in [1.1, 2.0, 10.0, 100.0] {
        let nu = u * h / re;
        let bp = BackgroundParams::standard(nu, u, geometry).unwrap();
        for i in 0..100_000 {
            let z: f64 = if i % 2 == 0 {
                rng.random_range(-50.0..50.0)
            } else {
                rng.random_range(-3.0..3.0)
            };
            let m = bp.delta_inequality_margin(z, nu);
            let delta = bp.delta(z);
            // Direct recomputation with A = νU, B = U².
            let delta_ref = nu * u / (z * z + u * u);
            let m_ref = 0.5 - delta_ref * z.abs() / (2.0 * nu);
            let tol = 1e-12;
            let ok = m >= 0.25 - tol
                && m <= 0.5 + tol
                && delta < h
                && (m - m_ref).abs() <= tol
                && (delta - delta_ref).abs() <= tol * delta_ref;
            if !ok {
                violations += 1;
            }
            lo = lo.min(m);
            hi = hi.max(m);
        }
        let ou = OuParams::new(u, 1.0, 0.5).unwrap();
        let rep = shearlab_core::background::verify_inequalities(&bp, &ou, nu, 100_000, 4).unwrap();
        report_violations += rep
            .checks
            .iter()
            .filter(|c| {
                matches!(
                    c.name,
                    "margin_lower" | "margin_upper" | "delta_below_height"
                )
            })
            .map(|c| c.violations)
            .sum::<usize>();
    }
    outcome(
        violations == 0 && report_violations == 0,
        format!(
            "margin range [{lo:.6}, {hi:.6}], {violations} direct and {report_violations} library violations over 4×10^5 z"
        ),
    )
}

/// Adaptive Simpson rule with a relative tolerance.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn c4_background_oracles() -> Outcome {
    let geometry = Geometry::new(2.0, 1.0).unwrap();
    let bp = BackgroundParams::new(0.05, 1.3, geometry).unwrap();
    let (a, b) = (bp.a, bp.b);
    let mut rng = stream(44);
    let mut worst_fprime: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut cap_violations = 0usize;
    for i in 0..10_000 {
        let z: f64 = if i % 2 == 0 {
            rng.random_range(-40.0..40.0)
        } else {
            rng.random_range(-2.0..2.0)
        };
        let delta = a / (z * z + b);
        let fprime = |x3: f64| 1.0 - x3 * (3.0 * z * z + b) / a;
        let quad = simpson(&|x3: f64| fprime(x3).powi(2), 0.0, delta, 1e-13);
        let closed = bp.int_fprime_sq(z);
        worst_fprime = worst_fprime.max((closed - quad).abs() / quad.abs());
        if closed > 3.0 * a / b * (1.0 + 1e-12) {
            cap_violations += 1;
        }

        // ∂₃Φ₁ by one-sided differences of the profile, kept inside the layer.
        let eta = 1e-3 * delta;
        let d3 = |x3: f64| {
            if x3 + eta <= delta {
                (bp.phi(x3 + eta, z).unwrap() - bp.phi(x3, z).unwrap()) / eta
            } else {
                (bp.phi(x3, z).unwrap() - bp.phi(x3 - eta, z).unwrap()) / eta
            }
        };
        let l = geometry.length;
        let quad = l * l * simpson(&|x3: f64| d3(x3).powi(2), 0.0, delta, 1e-12);
        let closed = bp.grad_phi_norm_sq(z);
        if closed > 0.0 {
            worst_grad = worst_grad.max((closed - quad).abs() / closed);
        }
    }
    outcome(
        worst_fprime <= 1e-10 && worst_grad <= 1e-8 && cap_violations == 0,
        format!(
            "∫(f′)² rel err {worst_fprime:.1e}, ‖∇Φ‖² rel err {worst_grad:.1e}, {cap_violations} cap violations over 10^4 z"
        ),
    )
}

fn flow(u: f64, h: f64, nu: f64, theta: f64, sigma: f64) -> FlowConfig {
    let geometry = Geometry::new(2.0 * h, h).unwrap();
    FlowConfig::new(geometry, nu, OuParams::new(u, theta, sigma).unwrap()).unwrap()
}

fn c5_bound_arithmetic() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // Bit-exact where every input is a dyadic rational.
    let mut exact = true;
    for (u, h, nu) in [
        (1.0, 1.0, 0.5),
        (1.0, 1.0, 0.125),
        (2.0, 0.5, 0.25),
        (4.0, 2.0, 1.0),
    ] {
        let cfg = flow(u, h, nu, 0.75, 0.0);
        exact &= mean_bound(&cfg).unwrap() == 32.0 * u * u * u / h
            && second_moment_bound(&cfg).unwrap() == 24640.0 * u.powi(6) / (h * h)
            && second_moment_bound_polynomial(&cfg).unwrap() == 24640.0 * u.powi(6) / (h * h);
    }
    pass &= exact;
    notes.push(format!("σ=0 dyadic cases bit-exact: {exact}"));

    let mut worst_laminar: f64 = 0.0;
    for (u, h, re) in [(1.0, 1.0, 10.0), (0.3, 1.7, 3.0), (1.5, 2.0, 250.0)] {
        let cfg = flow(u, h, u * h / re, 0.8, 0.0);
        let m = mean_bound(&cfg).unwrap() / (32.0 * u * u * u / h) - 1.0;
        let s = second_moment_bound(&cfg).unwrap() / (24640.0 * u.powi(6) / (h * h)) - 1.0;
        worst_laminar = worst_laminar.max(m.abs()).max(s.abs());
    }
    pass &= worst_laminar <= 1e-15;
    notes.push(format!("σ=0 general cases rel err {worst_laminar:.1e}"));

    // U = h = θ = σ = 1, ν = 0.5, so Re = 2.
    let re = 2.0;
    let hand = 32.0 + 2.0 * (6.0 / re + 28.0 + 12.0 / (re * re) + 24.0 / (re * re) + 6.0);
    let worked = mean_bound(&flow(1.0, 1.0, 0.5, 1.0, 1.0)).unwrap();
    let worked_ok = hand == 124.0 && (worked - 124.0).abs() <= 1e-12 * 124.0;
    pass &= worked_ok;
    notes.push(format!("worked point {worked}"));

    let mut rng = stream(55);
    let mut worst_dual: f64 = 0.0;
    for _ in 0..2000 {
        let u = rng.random_range(0.2..3.0);
        let h = rng.random_range(0.2..3.0);
        let re = rng.random_range(1.2..500.0);
        let theta = rng.random_range(0.05..5.0);
        let sigma = rng.random_range(0.0..2.0);
        let cfg = flow(u, h, u * h / re, theta, sigma);
        let a = second_moment_bound(&cfg).unwrap();
        let b = second_moment_bound_polynomial(&cfg).unwrap();
        let c = mean_bound(&cfg).unwrap();
        let d = mean_bound_general(&cfg).unwrap();
        worst_dual = worst_dual
            .max((a - b).abs() / a.abs())
            .max((c - d).abs() / c.abs());
    }
    pass &= worst_dual <= 1e-12;
    notes.push(format!("dual codings rel diff {worst_dual:.1e}"));
    outcome(pass, notes.join("; "))
}

/// Laminar runs from Couette plus the slowest diffusive mode. The exact
/// time average over `[0, T]` is `νU²/h² + a²U²(1 − e^{−2λT})/(4T)` with
/// `λ = νπ²/h²`; the transient term vanishes as `T` grows.
fn c6_laminar() -> Outcome {
    let start = Instant::now();
    let (u, h, re, amp, t_end) = (1.0, 1.0, 10.0, 0.5, 10.0);
    let nu = u * h / re;
    let cfg = flow(u, h, nu, 1.0, 0.0);
    let lambda = nu * std::f64::consts::PI.powi(2) / (h * h);
    let couette = nu * u * u / (h * h);
    let reference =
        couette + amp * amp * u * u * (1.0 - (-2.0 * lambda * t_end).exp()) / (4.0 * t_end);
    let mut errors = Vec::new();
    let mut last = f64::NAN;
    for n3 in [16usize, 32, 64] {
        let dz = h / n3 as f64;
        let sim = Simulation {
            flow: cfg,
            grid: GridSpec {
                n1: 1,
                n2: 1,
                n3,
                dt: 0.2 * dz * dz / nu,
                cfl_safety: 0.9,
            },
            t_end,
            seed: 0,
            initial: InitialCondition::ShearMode {
                speed: u,
                amplitude: amp,
            },
            wall_init: PathInit::Stationary,
            audit: false,
            snapshot_every: None,
        };
        let rec = simulate_trajectory(&sim).unwrap();
        if !rec.completed() {
            return outcome(false, format!("n3={n3} blew up"));
        }
        last = rec.mean_dissipation();
        errors.push((last - reference).abs());
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let took = start.elapsed();
    outcome(
        min_order >= 1.9 && within_runtime(took, 600.0),
        format!(
            "errors {:.2e}/{:.2e}/{:.2e}, orders {:.2}/{:.2}; ⟨ε⟩_T(64) = {last:.6}, νU²/h² = {couette:.6}",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    )
}

fn c7_c11_desk_ensemble() -> (Outcome, Outcome) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    let dir = tempfile::tempdir().unwrap();
    cfg.run.output_dir = Some(dir.path().to_path_buf());
    let report = match run_ensemble(&cfg) {
        Ok(r) => r,
        Err(e) => {
            let msg = format!("ensemble failed: {e}");
            return (outcome(false, msg.clone()), outcome(false, msg));
        }
    };
    let c = &report.comparison;
    let stats = &report.stats;
    let all_done = stats.completed == stats.requested;
    let mean_ok = c.mean_within_bound == Some(true);
    let second_ok = c.second_moment_within_bound == Some(true);
    let d = stats.dissipation.as_ref();
    let c7 = outcome(
        all_done && mean_ok && second_ok,
        format!(
            "{}/{} completed; mean+3SE {:.4e} ≤ {:.4e}: {mean_ok}; E[⟨ε⟩²]+3SE {:.4e} ≤ {:.4e}: {second_ok}; bound/mean {:.1}",
            stats.completed,
            stats.requested,
            c.mean_plus_3se.unwrap_or(f64::NAN),
            c.bounds.mean_bound.value,
            c.second_moment_plus_3se.unwrap_or(f64::NAN),
            c.bounds.second_moment_bound.value,
            c.mean_slack_factor.unwrap_or(f64::NAN),
        ),
    );

    let ledgers = &report.ledger.energy_inequality;
    let passed = ledgers.iter().filter(|l| l.passed).count();
    let worst = ledgers
        .iter()
        .map(|l| l.slack / l.tolerance)
        .fold(f64::INFINITY, f64::min);
    let rate = report.ledger.energy_pass_rate;
    let c11 = outcome(
        all_done && rate == Some(1.0) && ledgers.len() == stats.requested,
        format!(
            "pass rate {:.1}% ({passed}/{}), C = {}, min slack/tolerance {worst:.3}; {} members",
            100.0 * rate.unwrap_or(0.0),
            ledgers.len(),
            report.ledger.tolerance_constant,
            d.map(|d| d.count).unwrap_or(0),
        ),
    );
    (c7, c11)
}

fn c8_martingale() -> Outcome {
    let (u, h, nu) = (1.0, 1.0, 0.1);
    let cfg = flow(u, h, nu, 1.0, 0.5);
    let n = 1000u64;
    let results: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sim = Simulation {
                flow: cfg,
                grid: GridSpec {
                    n1: 1,
                    n2: 1,
                    n3: 16,
                    dt: 0.008,
                    cfl_safety: 0.9,
                },
                t_end: 4.0,
                seed: derive_seed(808, i),
                initial: InitialCondition::Couette { speed: u },
                wall_init: PathInit::Stationary,
                audit: true,
                snapshot_every: None,
            };
            let rec = simulate_trajectory(&sim)?;
            if !rec.completed() {
                return Ok(None);
            }
            energy_inequality_audit(&rec, &cfg, 1.0).map(Some)
        })
        .collect::<shearlab_core::Result<Vec<_>>>()
        .unwrap();
    let ledgers: Vec<_> = results.into_iter().flatten().collect();
    let m: Vec<f64> = ledgers.iter().map(|l| l.m_t).collect();
    let est = Estimate::from_samples(&m).unwrap();
    let z = est.z_score(0.0);
    let qv_fail = ledgers
        .iter()
        .filter(|l| !l.quadratic_variation_passed)
        .count();
    outcome(
        ledgers.len() == n as usize && z <= 4.0 && qv_fail == 0,
        format!(
            "{} trajectories; E[M_T] = {:.3e} ± {:.3e} (z = {z:.2}); {qv_fail} QV cap failures",
            ledgers.len(),
            est.mean,
            est.standard_error
        ),
    )
}

/// `X = W`: `(1/T)·E∫₀ᵀ X² dt = T/2`.
fn c9_over_dissipation() -> Outcome {
    let p = OuParams::new(1.0, 1.0, 1.0).unwrap();
    let horizons = [1.0, 2.0, 4.0, 8.0];
    let dt = 1e-3;
    let mut points = Vec::new();
    for (k, &t) in horizons.iter().enumerate() {
        let times = uniform_times(t, dt).unwrap();
        let averages: Vec<f64> = (0..1000u64)
            .into_par_iter()
            .map(|i| {
                let path =
                    sample_path(&p, &times, derive_seed(900 + k as u64, i), PathInit::Wiener)
                        .unwrap();
                let integral: f64 = path
                    .values
                    .windows(2)
                    .map(|w| 0.5 * dt * (w[0] * w[0] + w[1] * w[1]))
                    .sum();
                integral / t
            })
            .collect();
        points.push((t, Estimate::from_samples(&averages).unwrap().mean));
    }
    let slope = points.iter().map(|(t, y)| t * y).sum::<f64>()
        / points.iter().map(|(t, _)| t * t).sum::<f64>();
    let rel = (slope / 0.5 - 1.0).abs();
    let listed: Vec<String> = points
        .iter()
        .map(|(t, y)| format!("T={t}: {y:.3}"))
        .collect();
    outcome(
        rel <= 0.05,
        format!(
            "fitted slope {slope:.4} vs 0.5, rel err {rel:.3} [{}]",
            listed.join(", ")
        ),
    )
}

fn c10_gibbs() -> Outcome {
    let (t_end, dt) = (1e4, 1e-3);
    let p = OuParams::new(1.0, 1.0, 1.0).unwrap();
    let sd = p.stationary_variance().sqrt();
    let ou = GradientSystem::ou(&p).unwrap();
    let ou_settings = GibbsSettings {
        window: (p.mean_speed - 12.0 * sd, p.mean_speed + 12.0 * sd),
        ..Default::default()
    };
    let well = GradientSystem::double_well(1.0).unwrap();
    let well_settings = GibbsSettings {
        window: (-4.0, 4.0),
        ..Default::default()
    };
    let a = gibbs_longrun_check(&ou, t_end, dt, 101, &ou_settings).unwrap();
    let b = gibbs_longrun_check(&well, t_end, dt, 102, &well_settings).unwrap();
    outcome(
        a.ks_distance < 0.02 && b.ks_distance < 0.02,
        format!(
            "KS ou {:.4} (occupation mean {:.3}, var {:.3}), double well {:.4}",
            a.ks_distance, a.occupation_mean, a.occupation_variance, b.ks_distance
        ),
    )
}

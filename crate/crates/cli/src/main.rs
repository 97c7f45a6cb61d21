use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shearlab_core::background::verify_inequalities;
use shearlab_core::harness::io::{read_json, write_paths_csv};
use shearlab_core::harness::{
    run_ensemble, sample_wall_paths, simulate_to_dir, sweep, verify_ensemble, ExperimentConfig,
    StoredTrajectory, SweepGrid, TrajectoryStatus, TrajectorySummary,
};
use shearlab_core::ou::{gibbs_longrun_check, GibbsSettings, GradientSystem};
use shearlab_core::{BoundsReport, FlowConfig, Geometry, OuParams};

/// Exit status when a hard invariant fails.
const INVARIANT_FAILURE: u8 = 1;
/// Exit status for bad input or I/O errors.
const USAGE_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "shearlab",
    version,
    about = "Shear flow driven by a randomly sliding wall"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample wall-speed paths to CSV (path_id, t, x).
    OuSample(OuSampleArgs),
    /// Closed-form dissipation bounds.
    Bounds(BoundsArgs),
    /// Simulate one trajectory.
    Simulate(SimulateArgs),
    /// Run or resume an ensemble.
    Ensemble(EnsembleArgs),
    /// Evaluate bounds, and optionally ensembles, over a parameter grid.
    Sweep(SweepArgs),
    /// Re-check stored results or sampled inequalities.
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Args, Clone, Copy)]
struct OuArgs {
    /// Mean wall speed U.
    #[arg(long = "u")]
    u: f64,
    /// Mean-reversion rate θ.
    #[arg(long)]
    theta: f64,
    /// Noise amplitude σ.
    #[arg(long)]
    sigma: f64,
}

impl OuArgs {
    fn params(&self) -> Result<OuParams> {
        Ok(OuParams::new(self.u, self.theta, self.sigma)?)
    }
}

#[derive(Args, Clone, Copy)]
struct FlowArgs {
    #[command(flatten)]
    ou: OuArgs,
    /// Kinematic viscosity ν.
    #[arg(long)]
    nu: f64,
    /// Wall separation h.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Horizontal period L.
    #[arg(long = "L", default_value_t = 1.0)]
    length: f64,
}

impl FlowArgs {
    fn flow(&self) -> Result<FlowConfig> {
        let g = Geometry::new(self.length, self.h)?;
        Ok(FlowConfig::new(g, self.nu, self.ou.params()?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PathMode {
    Ou,
    Wiener,
}

#[derive(Args)]
struct OuSampleArgs {
    #[command(flatten)]
    ou: OuArgs,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ou")]
    mode: PathMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    flow: FlowArgs,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.t_end`.
    #[arg(long)]
    t_end: Option<f64>,
    /// Trajectory seed; defaults to member 0 of the configured ensemble.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.trajectories`.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Overrides `run.workers`.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated σ values.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Comma-separated θ values.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    /// Comma-separated Reynolds numbers, realized through ν.
    #[arg(long, value_delimiter = ',')]
    reynolds: Vec<f64>,
    /// Run the configured ensemble at every point.
    #[arg(long)]
    simulate: bool,
    /// Overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Potential {
    Ou,
    DoubleWell,
}

#[derive(Subcommand)]
enum Verify {
    /// Pointwise background inequalities over sampled wall speeds.
    Background {
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Energy inequality recomputed from a stored trajectory.
    Energy {
        #[arg(long)]
        traj: PathBuf,
        /// Tolerance constant C.
        #[arg(long, default_value_t = 1.0)]
        tolerance_constant: f64,
    },
    /// Checksums, statistics and audits of an ensemble run directory.
    Ensemble {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Occupation law of a long gradient-diffusion run against its Gibbs
    /// density.
    Gibbs {
        #[arg(long, value_enum, default_value = "ou")]
        potential: Potential,
        #[arg(long = "u", default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted Kolmogorov–Smirnov distance.
        #[arg(long, default_value_t = 0.02)]
        max_ks: f64,
    },
}

/// Prints to stdout; a reader that hung up early is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn status(ok: bool) -> u8 {
    if ok {
        0
    } else {
        INVARIANT_FAILURE
    }
}

fn ou_sample(a: &OuSampleArgs) -> Result<u8> {
    let paths = sample_wall_paths(
        &a.ou.params()?,
        a.t_end,
        a.dt,
        a.paths,
        a.seed,
        matches!(a.mode, PathMode::Wiener),
    )?;
    write_paths_csv(&a.out, &paths)?;
    eprintln!("wrote {} paths to {}", paths.len(), a.out.display());
    Ok(0)
}

fn bounds(a: &BoundsArgs) -> Result<u8> {
    let report = BoundsReport::evaluate(&a.flow.flow()?)?;
    if a.json {
        print_json(&report)?;
    } else {
        let rows = [
            ("Re", report.reynolds),
            ("mean_bound", report.mean_bound),
            ("second_moment_bound", report.second_moment_bound),
            ("large_noise_bound", report.large_noise_bound),
            ("U^3/h", report.kolmogorov_scale_u3_over_h),
        ];
        let mut out = String::new();
        for (name, q) in rows {
            out.push_str(&format!("{name:<22}{:>20.10e}  [{}]\n", q.value, q.unit));
        }
        match std::io::stdout().lock().write_all(out.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        }
    }
    Ok(0)
}

fn simulate(a: &SimulateArgs) -> Result<u8> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let mut sim = cfg.simulation(0)?;
    if let Some(t) = a.t_end {
        sim.t_end = t;
    }
    if let Some(seed) = a.seed {
        sim.seed = seed;
    }
    let (summary, files) = simulate_to_dir(&sim, &cfg.audit, 0, &a.out)?;
    print_json(&summary)?;
    eprintln!("wrote {} files to {}", files.len(), a.out.display());
    let trace_ok = summary.trace.is_none_or(|t| t.holds);
    Ok(status(trace_ok))
}

fn ensemble(a: &EnsembleArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        cfg.run.output_dir = Some(out.clone());
    }
    if let Some(n) = a.trajectories {
        cfg.run.trajectories = n;
    }
    if a.workers.is_some() {
        cfg.run.workers = a.workers;
    }
    let report = run_ensemble(&cfg)?;
    #[derive(Serialize)]
    struct Out<'a> {
        output_dir: &'a Path,
        reused: usize,
        stats: &'a shearlab_core::harness::EnsembleStats,
        comparison: &'a shearlab_core::harness::BoundComparison,
        energy_pass_rate: Option<f64>,
        quadratic_variation_pass_rate: Option<f64>,
        hard_failures: Vec<String>,
    }
    let hard_failures = report.hard_failures();
    let ok = hard_failures.is_empty();
    print_json(&Out {
        output_dir: &report.output_dir,
        reused: report.reused,
        stats: &report.stats,
        comparison: &report.comparison,
        energy_pass_rate: report.ledger.energy_pass_rate,
        quadratic_variation_pass_rate: report.ledger.quadratic_variation_pass_rate,
        hard_failures,
    })?;
    Ok(status(ok))
}

fn run_sweep(a: &SweepArgs) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        cfg.run.output_dir = Some(out.clone());
    }
    let grid = SweepGrid {
        sigma: a.sigma.clone(),
        theta: a.theta.clone(),
        reynolds: a.reynolds.clone(),
    };
    print_json(&sweep(&cfg, &grid, a.simulate)?)?;
    Ok(0)
}

fn verify(v: &Verify) -> Result<u8> {
    match v {
        Verify::Background {
            flow,
            samples,
            seed,
        } => {
            let cfg = flow.flow()?;
            let report =
                verify_inequalities(&cfg.background, &cfg.ou, cfg.viscosity, *samples, *seed)?;
            print_json(&report)?;
            Ok(status(report.all_passed))
        }
        Verify::Energy {
            traj,
            tolerance_constant,
        } => {
            let stored = StoredTrajectory::load(traj)?;
            let ledger = stored
                .energy_audit(*tolerance_constant)
                .context("the trajectory was simulated without audit series")?;
            let summary: Option<TrajectorySummary> =
                read_json(&traj.join(shearlab_core::harness::io::SUMMARY_FILE)).ok();
            let trace = summary.as_ref().and_then(|s| s.trace);
            #[derive(Serialize)]
            struct Out<'a> {
                ledger: &'a shearlab_core::InequalityLedger,
                mean_dissipation: f64,
                trace: Option<shearlab_core::harness::TraceSummary>,
                completed: Option<bool>,
            }
            print_json(&Out {
                ledger: &ledger,
                mean_dissipation: stored.mean_dissipation(),
                trace,
                completed: summary.map(|s| s.status == TrajectoryStatus::Completed),
            })?;
            Ok(status(trace.is_none_or(|t| t.holds)))
        }
        Verify::Ensemble { runs, config } => {
            let cfg = ExperimentConfig::load(config)?;
            let report = verify_ensemble(runs, &cfg)?;
            print_json(&report)?;
            Ok(status(report.hard_failures.is_empty()))
        }
        Verify::Gibbs {
            potential,
            u,
            theta,
            sigma,
            t_end,
            dt,
            seed,
            max_ks,
        } => {
            let (system, window) = match potential {
                Potential::Ou => {
                    let p = OuParams::new(*u, *theta, *sigma)?;
                    let sd = p.stationary_variance().sqrt();
                    (GradientSystem::ou(&p)?, (u - 12.0 * sd, u + 12.0 * sd))
                }
                Potential::DoubleWell => {
                    let reach = 1.0 + 3.0 * sigma.max(0.5);
                    (GradientSystem::double_well(*sigma)?, (-reach, reach))
                }
            };
            if !(*max_ks > 0.0) {
                bail!("--max-ks must be positive");
            }
            let settings = GibbsSettings {
                window,
                ..GibbsSettings::default()
            };
            let check = gibbs_longrun_check(&system, *t_end, *dt, *seed, &settings)?;
            #[derive(Serialize)]
            struct Out<'a> {
                label: &'a str,
                ks_distance: f64,
                max_ks: f64,
                passed: bool,
                samples: u64,
                outside_window: u64,
                occupation_mean: f64,
                occupation_variance: f64,
            }
            let passed = check.ks_distance < *max_ks;
            print_json(&Out {
                label: &check.label,
                ks_distance: check.ks_distance,
                max_ks: *max_ks,
                passed,
                samples: check.samples,
                outside_window: check.outside_window,
                occupation_mean: check.occupation_mean,
                occupation_variance: check.occupation_variance,
            })?;
            Ok(status(passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::OuSample(a) => ou_sample(a),
        Command::Bounds(a) => bounds(a),
        Command::Simulate(a) => simulate(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify(v) => verify(v),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE_FAILURE)
        }
    }
}

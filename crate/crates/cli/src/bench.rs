//! Benchmark protocols comparing the solvers.
//!
//! Three protocols, all emitting the same CSV schema:
//!
//! * `iters_vs_delta` — iteration and evaluation counts of golden-section
//!   search and gradient descent across a tolerance schedule, averaged over
//!   the input items;
//! * `lambda_sweep` — gradient-descent cost as a function of the initial
//!   learning rate, averaged over the input items; [`tune_lambda0`] picks
//!   the cheapest accurate rate from its rows;
//! * `accuracy_vs_delta` — per-item estimation error of gradient descent,
//!   golden-section search, and the plane-fit baseline across a tolerance
//!   schedule (synthetic input only, since it needs ground truth).
//!
//! Column set and order are fixed:
//! `method,delta_theta,lambda0,iterations,energy_evals,gradient_evals,theta_hat,theta_true,abs_error,wall_time`.
//! `theta_true` and `abs_error` are empty when no ground truth applies to
//! the row. A failed solve is marked by `NaN` in `theta_hat`. `wall_time`
//! is in seconds and is the only column expected to vary between runs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rollfit_core::error::{Error, Result};
use rollfit_core::io::{load_disparity, MapFormat};
use rollfit_core::solver::{self, Method, SolverConfig};
use rollfit_core::{generate_synthetic, PixelSample, SyntheticRoadSpec};

/// Fixed benchmark CSV header.
pub const CSV_HEADER: &str =
    "method,delta_theta,lambda0,iterations,energy_evals,gradient_evals,theta_hat,theta_true,abs_error,wall_time";

/// The tolerance schedule benchmarks default to, in radians:
/// 0.1, 0.01, 0.001 and 0.0001 degrees.
pub const TOLERANCE_SCHEDULE: [f64; 4] =
    [PI / 1.8e3, PI / 1.8e4, PI / 1.8e5, PI / 1.8e6];

/// Default learning-rate sweep: one point per decade. The useful rate scales
/// inversely with the energy's curvature, which grows rapidly with map size,
/// so the sweep covers many decades.
pub fn default_lambda_grid() -> Vec<f64> {
    (-14..=2).map(|e| 10.0_f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    ItersVsDelta,
    LambdaSweep,
    AccuracyVsDelta,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::ItersVsDelta => "iters_vs_delta",
            Protocol::LambdaSweep => "lambda_sweep",
            Protocol::AccuracyVsDelta => "accuracy_vs_delta",
        }
    }
}

/// One CSV row. Aggregated protocols average counts and timings over items,
/// so the count columns are fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: &'static str,
    pub delta_theta: f64,
    pub lambda0: f64,
    pub iterations: f64,
    pub energy_evals: f64,
    pub gradient_evals: f64,
    /// Estimated angle; `NaN` marks a failed solve.
    pub theta_hat: f64,
    pub theta_true: Option<f64>,
    pub abs_error: Option<f64>,
    /// Mean seconds per solve.
    pub wall_time: f64,
}

/// A family of synthetic scenes: `frames` independent noise draws for each
/// ground-truth roll.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSweep {
    pub width: usize,
    pub height: usize,
    pub alpha: [f64; 3],
    pub rolls: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub frames: usize,
}

/// What a protocol runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchInput {
    Synth(SynthSweep),
    /// Disparity map files; no ground truth.
    Dataset { paths: Vec<PathBuf>, scale: f64 },
}

struct BenchItem {
    samples: Vec<PixelSample>,
    theta_true: Option<f64>,
}

impl BenchInput {
    fn items(&self) -> Result<Vec<BenchItem>> {
        match self {
            BenchInput::Synth(sweep) => {
                if sweep.rolls.is_empty() || sweep.frames == 0 {
                    return Err(Error::InvalidArgument(
                        "synthetic sweep needs at least one roll and one frame".into(),
                    ));
                }
                let mut items = Vec::with_capacity(sweep.rolls.len() * sweep.frames);
                for &roll in &sweep.rolls {
                    for _frame in 0..sweep.frames {
                        // Each (roll, frame) pair draws fresh noise.
                        let spec = SyntheticRoadSpec {
                            width: sweep.width,
                            height: sweep.height,
                            alpha: sweep.alpha,
                            true_roll: roll,
                            noise_sigma: sweep.sigma,
                            seed: sweep.seed.wrapping_add(items.len() as u64),
                        };
                        let map = generate_synthetic(&spec)?;
                        items.push(BenchItem {
                            samples: map.samples(None)?,
                            theta_true: Some(roll),
                        });
                    }
                }
                Ok(items)
            }
            BenchInput::Dataset { paths, scale } => {
                if paths.is_empty() {
                    return Err(Error::InvalidArgument("dataset contains no map files".into()));
                }
                paths
                    .iter()
                    .map(|path| {
                        let format = MapFormat::from_path(path).ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "unrecognized map extension: {}",
                                path.display()
                            ))
                        })?;
                        let map = load_disparity(path, format, *scale)?;
                        Ok(BenchItem { samples: map.samples(None)?, theta_true: None })
                    })
                    .collect()
            }
        }
    }
}

/// Protocol knobs shared across cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub delta_thetas: Vec<f64>,
    /// Learning rate used by gradient descent outside the sweep protocol.
    pub lambda0: f64,
    /// Learning rates tried by `lambda_sweep`.
    pub lambda_grid: Vec<f64>,
    pub max_iters: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            delta_thetas: TOLERANCE_SCHEDULE.to_vec(),
            lambda0: solver::DEFAULT_LAMBDA0,
            lambda_grid: default_lambda_grid(),
            max_iters: 100,
        }
    }
}

/// Absolute angular estimation error, accounting for the energy's period:
/// the difference is mapped into `(-pi/2, pi/2]` before taking its
/// magnitude.
pub fn roll_abs_error(theta_hat: f64, theta_true: f64) -> f64 {
    let r = (theta_hat - theta_true).rem_euclid(PI);
    if r > FRAC_PI_2 {
        (r - PI).abs()
    } else {
        r
    }
}

fn cell_config(method: Method, delta_theta: f64, lambda0: f64, opts: &BenchOptions) -> SolverConfig {
    SolverConfig {
        method,
        delta_theta,
        lambda0,
        max_iters: opts.max_iters,
        ..SolverConfig::default()
    }
}

struct SolveOutcome {
    iterations: f64,
    energy_evals: f64,
    gradient_evals: f64,
    theta_hat: f64,
    wall_time: f64,
}

fn timed_solve(item: &BenchItem, config: &SolverConfig) -> SolveOutcome {
    let start = Instant::now();
    let result = solver::solve(&item.samples, config);
    let wall_time = start.elapsed().as_secs_f64();
    match result {
        Ok(report) => SolveOutcome {
            iterations: report.iterations as f64,
            energy_evals: report.energy_evals as f64,
            gradient_evals: report.gradient_evals as f64,
            theta_hat: report.theta_hat,
            wall_time,
        },
        Err(_) => SolveOutcome {
            iterations: 0.0,
            energy_evals: 0.0,
            gradient_evals: 0.0,
            theta_hat: f64::NAN,
            wall_time,
        },
    }
}

/// Runs one (method, tolerance, rate) cell over all items and averages.
/// Items whose solve fails are left out of the averages; if every item
/// fails the row's `theta_hat` is `NaN`. Ground truth is reported only when
/// all items share one true roll.
fn aggregate_cell(items: &[BenchItem], config: &SolverConfig) -> BenchRow {
    let mut ok = 0_usize;
    let mut sums = SolveOutcome {
        iterations: 0.0,
        energy_evals: 0.0,
        gradient_evals: 0.0,
        theta_hat: 0.0,
        wall_time: 0.0,
    };
    let mut err_sum = 0.0;
    let mut have_truth = true;
    let shared_truth = match items[0].theta_true {
        Some(t) if items.iter().all(|i| i.theta_true == Some(t)) => Some(t),
        _ => None,
    };

    for item in items {
        let outcome = timed_solve(item, config);
        sums.wall_time += outcome.wall_time;
        if !outcome.theta_hat.is_finite() {
            continue;
        }
        ok += 1;
        sums.iterations += outcome.iterations;
        sums.energy_evals += outcome.energy_evals;
        sums.gradient_evals += outcome.gradient_evals;
        sums.theta_hat += outcome.theta_hat;
        match item.theta_true {
            Some(t) => err_sum += roll_abs_error(outcome.theta_hat, t),
            None => have_truth = false,
        }
    }

    let n = ok as f64;
    let succeeded = ok > 0;
    BenchRow {
        method: config.method.name(),
        delta_theta: config.delta_theta,
        lambda0: config.lambda0,
        iterations: if succeeded { sums.iterations / n } else { 0.0 },
        energy_evals: if succeeded { sums.energy_evals / n } else { 0.0 },
        gradient_evals: if succeeded { sums.gradient_evals / n } else { 0.0 },
        theta_hat: if succeeded { sums.theta_hat / n } else { f64::NAN },
        theta_true: if succeeded && have_truth { shared_truth } else { None },
        abs_error: if succeeded && have_truth && shared_truth.is_some() {
            Some(err_sum / n)
        } else {
            None
        },
        wall_time: sums.wall_time / items.len() as f64,
    }
}

/// One row per item (no averaging), for protocols that report per-scene
/// accuracy.
fn per_item_rows(items: &[BenchItem], config: &SolverConfig, rows: &mut Vec<BenchRow>) {
    for item in items {
        let outcome = timed_solve(item, config);
        let succeeded = outcome.theta_hat.is_finite();
        let abs_error = match (succeeded, item.theta_true) {
            (true, Some(t)) => Some(roll_abs_error(outcome.theta_hat, t)),
            _ => None,
        };
        rows.push(BenchRow {
            method: config.method.name(),
            delta_theta: config.delta_theta,
            lambda0: config.lambda0,
            iterations: outcome.iterations,
            energy_evals: outcome.energy_evals,
            gradient_evals: outcome.gradient_evals,
            theta_hat: outcome.theta_hat,
            theta_true: if succeeded { item.theta_true } else { None },
            abs_error,
            wall_time: outcome.wall_time,
        });
    }
}

/// Runs `protocol` and returns its rows.
pub fn run_protocol(
    protocol: Protocol,
    input: &BenchInput,
    opts: &BenchOptions,
) -> Result<Vec<BenchRow>> {
    if opts.delta_thetas.is_empty() {
        return Err(Error::InvalidArgument("no tolerances to benchmark".into()));
    }
    let items = input.items()?;
    let mut rows = Vec::new();
    match protocol {
        Protocol::ItersVsDelta => {
            for &delta in &opts.delta_thetas {
                for method in [Method::GoldenSection, Method::GradientDescent] {
                    let config = cell_config(method, delta, opts.lambda0, opts);
                    rows.push(aggregate_cell(&items, &config));
                }
            }
        }
        Protocol::LambdaSweep => {
            if opts.lambda_grid.is_empty() {
                return Err(Error::InvalidArgument("empty learning-rate grid".into()));
            }
            for &delta in &opts.delta_thetas {
                for &lambda in &opts.lambda_grid {
                    let config = cell_config(Method::GradientDescent, delta, lambda, opts);
                    rows.push(aggregate_cell(&items, &config));
                }
            }
        }
        Protocol::AccuracyVsDelta => {
            if matches!(input, BenchInput::Dataset { .. }) {
                return Err(Error::InvalidArgument(
                    "accuracy_vs_delta needs synthetic input with known ground truth".into(),
                ));
            }
            for &delta in &opts.delta_thetas {
                for method in
                    [Method::GradientDescent, Method::GoldenSection, Method::PlaneFit]
                {
                    let config = cell_config(method, delta, opts.lambda0, opts);
                    per_item_rows(&items, &config, &mut rows);
                }
            }
        }
    }
    Ok(rows)
}

/// Cheapest accurate learning rate from `lambda_sweep` rows: among
/// gradient-descent rows whose mean error is within their own tolerance,
/// the one with the fewest iterations. Iteration ties go to the larger
/// rate: the smallest accurate rate sits right at the premature-stop
/// cliff, where the first step barely clears the convergence threshold,
/// and fails on scenes with slightly weaker gradients. `None` if no row
/// qualifies.
pub fn tune_lambda0(rows: &[BenchRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.method == "gd" && r.theta_hat.is_finite())
        .filter(|r| r.abs_error.is_some_and(|e| e <= r.delta_theta))
        .min_by(|a, b| {
            (a.iterations, b.lambda0)
                .partial_cmp(&(b.iterations, a.lambda0))
                .expect("finite sort keys")
        })
        .map(|r| r.lambda0)
}

/// True if at least one row carries a finished estimate.
pub fn any_succeeded(rows: &[BenchRow]) -> bool {
    rows.iter().any(|r| r.theta_hat.is_finite())
}

fn push_opt(line: &mut String, value: Option<f64>) {
    line.push(',');
    if let Some(v) = value {
        line.push_str(&format!("{v}"));
    }
}

/// Writes rows in the fixed schema.
pub fn write_csv<W: Write>(w: &mut W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            r.method,
            r.delta_theta,
            r.lambda0,
            r.iterations,
            r.energy_evals,
            r.gradient_evals,
            r.theta_hat
        );
        push_opt(&mut line, r.theta_true);
        push_opt(&mut line, r.abs_error);
        line.push_str(&format!(",{}", r.wall_time));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

//! `rollfit` — estimate stereo-rig roll angle from dense disparity maps.
//!
//! Exit codes: 0 success (estimate converged), 1 estimate finished without
//! converging, 2 file/format/argument problems, 3 degenerate input geometry.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rollfit_cli::bench::{
    self, any_succeeded, BenchInput, BenchOptions, Protocol, SynthSweep,
};
use rollfit_core::error::{Error, Result};
use rollfit_core::geometry::rotate_map;
use rollfit_core::io::{load_disparity, load_mask, save_disparity, MapFormat};
use rollfit_core::solver::{Method, SolverConfig, SolverReport, Termination, DEFAULT_DELTA_THETA};
use rollfit_core::{generate_synthetic, solve, DisparityMap, SyntheticRoadSpec};

#[derive(Parser)]
#[command(
    name = "rollfit",
    version,
    about = "Estimate stereo-rig roll angle from dense disparity maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the roll angle of a disparity map
    Estimate(EstimateArgs),
    /// Render a synthetic road disparity map
    Synth(SynthArgs),
    /// Rotate a disparity map by a fixed angle
    Rotate(RotateArgs),
    /// Run a benchmark protocol and write its CSV report
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Gradient descent with the adaptive learning rate
    Gd,
    /// Golden-section search
    Gss,
    /// Exhaustive grid scan
    Grid,
    /// Plane-fit baseline
    Plane,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gd => Method::GradientDescent,
            MethodArg::Gss => Method::GoldenSection,
            MethodArg::Grid => Method::GridScan,
            MethodArg::Plane => Method::PlaneFit,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    #[value(name = "iters_vs_delta")]
    ItersVsDelta,
    #[value(name = "lambda_sweep")]
    LambdaSweep,
    #[value(name = "accuracy_vs_delta")]
    AccuracyVsDelta,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::ItersVsDelta => Protocol::ItersVsDelta,
            ProtocolArg::LambdaSweep => Protocol::LambdaSweep,
            ProtocolArg::AccuracyVsDelta => Protocol::AccuracyVsDelta,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Disparity map (.pgm 16-bit or .csv)
    #[arg(long)]
    map: PathBuf,
    /// Inclusion mask (8-bit PGM; zero excludes a cell)
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Convergence tolerance on the angle [default: pi/18000 rad]
    #[arg(long)]
    delta_theta: Option<f64>,
    /// Initial learning rate (gd)
    #[arg(long, default_value_t = 26.0, allow_hyphen_values = true)]
    lambda0: f64,
    /// Starting angle (gd) [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    /// Iteration cap (gd, gss)
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Lower end of the search interval [default: -pi/2]
    #[arg(long, allow_hyphen_values = true)]
    theta_lo: Option<f64>,
    /// Upper end of the search interval [default: pi/2]
    #[arg(long, allow_hyphen_values = true)]
    theta_hi: Option<f64>,
    /// Grid spacing (grid) [default: 1e-4 rad]
    #[arg(long)]
    grid_step: Option<f64>,
    /// pgm16 raw-to-disparity divisor
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Write the iterate trace to this CSV file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Interpret angle arguments as degrees
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Grid size as WIDTHxHEIGHT
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Disparity profile coefficients a0,a1,a2
    #[arg(long, value_parser = parse_alpha)]
    alpha: [f64; 3],
    /// Ground-truth roll angle
    #[arg(long, allow_hyphen_values = true)]
    roll: f64,
    /// Additive Gaussian noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (.pgm or .csv)
    #[arg(long)]
    out: PathBuf,
    /// pgm16 disparity-to-raw multiplier
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Interpret angle arguments as degrees
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct RotateArgs {
    /// Disparity map (.pgm 16-bit or .csv)
    #[arg(long)]
    map: PathBuf,
    /// Rotation angle, in (-pi/2, pi/2]
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Output path (.pgm or .csv)
    #[arg(long)]
    out: PathBuf,
    /// pgm16 disparity scale divisor/multiplier
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Interpret angle arguments as degrees
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Directory of .pgm/.csv maps to benchmark on (no ground truth)
    #[arg(long, conflicts_with_all = ["rolls", "sigma", "seed", "frames"])]
    dataset: Option<PathBuf>,
    /// Synthetic grid size as WIDTHxHEIGHT
    #[arg(long, value_parser = parse_size, default_value = "120x90")]
    size: (usize, usize),
    /// Synthetic profile coefficients a0,a1,a2
    #[arg(long, value_parser = parse_alpha, default_value = "2,0.5,0.01")]
    alpha: [f64; 3],
    /// Comma-separated ground-truth rolls
    /// [default: 0.03; accuracy_vs_delta: +/-0.02,0.05,0.1]
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    rolls: Option<F64List>,
    /// Synthetic noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Base noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise draws per roll [default: 1; accuracy_vs_delta: 10]
    #[arg(long)]
    frames: Option<usize>,
    /// Comma-separated tolerance schedule [default: four decades from
    /// pi/1800 down to pi/1800000]
    #[arg(long, value_parser = parse_f64_list)]
    delta_thetas: Option<F64List>,
    /// Learning rate for gradient descent outside lambda_sweep
    #[arg(long, default_value_t = 26.0)]
    lambda0: f64,
    /// Comma-separated learning rates for lambda_sweep
    /// [default: decades 1e-14 through 1e2]
    #[arg(long, value_parser = parse_f64_list)]
    lambda_grid: Option<F64List>,
    /// Iteration cap per solve
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// pgm16 raw-to-disparity divisor for dataset maps
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output CSV path, or '-' for stdout
    #[arg(long)]
    out: PathBuf,
    /// Interpret angle arguments as degrees
    #[arg(long)]
    degrees: bool,
}

#[derive(Clone)]
struct F64List(Vec<f64>);

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("invalid dimension '{t}'"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_alpha(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three coefficients a0,a1,a2, got '{s}'"));
    }
    let mut alpha = [0.0; 3];
    for (slot, part) in alpha.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid coefficient '{part}'"))?;
    }
    Ok(alpha)
}

fn parse_f64_list(s: &str) -> std::result::Result<F64List, String> {
    let values: std::result::Result<Vec<f64>, String> = s
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number '{part}'"))
        })
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err("expected at least one number".into());
    }
    Ok(F64List(values))
}

/// Print one line of results to stdout. A consumer that stops reading
/// (`rollfit ... | head -1`) closes the pipe; treat that as a normal exit
/// instead of panicking like `println!` would.
fn emit(line: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_fmt(line).and_then(|()| out.write_all(b"\n")) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}

/// Angle flags arrive in degrees when --degrees is set; solver code wants
/// radians.
fn to_rad(value: f64, degrees: bool) -> f64 {
    if degrees {
        value.to_radians()
    } else {
        value
    }
}

fn angle_or(opt: Option<f64>, default_rad: f64, degrees: bool) -> f64 {
    opt.map(|v| to_rad(v, degrees)).unwrap_or(default_rad)
}

fn format_for(path: &Path) -> Result<MapFormat> {
    MapFormat::from_path(path).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cannot infer map format from '{}' (expected .pgm or .csv)",
            path.display()
        ))
    })
}

fn load_map(path: &Path, scale: f64) -> Result<DisparityMap> {
    load_disparity(path, format_for(path)?, scale)
}

fn write_trace(report: &SolverReport, path: &Path) -> Result<()> {
    let mut out = String::from("k,theta,e_min,grad,lambda\n");
    for rec in &report.trace {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.k,
            rec.theta,
            rec.e_min,
            opt(rec.grad),
            opt(rec.lambda)
        ));
    }
    fs::write(path, out).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn run_estimate(args: EstimateArgs) -> Result<u8> {
    let map = load_map(&args.map, args.scale)?;
    let mask = args.mask.as_deref().map(load_mask).transpose()?;
    let samples = map.samples(mask.as_ref())?;

    let config = SolverConfig {
        method: args.method.into(),
        delta_theta: angle_or(args.delta_theta, DEFAULT_DELTA_THETA, args.degrees),
        lambda0: args.lambda0,
        theta0: angle_or(args.theta0, 0.0, args.degrees),
        theta_lo: angle_or(args.theta_lo, -FRAC_PI_2, args.degrees),
        theta_hi: angle_or(args.theta_hi, FRAC_PI_2, args.degrees),
        max_iters: args.max_iters,
        grid_step: angle_or(args.grid_step, 1e-4, args.degrees),
    };
    let report = solve(&samples, &config)?;

    emit(format_args!("theta_hat_rad: {:.6}", report.theta_hat));
    emit(format_args!("theta_hat_deg: {:.6}", report.theta_hat.to_degrees()));
    emit(format_args!("iterations: {}", report.iterations));
    emit(format_args!("energy_evals: {}", report.energy_evals));
    emit(format_args!("gradient_evals: {}", report.gradient_evals));
    emit(format_args!("termination: {}", report.termination));

    if let Some(path) = &args.trace {
        write_trace(&report, path)?;
    }
    Ok(match report.termination {
        Termination::Converged | Termination::IntervalCollapsed => 0,
        Termination::MaxIters | Termination::DegenerateLambda => 1,
    })
}

fn run_synth(args: SynthArgs) -> Result<u8> {
    let spec = SyntheticRoadSpec {
        width: args.size.0,
        height: args.size.1,
        alpha: args.alpha,
        true_roll: to_rad(args.roll, args.degrees),
        noise_sigma: args.sigma,
        seed: args.seed,
    };
    let map = generate_synthetic(&spec)?;
    save_disparity(&map, &args.out, format_for(&args.out)?, args.scale)?;
    emit(format_args!("wrote: {}", args.out.display()));
    emit(format_args!("size: {}x{}", map.width(), map.height()));
    emit(format_args!("valid_cells: {}", map.valid_count()));
    emit(format_args!("true_roll_rad: {:.6}", spec.true_roll));
    emit(format_args!("true_roll_deg: {:.6}", spec.true_roll.to_degrees()));
    Ok(0)
}

fn run_rotate(args: RotateArgs) -> Result<u8> {
    let theta = to_rad(args.theta, args.degrees);
    if !(theta > -FRAC_PI_2 && theta <= FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "rotation angle {theta} outside (-pi/2, pi/2]"
        )));
    }
    let map = load_map(&args.map, args.scale)?;
    let rotated = rotate_map(&map, theta);
    save_disparity(&rotated, &args.out, format_for(&args.out)?, args.scale)?;
    emit(format_args!("wrote: {}", args.out.display()));
    emit(format_args!("valid_cells: {}", rotated.valid_count()));
    Ok(0)
}

fn dataset_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| MapFormat::from_path(p).is_some())
        .collect();
    paths.sort();
    Ok(paths)
}

fn run_bench(args: BenchArgs) -> Result<u8> {
    let protocol: Protocol = args.protocol.into();
    let degrees = args.degrees;

    let input = match &args.dataset {
        Some(dir) => BenchInput::Dataset { paths: dataset_paths(dir)?, scale: args.scale },
        None => {
            let rolls = match &args.rolls {
                Some(list) => list.0.iter().map(|&r| to_rad(r, degrees)).collect(),
                None if protocol == Protocol::AccuracyVsDelta => {
                    vec![-0.1, -0.05, -0.02, 0.02, 0.05, 0.1]
                }
                None => vec![0.03],
            };
            let frames = args.frames.unwrap_or(match protocol {
                Protocol::AccuracyVsDelta => 10,
                _ => 1,
            });
            BenchInput::Synth(SynthSweep {
                width: args.size.0,
                height: args.size.1,
                alpha: args.alpha,
                rolls,
                sigma: args.sigma,
                seed: args.seed,
                frames,
            })
        }
    };

    let opts = BenchOptions {
        delta_thetas: match &args.delta_thetas {
            Some(list) => list.0.iter().map(|&d| to_rad(d, degrees)).collect(),
            None => bench::TOLERANCE_SCHEDULE.to_vec(),
        },
        lambda0: args.lambda0,
        lambda_grid: match &args.lambda_grid {
            Some(list) => list.0.clone(),
            None => bench::default_lambda_grid(),
        },
        max_iters: args.max_iters,
    };

    let rows = bench::run_protocol(protocol, &input, &opts)?;
    if args.out == Path::new("-") {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        if let Err(e) = bench::write_csv(&mut lock, &rows).and_then(|()| lock.flush()) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(Error::Io { path: PathBuf::from("-"), source: e });
        }
    } else {
        let mut buf = Vec::new();
        bench::write_csv(&mut buf, &rows).expect("write to vec");
        fs::write(&args.out, buf)
            .map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
        eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    }

    let failures = rows.iter().filter(|r| !r.theta_hat.is_finite()).count();
    if failures > 0 {
        eprintln!("{failures} of {} cells failed", rows.len());
    }
    Ok(if any_succeeded(&rows) { 0 } else { 1 })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::EmptyMap
        | Error::ShapeMismatch { .. }
        | Error::InvalidArgument(_) => 2,
        Error::InsufficientData { .. }
        | Error::DegenerateGeometry { .. }
        | Error::VerticalGradient => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => run_estimate(args),
        Command::Synth(args) => run_synth(args),
        Command::Rotate(args) => run_rotate(args),
        Command::Bench(args) => run_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

//! Roll-angle solvers.
//!
//! Four ways to minimize the fit energy over the roll angle:
//!
//! * **gradient descent** with a secant-style adaptive learning rate — the
//!   rate for the next step is `lambda * g / (g - g_next)`, i.e. the step a
//!   secant model of the gradient would have taken to reach its root;
//! * **golden-section search** over the angle interval;
//! * **grid scan** at fixed spacing (slow but assumption-free);
//! * **plane fit**, a closed-form baseline that fits
//!   `d ~ c0 + c1*u + c2*v` and reads the roll off the gradient direction
//!   as `atan(-c1/c2)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::disparity::PixelSample;
use crate::energy;
use crate::error::{Error, Result};
use crate::exec;

/// Inverse golden ratio `(sqrt(5) - 1) / 2`, the bracket shrink factor of
/// golden-section search.
pub const INVPHI: f64 = 0.618_033_988_749_894_9;

/// Default convergence tolerance on the roll angle, in radians (0.01 degree).
pub const DEFAULT_DELTA_THETA: f64 = std::f64::consts::PI / 1.8e4;

/// Default initial learning rate for gradient descent.
pub const DEFAULT_LAMBDA0: f64 = 26.0;

/// A secant learning-rate update whose denominator magnitude falls below
/// this is considered degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-30;

/// Plane fits whose vertical disparity gradient `|c2|` falls below this
/// leave the roll angle undefined.
pub const VERTICAL_GRADIENT_LIMIT: f64 = 1e-12;

/// Cap on the number of grid-scan evaluations.
const MAX_GRID_POINTS: usize = 100_000_000;

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GradientDescent,
    GoldenSection,
    GridScan,
    PlaneFit,
}

impl Method {
    /// Short name used in CLI flags and benchmark output.
    pub fn name(self) -> &'static str {
        match self {
            Method::GradientDescent => "gd",
            Method::GoldenSection => "gss",
            Method::GridScan => "grid",
            Method::PlaneFit => "plane",
        }
    }
}

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The angle step (gradient descent) or bracket width (golden section)
    /// fell below `delta_theta`; grid scan and plane fit always finish here.
    Converged,
    /// The iteration cap was hit first.
    MaxIters,
    /// The learning-rate update denominator vanished.
    DegenerateLambda,
    /// The search interval was already narrower than `delta_theta`.
    IntervalCollapsed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::DegenerateLambda => "degenerate_lambda",
            Termination::IntervalCollapsed => "interval_collapsed",
        })
    }
}

/// Solver parameters. Defaults: gradient descent from `theta0 = 0` with
/// `lambda0 = 26`, tolerance 0.01 degree, on the interval
/// `[-pi/2, pi/2]`, at most 100 iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Convergence tolerance on the angle, radians.
    pub delta_theta: f64,
    /// Initial learning rate (gradient descent only).
    pub lambda0: f64,
    /// Initial iterate (gradient descent only).
    pub theta0: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Iteration cap for gradient descent and golden section.
    pub max_iters: usize,
    /// Grid spacing in radians (grid scan only).
    pub grid_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::GradientDescent,
            delta_theta: DEFAULT_DELTA_THETA,
            lambda0: DEFAULT_LAMBDA0,
            theta0: 0.0,
            theta_lo: -FRAC_PI_2,
            theta_hi: FRAC_PI_2,
            max_iters: 100,
            grid_step: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.delta_theta > 0.0 && self.delta_theta.is_finite()) {
            return bad(format!("delta_theta must be positive and finite, got {}", self.delta_theta));
        }
        if !(self.lambda0.is_finite() && self.lambda0 != 0.0) {
            return bad(format!("lambda0 must be finite and non-zero, got {}", self.lambda0));
        }
        if !(self.theta_lo.is_finite() && self.theta_hi.is_finite() && self.theta_lo < self.theta_hi)
        {
            return bad(format!(
                "need theta_lo < theta_hi, got [{}, {}]",
                self.theta_lo, self.theta_hi
            ));
        }
        if !(self.theta0 >= self.theta_lo && self.theta0 <= self.theta_hi) {
            return bad(format!(
                "theta0 {} outside [{}, {}]",
                self.theta0, self.theta_lo, self.theta_hi
            ));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return bad(format!("grid_step must be positive and finite, got {}", self.grid_step));
        }
        Ok(())
    }
}

/// One point a solver evaluated. For gradient descent there is one record
/// per iterate, `lambda` holding the learning rate used to step away from it
/// (`None` on the final iterate). For golden section and grid scan there is
/// one record per energy evaluation, with `grad` and `lambda` unset.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub theta: f64,
    pub e_min: f64,
    pub grad: Option<f64>,
    pub lambda: Option<f64>,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub method: Method,
    /// Estimated roll angle, radians.
    pub theta_hat: f64,
    /// Angle updates (gradient descent), bracket reductions (golden
    /// section), or points evaluated (grid scan); zero for plane fit.
    pub iterations: usize,
    pub energy_evals: usize,
    pub gradient_evals: usize,
    pub termination: Termination,
    pub trace: Vec<IterateRecord>,
}

/// Runs the method selected by `config.method`.
pub fn solve(samples: &[PixelSample], config: &SolverConfig) -> Result<SolverReport> {
    match config.method {
        Method::GradientDescent => solve_gd(samples, config),
        Method::GoldenSection => solve_gss(samples, config),
        Method::GridScan => solve_grid(samples, config),
        Method::PlaneFit => solve_plane(samples),
    }
}

/// Secant update of the learning rate; `None` when the gradient difference
/// is too small to divide by.
fn next_lambda(lambda: f64, g: f64, g_next: f64) -> Option<f64> {
    let denom = g - g_next;
    (denom.abs() >= DEGENERATE_DENOMINATOR).then(|| lambda * g / denom)
}

/// Among the recorded iterates, the angle of the lowest-energy one
/// (earliest wins ties). Used when a solver stops without converging.
fn best_recorded(trace: &[IterateRecord]) -> f64 {
    let mut best = &trace[0];
    for rec in &trace[1..] {
        if rec.e_min < best.e_min {
            best = rec;
        }
    }
    best.theta
}

/// Gradient descent on the fit energy with the adaptive learning rate.
/// Iterates clamp to `[theta_lo, theta_hi]`. Converges when an angle update
/// moves less than `delta_theta`; the convergence check runs before the
/// learning-rate update so a vanishing initial gradient converges instead
/// of dividing by zero.
pub fn solve_gd(samples: &[PixelSample], config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let clamp = |t: f64| t.clamp(config.theta_lo, config.theta_hi);

    let mut trace: Vec<IterateRecord> = Vec::new();
    let mut evals = 0_usize;
    let eval = |theta: f64, evals: &mut usize| -> Result<(f64, f64)> {
        let (fit, grad) = energy::fit_with_gradient(samples, theta)?;
        *evals += 1;
        Ok((fit.e_min, grad))
    };

    let mut theta = clamp(config.theta0);
    let (mut e, mut g) = eval(theta, &mut evals)?;
    let mut lambda = config.lambda0;
    let mut k = 0_usize;

    let termination = loop {
        if k == config.max_iters {
            trace.push(IterateRecord { k, theta, e_min: e, grad: Some(g), lambda: None });
            break Termination::MaxIters;
        }
        let theta_next = clamp(theta - lambda * g);
        if !theta_next.is_finite() {
            trace.push(IterateRecord { k, theta, e_min: e, grad: Some(g), lambda: None });
            break Termination::DegenerateLambda;
        }
        trace.push(IterateRecord { k, theta, e_min: e, grad: Some(g), lambda: Some(lambda) });
        let (e_next, g_next) = eval(theta_next, &mut evals)?;
        k += 1;

        if (theta_next - theta).abs() < config.delta_theta {
            trace.push(IterateRecord {
                k,
                theta: theta_next,
                e_min: e_next,
                grad: Some(g_next),
                lambda: None,
            });
            break Termination::Converged;
        }
        match next_lambda(lambda, g, g_next) {
            Some(l) => lambda = l,
            None => {
                trace.push(IterateRecord {
                    k,
                    theta: theta_next,
                    e_min: e_next,
                    grad: Some(g_next),
                    lambda: None,
                });
                break Termination::DegenerateLambda;
            }
        }
        theta = theta_next;
        e = e_next;
        g = g_next;
    };

    let theta_hat = match termination {
        Termination::Converged => trace.last().expect("non-empty trace").theta,
        _ => best_recorded(&trace),
    };
    Ok(SolverReport {
        method: Method::GradientDescent,
        theta_hat,
        iterations: k,
        energy_evals: evals,
        gradient_evals: evals,
        termination,
        trace,
    })
}

/// Golden-section search over `[theta_lo, theta_hi]`. Each bracket
/// reduction reuses one interior point and evaluates one fresh probe, so a
/// run costs 2 evaluations up front plus 1 per iteration. Stops when the
/// bracket is narrower than `delta_theta` and reports the bracket midpoint.
pub fn solve_gss(samples: &[PixelSample], config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let (mut a, mut b) = (config.theta_lo, config.theta_hi);
    let mut trace: Vec<IterateRecord> = Vec::new();
    let mut evals = 0_usize;
    let probe = |theta: f64, trace: &mut Vec<IterateRecord>, evals: &mut usize| -> Result<f64> {
        let e = energy::e_min(samples, theta)?;
        trace.push(IterateRecord { k: *evals, theta, e_min: e, grad: None, lambda: None });
        *evals += 1;
        Ok(e)
    };

    if b - a < config.delta_theta {
        let mid = 0.5 * (a + b);
        probe(mid, &mut trace, &mut evals)?;
        return Ok(SolverReport {
            method: Method::GoldenSection,
            theta_hat: mid,
            iterations: 0,
            energy_evals: evals,
            gradient_evals: 0,
            termination: Termination::IntervalCollapsed,
            trace,
        });
    }

    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = probe(x1, &mut trace, &mut evals)?;
    let mut f2 = probe(x2, &mut trace, &mut evals)?;
    let mut k = 0_usize;

    let termination = loop {
        if b - a < config.delta_theta {
            break Termination::Converged;
        }
        if k == config.max_iters {
            break Termination::MaxIters;
        }
        if f1 < f2 {
            // Minimum bracketed in [a, x2]: x1 becomes the upper probe.
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = probe(x1, &mut trace, &mut evals)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = probe(x2, &mut trace, &mut evals)?;
        }
        k += 1;
    };

    let theta_hat = match termination {
        Termination::MaxIters => best_recorded(&trace),
        _ => 0.5 * (a + b),
    };
    Ok(SolverReport {
        method: Method::GoldenSection,
        theta_hat,
        iterations: k,
        energy_evals: evals,
        gradient_evals: 0,
        termination,
        trace,
    })
}

/// Predicted golden-section iteration count for bracketing an interval of
/// `width` down to `tol`: the smallest `n` with `width * INVPHI^n < tol`.
pub fn predicted_gss_iterations(width: f64, tol: f64) -> usize {
    if !(width > tol) {
        return 0;
    }
    ((tol / width).ln() / INVPHI.ln()).ceil() as usize
}

/// Exhaustive scan of `[theta_lo, theta_hi]` at `grid_step` spacing,
/// endpoints included. Ties go to the smaller angle. `iterations` reports
/// the number of points evaluated.
pub fn solve_grid(samples: &[PixelSample], config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let (lo, hi) = (config.theta_lo, config.theta_hi);
    let span = hi - lo;
    let n = (span / config.grid_step).floor() as usize;
    if n >= MAX_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "grid_step {} over [{lo}, {hi}] needs more than {MAX_GRID_POINTS} evaluations",
            config.grid_step
        )));
    }
    let mut points: Vec<f64> = (0..=n).map(|k| (lo + k as f64 * config.grid_step).min(hi)).collect();
    if *points.last().expect("at least one point") < hi {
        points.push(hi);
    }

    let mut trace = Vec::with_capacity(points.len());
    let mut best: Option<(f64, f64)> = None; // (e, theta)
    for (k, &theta) in points.iter().enumerate() {
        let e = energy::e_min(samples, theta)?;
        trace.push(IterateRecord { k, theta, e_min: e, grad: None, lambda: None });
        if best.map_or(true, |(be, _)| e < be) {
            best = Some((e, theta));
        }
    }
    let (_, theta_hat) = best.expect("grid has at least one point");
    Ok(SolverReport {
        method: Method::GridScan,
        theta_hat,
        iterations: points.len(),
        energy_evals: points.len(),
        gradient_evals: 0,
        termination: Termination::Converged,
        trace,
    })
}

/// Closed-form plane-fit baseline: least-squares `d ~ c0 + c1*u + c2*v`,
/// roll angle `atan(-c1/c2)`. Errors with a vertical-gradient failure when
/// `|c2| < 1e-12`, and with degenerate geometry when the samples do not
/// span a plane (e.g. a single row or column).
pub fn solve_plane(samples: &[PixelSample]) -> Result<SolverReport> {
    if samples.len() < energy::MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: energy::MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let [sum_u, sum_v] = exec::accumulate(samples, |p, acc: &mut [f64; 2]| {
        acc[0] += p.u as f64;
        acc[1] += p.v as f64;
    });
    let (u_bar, v_bar) = (sum_u / n, sum_v / n);

    let [s1u, s1v, suu, suv, svv, b0, bu, bv] =
        exec::accumulate(samples, |p, acc: &mut [f64; 8]| {
            let zu = p.u as f64 - u_bar;
            let zv = p.v as f64 - v_bar;
            acc[0] += zu;
            acc[1] += zv;
            acc[2] += zu * zu;
            acc[3] += zu * zv;
            acc[4] += zv * zv;
            acc[5] += p.d;
            acc[6] += zu * p.d;
            acc[7] += zv * p.d;
        });

    let (coef, _condition) = energy::solve3(
        [[n, s1u, s1v], [s1u, suu, suv], [s1v, suv, svv]],
        [b0, bu, bv],
    )?;
    let (c1, c2) = (coef[1], coef[2]);
    if c2.abs() < VERTICAL_GRADIENT_LIMIT {
        return Err(Error::VerticalGradient);
    }
    let theta_hat = (-c1 / c2).atan();
    Ok(SolverReport {
        method: Method::PlaneFit,
        theta_hat,
        iterations: 0,
        energy_evals: 0,
        gradient_evals: 0,
        termination: Termination::Converged,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disparity::{generate_synthetic, DisparityMap, SyntheticRoadSpec};
    use std::f64::consts::PI;

    fn road_samples(width: usize, height: usize, roll: f64, sigma: f64) -> Vec<PixelSample> {
        let spec = SyntheticRoadSpec {
            width,
            height,
            alpha: [2.0, 0.5, 0.01],
            true_roll: roll,
            noise_sigma: sigma,
            seed: 5,
        };
        generate_synthetic(&spec).unwrap().samples(None).unwrap()
    }

    fn gd_config(lambda0: f64) -> SolverConfig {
        SolverConfig { method: Method::GradientDescent, lambda0, ..SolverConfig::default() }
    }

    #[test]
    fn invphi_is_the_inverse_golden_ratio() {
        assert_eq!(INVPHI, (5.0_f64.sqrt() - 1.0) / 2.0);
    }

    #[test]
    fn secant_lambda_update_arithmetic() {
        let l = next_lambda(26.0, 2e-6, 1e-6).unwrap();
        assert!((l - 52.0).abs() < 1e-9, "lambda = {l}");
        assert!(next_lambda(26.0, 1e-6, 1e-6).is_none());
        assert!(next_lambda(26.0, 0.0, 0.0).is_none());
        // Negative rates are passed through untouched.
        let l = next_lambda(1.0, 1.0, 3.0).unwrap();
        assert_eq!(l, -0.5);
    }

    #[test]
    fn gd_converges_immediately_at_a_noise_free_zero_roll() {
        let samples = road_samples(32, 24, 0.0, 0.0);
        let report = solve_gd(&samples, &SolverConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::Converged);
        assert_eq!(report.iterations, 1);
        // The gradient at the exact minimum is float noise, so the single
        // step taken is tiny but not exactly zero.
        assert!(report.theta_hat.abs() < 1e-6, "theta_hat = {}", report.theta_hat);
        assert_eq!(report.trace.len(), 2);
        assert_eq!(report.trace[0].lambda, Some(26.0));
        assert_eq!(report.trace[1].lambda, None);
    }

    #[test]
    fn gd_recovers_a_synthetic_roll() {
        let samples = road_samples(64, 48, 0.05, 0.0);
        let report = solve_gd(&samples, &gd_config(1e-8)).unwrap();
        assert_eq!(report.termination, Termination::Converged);
        assert!(
            (report.theta_hat - 0.05).abs() < DEFAULT_DELTA_THETA,
            "theta_hat = {}",
            report.theta_hat
        );
        assert!(report.iterations <= 20, "iterations = {}", report.iterations);
    }

    #[test]
    fn gd_bookkeeping_invariants() {
        let samples = road_samples(48, 36, 0.03, 0.2);
        let report = solve_gd(&samples, &gd_config(1e-9)).unwrap();
        // One fused evaluation per iterate.
        assert_eq!(report.energy_evals, report.iterations + 1);
        assert_eq!(report.gradient_evals, report.energy_evals);
        assert_eq!(report.trace.len(), report.iterations + 1);
        let (last, rest) = report.trace.split_last().unwrap();
        assert!(rest.iter().all(|r| r.lambda.is_some() && r.grad.is_some()));
        assert_eq!(last.lambda, None);
        assert_eq!(last.k, report.iterations);
    }

    #[test]
    fn gd_iteration_cap_reports_best_iterate() {
        let samples = road_samples(48, 36, 0.05, 0.0);
        // A hopeless learning rate slams into the interval bounds; the best
        // energy stays at the start.
        let config = SolverConfig { max_iters: 2, ..gd_config(50.0) };
        let report = solve_gd(&samples, &config).unwrap();
        assert_eq!(report.termination, Termination::MaxIters);
        assert_eq!(report.iterations, 2);
        let best = report
            .trace
            .iter()
            .min_by(|a, b| a.e_min.partial_cmp(&b.e_min).unwrap())
            .unwrap();
        assert_eq!(report.theta_hat, best.theta);
    }

    #[test]
    fn gss_iteration_count_follows_the_tolerance_schedule() {
        let samples = road_samples(20, 15, 0.02, 0.0);
        for (divisor, expected) in [(1.8e3, 16_usize), (1.8e4, 21), (1.8e5, 26), (1.8e6, 30)] {
            let config = SolverConfig {
                method: Method::GoldenSection,
                delta_theta: PI / divisor,
                ..SolverConfig::default()
            };
            let report = solve_gss(&samples, &config).unwrap();
            assert_eq!(report.iterations, expected, "divisor {divisor}");
            assert_eq!(report.iterations, predicted_gss_iterations(PI, config.delta_theta));
            assert_eq!(report.energy_evals, report.iterations + 2);
            assert_eq!(report.gradient_evals, 0);
            assert_eq!(report.termination, Termination::Converged);
        }
    }

    #[test]
    fn gss_recovers_a_synthetic_roll() {
        let samples = road_samples(64, 48, 0.05, 0.0);
        let config =
            SolverConfig { method: Method::GoldenSection, ..SolverConfig::default() };
        let report = solve_gss(&samples, &config).unwrap();
        assert!(
            (report.theta_hat - 0.05).abs() < config.delta_theta,
            "theta_hat = {}",
            report.theta_hat
        );
    }

    #[test]
    fn gss_collapsed_interval_returns_midpoint() {
        let samples = road_samples(20, 15, 0.0, 0.0);
        let config = SolverConfig {
            method: Method::GoldenSection,
            theta_lo: 0.0,
            theta_hi: 1e-9,
            theta0: 0.0,
            ..SolverConfig::default()
        };
        let report = solve_gss(&samples, &config).unwrap();
        assert_eq!(report.termination, Termination::IntervalCollapsed);
        assert_eq!(report.iterations, 0);
        assert!((report.theta_hat - 0.5e-9).abs() < 1e-15);
    }

    #[test]
    fn gss_iteration_cap_reports_best_probe() {
        let samples = road_samples(20, 15, 0.05, 0.0);
        let config = SolverConfig {
            method: Method::GoldenSection,
            max_iters: 3,
            ..SolverConfig::default()
        };
        let report = solve_gss(&samples, &config).unwrap();
        assert_eq!(report.termination, Termination::MaxIters);
        assert_eq!(report.iterations, 3);
        assert_eq!(report.energy_evals, 5);
        let best = report
            .trace
            .iter()
            .min_by(|a, b| a.e_min.partial_cmp(&b.e_min).unwrap())
            .unwrap();
        assert_eq!(report.theta_hat, best.theta);
    }

    #[test]
    fn predicted_iterations_reference_values() {
        assert_eq!(predicted_gss_iterations(PI, PI / 1.8e3), 16);
        assert_eq!(predicted_gss_iterations(PI, PI / 1.8e4), 21);
        assert_eq!(predicted_gss_iterations(PI, PI / 1.8e5), 26);
        assert_eq!(predicted_gss_iterations(PI, PI / 1.8e6), 30);
        assert_eq!(predicted_gss_iterations(0.1, 0.2), 0);
    }

    #[test]
    fn grid_finds_the_coarse_minimum() {
        let samples = road_samples(48, 36, 0.05, 0.0);
        let config = SolverConfig {
            method: Method::GridScan,
            theta_lo: -0.2,
            theta_hi: 0.2,
            theta0: 0.0,
            grid_step: 0.05,
            ..SolverConfig::default()
        };
        let report = solve_grid(&samples, &config).unwrap();
        assert!((report.theta_hat - 0.05).abs() <= 0.025, "theta_hat = {}", report.theta_hat);
        assert_eq!(report.termination, Termination::Converged);
        assert_eq!(report.iterations, report.trace.len());
        assert_eq!(report.energy_evals, report.iterations);
    }

    #[test]
    fn grid_includes_both_endpoints() {
        let samples = road_samples(20, 15, 0.0, 0.0);
        let config = SolverConfig {
            method: Method::GridScan,
            theta_lo: -0.1,
            theta_hi: 0.1,
            theta0: 0.0,
            grid_step: 0.07,
            ..SolverConfig::default()
        };
        let report = solve_grid(&samples, &config).unwrap();
        let thetas: Vec<f64> = report.trace.iter().map(|r| r.theta).collect();
        assert_eq!(thetas.len(), 4);
        assert_eq!(thetas[0], -0.1);
        assert_eq!(*thetas.last().unwrap(), 0.1);
    }

    #[test]
    fn grid_tie_breaks_to_the_smaller_angle() {
        // Samples on the u = 0 column make the energy an exactly even
        // function of theta, so symmetric grid points evaluate bit-equal.
        let map = DisparityMap::from_fn(1, 10, |_, v| {
            Some(1.0 + ((v * v) as f64).sin().abs())
        });
        let samples = map.samples(None).unwrap();
        let config = SolverConfig {
            method: Method::GridScan,
            theta_lo: -0.2,
            theta_hi: 0.2,
            theta0: 0.0,
            grid_step: 0.4,
            ..SolverConfig::default()
        };
        let report = solve_grid(&samples, &config).unwrap();
        assert_eq!(report.trace.len(), 2);
        assert_eq!(
            report.trace[0].e_min.to_bits(),
            report.trace[1].e_min.to_bits(),
            "grid energies should tie exactly"
        );
        assert_eq!(report.theta_hat, -0.2);
    }

    #[test]
    fn plane_fit_zero_roll() {
        let map = DisparityMap::from_fn(10, 10, |_, v| Some(1.0 + 0.4 * v as f64));
        let samples = map.samples(None).unwrap();
        let report = solve_plane(&samples).unwrap();
        assert!(report.theta_hat.abs() < 1e-9, "theta_hat = {}", report.theta_hat);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.energy_evals, 0);
    }

    #[test]
    fn plane_fit_known_gradient_ratio() {
        // d = 1 - 0.02 u + 0.4 v gives roll atan(0.02 / 0.4) = atan(0.05).
        let map =
            DisparityMap::from_fn(10, 10, |u, v| Some(1.0 - 0.02 * u as f64 + 0.4 * v as f64));
        let samples = map.samples(None).unwrap();
        let report = solve_plane(&samples).unwrap();
        assert!(
            (report.theta_hat - 0.049958395721942765).abs() < 1e-12,
            "theta_hat = {}",
            report.theta_hat
        );
    }

    #[test]
    fn plane_fit_recovers_a_planar_road_roll() {
        let spec = SyntheticRoadSpec {
            width: 40,
            height: 30,
            alpha: [2.0, 0.5, 0.0], // no quadratic term: a true plane
            true_roll: 0.03,
            noise_sigma: 0.0,
            seed: 0,
        };
        let samples = generate_synthetic(&spec).unwrap().samples(None).unwrap();
        let report = solve_plane(&samples).unwrap();
        assert!((report.theta_hat - 0.03).abs() < 1e-6, "theta_hat = {}", report.theta_hat);
    }

    #[test]
    fn plane_fit_vertical_gradient_is_an_error() {
        let map = DisparityMap::from_fn(10, 10, |u, _| Some(1.0 + 0.3 * u as f64));
        let samples = map.samples(None).unwrap();
        assert!(matches!(solve_plane(&samples), Err(Error::VerticalGradient)));
    }

    #[test]
    fn plane_fit_single_column_is_degenerate() {
        let map = DisparityMap::from_fn(1, 5, |_, v| Some(1.0 + v as f64));
        let samples = map.samples(None).unwrap();
        assert!(matches!(solve_plane(&samples), Err(Error::DegenerateGeometry { .. })));
    }

    #[test]
    fn dispatch_routes_by_method() {
        let samples = road_samples(32, 24, 0.02, 0.0);
        for method in [
            Method::GradientDescent,
            Method::GoldenSection,
            Method::GridScan,
            Method::PlaneFit,
        ] {
            let config = SolverConfig {
                method,
                theta_lo: -0.3,
                theta_hi: 0.3,
                grid_step: 1e-3,
                lambda0: 1e-7,
                ..SolverConfig::default()
            };
            let report = solve(&samples, &config).unwrap();
            assert_eq!(report.method, method);
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let samples = road_samples(48, 36, 0.04, 0.3);
        let config = SolverConfig { method: Method::GoldenSection, ..SolverConfig::default() };
        assert_eq!(solve(&samples, &config).unwrap(), solve(&samples, &config).unwrap());
        let config = gd_config(1e-9);
        assert_eq!(solve(&samples, &config).unwrap(), solve(&samples, &config).unwrap());
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());

        let check = |mutate: &dyn Fn(&mut SolverConfig)| {
            let mut c = SolverConfig::default();
            mutate(&mut c);
            assert!(c.validate().is_err(), "config should be rejected: {c:?}");
        };
        check(&|c| c.delta_theta = 0.0);
        check(&|c| c.delta_theta = f64::NAN);
        check(&|c| c.lambda0 = 0.0);
        check(&|c| c.lambda0 = f64::INFINITY);
        check(&|c| c.theta_lo = 0.5); // lo >= hi
        check(&|c| {
            c.theta_lo = -0.1;
            c.theta_hi = 0.1;
            c.theta0 = 0.2;
        });
        check(&|c| c.max_iters = 0);
        check(&|c| c.grid_step = -1.0);
    }
}

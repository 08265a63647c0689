//! The roll-angle energy: least-squares parabola fit residuals.
//!
//! For a candidate roll angle `theta`, every sample's rotated vertical
//! coordinate `y` feeds a quadratic model `d ~ a0 + a1*y + a2*y^2`. The
//! energy `e_min(theta)` is the sum of squared residuals of the best such
//! fit, and the estimated roll is the `theta` minimizing it.
//!
//! The fit solves the 3x3 normal equations. For conditioning, `y` is
//! mean-centered first and the coefficients are shifted back afterwards,
//! which leaves the residuals (and therefore the energy) unchanged. The
//! normal matrix's 1-norm condition estimate guards against degenerate
//! sample geometry (e.g. all samples on one image row).
//!
//! The energy's derivative in `theta` has a closed form: with residuals
//! `r_i = d_i - p(y_i)` and `dy_i/dtheta = -x_i`,
//!
//! ```text
//! de/dtheta = -2 * sum_i r_i * (a1 + 2*a2*y_i) * (-x_i)
//! ```
//!
//! (the fit coefficients are stationary, so only the explicit `theta`
//! dependence through `y` contributes). Energy and gradient come out of the
//! same pass over the samples, so solvers that need both pay for one fit.

use crate::disparity::PixelSample;
use crate::error::{Error, Result};
use crate::exec;

/// Fits with a 1-norm condition estimate above this are rejected as
/// degenerate geometry.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A parabola fit needs at least this many samples.
pub const MIN_SAMPLES: usize = 3;

/// The design matrix of the parabola fit at a fixed `theta`: one row
/// `(1, y_i, y_i^2)` per sample, on raw (uncentered) rotated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    theta: f64,
    rows: Vec<[f64; 3]>,
}

impl DesignMatrix {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }
}

/// Builds the design matrix for `samples` at `theta`.
pub fn design_matrix(samples: &[PixelSample], theta: f64) -> Result<DesignMatrix> {
    check_theta(theta)?;
    let (s, c) = theta.sin_cos();
    let rows = samples
        .iter()
        .map(|p| {
            let y = p.v as f64 * c - p.u as f64 * s;
            [1.0, y, y * y]
        })
        .collect();
    Ok(DesignMatrix { theta, rows })
}

/// Result of one parabola fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Coefficients `(a0, a1, a2)` of `d ~ a0 + a1*y + a2*y^2` on raw
    /// rotated coordinates.
    pub alpha: [f64; 3],
    /// Sum of squared residuals at the fitted coefficients.
    pub e_min: f64,
    pub n_samples: usize,
    pub theta: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta must be finite, got {theta}")))
    }
}

/// Solves `a * x = b` for a symmetric 3x3 system via the adjugate inverse,
/// returning the solution and a 1-norm condition estimate. Shared with the
/// plane-fit baseline, whose normal equations have the same shape.
pub(crate) fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<([f64; 3], f64)> {
    let cof = |r1: usize, r2: usize, c1: usize, c2: usize| {
        a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1]
    };
    // Cofactor expansion along the first row.
    let c00 = cof(1, 2, 1, 2);
    let c01 = -cof(1, 2, 0, 2);
    let c02 = cof(1, 2, 0, 1);
    let det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;

    // adj(a)^T / det = a^{-1}; the matrix is symmetric so the remaining
    // cofactors mirror across the diagonal.
    let c11 = cof(0, 2, 0, 2);
    let c12 = -cof(0, 2, 0, 1);
    let c22 = cof(0, 1, 0, 1);

    if det == 0.0 || !det.is_finite() {
        return Err(Error::DegenerateGeometry { condition: f64::INFINITY });
    }
    let inv = [
        [c00 / det, c01 / det, c02 / det],
        [c01 / det, c11 / det, c12 / det],
        [c02 / det, c12 / det, c22 / det],
    ];

    let norm1 = |m: &[[f64; 3]; 3]| {
        (0..3)
            .map(|j| (0..3).map(|i| m[i][j].abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    };
    let condition = norm1(&a) * norm1(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::DegenerateGeometry { condition });
    }

    let x = [
        inv[0][0] * b[0] + inv[0][1] * b[1] + inv[0][2] * b[2],
        inv[1][0] * b[0] + inv[1][1] * b[1] + inv[1][2] * b[2],
        inv[2][0] * b[0] + inv[2][1] * b[1] + inv[2][2] * b[2],
    ];
    Ok((x, condition))
}

/// Shared fit pipeline. Always produces both the energy and its `theta`
/// derivative; they fall out of the same residual pass.
fn fit_inner(samples: &[PixelSample], theta: f64) -> Result<(FitResult, f64)> {
    check_theta(theta)?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_SAMPLES, got: samples.len() });
    }
    let n = samples.len() as f64;
    let (s, c) = theta.sin_cos();

    let [sum_y, sum_d] = exec::accumulate(samples, |p, acc: &mut [f64; 2]| {
        acc[0] += p.v as f64 * c - p.u as f64 * s;
        acc[1] += p.d;
    });
    let y_bar = sum_y / n;

    // Centered moments z = y - y_bar and the right-hand side.
    let [m1, m2, m3, m4, b1, b2] = exec::accumulate(samples, |p, acc: &mut [f64; 6]| {
        let z = (p.v as f64 * c - p.u as f64 * s) - y_bar;
        let z2 = z * z;
        acc[0] += z;
        acc[1] += z2;
        acc[2] += z2 * z;
        acc[3] += z2 * z2;
        acc[4] += z * p.d;
        acc[5] += z2 * p.d;
    });

    let (beta, _condition) = solve3(
        [[n, m1, m2], [m1, m2, m3], [m2, m3, m4]],
        [sum_d, b1, b2],
    )?;

    // Residuals and the gradient contraction in one pass.
    let [rr, rg] = exec::accumulate(samples, |p, acc: &mut [f64; 2]| {
        let u = p.u as f64;
        let v = p.v as f64;
        let z = (v * c - u * s) - y_bar;
        let r = p.d - (beta[0] + z * (beta[1] + beta[2] * z));
        let dy = -(u * c + v * s); // d/dtheta of the rotated y coordinate
        acc[0] += r * r;
        acc[1] += r * dy * (beta[1] + 2.0 * beta[2] * z);
    });

    // Shift the coefficients back to the raw y basis.
    let alpha = [
        beta[0] - y_bar * (beta[1] - beta[2] * y_bar),
        beta[1] - 2.0 * beta[2] * y_bar,
        beta[2],
    ];
    let fit = FitResult {
        alpha,
        e_min: rr.max(0.0),
        n_samples: samples.len(),
        theta,
    };
    Ok((fit, -2.0 * rg))
}

/// Best least-squares parabola through the samples at roll angle `theta`.
pub fn fit_parabola(samples: &[PixelSample], theta: f64) -> Result<FitResult> {
    fit_inner(samples, theta).map(|(fit, _)| fit)
}

/// Residual energy of the best fit at `theta`.
pub fn e_min(samples: &[PixelSample], theta: f64) -> Result<f64> {
    fit_inner(samples, theta).map(|(fit, _)| fit.e_min)
}

/// Derivative of [`e_min`] with respect to `theta`.
pub fn grad_e_min(samples: &[PixelSample], theta: f64) -> Result<f64> {
    fit_inner(samples, theta).map(|(_, grad)| grad)
}

/// Energy and gradient from a single fit. Solvers that consume both should
/// call this rather than paying for two fits.
pub fn fit_with_gradient(samples: &[PixelSample], theta: f64) -> Result<(FitResult, f64)> {
    fit_inner(samples, theta)
}

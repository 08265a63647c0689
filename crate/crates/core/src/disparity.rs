//! Disparity grids, sampling, and synthetic road scenes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::rotate_coord;

/// A dense disparity map on a `width x height` pixel grid, row-major.
/// Cells are either valid (holding a finite, non-negative disparity) or
/// invalid (missing measurement); invalid cells take no part in estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

/// One valid cell, flattened for the estimators: pixel column `u`, row `v`,
/// disparity `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub u: u32,
    pub v: u32,
    pub d: f64,
}

/// Boolean inclusion grid with the same shape as the map it filters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    include: Vec<bool>,
}

impl DisparityMap {
    /// Builds a map from raw row-major storage. The vectors must both have
    /// `width * height` entries and every valid cell must hold a finite,
    /// non-negative disparity.
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let cells = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidArgument("map dimensions overflow".into()))?;
        if width > u32::MAX as usize || height > u32::MAX as usize {
            return Err(Error::InvalidArgument("map dimensions exceed u32 range".into()));
        }
        if values.len() != cells || valid.len() != cells {
            return Err(Error::InvalidArgument(format!(
                "storage length {} / {} does not match {}x{} grid",
                values.len(),
                valid.len(),
                width,
                height
            )));
        }
        for (i, (&d, &ok)) in values.iter().zip(valid.iter()).enumerate() {
            if ok && !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "cell ({}, {}) holds invalid disparity {}",
                    i % width.max(1),
                    i / width.max(1),
                    d
                )));
            }
        }
        Ok(Self { width, height, values, valid })
    }

    /// Builds a map cell by cell: `f(u, v)` returns `Some(d)` for a valid
    /// cell and `None` for an invalid one.
    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Option<f64>,
    {
        let mut values = vec![0.0; width * height];
        let mut valid = vec![false; width * height];
        for v in 0..height {
            for u in 0..width {
                if let Some(d) = f(u, v) {
                    values[v * width + u] = d;
                    valid[v * width + u] = true;
                }
            }
        }
        Self::from_parts(width, height, values, valid)
            .expect("from_fn produced inconsistent storage")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Disparity at `(u, v)`, or `None` when the cell is invalid or out of
    /// range.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then(|| self.values[i])
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height && self.valid[v * self.width + u]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&ok| ok).count()
    }

    /// Flattens the valid cells into samples, in row-major order. With a
    /// mask, only cells the mask includes are kept; the mask must match the
    /// map's dimensions.
    pub fn samples(&self, mask: Option<&Mask>) -> Result<Vec<PixelSample>> {
        if let Some(m) = mask {
            if (m.width, m.height) != (self.width, self.height) {
                return Err(Error::ShapeMismatch {
                    expected: (self.width, self.height),
                    got: (m.width, m.height),
                });
            }
        }
        let mut out = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                let i = v * self.width + u;
                if !self.valid[i] {
                    continue;
                }
                if let Some(m) = mask {
                    if !m.include[i] {
                        continue;
                    }
                }
                out.push(PixelSample { u: u as u32, v: v as u32, d: self.values[i] });
            }
        }
        Ok(out)
    }
}

impl Mask {
    pub fn from_parts(width: usize, height: usize, include: Vec<bool>) -> Result<Self> {
        if include.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "mask storage length {} does not match {}x{} grid",
                include.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, include })
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> bool,
    {
        let mut include = vec![false; width * height];
        for v in 0..height {
            for u in 0..width {
                include[v * width + u] = f(u, v);
            }
        }
        Self { width, height, include }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn includes(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height && self.include[v * self.width + u]
    }
}

/// Parameters for a synthetic road scene: a parabolic disparity profile
/// `d(y) = alpha[0] + alpha[1]*y + alpha[2]*y^2` evaluated on coordinates
/// rotated by `true_roll`, with optional Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRoadSpec {
    pub width: usize,
    pub height: usize,
    pub alpha: [f64; 3],
    /// Ground-truth roll angle in radians, in `(-pi/2, pi/2]`.
    pub true_roll: f64,
    /// Standard deviation of additive Gaussian noise; zero disables noise.
    pub noise_sigma: f64,
    /// Seed for the noise generator. Ignored when `noise_sigma` is zero.
    pub seed: u64,
}

impl SyntheticRoadSpec {
    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::FRAC_PI_2;
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidArgument(format!(
                "synthetic grid must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "profile coefficients must be finite, got {:?}",
                self.alpha
            )));
        }
        if !(self.true_roll > -FRAC_PI_2 && self.true_roll <= FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "true_roll {} outside (-pi/2, pi/2]",
                self.true_roll
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Renders the synthetic scene described by `spec`. Cells are filled in
/// row-major order; cells whose disparity comes out negative are marked
/// invalid. Output is fully determined by the spec.
pub fn generate_synthetic(spec: &SyntheticRoadSpec) -> Result<DisparityMap> {
    spec.validate()?;
    let [a0, a1, a2] = spec.alpha;
    let mut values = vec![0.0_f64; spec.width * spec.height];
    let mut valid = vec![false; spec.width * spec.height];

    let mut noise = if spec.noise_sigma > 0.0 {
        let dist = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
        Some((ChaCha8Rng::seed_from_u64(spec.seed), dist))
    } else {
        None
    };

    for v in 0..spec.height {
        for u in 0..spec.width {
            let (_, y) = rotate_coord(u as f64, v as f64, spec.true_roll);
            let mut d = a0 + y * (a1 + a2 * y);
            if let Some((rng, dist)) = noise.as_mut() {
                d += dist.sample(rng);
            }
            if d >= 0.0 {
                let i = v * spec.width + u;
                values[i] = d;
                valid[i] = true;
            }
        }
    }
    DisparityMap::from_parts(spec.width, spec.height, values, valid)
}

//! The line searches and the exhaustive scan must all land on the same
//! minimum. The scan is the arbiter: it knows nothing about gradients or
//! bracketing, it just evaluates the energy densely.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rollfit_core::solver::{solve, Method, SolverConfig};
use rollfit_core::{generate_synthetic, PixelSample, SyntheticRoadSpec};

const DELTA: f64 = PI / 1.8e5;

/// Dense-scan argmin in two stages: a coarse pass over the whole interval,
/// then a 1e-6-step pass in a +/-2e-3 window around the coarse winner. For
/// these single-basin energies the result matches a full 1e-6 scan at a
/// thousandth of the cost.
fn grid_argmin(samples: &[PixelSample]) -> f64 {
    let coarse = solve(
        samples,
        &SolverConfig { method: Method::GridScan, grid_step: 1e-3, ..Default::default() },
    )
    .expect("coarse scan")
    .theta_hat;

    let fine = solve(
        samples,
        &SolverConfig {
            method: Method::GridScan,
            grid_step: 1e-6,
            theta_lo: coarse - 2e-3,
            theta_hi: coarse + 2e-3,
            theta0: coarse,
            ..Default::default()
        },
    )
    .expect("fine scan");
    fine.theta_hat
}

fn scene(rng: &mut ChaCha8Rng) -> (Vec<PixelSample>, f64) {
    let roll = rng.random_range(-0.12..0.12);
    let sigma = if rng.random_bool(0.5) { 0.0 } else { 0.3 };
    let spec = SyntheticRoadSpec {
        width: 64,
        height: 48,
        alpha: [
            rng.random_range(1.0..4.0),
            rng.random_range(0.1..0.6),
            rng.random_range(0.001..0.02),
        ],
        true_roll: roll,
        noise_sigma: sigma,
        seed: rng.random(),
    };
    let map = generate_synthetic(&spec).unwrap();
    (map.samples(None).unwrap(), roll)
}

#[test]
fn line_searches_agree_with_the_dense_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..8 {
        let (samples, roll) = scene(&mut rng);
        let oracle = grid_argmin(&samples);

        let gss = solve(
            &samples,
            &SolverConfig {
                method: Method::GoldenSection,
                delta_theta: DELTA,
                ..Default::default()
            },
        )
        .unwrap();
        let gd = solve(
            &samples,
            &SolverConfig {
                method: Method::GradientDescent,
                delta_theta: DELTA,
                lambda0: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();

        let bound = DELTA.max(2e-6);
        assert!(
            (gss.theta_hat - oracle).abs() <= bound,
            "case {case} (roll {roll}): gss {} vs scan {oracle}",
            gss.theta_hat
        );
        assert!(
            (gd.theta_hat - oracle).abs() <= bound,
            "case {case} (roll {roll}): gd {} vs scan {oracle}",
            gd.theta_hat
        );
        assert!(
            (gd.theta_hat - gss.theta_hat).abs() <= 2.0 * DELTA,
            "case {case}: methods disagree: {} vs {}",
            gd.theta_hat,
            gss.theta_hat
        );
    }
}

#[test]
fn noise_free_scenes_recover_the_true_roll() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let roll = rng.random_range(-0.12..0.12);
        let spec = SyntheticRoadSpec {
            width: 64,
            height: 48,
            alpha: [2.0, 0.4, 0.01],
            true_roll: roll,
            noise_sigma: 0.0,
            seed: 0,
        };
        let samples = generate_synthetic(&spec).unwrap().samples(None).unwrap();
        for (method, lambda0) in [(Method::GoldenSection, 26.0), (Method::GradientDescent, 1e-8)]
        {
            let report = solve(
                &samples,
                &SolverConfig { method, delta_theta: DELTA, lambda0, ..Default::default() },
            )
            .unwrap();
            assert!(
                (report.theta_hat - roll).abs() < DELTA,
                "{}: {} vs true {roll}",
                method.name(),
                report.theta_hat
            );
        }
    }
}

//! Optimizers on standard test functions with known optima.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqmg_optim::*;

const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

fn rosenbrock(x: &[f64]) -> f64 {
    100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
}

fn branin(x: &[f64]) -> f64 {
    let (a, b, c) = (1.0, 5.1 / (4.0 * PI * PI), 5.0 / PI);
    let (r, s, t) = (6.0, 10.0, 1.0 / (8.0 * PI));
    a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
}

fn forrester(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

#[test]
fn cobyla_sphere() {
    let r = cobyla_minimize(
        |x| x.iter().map(|v| v * v).sum(),
        &[1.0, 1.0],
        &[FREE, FREE],
        0.5,
        1e-8,
        500,
    )
    .unwrap();
    assert!(r.f < 1e-6 && r.evals <= 500, "{r:?}");
}

#[test]
fn cobyla_rosenbrock() {
    // linear models descend the curved valley at a steepest-descent rate, so
    // this needs a larger budget than the sphere
    let r = cobyla_minimize(rosenbrock, &[-1.2, 1.0], &[FREE, FREE], 0.5, 1e-8, 10_000).unwrap();
    assert!(r.f < 1e-5, "{r:?}");
    assert!((r.x[0] - 1.0).abs() < 1e-2 && (r.x[1] - 1.0).abs() < 2e-2, "{r:?}");
    let short = cobyla_minimize(rosenbrock, &[-1.2, 1.0], &[FREE, FREE], 0.5, 1e-8, 2000).unwrap();
    assert!(short.f < 0.05, "{short:?}");
}

#[test]
fn cobyla_linear_objective_lands_on_the_box() {
    let bounds = [(-1.0, 2.0), (0.5, 3.0), (-4.0, -1.0)];
    let r = cobyla_minimize(
        |x| 2.0 * x[0] - x[1] + 0.5 * x[2],
        &[0.0, 1.0, -2.0],
        &bounds,
        0.5,
        1e-8,
        1000,
    )
    .unwrap();
    let want = [-1.0, 3.0, -4.0];
    for (x, w) in r.x.iter().zip(want) {
        assert!((x - w).abs() < 1e-6, "{:?}", r.x);
    }
}

#[test]
fn cobyla_is_deterministic() {
    let run = || cobyla_minimize(rosenbrock, &[-1.2, 1.0], &[FREE, FREE], 0.5, 1e-6, 300).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn cobyla_stays_inside_bounds() {
    let bounds = [(0.0, 1.0); 4];
    let r = cobyla_minimize(
        |x| {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)), "{x:?}");
            x.iter().enumerate().map(|(i, v)| (v - 0.3 * i as f64).powi(2)).sum()
        },
        &[0.5; 4],
        &bounds,
        0.4,
        1e-8,
        2000,
    )
    .unwrap();
    assert!((r.x[3] - 0.9).abs() < 1e-5, "{r:?}");
}

fn run_bo(f: impl Fn(&[f64]) -> f64, bounds: Vec<(f64, f64)>, evals: usize, seed: u64) -> f64 {
    let mut bo = BayesOpt::new(bounds, BoConfig::default(), seed);
    for _ in 0..evals {
        let x = bo.ask();
        let y = f(&x);
        bo.tell(x, y);
    }
    bo.best().unwrap().y
}

#[test]
fn bo_branin() {
    let hits = (0..10)
        .filter(|&seed| {
            let best = -run_bo(|x| -branin(x), vec![(-5.0, 10.0), (0.0, 15.0)], 100, seed);
            best - 0.397887 <= 0.1
        })
        .count();
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn bo_forrester() {
    // reference optimum by dense grid search
    let grid_min = (0..=1_000_000)
        .map(|i| forrester(i as f64 / 1e6))
        .fold(f64::INFINITY, f64::min);
    let best = -run_bo(|x| -forrester(x[0]), vec![(0.0, 1.0)], 30, 4);
    assert!((best - grid_min).abs() <= 0.01 * grid_min.abs(), "{best} vs {grid_min}");
}

#[test]
fn bo_resumes_bit_identically() {
    let f = |x: &[f64]| -(x[0] - 0.2).powi(2) - (x[1] - 0.7).powi(2);
    let bounds = vec![(0.0, 1.0), (0.0, 1.0)];
    let cfg = BoConfig {
        candidates: 256,
        ..Default::default()
    };
    let mut full = BayesOpt::new(bounds.clone(), cfg.clone(), 9);
    for _ in 0..14 {
        let x = full.ask();
        let y = f(&x);
        full.tell(x, y);
    }
    let mut resumed = BayesOpt::new(bounds, cfg, 9);
    for s in &full.history()[..10] {
        resumed.tell(s.x.clone(), s.y);
    }
    for s in &full.history()[10..] {
        let x = resumed.ask();
        assert_eq!(x, s.x);
        resumed.tell(x, s.y);
    }
}

#[test]
fn ei_prefers_the_basin_of_the_best_point() {
    // flat history except for one point at the maximum
    let mut history: Vec<ObjectiveSample> = (0..12)
        .map(|i| ObjectiveSample {
            x: vec![(i as f64 * 0.618).fract(), (i as f64 * 0.382).fract()],
            y: 0.1,
        })
        .collect();
    history.push(ObjectiveSample {
        x: vec![0.5, 0.5],
        y: 1.0,
    });
    let gp = GpModel::fit(
        &history.iter().map(|s| s.x.clone()).collect::<Vec<_>>(),
        &history.iter().map(|s| s.y).collect::<Vec<_>>(),
        &GpConfig::default(),
    );
    let f_best = gp.standardize(1.0);
    let ei = |x: &[f64]| {
        let (mu, var) = gp.posterior(x);
        expected_improvement(mu, var.sqrt(), f_best, 0.01)
    };
    let bounds = [(0.0, 1.0), (0.0, 1.0)];
    let next = bo_step(&history, &bounds, &mut ChaCha8Rng::seed_from_u64(0), &BoConfig::default());
    let near = ((next[0] - 0.5).powi(2) + (next[1] - 0.5).powi(2)).sqrt();
    assert!(near < 0.25, "{next:?}");
    assert!(ei(&next) >= ei(&[0.9, 0.1]));
}

proptest! {
    #[test]
    fn ei_is_nonnegative(mu in -10.0..10.0f64, sigma in 0.0..10.0f64, best in -10.0..10.0f64, xi in 0.0..1.0f64) {
        prop_assert!(expected_improvement(mu, sigma, best, xi) >= 0.0);
    }

    #[test]
    fn ei_is_monotone_in_mean(mu in -5.0..5.0f64, dmu in 0.0..2.0f64, sigma in 1e-6..5.0f64, best in -5.0..5.0f64) {
        prop_assert!(expected_improvement(mu + dmu, sigma, best, 0.01) >= expected_improvement(mu, sigma, best, 0.01) - 1e-12);
    }

    #[test]
    fn ei_is_monotone_in_sigma_below_target(gap in 0.0..5.0f64, sigma in 0.0..5.0f64, ds in 0.0..2.0f64) {
        let (best, xi) = (1.0, 0.01);
        let mu = best + xi - gap;
        prop_assert!(expected_improvement(mu, sigma + ds, best, xi) >= expected_improvement(mu, sigma, best, xi) - 1e-12);
    }

    #[test]
    fn cobyla_never_exceeds_maxfun(maxfun in 1usize..60, x0 in -3.0..3.0f64) {
        let mut calls = 0;
        let r = cobyla_minimize(|x| { calls += 1; (x[0] - 1.0).powi(2) + x[1].abs() }, &[x0, 0.5], &[FREE, FREE], 0.5, 1e-10, maxfun).unwrap();
        prop_assert!(r.evals <= maxfun && calls == r.evals);
    }
}

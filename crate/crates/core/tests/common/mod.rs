//! Shared fixtures for the integration tests.

#![allow(dead_code)]

use markov_persuasion::{validate_problem, Discounting, MarkovRates, ProblemSpec};
use rand::Rng;

/// A random problem satisfying the envelope condition: cuts at least 0.02
/// apart, levels whose chord slopes strictly decrease, rates in [0.2, 5].
pub fn random_instance<R: Rng>(rng: &mut R) -> ProblemSpec {
    loop {
        let n = rng.random_range(1..=7usize);
        let mut inner: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.02..0.98)).collect();
        inner.sort_by(f64::total_cmp);
        let mut cuts = vec![0.0];
        cuts.extend(inner);
        cuts.push(1.0);
        if cuts.windows(2).any(|w| w[1] - w[0] < 0.02) {
            continue;
        }
        let mut slopes: Vec<f64> = (0..n.saturating_sub(1))
            .map(|_| rng.random_range(0.05..5.0))
            .collect();
        slopes.sort_by(|a, b| b.total_cmp(a));
        if slopes.windows(2).any(|w| w[0] - w[1] < 1e-3) {
            continue;
        }
        let mut levels = vec![rng.random_range(-1.0..1.0)];
        for i in 0..n - 1 {
            let last = levels[i];
            levels.push(last + slopes[i] * (cuts[i + 1] - cuts[i]));
        }
        let rates =
            MarkovRates::new(rng.random_range(0.2..5.0), rng.random_range(0.2..5.0)).unwrap();
        let disc = Discounting::new(rng.random_range(0.2..5.0)).unwrap();
        if let Ok(spec) = validate_problem(rates, disc, &cuts, &levels) {
            // keep p* away from the cuts so the tie branch stays exceptional
            let p_star = spec.p_star();
            if cuts.iter().all(|c| (c - p_star).abs() > 0.01) {
                return spec;
            }
        }
    }
}

/// The single-discontinuity instance: cuts [0, 0.7, 1], levels [0, 1], p* = 0.5.
pub fn single_jump() -> ProblemSpec {
    validate_problem(
        MarkovRates::new(1.0, 1.0).unwrap(),
        Discounting::new(1.0).unwrap(),
        &[0.0, 0.7, 1.0],
        &[0.0, 1.0],
    )
    .unwrap()
}

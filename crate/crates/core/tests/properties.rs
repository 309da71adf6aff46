mod common;

use markov_persuasion::sim::{compare_policies, CompareOptions};
use markov_persuasion::{
    canonical, cav_u, drift_continuous, evaluate_policy_discrete, myopic_policy, simulate,
    slide_only_policy, solve, value_iteration, BeliefGrid, MarkovPolicy, ProblemSpec, SimConfig,
    Solution,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `int_0^inf r e^{-rt} f(drift(p, t)) dt` by composite Simpson on the
/// substitution `s = 1 - e^{-rt}`, which maps the integral to `[0, 1]`.
fn discounted_integral<F: Fn(f64) -> f64>(spec: &ProblemSpec, p: f64, f: F) -> f64 {
    let n = 20_000;
    let r = spec.r();
    let g = |s: f64| {
        if s >= 1.0 {
            return f(spec.p_star());
        }
        let t = -(1.0 - s).ln() / r;
        f(drift_continuous(&spec.rates, p, t))
    };
    let h = 1.0 / n as f64;
    let mut acc = g(0.0) + g(1.0);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn value_is_sandwiched_between_silence_and_envelope_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut specs = vec![canonical(), common::single_jump()];
    specs.extend((0..8).map(|_| common::random_instance(&mut rng)));
    for spec in &specs {
        let sol = solve(spec).unwrap();
        let cav = cav_u(&spec.payoff);
        for k in 0..=40 {
            let p = k as f64 / 40.0;
            let v = sol.value.eval(p).unwrap();
            // silence forever is one feasible policy; the step payoff makes the
            // quadrature lower bound slightly inexact near jumps
            let silent = discounted_integral(spec, p, |x| spec.payoff.eval_unchecked(x));
            // Jensen: E u(p_t) <= cav u(E p_t) and E p_t follows the drift
            let upper = discounted_integral(spec, p, |x| cav.eval(x));
            let slack = 1e-3 * spec.payoff.range() + 1e-12;
            assert!(v >= silent - slack, "p={p}: {v} < silent {silent}");
            assert!(v <= upper + 1e-9, "p={p}: {v} > bound {upper}");
        }
    }
}

#[test]
fn discrete_values_approach_solver_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let spec = common::random_instance(&mut rng);
        let sol = solve(&spec).unwrap();
        let dt = 2e-3 / (spec.rates.total() + spec.r());
        let grid = BeliefGrid::new(&spec, 5e-4, &sol.policy.breakpoints()).unwrap();
        let v = value_iteration(&spec, dt, &grid, 1e-7, 10_000_000).unwrap();
        let w = evaluate_policy_discrete(&spec, &sol.policy, dt, &grid, 1e-7, 10_000_000).unwrap();
        let range = spec.payoff.range() + 1e-10;
        assert!(v.sup_error(&sol) <= 0.01 * range, "{}", v.sup_error(&sol));
        for ((a, b), p) in v.values.iter().zip(&w.values).zip(&grid.points) {
            // w_dt(sigma*) <= v_dt and both close to the solver
            assert!(b <= &(a + 1e-6), "p={p}");
            assert!(
                (b - sol.value.eval(*p).unwrap()).abs() <= 0.01 * range,
                "p={p}"
            );
        }
    }
}

fn sim_cfg(p0: f64, n_paths: usize) -> SimConfig {
    SimConfig {
        delta: 0.01,
        horizon: 1500,
        n_paths,
        seed: 99,
        initial_belief: p0,
        max_tail: Some(1e-6),
    }
}

#[test]
fn simulation_matches_discrete_policy_evaluation() {
    let spec = canonical();
    let sol = solve(&spec).unwrap();
    let policies: Vec<(&str, MarkovPolicy)> = vec![
        ("sigma_star", sol.policy.clone()),
        ("myopic", myopic_policy(&spec)),
        ("slide_only", slide_only_policy()),
    ];
    for (name, pol) in &policies {
        // w_dt of a sliding policy jumps wherever some iterate of the drift
        // crosses a cut, so the grid must be fine for interpolation to vanish
        let grid = BeliefGrid::new(&spec, 2.5e-5, &pol.breakpoints()).unwrap();
        let w = evaluate_policy_discrete(&spec, pol, 0.01, &grid, 1e-9, 10_000_000).unwrap();
        for p0 in [0.15, 0.62] {
            let res = simulate(&spec, pol, &sim_cfg(p0, 6000)).unwrap();
            let diff = (res.mean_discounted_payoff - w.value_at(p0)).abs();
            let allowed = 3.0 * res.std_error + res.tail_bound + 1e-5;
            assert!(
                diff <= allowed,
                "{name} at {p0}: diff {diff:e} > {allowed:e}"
            );
        }
    }
}

#[test]
fn myopic_is_beaten_above_the_pivot_in_simulation() {
    let spec = canonical();
    let sol = solve(&spec).unwrap();
    let res = simulate(&spec, &myopic_policy(&spec), &sim_cfg(0.62, 20_000)).unwrap();
    let gap = sol.value.eval(0.62).unwrap() - res.mean_discounted_payoff;
    assert!(
        gap > 3.0 * res.std_error + res.tail_bound,
        "gap {gap:e}, se {:e}",
        res.std_error
    );
}

#[test]
fn comparison_flags_nothing_for_the_optimal_policy() {
    let spec = canonical();
    let sol = solve(&spec).unwrap();
    let cfg = sim_cfg(0.5, 4000);
    let opts = CompareOptions {
        grid_gap: 1e-3,
        tol: 1e-8,
        ..CompareOptions::default()
    };
    let rows = compare_policies(
        &spec,
        &[("sigma_star".to_string(), sol.policy.clone())],
        &cfg,
        &[0.1, 0.3, 0.5, 0.7, 0.9],
        &opts,
    )
    .unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| !r.flagged));
    for r in &rows {
        assert!((r.solver_value - sol.value.eval(r.belief).unwrap()).abs() < 1e-15);
        assert!(r.discrete_value <= r.solver_value + 0.01);
    }
}

#[test]
fn splitting_beats_silence_below_stationary() {
    let spec = canonical();
    let sol = solve(&spec).unwrap();
    let cfg = sim_cfg(0.3, 8000);
    let rows = compare_policies(
        &spec,
        &[
            ("sigma_star".to_string(), sol.policy.clone()),
            ("slide_only".to_string(), slide_only_policy()),
        ],
        &cfg,
        &[0.3],
        &CompareOptions::default(),
    )
    .unwrap();
    let (opt, silent) = (&rows[0], &rows[1]);
    let combined = (opt.sim_std_error.powi(2) + silent.sim_std_error.powi(2)).sqrt();
    assert!(opt.sim_mean - silent.sim_mean > 3.0 * combined);
    assert!(!silent.flagged);
}

#[test]
fn solution_round_trips_through_json() {
    let sol = solve(&canonical()).unwrap();
    let back = Solution::from_json(&sol.to_json()).unwrap();
    assert_eq!(back, sol);
    let policy_text = serde_json::to_string(&sol.policy).unwrap();
    assert_eq!(MarkovPolicy::from_json(&policy_text).unwrap(), sol.policy);
}

#[test]
fn optimal_policy_never_loses_to_alternatives_in_discrete_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..3 {
        let spec = common::random_instance(&mut rng);
        let sol = solve(&spec).unwrap();
        let dt = 0.01 / (spec.rates.total() + spec.r());
        let grid = BeliefGrid::new(&spec, 1e-3, &sol.policy.breakpoints()).unwrap();
        let v = value_iteration(&spec, dt, &grid, 1e-10, 10_000_000).unwrap();
        for pol in [
            myopic_policy(&spec),
            slide_only_policy(),
            sol.policy.clone(),
        ] {
            let w = evaluate_policy_discrete(&spec, &pol, dt, &grid, 1e-10, 10_000_000).unwrap();
            for (a, b) in v.values.iter().zip(&w.values) {
                assert!(*b <= a + 1e-8);
            }
        }
    }
}

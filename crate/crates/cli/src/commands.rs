use std::fs;
use std::path::Path;

use markov_persuasion::oracle::{sup_error, OracleError};
use markov_persuasion::sim::{compare_policies, write_comparison_csv, CompareOptions, SimError};
use markov_persuasion::{
    cav_u, evaluate_policy_discrete, full_disclosure_policy, myopic_policy, slide_only_policy,
    value_iteration, BeliefGrid, MarkovPolicy, PolicyAction, ProblemInput, ProblemSpec, Side,
    SimConfig, Solution,
};
use serde::Serialize;

use crate::output::RunOutput;
use crate::Failure;

/// Horizon tail target used when `--horizon` is not given.
const DEFAULT_TAIL_FRACTION: f64 = 1e-9;

fn load(path: &Path) -> Result<(ProblemSpec, Vec<u8>), Failure> {
    let bytes =
        fs::read(path).map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Failure::Validation(format!("{} is not UTF-8: {e}", path.display())))?;
    let spec = ProblemInput::from_json(text)
        .and_then(|input| input.validate())
        .map_err(|e| Failure::Validation(e.to_string()))?;
    Ok((spec, bytes))
}

fn solve_spec(spec: &ProblemSpec) -> Result<Solution, Failure> {
    markov_persuasion::solve(spec).map_err(|e| Failure::Solver(e.to_string()))
}

fn oracle_failure(e: OracleError) -> Failure {
    match e {
        OracleError::BadDelta(_) | OracleError::BadGap(_) | OracleError::GridTooCoarse { .. } => {
            Failure::Validation(e.to_string())
        }
        e => Failure::Oracle(e.to_string()),
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::BadConfig(_) => Failure::Validation(e.to_string()),
        SimError::Solve(e) => Failure::Solver(e.to_string()),
        SimError::Oracle(e) => oracle_failure(e),
        e => Failure::Sim(e.to_string()),
    }
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| Failure::Io(format!("formatting CSV: {e}")))?;
    Ok(buf)
}

pub fn validate(config: &Path) -> Result<(), Failure> {
    let (spec, _) = load(config)?;
    let pay = &spec.payoff;
    println!("p*={}", spec.p_star());
    println!("mu={}", spec.mu());
    println!("m={}", pay.m_below());
    println!("m'={}", pay.m_above());
    println!("pivot={}", pay.cut(0));
    println!("stationary_at_cut={}", spec.stationary_at_cut());
    Ok(())
}

fn region_name(action: PolicyAction) -> &'static str {
    match action {
        PolicyAction::Slide => "slide",
        PolicyAction::Split { .. } => "split",
    }
}

pub fn solve(config: &Path, out: &Path, samples: usize) -> Result<(), Failure> {
    if samples < 2 {
        return Err(Failure::Validation(format!(
            "--samples must be at least 2, got {samples}"
        )));
    }
    let (spec, bytes) = load(config)?;
    let sol = solve_spec(&spec)?;
    let mut run = RunOutput::create(out, "solve", config, &bytes)?;
    run.param("samples", samples);

    let cutoffs: Vec<f64> = sol.cutoffs().iter().map(|c| c.value).collect();
    let mut points: Vec<f64> = (0..samples)
        .map(|k| k as f64 / (samples - 1) as f64)
        .collect();
    points.extend_from_slice(spec.payoff.cuts());
    points.extend_from_slice(&cutoffs);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let cav = cav_u(&spec.payoff);
    let csv = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["belief", "u", "cav_u", "v", "v_prime", "region", "cutoff"])?;
        for &p in &points {
            let action = sol
                .policy
                .action_at(p)
                .expect("solver policy covers [0, 1]");
            w.write_record([
                p.to_string(),
                spec.payoff.eval_unchecked(p).to_string(),
                cav.eval(p).to_string(),
                sol.value.eval_unchecked(p).to_string(),
                sol.value
                    .derivative(p, Side::Right)
                    .expect("p in range")
                    .to_string(),
                region_name(action).to_string(),
                cutoffs.contains(&p).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write("solution.json", format!("{}\n", sol.to_json()).as_bytes())?;
    run.write("solution.csv", &csv)?;
    run.finish()?;
    println!("p*={} mu={}", sol.p_star, sol.mu);
    println!("cutoffs={cutoffs:?}");
    println!("v(p*)={}", sol.value.eval_unchecked(sol.p_star));
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleSettings {
    pub delta: f64,
    pub grid_gap: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    delta: f64,
    grid_points: usize,
    iterations: usize,
    residual: f64,
    max_abs_error: f64,
}

pub fn oracle(config: &Path, out: &Path, s: OracleSettings) -> Result<(), Failure> {
    let (spec, bytes) = load(config)?;
    let sol = solve_spec(&spec)?;
    let grid =
        BeliefGrid::new(&spec, s.grid_gap, &sol.policy.breakpoints()).map_err(oracle_failure)?;
    let res = value_iteration(&spec, s.delta, &grid, s.tol, s.max_iter).map_err(oracle_failure)?;
    let mut run = RunOutput::create(out, "oracle", config, &bytes)?;
    run.param("delta", s.delta);
    run.param("grid_gap", s.grid_gap);
    run.param("tol", s.tol);
    run.param("max_iter", s.max_iter);
    let csv = csv_bytes(|buf| res.write_csv(&spec, Some(&sol), buf))?;
    let summary = OracleSummary {
        delta: s.delta,
        grid_points: grid.len(),
        iterations: res.iterations,
        residual: res.residual,
        max_abs_error: res.sup_error(&sol),
    };
    run.write("oracle.csv", &csv)?;
    run.write_json("oracle.json", &summary)?;
    run.finish()?;
    println!(
        "iterations={} residual={:e} max_abs_error={:e}",
        summary.iterations, summary.residual, summary.max_abs_error
    );
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub delta: Option<f64>,
    pub horizon: Option<usize>,
    pub paths: usize,
    pub seed: u64,
    pub max_tail: Option<f64>,
}

impl SimSettings {
    fn resolve(&self, spec: &ProblemSpec, belief: f64) -> Result<SimConfig, Failure> {
        let delta = self.delta.unwrap_or_else(|| SimConfig::default_delta(spec));
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Failure::Validation(format!(
                "--delta must be positive, got {delta}"
            )));
        }
        let horizon = self
            .horizon
            .unwrap_or_else(|| (-DEFAULT_TAIL_FRACTION.ln() / (spec.r() * delta)).ceil() as usize);
        Ok(SimConfig {
            delta,
            horizon,
            n_paths: self.paths,
            seed: self.seed,
            initial_belief: belief,
            max_tail: self.max_tail,
        })
    }
}

fn resolve_policy(
    name: &str,
    spec: &ProblemSpec,
    solution: &mut Option<Solution>,
) -> Result<MarkovPolicy, Failure> {
    Ok(match name {
        "sigma_star" => {
            if solution.is_none() {
                *solution = Some(solve_spec(spec)?);
            }
            solution.as_ref().expect("just solved").policy.clone()
        }
        "myopic" => myopic_policy(spec),
        "slide_only" => slide_only_policy(),
        "full_disclosure" => full_disclosure_policy(),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("reading policy {path}: {e}")))?;
            MarkovPolicy::from_json(&text)
                .map_err(|e| Failure::Validation(format!("policy {path}: {e}")))?
        }
    })
}

pub fn simulate(
    config: &Path,
    out: &Path,
    policy_name: &str,
    belief: f64,
    s: &SimSettings,
) -> Result<(), Failure> {
    let (spec, bytes) = load(config)?;
    let policy = resolve_policy(policy_name, &spec, &mut None)?;
    let cfg = s.resolve(&spec, belief)?;
    let res = markov_persuasion::simulate(&spec, &policy, &cfg).map_err(sim_failure)?;
    let mut run = RunOutput::create(out, "simulate", config, &bytes)?;
    run.param("policy", policy_name);
    run.param("sim", cfg);
    let csv = csv_bytes(|buf| res.write_calibration_csv(buf))?;
    run.write_json("simulation.json", &res)?;
    run.write("calibration.csv", &csv)?;
    run.finish()?;
    println!(
        "mean={} std_error={:e} tail_bound={:e} paths={}",
        res.mean_discounted_payoff, res.std_error, res.tail_bound, res.n_paths
    );
    Ok(())
}

pub fn compare(
    config: &Path,
    out: &Path,
    names: &[String],
    beliefs: &[f64],
    grid_gap: f64,
    tol: f64,
    s: &SimSettings,
) -> Result<(), Failure> {
    let (spec, bytes) = load(config)?;
    let mut solution = None;
    let policies = names
        .iter()
        .map(|n| Ok((n.clone(), resolve_policy(n, &spec, &mut solution)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let cfg = s.resolve(&spec, 0.5)?;
    let opts = CompareOptions {
        grid_gap,
        tol,
        ..CompareOptions::default()
    };
    let rows = compare_policies(&spec, &policies, &cfg, beliefs, &opts).map_err(sim_failure)?;
    let mut run = RunOutput::create(out, "compare", config, &bytes)?;
    run.param("policies", names);
    run.param("beliefs", beliefs);
    run.param("sim", cfg);
    run.param("options", opts);
    let csv = csv_bytes(|buf| write_comparison_csv(&rows, buf))?;
    run.write("comparison.csv", &csv)?;
    run.finish()?;
    let flagged: Vec<_> = rows.iter().filter(|r| r.flagged).collect();
    println!("rows={} flagged={}", rows.len(), flagged.len());
    for r in flagged {
        println!(
            "optimality violation: {} at {} (mean {})",
            r.policy, r.belief, r.sim_mean
        );
    }
    Ok(())
}

pub fn sweep(
    config: &Path,
    out: &Path,
    deltas: &[f64],
    grid_gap: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(), Failure> {
    let (spec, bytes) = load(config)?;
    let sol = solve_spec(&spec)?;
    let grid =
        BeliefGrid::new(&spec, grid_gap, &sol.policy.breakpoints()).map_err(oracle_failure)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let v = value_iteration(&spec, delta, &grid, tol, max_iter).map_err(oracle_failure)?;
        let w = evaluate_policy_discrete(&spec, &sol.policy, delta, &grid, tol, max_iter)
            .map_err(oracle_failure)?;
        rows.push((delta, v.sup_error(&sol), sup_error(&grid, &w.values, &sol)));
    }
    let mut run = RunOutput::create(out, "sweep", config, &bytes)?;
    run.param("deltas", deltas);
    run.param("grid_gap", grid_gap);
    run.param("tol", tol);
    run.param("max_iter", max_iter);
    let csv = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["delta", "value_error", "policy_error"])?;
        for (d, ev, ew) in &rows {
            w.write_record([d.to_string(), ev.to_string(), ew.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write("sweep.csv", &csv)?;
    run.finish()?;
    for (d, ev, ew) in &rows {
        println!("delta={d} value_error={ev:e} policy_error={ew:e}");
    }
    Ok(())
}

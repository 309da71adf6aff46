//! Monte-Carlo simulation of the joint state/message/belief process in
//! discrete time.
//!
//! Each period runs in a fixed order. First the state switches, then the
//! public belief drifts. Next the policy acts on the drifted belief, drawing
//! a message conditional on the true state. Finally the period payoff
//! accrues at the resulting belief.
//!
//! Every path has its own ChaCha stream derived from the master seed.
//! Paths are processed in fixed-size chunks and combined in path order.
//! Results therefore do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{make_split_signal, DiscreteDrift};
use crate::model::ProblemSpec;
use crate::oracle::{evaluate_policy_discrete, BeliefGrid, OracleError};
use crate::policy::{MarkovPolicy, PolicyAction, PolicyError};
use crate::solver::{solve, SolveError};

/// Calibration bins are centered on `k / CALIBRATION_STEPS`; the two end bins
/// are half as wide so that beliefs 0 and 1 sit at bin centers.
pub const CALIBRATION_STEPS: usize = 20;
pub const CALIBRATION_BINS: usize = CALIBRATION_STEPS + 1;
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("tail bound {tail:e} exceeds the requested cap {cap:e}; increase the horizon")]
    HorizonTooShort { tail: f64, cap: f64 },
    #[error("drifted belief {belief} left the split bracket [{low}, {high}]")]
    BracketViolation { belief: f64, low: f64, high: f64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub delta: f64,
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub initial_belief: f64,
    /// Reject configurations whose truncation tail exceeds this bound.
    #[serde(default)]
    pub max_tail: Option<f64>,
}

impl SimConfig {
    /// Default period length `0.01 / (lambda0 + lambda1 + r)`.
    pub fn default_delta(spec: &ProblemSpec) -> f64 {
        0.01 / (spec.rates.total() + spec.r())
    }

    /// `e^{-r dt H} (max level - min level)`.
    pub fn tail_bound(&self, spec: &ProblemSpec) -> f64 {
        (-spec.r() * self.delta * self.horizon as f64).exp() * spec.payoff.range()
    }

    fn check(&self, spec: &ProblemSpec) -> Result<f64, SimError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(SimError::BadConfig(format!("delta = {}", self.delta)));
        }
        if self.n_paths == 0 {
            return Err(SimError::BadConfig("n_paths must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_belief) {
            return Err(SimError::BadConfig(format!(
                "initial belief {} outside [0, 1]",
                self.initial_belief
            )));
        }
        let tail = self.tail_bound(spec);
        if let Some(cap) = self.max_tail {
            if tail > cap {
                return Err(SimError::HorizonTooShort { tail, cap });
            }
        }
        Ok(tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    /// Largest distance from the center to a belief in the bin.
    pub half_width: f64,
    /// Observations whose belief fell in the bin.
    pub count: u64,
    /// Empirical frequency of state 1 among them (`None` when empty).
    pub frequency: Option<f64>,
    /// Mean belief of the observations (`None` when empty).
    pub mean_belief: Option<f64>,
}

impl CalibrationBin {
    /// Binomial standard error of the frequency at the bin center.
    pub fn standard_error(&self) -> f64 {
        (self.center * (1.0 - self.center) / self.count as f64).sqrt()
    }

    /// `|frequency - center| <= 3 SE + half-width`; empty bins pass.
    pub fn passes(&self) -> bool {
        self.frequency.is_none_or(|f| {
            (f - self.center).abs() <= 3.0 * self.standard_error() + self.half_width
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_discounted_payoff: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub tail_bound: f64,
    pub calibration_table: Vec<CalibrationBin>,
}

impl SimResult {
    /// Bins with at least `min_count` observations that fail the 3-SE test.
    pub fn calibration_failures(&self, min_count: u64) -> Vec<CalibrationBin> {
        self.calibration_table
            .iter()
            .filter(|b| b.count >= min_count && !b.passes())
            .copied()
            .collect()
    }

    pub fn write_calibration_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "bin_lo",
            "bin_hi",
            "center",
            "half_width",
            "count",
            "frequency",
            "mean_belief",
        ])?;
        for b in &self.calibration_table {
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.center.to_string(),
                b.half_width.to_string(),
                b.count.to_string(),
                b.frequency.map(|x| x.to_string()).unwrap_or_default(),
                b.mean_belief.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Debug, Clone)]
struct ChunkOut {
    payoffs: Vec<f64>,
    counts: [u64; CALIBRATION_BINS],
    ones: [u64; CALIBRATION_BINS],
    belief_sums: [f64; CALIBRATION_BINS],
}

/// Precomputed per-run quantities shared by all paths.
struct Kernel<'a> {
    spec: &'a ProblemSpec,
    policy: &'a MarkovPolicy,
    drift: DiscreteDrift,
    switch0: f64,
    switch1: f64,
    beta: f64,
    weight: f64,
    horizon: usize,
    p0: f64,
    seed: u64,
}

#[inline]
fn bin_of(p: f64) -> usize {
    ((p * CALIBRATION_STEPS as f64 + 0.5) as usize).min(CALIBRATION_BINS - 1)
}

impl Kernel<'_> {
    fn run_path(&self, index: u64, out: &mut ChunkOut) -> Result<f64, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let mut state: u8 = u8::from(rng.random::<f64>() < self.p0);
        let mut belief = self.p0;
        let mut disc = self.weight;
        let mut total = Sum::default();
        for _ in 0..self.horizon {
            let switch = if state == 1 {
                self.switch1
            } else {
                self.switch0
            };
            if rng.random::<f64>() < switch {
                state ^= 1;
            }
            belief = self.drift.apply(belief);
            if let PolicyAction::Split {
                low_target,
                high_target,
            } = self.policy.action_at(belief)?
            {
                let sig = make_split_signal(belief, low_target, high_target).map_err(|_| {
                    SimError::BracketViolation {
                        belief,
                        low: low_target,
                        high: high_target,
                    }
                })?;
                belief = if rng.random::<f64>() < sig.prob_high_given(state) {
                    high_target
                } else {
                    low_target
                };
            }
            total.add(disc * self.spec.payoff.eval_unchecked(belief));
            disc *= self.beta;
            let b = bin_of(belief);
            out.counts[b] += 1;
            out.ones[b] += u64::from(state);
            out.belief_sums[b] += belief;
        }
        Ok(total.value())
    }

    fn run_chunk(&self, start: usize, end: usize) -> Result<ChunkOut, SimError> {
        let mut out = ChunkOut {
            payoffs: Vec::with_capacity(end - start),
            counts: [0; CALIBRATION_BINS],
            ones: [0; CALIBRATION_BINS],
            belief_sums: [0.0; CALIBRATION_BINS],
        };
        for i in start..end {
            let x = self.run_path(i as u64, &mut out)?;
            out.payoffs.push(x);
        }
        Ok(out)
    }
}

pub fn simulate(
    spec: &ProblemSpec,
    policy: &MarkovPolicy,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    let tail_bound = cfg.check(spec)?;
    let (beta, weight) = crate::oracle::discount_weights(spec, cfg.delta);
    let (switch0, switch1) = spec.rates.switch_probs(cfg.delta);
    let kernel = Kernel {
        spec,
        policy,
        drift: DiscreteDrift::new(&spec.rates, cfg.delta),
        switch0,
        switch1,
        beta,
        weight,
        horizon: cfg.horizon,
        p0: cfg.initial_belief,
        seed: cfg.seed,
    };
    let n = cfg.n_paths;
    let chunks: Vec<(usize, usize)> = (0..n)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(n)))
        .collect();
    let outs: Vec<ChunkOut> = chunks
        .par_iter()
        .map(|&(s, e)| kernel.run_chunk(s, e))
        .collect::<Result<_, _>>()?;

    // mean and variance of deviations from the first path, so identical
    // paths give exactly zero spread
    let x0 = outs[0].payoffs[0];
    let mut dev = Sum::default();
    for o in &outs {
        for &x in &o.payoffs {
            dev.add(x - x0);
        }
    }
    let mean_dev = dev.value() / n as f64;
    let mut sq = Sum::default();
    for o in &outs {
        for &x in &o.payoffs {
            let d = (x - x0) - mean_dev;
            sq.add(d * d);
        }
    }
    let var = if n > 1 {
        sq.value() / (n - 1) as f64
    } else {
        0.0
    };
    let std_error = (var / n as f64).sqrt();

    let mut counts = [0u64; CALIBRATION_BINS];
    let mut ones = [0u64; CALIBRATION_BINS];
    let mut beliefs = [Sum::default(); CALIBRATION_BINS];
    for o in &outs {
        for b in 0..CALIBRATION_BINS {
            counts[b] += o.counts[b];
            ones[b] += o.ones[b];
            beliefs[b].add(o.belief_sums[b]);
        }
    }
    let step = CALIBRATION_STEPS as f64;
    let calibration_table = (0..CALIBRATION_BINS)
        .map(|b| {
            let center = b as f64 / step;
            let lo = if b == 0 { 0.0 } else { (b as f64 - 0.5) / step };
            let hi = if b == CALIBRATION_STEPS {
                1.0
            } else {
                (b as f64 + 0.5) / step
            };
            let c = counts[b] as f64;
            let filled = counts[b] > 0;
            CalibrationBin {
                lo,
                hi,
                center,
                half_width: (center - lo).max(hi - center),
                count: counts[b],
                frequency: filled.then(|| ones[b] as f64 / c),
                mean_belief: filled.then(|| beliefs[b].value() / c),
            }
        })
        .collect();

    Ok(SimResult {
        mean_discounted_payoff: x0 + mean_dev,
        std_error,
        n_paths: n,
        tail_bound,
        calibration_table,
    })
}

/// Settings of the discrete policy evaluation used by [`compare_policies`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub grid_gap: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Discretization allowance added to the optimality test.
    pub allowance: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            grid_gap: 1e-3,
            tol: 1e-9,
            max_iter: 10_000_000,
            allowance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub belief: f64,
    pub sim_mean: f64,
    pub sim_std_error: f64,
    pub tail_bound: f64,
    pub discrete_value: f64,
    pub solver_value: f64,
    /// Simulated mean exceeds the solver value beyond noise and allowance.
    pub flagged: bool,
}

pub fn compare_policies(
    spec: &ProblemSpec,
    policies: &[(String, MarkovPolicy)],
    cfg: &SimConfig,
    eval_points: &[f64],
    opts: &CompareOptions,
) -> Result<Vec<ComparisonRow>, SimError> {
    if policies.is_empty() {
        return Ok(Vec::new());
    }
    let solution = solve(spec)?;
    let mut rows = Vec::with_capacity(policies.len() * eval_points.len());
    for (name, policy) in policies {
        let grid = BeliefGrid::new(spec, opts.grid_gap, &policy.breakpoints())?;
        let eval =
            evaluate_policy_discrete(spec, policy, cfg.delta, &grid, opts.tol, opts.max_iter)?;
        for &p in eval_points {
            let run = SimConfig {
                initial_belief: p,
                ..*cfg
            };
            let res = simulate(spec, policy, &run)?;
            let solver_value = solution.value.eval(p)?;
            let bound = solver_value + 3.0 * res.std_error + res.tail_bound + opts.allowance;
            rows.push(ComparisonRow {
                policy: name.clone(),
                belief: p,
                sim_mean: res.mean_discounted_payoff,
                sim_std_error: res.std_error,
                tail_bound: res.tail_bound,
                discrete_value: eval.value_at(p),
                solver_value,
                flagged: res.mean_discounted_payoff > bound,
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: std::io::Write>(
    rows: &[ComparisonRow],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "belief",
        "sim_mean",
        "sim_std_error",
        "tail_bound",
        "discrete_value",
        "solver_value",
        "flagged",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.belief.to_string(),
            r.sim_mean.to_string(),
            r.sim_std_error.to_string(),
            r.tail_bound.to_string(),
            r.discrete_value.to_string(),
            r.solver_value.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Discrete-time dynamic-programming oracle.
//!
//! Values are indexed by the belief at the start of a period, before the
//! Markov transition. One period maps a start belief `p` to the drifted
//! belief `x = drift(p)`, lets the sender split `x` into Bayes-plausible
//! posteriors, pays `(1 - e^{-r dt}) u(posterior)` and continues from the
//! posterior. The Bellman operator is therefore
//!
//! ```text
//! T[v](p) = cav_y[ (1 - e^{-r dt}) u(y) + e^{-r dt} v(y) ](drift(p))
//! ```
//!
//! where the concave envelope is taken over grid points with the monotone
//! chain hull. Fixed policies are evaluated with the same timing but no
//! maximization.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{make_split_signal, DiscreteDrift};
use crate::hull::{upper_hull, HullView};
use crate::model::{cav_u, ProblemSpec};
use crate::policy::{MarkovPolicy, PolicyAction, PolicyError};
use crate::solver::Solution;

/// Offset of the extra sample placed on the open side of each interior cut.
pub const LEFT_LIMIT_OFFSET: f64 = 1e-12;
/// Grid points closer than this are merged.
pub const GRID_DEDUP_TOL: f64 = 1e-14;
/// Gap between `f` and its envelope below which a point counts as a vertex.
pub const ACTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("period length {0} must be positive and finite")]
    BadDelta(f64),
    #[error("grid gap {0} must lie in (0, 1]")]
    BadGap(f64),
    #[error("payoff interval [{lo}, {hi}) holds only {count} grid points (need 3)")]
    GridTooCoarse { lo: f64, hi: f64, count: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        values: Vec<f64>,
    },
    #[error("drifted belief {belief} left the split bracket [{low}, {high}]")]
    BracketViolation { belief: f64, low: f64, high: f64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Sorted belief grid containing every cut and a left-limit sample below
/// each interior cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefGrid {
    pub points: Vec<f64>,
    pub max_gap: f64,
}

impl BeliefGrid {
    pub fn new(spec: &ProblemSpec, max_gap: f64, extra: &[f64]) -> Result<Self, OracleError> {
        if !(max_gap > 0.0 && max_gap <= 1.0) {
            return Err(OracleError::BadGap(max_gap));
        }
        let n = (1.0 / max_gap).ceil() as usize;
        let cuts = spec.payoff.cuts();
        let mut points: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        points.extend_from_slice(cuts);
        points.extend(
            cuts[1..cuts.len() - 1]
                .iter()
                .map(|c| c - LEFT_LIMIT_OFFSET),
        );
        points.extend(extra.iter().copied().filter(|p| (0.0..=1.0).contains(p)));
        points.sort_by(f64::total_cmp);
        // keep exact cuts when merging near-duplicates
        let mut merged: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match merged.last_mut() {
                Some(last) if p - *last <= GRID_DEDUP_TOL => {
                    if cuts.contains(&p) {
                        *last = p;
                    }
                }
                _ => merged.push(p),
            }
        }
        let grid = Self {
            points: merged,
            max_gap,
        };
        for w in cuts.windows(2) {
            let count = grid
                .points
                .iter()
                .filter(|&&p| p >= w[0] && (p < w[1] || (w[1] == 1.0 && p == 1.0)))
                .count();
            if count < 3 {
                return Err(OracleError::GridTooCoarse {
                    lo: w[0],
                    hi: w[1],
                    count,
                });
            }
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Linear interpolation weights `(k, t)` with `x` in `[points[k], points[k+1]]`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let pts = &self.points;
        let n = pts.len();
        if x <= pts[0] {
            return (0, 0.0);
        }
        if x >= pts[n - 1] {
            return (n - 2, 1.0);
        }
        let k = pts.partition_point(|&p| p <= x) - 1;
        let t = (x - pts[k]) / (pts[k + 1] - pts[k]);
        (k, t)
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (k, t) = self.locate(x);
        values[k] + t * (values[k + 1] - values[k])
    }
}

fn check_delta(delta: f64) -> Result<(), OracleError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(OracleError::BadDelta(delta));
    }
    Ok(())
}

/// `(e^{-r dt}, 1 - e^{-r dt})`.
pub fn discount_weights(spec: &ProblemSpec, delta: f64) -> (f64, f64) {
    let x = -spec.r() * delta;
    (x.exp(), -x.exp_m1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub grid: BeliefGrid,
    pub values: Vec<f64>,
    pub delta: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm change of every iteration.
    pub residuals: Vec<f64>,
    /// `(1 - e^{-r dt}) u + e^{-r dt} v` on the grid at the final iterate.
    pub continuation: Vec<f64>,
    /// Hull vertices of `continuation`.
    pub hull: Vec<usize>,
}

/// Optimal action at a pre-message belief on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpAction {
    pub belief: f64,
    /// `None` when staying silent is optimal.
    pub split: Option<(f64, f64)>,
}

impl OracleResult {
    pub fn value_at(&self, p: f64) -> f64 {
        self.grid.interpolate(&self.values, p)
    }

    pub fn actions(&self) -> Vec<DpAction> {
        let view = HullView {
            xs: &self.grid.points,
            ys: &self.continuation,
            vertices: &self.hull,
        };
        self.grid
            .points
            .iter()
            .zip(&self.continuation)
            .map(|(&x, &f)| {
                let env = view.eval(x);
                let split = if env - f > ACTION_TOL {
                    Some(view.bracket(x))
                } else {
                    None
                };
                DpAction { belief: x, split }
            })
            .collect()
    }

    /// Largest `|v_dt - v_solver|` over the grid.
    pub fn sup_error(&self, solution: &Solution) -> f64 {
        sup_error(&self.grid, &self.values, solution)
    }

    pub fn write_csv<W: Write>(
        &self,
        spec: &ProblemSpec,
        solution: Option<&Solution>,
        out: W,
    ) -> Result<(), csv::Error> {
        let cav = cav_u(&spec.payoff);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["belief", "value", "u", "cav_u", "solver_value", "abs_error"])?;
        for (&p, &v) in self.grid.points.iter().zip(&self.values) {
            let u = spec.payoff.eval_unchecked(p);
            let (sv, err) = match solution {
                Some(s) => {
                    let sv = s.value.eval_unchecked(p);
                    (sv.to_string(), (v - sv).abs().to_string())
                }
                None => (String::new(), String::new()),
            };
            w.write_record([
                p.to_string(),
                v.to_string(),
                u.to_string(),
                cav.eval(p).to_string(),
                sv,
                err,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sup_error(grid: &BeliefGrid, values: &[f64], solution: &Solution) -> f64 {
    grid.points
        .iter()
        .zip(values)
        .map(|(&p, &v)| (v - solution.value.eval_unchecked(p)).abs())
        .fold(0.0, f64::max)
}

pub fn value_iteration(
    spec: &ProblemSpec,
    delta: f64,
    grid: &BeliefGrid,
    tol: f64,
    max_iter: usize,
) -> Result<OracleResult, OracleError> {
    check_delta(delta)?;
    let (beta, weight) = discount_weights(spec, delta);
    let drift = DiscreteDrift::new(&spec.rates, delta);
    let pts = &grid.points;
    let n = pts.len();
    let drifted: Vec<f64> = pts.iter().map(|&p| drift.apply(p)).collect();
    let flow: Vec<f64> = pts
        .iter()
        .map(|&p| weight * spec.payoff.eval_unchecked(p))
        .collect();

    let mut values = vec![spec.payoff.min_level(); n];
    let mut next = vec![0.0; n];
    let mut cont = vec![0.0; n];
    let mut hull = Vec::with_capacity(n);
    let mut residuals = Vec::new();
    let stop = tol * weight;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        for i in 0..n {
            cont[i] = flow[i] + beta * values[i];
        }
        upper_hull(pts, &cont, &mut hull);
        HullView {
            xs: pts,
            ys: &cont,
            vertices: &hull,
        }
        .eval_sorted(&drifted, &mut next);
        residual = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        iterations += 1;
        residuals.push(residual);
        if residual <= stop {
            break;
        }
    }
    if residual > stop {
        return Err(OracleError::NoConvergence {
            iterations,
            residual,
            values,
        });
    }
    for i in 0..n {
        cont[i] = flow[i] + beta * values[i];
    }
    upper_hull(pts, &cont, &mut hull);
    Ok(OracleResult {
        grid: grid.clone(),
        values,
        delta,
        iterations,
        residual,
        residuals,
        continuation: cont,
        hull,
    })
}

/// Values of a fixed policy on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub delta: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl PolicyEvaluation {
    pub fn value_at(&self, p: f64) -> f64 {
        let k = self
            .points
            .partition_point(|&x| x <= p)
            .clamp(1, self.points.len() - 1);
        let (x0, x1) = (self.points[k - 1], self.points[k]);
        let t = ((p - x0) / (x1 - x0)).clamp(0.0, 1.0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }
}

/// One row of the linear evaluation operator: `c + sum w_k v[idx_k]`.
#[derive(Debug, Clone, Copy)]
struct Row {
    constant: f64,
    idx: [usize; 4],
    w: [f64; 4],
}

pub fn evaluate_policy_discrete(
    spec: &ProblemSpec,
    policy: &MarkovPolicy,
    delta: f64,
    grid: &BeliefGrid,
    tol: f64,
    max_iter: usize,
) -> Result<PolicyEvaluation, OracleError> {
    check_delta(delta)?;
    let (beta, weight) = discount_weights(spec, delta);
    let drift = DiscreteDrift::new(&spec.rates, delta);
    let u = |p: f64| spec.payoff.eval_unchecked(p);

    let mut rows = Vec::with_capacity(grid.len());
    for &p in &grid.points {
        let x = drift.apply(p);
        let row = match policy.action_at(x)? {
            PolicyAction::Slide => {
                let (k, t) = grid.locate(x);
                Row {
                    constant: weight * u(x),
                    idx: [k, k + 1, 0, 0],
                    w: [beta * (1.0 - t), beta * t, 0.0, 0.0],
                }
            }
            PolicyAction::Split {
                low_target,
                high_target,
            } => {
                let sig = make_split_signal(x, low_target, high_target).map_err(|_| {
                    OracleError::BracketViolation {
                        belief: x,
                        low: low_target,
                        high: high_target,
                    }
                })?;
                let ph = sig.prob_high;
                let (ka, ta) = grid.locate(low_target);
                let (kb, tb) = grid.locate(high_target);
                Row {
                    constant: weight * ((1.0 - ph) * u(low_target) + ph * u(high_target)),
                    idx: [ka, ka + 1, kb, kb + 1],
                    w: [
                        beta * (1.0 - ph) * (1.0 - ta),
                        beta * (1.0 - ph) * ta,
                        beta * ph * (1.0 - tb),
                        beta * ph * tb,
                    ],
                }
            }
        };
        rows.push(row);
    }

    let n = grid.len();
    let mut values = vec![spec.payoff.min_level(); n];
    let mut next = vec![0.0; n];
    let stop = tol * weight;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut res = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            let mut acc = row.constant;
            for k in 0..4 {
                acc += row.w[k] * values[row.idx[k]];
            }
            next[i] = acc;
            res = res.max((acc - values[i]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        residual = res;
        iterations += 1;
        if residual <= stop {
            break;
        }
    }
    if residual > stop {
        return Err(OracleError::NoConvergence {
            iterations,
            residual,
            values,
        });
    }
    Ok(PolicyEvaluation {
        points: grid.points.clone(),
        values,
        delta,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical, validate_problem, Discounting, MarkovRates};
    use crate::policy::{full_disclosure_policy, myopic_policy, slide_only_policy};
    use crate::solver::solve;

    fn flat() -> ProblemSpec {
        validate_problem(
            MarkovRates::new(1.0, 2.0).unwrap(),
            Discounting::new(1.0).unwrap(),
            &[0.0, 1.0],
            &[1.5],
        )
        .unwrap()
    }

    #[test]
    fn grid_contains_cuts_and_left_limits() {
        let spec = canonical();
        let g = BeliefGrid::new(&spec, 0.05, &[0.333]).unwrap();
        for c in spec.payoff.cuts() {
            assert!(g.points.contains(c));
        }
        for c in [0.2, 0.4, 0.6, 0.8] {
            assert!(g.points.iter().any(|&p| p < c && c - p <= 2e-12));
            let below = g
                .points
                .iter()
                .copied()
                .filter(|&p| p < c)
                .fold(0.0, f64::max);
            assert_eq!(
                spec.payoff.eval_unchecked(below),
                spec.payoff.eval_unchecked(c - 0.01)
            );
        }
        assert!(g.points.contains(&0.333));
        assert!(g.points.windows(2).all(|w| w[1] - w[0] > GRID_DEDUP_TOL));
    }

    #[test]
    fn grid_too_coarse() {
        let spec = canonical();
        assert!(matches!(
            BeliefGrid::new(&spec, 0.5, &[]),
            Err(OracleError::GridTooCoarse { .. })
        ));
        assert!(matches!(
            BeliefGrid::new(&spec, 0.0, &[]),
            Err(OracleError::BadGap(_))
        ));
    }

    #[test]
    fn flat_payoff_fixed_point() {
        let spec = flat();
        let g = BeliefGrid::new(&spec, 0.1, &[]).unwrap();
        let res = value_iteration(&spec, 0.1, &g, 1e-9, 10).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.values.iter().all(|&v| (v - 1.5).abs() < 1e-15));
        let ev = evaluate_policy_discrete(&spec, &slide_only_policy(), 0.1, &g, 1e-9, 10).unwrap();
        assert!(ev.values.iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn no_convergence_reports_best_iterate() {
        let spec = canonical();
        let g = BeliefGrid::new(&spec, 0.01, &[]).unwrap();
        match value_iteration(&spec, 0.01, &g, 1e-9, 3) {
            Err(OracleError::NoConvergence {
                iterations, values, ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(values.len(), g.len());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            value_iteration(&spec, -1.0, &g, 1e-9, 3),
            Err(OracleError::BadDelta(_))
        ));
    }

    #[test]
    fn contraction_and_concavity() {
        let spec = canonical();
        let g = BeliefGrid::new(&spec, 0.005, &[]).unwrap();
        let delta = 0.05;
        let res = value_iteration(&spec, delta, &g, 1e-9, 100_000).unwrap();
        let beta = (-spec.r() * delta).exp();
        for w in res.residuals.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] <= (beta + 1e-9) * w[0] + 1e-15, "{} -> {}", w[0], w[1]);
            }
        }
        let p = &g.points;
        let v = &res.values;
        for i in 1..p.len() - 1 {
            let t = (p[i] - p[i - 1]) / (p[i + 1] - p[i - 1]);
            let chord = v[i - 1] + t * (v[i + 1] - v[i - 1]);
            assert!(v[i] >= chord - 1e-9, "not concave at {}", p[i]);
        }
    }

    #[test]
    fn value_dominates_every_policy() {
        let spec = canonical();
        let sol = solve(&spec).unwrap();
        let delta = 0.02;
        let g = BeliefGrid::new(&spec, 0.005, &sol.policy.breakpoints()).unwrap();
        let tol = 1e-11;
        let best = value_iteration(&spec, delta, &g, tol, 1_000_000).unwrap();
        for pol in [
            sol.policy.clone(),
            myopic_policy(&spec),
            slide_only_policy(),
            full_disclosure_policy(),
        ] {
            let ev = evaluate_policy_discrete(&spec, &pol, delta, &g, tol, 1_000_000).unwrap();
            for (a, b) in best.values.iter().zip(&ev.values) {
                assert!(*a >= b - 1e-8, "{a} < {b}");
            }
        }
    }

    #[test]
    fn csv_export_columns() {
        let spec = canonical();
        let sol = solve(&spec).unwrap();
        let g = BeliefGrid::new(&spec, 0.05, &[]).unwrap();
        let res = value_iteration(&spec, 0.05, &g, 1e-7, 100_000).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&spec, Some(&sol), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "belief,value,u,cav_u,solver_value,abs_error"
        );
        assert_eq!(text.lines().count(), g.len() + 1);
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(row.len(), 6);
        assert!((row[5] - (row[1] - row[4]).abs()).abs() < 1e-15);
    }

    #[test]
    fn split_outside_bracket_is_rejected() {
        use crate::policy::PolicyRegion;
        let spec = canonical();
        let g = BeliefGrid::new(&spec, 0.05, &[]).unwrap();
        // split targets only bracket the region up to the drifted belief, so
        // use a tiny bracket around a belief that drifts out of it
        let pol = MarkovPolicy {
            regions: vec![
                PolicyRegion::half_open(0.0, 0.9, PolicyAction::Slide),
                PolicyRegion::closed(
                    0.9,
                    1.0,
                    PolicyAction::Split {
                        low_target: 0.95,
                        high_target: 1.0,
                    },
                ),
            ],
            cutoffs: vec![],
        };
        assert!(matches!(
            evaluate_policy_discrete(&spec, &pol, 0.01, &g, 1e-6, 10),
            Err(OracleError::BracketViolation { .. })
        ));
    }
}

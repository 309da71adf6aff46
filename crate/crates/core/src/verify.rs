//! Self-consistency checks of a solved value function against the
//! characterization conditions of the continuous-time game.
//!
//! With `g(p) = mu (u(p) - v(p)) / (p - p*)` and `v'` the one-sided
//! derivative in the direction of the drift (right below `p*`, left above):
//!
//! * G1: `v(p*) >= u(p*)`;
//! * G2: `v'(p) (p - p*) + mu (v(p) - u(p)) >= 0` for `p != p*`;
//! * G3: `v'(p) = g(p)` at every extreme point of the hypograph.

use serde::{Deserialize, Serialize};

use crate::model::{ProblemSpec, STATIONARY_TIE_TOL};
use crate::solver::{PiecewiseValue, Side};

pub const G2_TOL: f64 = 1e-8;
pub const G3_TOL: f64 = 1e-8;
pub const CONTINUITY_TOL: f64 = 1e-10;
pub const CONCAVITY_TOL: f64 = 1e-8;
pub const MONOTONE_TOL: f64 = 1e-10;
pub const DEFAULT_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    G1 {
        value: f64,
        payoff: f64,
    },
    G2 {
        at: f64,
        residual: f64,
    },
    G3 {
        at: f64,
        derivative: f64,
        g: f64,
    },
    Continuity {
        at: f64,
        gap: f64,
    },
    Concavity {
        at: f64,
        increase: f64,
    },
    Monotonicity {
        at: f64,
        derivative: f64,
    },
    /// `v(p_j) < h_j` fails for an upper cut.
    BoundaryNotBelowLevel {
        at: f64,
        value: f64,
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub grid_points: usize,
    pub extreme_points: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count<F: Fn(&Violation) -> bool>(&self, pred: F) -> usize {
        self.violations.iter().filter(|v| pred(v)).count()
    }
}

pub fn verify_solution(spec: &ProblemSpec, v: &PiecewiseValue) -> Diagnostics {
    verify_solution_on(spec, v, DEFAULT_GRID)
}

pub fn verify_solution_on(spec: &ProblemSpec, v: &PiecewiseValue, grid: usize) -> Diagnostics {
    let mut diag = Diagnostics {
        grid_points: grid + 1,
        ..Default::default()
    };
    if v.segments.is_empty() {
        return diag;
    }
    let p_star = spec.p_star();
    let mu = spec.mu();
    let u = |p: f64| spec.payoff.eval_unchecked(p);
    let value = |p: f64| v.eval_unchecked(p);
    let near_star = |p: f64| (p - p_star).abs() <= STATIONARY_TIE_TOL;
    let drift_derivative = |p: f64| {
        let side = if p < p_star { Side::Right } else { Side::Left };
        v.derivative(p, side).expect("p in range")
    };

    // G1
    if value(p_star) < u(p_star) - G2_TOL {
        diag.violations.push(Violation::G1 {
            value: value(p_star),
            payoff: u(p_star),
        });
    }

    // continuity at junctions
    for w in v.segments.windows(2) {
        let at = w[1].lo;
        let gap = (w[0].value(at) - w[1].value(at)).abs();
        if !(gap <= CONTINUITY_TOL) {
            diag.violations.push(Violation::Continuity { at, gap });
        }
    }

    // G2, concavity and monotonicity on the grid, plus junctions
    let mut points: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    points.extend(v.junctions());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut prev_right: Option<(f64, f64)> = None;
    for &p in &points {
        let left = v.derivative(p, Side::Left).expect("p in range");
        let right = v.derivative(p, Side::Right).expect("p in range");
        if !near_star(p) {
            let d = drift_derivative(p);
            let residual = d * (p - p_star) + mu * (value(p) - u(p));
            if residual < -G2_TOL {
                diag.violations.push(Violation::G2 { at: p, residual });
            }
        }
        if right > left + CONCAVITY_TOL {
            diag.violations.push(Violation::Concavity {
                at: p,
                increase: right - left,
            });
        }
        if let Some((_, r_prev)) = prev_right {
            if left > r_prev + CONCAVITY_TOL {
                diag.violations.push(Violation::Concavity {
                    at: p,
                    increase: left - r_prev,
                });
            }
        }
        for d in [left, right] {
            if d < -MONOTONE_TOL {
                diag.violations.push(Violation::Monotonicity {
                    at: p,
                    derivative: d,
                });
                break;
            }
        }
        prev_right = Some((p, right));
    }

    // G3 at extreme points: 0, 1, every junction, every cut up to p_1
    let pay = &spec.payoff;
    let mut extreme: Vec<f64> = vec![0.0, 1.0];
    extreme.extend(v.junctions());
    let upto = pay.pivot_index() + 1;
    extreme.extend(pay.cuts().iter().take(upto + 1).copied());
    extreme.sort_by(f64::total_cmp);
    extreme.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    extreme.retain(|&p| !near_star(p));
    for &p in &extreme {
        let d = drift_derivative(p);
        let g = mu * (u(p) - value(p)) / (p - p_star);
        if !((d - g).abs() <= G3_TOL) {
            diag.violations.push(Violation::G3 {
                at: p,
                derivative: d,
                g,
            });
        }
    }
    diag.extreme_points = extreme;

    // v(p_j) < h_j for j >= 1
    let m_above = pay.m_above() as isize;
    for j in 1..m_above {
        let at = pay.cut(j);
        let level = pay.level(j);
        let val = value(at);
        if !(val < level) {
            diag.violations.push(Violation::BoundaryNotBelowLevel {
                at,
                value: val,
                level,
            });
        }
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical, validate_problem, Discounting, MarkovRates};
    use crate::solver::{solve, SegmentKind};

    #[test]
    fn canonical_is_clean() {
        let spec = canonical();
        let sol = solve(&spec).unwrap();
        let d = verify_solution(&spec, &sol.value);
        assert!(d.is_clean(), "{:?}", d.violations);
        let q = sol.cutoffs()[0].value;
        for p in [0.0, 0.2, 0.4, 0.6, q, 0.8, 1.0] {
            assert!(
                d.extreme_points.iter().any(|e| (e - p).abs() < 1e-14),
                "missing {p}"
            );
        }
    }

    #[test]
    fn perturbed_segment_is_flagged() {
        let spec = canonical();
        let sol = solve(&spec).unwrap();
        let mut v = sol.value.clone();
        // tilt the segment on [0.2, 0.4] about its left end
        let seg = v.segments.iter_mut().find(|s| s.lo == 0.2).unwrap();
        if let SegmentKind::Linear { intercept, slope } = &mut seg.kind {
            *slope += 0.05;
            *intercept -= 0.05 * 0.2;
        }
        let d = verify_solution(&spec, &v);
        assert!(
            d.count(|x| matches!(x, Violation::G3 { at, .. } if (*at - 0.2).abs() < 1e-12)) == 1
        );
        assert!(d.count(|x| matches!(x, Violation::Continuity { .. })) >= 1);
    }

    #[test]
    fn flat_payoff_is_clean() {
        let spec = validate_problem(
            MarkovRates::new(1.0, 3.0).unwrap(),
            Discounting::new(2.0).unwrap(),
            &[0.0, 1.0],
            &[0.7],
        )
        .unwrap();
        let sol = solve(&spec).unwrap();
        assert!(verify_solution(&spec, &sol.value).is_clean());
    }

    #[test]
    fn g_matches_corner_derivatives() {
        use crate::model::g_eval;
        let spec = canonical();
        let sol = solve(&spec).unwrap();
        let v = |p| sol.value.eval_unchecked(p);
        let u = |p| spec.payoff.eval_unchecked(p);
        // one-sided finite differences as the independent derivative
        let h = 1e-7;
        let fd_left = (v(1.0) - v(1.0 - h)) / h;
        let fd_right = (v(h) - v(0.0)) / h;
        assert!((g_eval(&spec, v, u, 1.0).unwrap() - fd_left).abs() < 1e-5);
        assert!((g_eval(&spec, v, u, 0.0).unwrap() - fd_right).abs() < 1e-5);
        assert!(
            (g_eval(&spec, v, u, 1.0).unwrap() - sol.value.derivative(1.0, Side::Left).unwrap())
                .abs()
                < 1e-12
        );
    }
}

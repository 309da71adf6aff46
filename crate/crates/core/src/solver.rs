//! Closed-form continuous-time value function and optimal policy.
//!
//! The value is assembled interval by interval, starting from the
//! continuity interval `[p_0, p_1]` that holds the stationary belief:
//!
//! * on `[p_0, p_1]` the sender splits between the endpoints, giving a line;
//! * below `p_0` each interval is split between its endpoints and the value
//!   at the lower cut follows from the one above it;
//! * above `p_1` each interval `[p_j, p_{j+1}]` starts with a slide arc
//!   `h_j + K (p - p*)^(-mu)` and switches at a cutoff `q_j` to a split
//!   between `q_j` and `p_{j+1}`. The cutoff is the unique point where the
//!   tangent of the arc, extended to `p_{j+1}`, meets the corner condition
//!   `v'(p_{j+1}) = mu (h_{j+1} - v(p_{j+1})) / (p_{j+1} - p*)`;
//! * the top interval is a single slide arc.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{split_line, DynamicsError};
use crate::model::ProblemSpec;
use crate::policy::{Cutoff, MarkovPolicy, PolicyAction, PolicyError, PolicyRegion};

/// Offset of the cutoff search bracket from the interval ends.
pub const ROOT_BRACKET_EPS: f64 = 1e-10;
/// Stated absolute tolerance for the cutoff; the bisection runs until the
/// bracket cannot be halved any further, which is tighter.
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;
/// Number of residual samples used to count sign changes.
const ROOT_SCAN_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no sign change of the smooth-pasting residual on interval {interval} ({lo}, {hi})")]
    NoRoot { interval: isize, lo: f64, hi: f64 },
    #[error("smooth-pasting residual changes sign {count} times on interval {interval}")]
    MultiRoot { interval: isize, count: usize },
    #[error("value {value} at p_{interval} is not below the level {level}")]
    BadBoundary {
        interval: isize,
        value: f64,
        level: f64,
    },
    #[error("interval index {0} outside the upper range")]
    BadInterval(isize),
    #[error("belief {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmentKind {
    /// `intercept + slope * p`.
    Linear { intercept: f64, slope: f64 },
    /// `level + coeff * (p - center)^exponent`, with `exponent = -mu`.
    SlideArc {
        level: f64,
        coeff: f64,
        center: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSegment {
    pub lo: f64,
    pub hi: f64,
    pub kind: SegmentKind,
}

impl ValueSegment {
    pub fn linear_through(lo: f64, hi: f64, v_lo: f64, v_hi: f64) -> Self {
        let slope = (v_hi - v_lo) / (hi - lo);
        Self {
            lo,
            hi,
            kind: SegmentKind::Linear {
                intercept: v_lo - slope * lo,
                slope,
            },
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        match self.kind {
            SegmentKind::Linear { intercept, slope } => intercept + slope * p,
            SegmentKind::SlideArc {
                level,
                coeff,
                center,
                exponent,
            } => level + coeff * (p - center).powf(exponent),
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self.kind {
            SegmentKind::Linear { slope, .. } => slope,
            SegmentKind::SlideArc {
                coeff,
                center,
                exponent,
                ..
            } => coeff * exponent * (p - center).powf(exponent - 1.0),
        }
    }
}

/// The value function as an ordered cover of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseValue {
    pub segments: Vec<ValueSegment>,
}

impl PiecewiseValue {
    fn segment_index(&self, p: f64, side: Side) -> usize {
        let n = self.segments.len();
        let k = match side {
            // first segment with hi >= p
            Side::Left => self.segments.partition_point(|s| s.hi < p),
            // first segment with hi > p
            Side::Right => self.segments.partition_point(|s| s.hi <= p),
        };
        k.min(n - 1)
    }

    pub fn eval(&self, p: f64) -> Result<f64, SolveError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SolveError::OutOfRange(p));
        }
        Ok(self.eval_unchecked(p))
    }

    pub fn eval_unchecked(&self, p: f64) -> f64 {
        self.segments[self.segment_index(p, Side::Left)].value(p)
    }

    /// One-sided derivative. At 0 and 1 only the inner side exists and is
    /// returned for either request.
    pub fn derivative(&self, p: f64, side: Side) -> Result<f64, SolveError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SolveError::OutOfRange(p));
        }
        let side = match side {
            Side::Left if p <= self.segments[0].lo => Side::Right,
            s => s,
        };
        Ok(self.segments[self.segment_index(p, side)].derivative(p))
    }

    /// Interior segment boundaries.
    pub fn junctions(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.lo).collect()
    }
}

pub fn eval_value(v: &PiecewiseValue, p: f64) -> Result<f64, SolveError> {
    v.eval(p)
}

pub fn eval_derivative(v: &PiecewiseValue, p: f64, side: Side) -> Result<f64, SolveError> {
    v.derivative(p, side)
}

/// Solved game: value and optimal policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub p_star: f64,
    pub mu: f64,
    pub value: PiecewiseValue,
    pub policy: MarkovPolicy,
}

impl Solution {
    pub fn cutoffs(&self) -> &[Cutoff] {
        &self.policy.cutoffs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Result of the center step.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterPiece {
    pub segment: ValueSegment,
    pub regions: Vec<PolicyRegion>,
}

pub fn solve_center(spec: &ProblemSpec) -> Result<CenterPiece, SolveError> {
    let pay = &spec.payoff;
    let p0 = pay.cut(0);
    let p1 = pay.cut(1);
    let h0 = pay.level(0);
    let top = pay.m_above() == 1;
    let h1 = if top { h0 } else { pay.level(1) };
    let (intercept, slope) = split_line(spec, p0, p1, h0, h1)?;
    let segment = ValueSegment {
        lo: p0,
        hi: p1,
        kind: SegmentKind::Linear { intercept, slope },
    };
    let split = PolicyAction::Split {
        low_target: p0,
        high_target: p1,
    };
    let regions = if top {
        // u is constant on [p_0, 1]; silence keeps the belief there
        vec![PolicyRegion::closed(p0, p1, PolicyAction::Slide)]
    } else if spec.stationary_at_cut() {
        vec![
            PolicyRegion::closed(p0, p0, PolicyAction::Slide),
            PolicyRegion::open(p0, p1, split),
        ]
    } else {
        vec![PolicyRegion::half_open(p0, p1, split)]
    };
    Ok(CenterPiece { segment, regions })
}

/// Value at the lower end of a split toward `p_upper`, given the value there.
fn split_down_step(
    spec: &ProblemSpec,
    p_upper: f64,
    p_lower: f64,
    u_lower: f64,
    v_upper: f64,
) -> f64 {
    let mu = spec.mu();
    let p_star = spec.p_star();
    let gap = mu * (p_upper - p_lower);
    let denom = p_star - p_lower + gap;
    gap / denom * u_lower + (p_star - p_lower) / denom * v_upper
}

/// Intervals below `p_0`, in increasing order of belief.
pub fn solve_below(spec: &ProblemSpec, v_at_p0: f64) -> (Vec<ValueSegment>, Vec<PolicyRegion>) {
    let pay = &spec.payoff;
    let m = pay.m_below() as isize;
    let mut segments = Vec::with_capacity(m as usize);
    let mut regions = Vec::with_capacity(m as usize);
    let mut v_upper = v_at_p0;
    for j in 0..m {
        let upper = pay.cut(-j);
        let lower = pay.cut(-j - 1);
        let v_lower = split_down_step(spec, upper, lower, pay.level(-j - 1), v_upper);
        segments.push(ValueSegment::linear_through(lower, upper, v_lower, v_upper));
        regions.push(PolicyRegion::half_open(
            lower,
            upper,
            PolicyAction::Split {
                low_target: lower,
                high_target: upper,
            },
        ));
        v_upper = v_lower;
    }
    segments.reverse();
    regions.reverse();
    (segments, regions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbovePiece {
    pub segments: Vec<ValueSegment>,
    pub regions: Vec<PolicyRegion>,
    pub cutoff: Option<f64>,
    /// Value at `p_{j+1}`; `None` for the top interval.
    pub v_next: Option<f64>,
}

/// Slide arc on `[p_j, ...)` through `(p_j, v_at_pj)`.
fn slide_arc(spec: &ProblemSpec, j: isize, v_at_pj: f64, hi: f64) -> ValueSegment {
    let pay = &spec.payoff;
    let p_star = spec.p_star();
    let mu = spec.mu();
    let pj = pay.cut(j);
    let h = pay.level(j);
    ValueSegment {
        lo: pj,
        hi,
        kind: SegmentKind::SlideArc {
            level: h,
            coeff: (v_at_pj - h) * (pj - p_star).powf(mu),
            center: p_star,
            exponent: -mu,
        },
    }
}

/// Smooth-pasting residual for the arc `arc` against the next cut.
fn pasting_residual(
    arc: &ValueSegment,
    next_cut: f64,
    next_level: f64,
    p_star: f64,
    mu: f64,
) -> impl Fn(f64) -> f64 + '_ {
    move |q: f64| {
        let v = arc.value(q);
        let dv = arc.derivative(q);
        v + dv * (next_cut - q) - next_level + dv * (next_cut - p_star) / mu
    }
}

/// Bisection to the limit of floating-point resolution (or `ROOT_MAX_ITER`).
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn solve_above_interval(
    spec: &ProblemSpec,
    j: isize,
    v_at_pj: f64,
) -> Result<AbovePiece, SolveError> {
    let pay = &spec.payoff;
    let m_above = pay.m_above() as isize;
    if j < 1 || j > m_above - 1 {
        return Err(SolveError::BadInterval(j));
    }
    let h = pay.level(j);
    if !(v_at_pj < h) {
        return Err(SolveError::BadBoundary {
            interval: j,
            value: v_at_pj,
            level: h,
        });
    }
    let pj = pay.cut(j);
    let next = pay.cut(j + 1);

    if j == m_above - 1 {
        let arc = slide_arc(spec, j, v_at_pj, next);
        return Ok(AbovePiece {
            segments: vec![arc],
            regions: vec![PolicyRegion::closed(pj, next, PolicyAction::Slide)],
            cutoff: None,
            v_next: None,
        });
    }

    let p_star = spec.p_star();
    let mu = spec.mu();
    let next_level = pay.level(j + 1);
    let arc_full = slide_arc(spec, j, v_at_pj, next);
    let residual = pasting_residual(&arc_full, next, next_level, p_star, mu);

    let lo = pj + ROOT_BRACKET_EPS;
    let hi = next - ROOT_BRACKET_EPS;
    let mut sign_changes = 0usize;
    let mut bracket = None;
    let mut prev_x = lo;
    let mut prev_f = residual(lo);
    for k in 1..=ROOT_SCAN_POINTS {
        let x = lo + (hi - lo) * k as f64 / ROOT_SCAN_POINTS as f64;
        let fx = residual(x);
        if (prev_f > 0.0) != (fx > 0.0) || prev_f == 0.0 {
            sign_changes += 1;
            bracket.get_or_insert((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    let (a, b) = match (sign_changes, bracket) {
        (1, Some(br)) => br,
        (0, _) => {
            return Err(SolveError::NoRoot {
                interval: j,
                lo,
                hi,
            })
        }
        (count, _) => return Err(SolveError::MultiRoot { interval: j, count }),
    };
    let q = bisect(&residual, a, b);

    let v_q = arc_full.value(q);
    let slope = arc_full.derivative(q);
    let v_next = v_q + slope * (next - q);
    let arc = ValueSegment { hi: q, ..arc_full };
    let line = ValueSegment {
        lo: q,
        hi: next,
        kind: SegmentKind::Linear {
            intercept: v_q - slope * q,
            slope,
        },
    };
    Ok(AbovePiece {
        segments: vec![arc, line],
        regions: vec![
            PolicyRegion::closed(pj, q, PolicyAction::Slide),
            PolicyRegion::open(
                q,
                next,
                PolicyAction::Split {
                    low_target: q,
                    high_target: next,
                },
            ),
        ],
        cutoff: Some(q),
        v_next: Some(v_next),
    })
}

pub fn solve(spec: &ProblemSpec) -> Result<Solution, SolveError> {
    let center = solve_center(spec)?;
    let p0 = center.segment.lo;
    let v_p0 = if spec.stationary_at_cut() {
        spec.payoff.level(0)
    } else {
        center.segment.value(p0)
    };
    let (mut segments, mut regions) = solve_below(spec, v_p0);
    let mut v_upper = center.segment.value(center.segment.hi);
    segments.push(center.segment);
    regions.extend(center.regions);

    let mut cutoffs = Vec::new();
    let m_above = spec.payoff.m_above() as isize;
    for j in 1..m_above {
        let piece = solve_above_interval(spec, j, v_upper)?;
        segments.extend(piece.segments);
        regions.extend(piece.regions);
        if let Some(q) = piece.cutoff {
            cutoffs.push(Cutoff {
                interval: j,
                value: q,
            });
        }
        if let Some(v) = piece.v_next {
            v_upper = v;
        }
    }
    // the region ending at the top slide interval must leave its right end open
    if let Some(last) = regions.last_mut() {
        last.hi_closed = true;
    }

    let policy = MarkovPolicy::new(regions, cutoffs)?;
    Ok(Solution {
        p_star: spec.p_star(),
        mu: spec.mu(),
        value: PiecewiseValue { segments },
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical, validate_problem, Discounting, MarkovRates};

    fn spec(l0: f64, l1: f64, r: f64, cuts: &[f64], levels: &[f64]) -> ProblemSpec {
        validate_problem(
            MarkovRates::new(l0, l1).unwrap(),
            Discounting::new(r).unwrap(),
            cuts,
            levels,
        )
        .unwrap()
    }

    const CANON_CUTS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    const CANON_LEVELS: [f64; 5] = [0.0, 0.5, 0.8, 0.95, 1.0];
    /// Root of the pasting residual on [0.6, 0.8], computed independently
    /// with 40-digit arithmetic.
    const CANON_Q1: f64 = 0.662_236_859_123_110_8;

    #[test]
    fn center_canonical() {
        let c = solve_center(&canonical()).unwrap();
        let seg = c.segment;
        assert!((seg.value(0.4) - 0.85).abs() < 1e-12);
        assert!((seg.value(0.5) - 0.875).abs() < 1e-12);
        assert!((seg.value(0.6) - 0.9).abs() < 1e-12);
        assert!((seg.derivative(0.5) - 0.25).abs() < 1e-12);
        assert_eq!(c.regions.len(), 1);
    }

    #[test]
    fn center_with_stationary_at_cut() {
        let s = spec(2.0, 3.0, 1.0, &CANON_CUTS, &CANON_LEVELS);
        let mu = s.mu();
        let sol = solve(&s).unwrap();
        assert_eq!(sol.value.eval(0.4).unwrap(), 0.8);
        let want = (0.8 + mu * 0.95) / (1.0 + mu);
        assert!((sol.value.eval(0.6).unwrap() - want).abs() < 1e-12);
        assert_eq!(sol.policy.action_at(0.4).unwrap(), PolicyAction::Slide);
        assert_eq!(
            sol.policy.action_at(0.45).unwrap(),
            PolicyAction::Split {
                low_target: 0.4,
                high_target: 0.6
            }
        );
    }

    #[test]
    fn below_canonical() {
        let (segs, regs) = solve_below(&canonical(), 0.85);
        assert_eq!(segs.len(), 2);
        let v02 = segs[1].value(0.2);
        assert!((v02 - 0.7625).abs() < 1e-12);
        let v0 = segs[0].value(0.0);
        // (0.1/0.6) * 0 + (0.5/0.6) * 0.7625
        assert!((v0 - 0.5 / 0.6 * 0.7625).abs() < 1e-12);
        assert!((v0 - 0.635_417).abs() < 1e-6);
        assert_eq!(regs[0].lo, 0.0);
        assert_eq!(regs[1].hi, 0.4);
    }

    #[test]
    fn below_empty_when_p0_is_zero() {
        let s = spec(1.0, 1.0, 1.0, &[0.0, 0.6, 1.0], &[0.0, 1.0]);
        assert_eq!(s.payoff.m_below(), 0);
        let (segs, regs) = solve_below(&s, 0.4);
        assert!(segs.is_empty() && regs.is_empty());
    }

    #[test]
    fn above_canonical_first_interval() {
        let s = canonical();
        let piece = solve_above_interval(&s, 1, 0.9).unwrap();
        let q = piece.cutoff.unwrap();
        assert!((q - CANON_Q1).abs() < 1e-12, "q1 = {q}");
        match piece.segments[0].kind {
            SegmentKind::SlideArc { coeff, .. } => {
                assert!((coeff - (-0.05 * 0.1f64.sqrt())).abs() < 1e-15);
            }
            _ => panic!("expected an arc"),
        }
        // v(0.8) from the 40-digit reference computation
        assert!((piece.v_next.unwrap() - 0.927_411_643_373_198).abs() < 1e-12);
    }

    #[test]
    fn above_top_interval_is_slide() {
        let s = canonical();
        let v08 = solve_above_interval(&s, 1, 0.9).unwrap().v_next.unwrap();
        let top = solve_above_interval(&s, 2, v08).unwrap();
        assert!(top.cutoff.is_none() && top.v_next.is_none());
        assert_eq!(
            top.regions,
            vec![PolicyRegion::closed(0.8, 1.0, PolicyAction::Slide)]
        );
        let k2 = (v08 - 1.0) * 0.3f64.sqrt();
        let v1 = 1.0 + k2 * 0.5f64.powf(-0.5);
        assert!((top.segments[0].value(1.0) - v1).abs() < 1e-14);
        assert!((v1 - 0.943_773_300_731_166).abs() < 1e-12);
    }

    #[test]
    fn above_rejects_bad_boundary() {
        let s = canonical();
        assert!(matches!(
            solve_above_interval(&s, 1, 0.95),
            Err(SolveError::BadBoundary { .. })
        ));
        assert!(matches!(
            solve_above_interval(&s, 0, 0.5),
            Err(SolveError::BadInterval(0))
        ));
        assert!(matches!(
            solve_above_interval(&s, 3, 0.5),
            Err(SolveError::BadInterval(3))
        ));
    }

    #[test]
    fn solve_canonical_values() {
        let sol = solve(&canonical()).unwrap();
        let v = &sol.value;
        for (p, want) in [(0.2, 0.7625), (0.4, 0.85), (0.5, 0.875), (0.6, 0.9)] {
            assert!((v.eval(p).unwrap() - want).abs() < 1e-12, "v({p})");
        }
        assert!((v.eval(0.0).unwrap() - 0.635_416_666_666_666_7).abs() < 1e-12);
        assert!((v.eval(0.62).unwrap() - 0.904_356_453_541_236).abs() < 1e-12);
        assert_eq!(sol.cutoffs().len(), 1);
        assert_eq!(sol.cutoffs()[0].interval, 1);
        assert!((sol.cutoffs()[0].value - CANON_Q1).abs() < 1e-12);
    }

    #[test]
    fn canonical_policy_shape() {
        let sol = solve(&canonical()).unwrap();
        let q = sol.cutoffs()[0].value;
        let pol = &sol.policy;
        let split = |a, b| PolicyAction::Split {
            low_target: a,
            high_target: b,
        };
        assert_eq!(pol.action_at(0.1).unwrap(), split(0.0, 0.2));
        assert_eq!(pol.action_at(0.3).unwrap(), split(0.2, 0.4));
        assert_eq!(pol.action_at(0.5).unwrap(), split(0.4, 0.6));
        assert_eq!(pol.action_at(0.6).unwrap(), PolicyAction::Slide);
        assert_eq!(pol.action_at(q).unwrap(), PolicyAction::Slide);
        assert_eq!(pol.action_at(0.7).unwrap(), split(q, 0.8));
        assert_eq!(pol.action_at(0.8).unwrap(), PolicyAction::Slide);
        assert_eq!(pol.action_at(1.0).unwrap(), PolicyAction::Slide);
    }

    #[test]
    fn derivatives_at_junctions() {
        let sol = solve(&canonical()).unwrap();
        let v = &sol.value;
        let q = sol.cutoffs()[0].value;
        let l = v.derivative(q, Side::Left).unwrap();
        let r = v.derivative(q, Side::Right).unwrap();
        assert!((l - r).abs() < 1e-8);
        let l = v.derivative(0.6, Side::Left).unwrap();
        let r = v.derivative(0.6, Side::Right).unwrap();
        assert!((l - 0.25).abs() < 1e-12);
        // -mu K1 (0.1)^{-1.5}
        let k1 = -0.05 * 0.1f64.sqrt();
        assert!((r - (-0.5 * k1 * 0.1f64.powf(-1.5))).abs() < 1e-12);
        assert!((r - 0.25).abs() < 1e-12);
        assert!(matches!(
            v.derivative(1.1, Side::Left),
            Err(SolveError::OutOfRange(_))
        ));
        assert!(matches!(v.eval(-0.1), Err(SolveError::OutOfRange(_))));
    }

    #[test]
    fn single_discontinuity_has_no_cutoffs() {
        let s = spec(1.0, 1.0, 1.0, &[0.0, 0.7, 1.0], &[0.0, 1.0]);
        let sol = solve(&s).unwrap();
        assert!(sol.cutoffs().is_empty());
        assert_eq!(sol.policy.regions.len(), 2);
        assert_eq!(
            sol.policy.regions[0],
            PolicyRegion::half_open(
                0.0,
                0.7,
                PolicyAction::Split {
                    low_target: 0.0,
                    high_target: 0.7
                }
            )
        );
        assert_eq!(
            sol.policy.regions[1],
            PolicyRegion::closed(0.7, 1.0, PolicyAction::Slide)
        );
    }

    #[test]
    fn flat_payoff() {
        let s = spec(1.0, 2.0, 0.3, &[0.0, 1.0], &[2.5]);
        let sol = solve(&s).unwrap();
        for p in [0.0, 0.2, 0.9, 1.0] {
            assert!((sol.value.eval(p).unwrap() - 2.5).abs() < 1e-12);
        }
        assert_eq!(sol.policy, crate::policy::slide_only_policy());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sol = solve(&canonical()).unwrap();
        let back = Solution::from_json(&sol.to_json()).unwrap();
        assert_eq!(sol, back);
    }

    #[test]
    fn pasting_root_agrees_with_secant_oracle() {
        // secant iteration on an independently written residual
        let (ps, mu, h1, h2, p1, p2, v1) = (0.5f64, 0.5f64, 0.95, 1.0, 0.6, 0.8, 0.9);
        let k = (v1 - h1) * (p1 - ps).powf(mu);
        let f = |q: f64| {
            let v = h1 + k * (q - ps).powf(-mu);
            let dv = -mu * k * (q - ps).powf(-mu - 1.0);
            let line_end = v + dv * (p2 - q);
            dv - mu * (h2 - line_end) / (p2 - ps)
        };
        let (mut a, mut b) = (0.65, 0.67);
        for _ in 0..60 {
            let (fa, fb) = (f(a), f(b));
            if fb == fa {
                break;
            }
            let c = b - fb * (b - a) / (fb - fa);
            a = b;
            b = c;
        }
        let sol = solve(&canonical()).unwrap();
        assert!((sol.cutoffs()[0].value - b).abs() < 1e-12);
    }
}

//! Problem definition for the two-state persuasion game.
//!
//! A problem is a pair of Markov switching intensities, a discount rate and a
//! monotone step payoff `u` over the receiver's belief that the state is 1.
//! Construction goes through [`validate_problem`], which checks that the
//! payoff has a strict concave envelope through its discontinuity points and
//! locates the continuity interval `[p_0, p_1)` holding the stationary belief.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for declaring the stationary belief equal to a cut.
pub const STATIONARY_TIE_TOL: f64 = 1e-12;
/// Minimum spacing between consecutive cuts.
pub const CUT_DEDUP_TOL: f64 = 1e-12;
/// Slack required by the strict envelope check.
pub const ENVELOPE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rates must be positive and finite: {0}")]
    BadRates(String),
    #[error("bad support: {0}")]
    BadSupport(String),
    #[error("levels must be strictly increasing: h[{index}]={prev} is not below h[{next_index}]={next}", next_index = index + 1)]
    NonMonotoneLevels { index: usize, prev: f64, next: f64 },
    #[error(
        "concave envelope violated at cuts ({}, {}, {}): point ({}, {}) is not above the chord of its neighbours",
        cuts[0], cuts[1], cuts[2], cuts[1], level
    )]
    EnvelopeViolation {
        /// Raw indices `i-1, i, i+1` of the offending triple.
        indices: [usize; 3],
        cuts: [f64; 3],
        level: f64,
    },
    #[error("belief {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("ramp width {delta} must be positive and below the narrowest interval {min_width}")]
    DeltaTooLarge { delta: f64, min_width: f64 },
    #[error("belief {0} coincides with the stationary belief")]
    AtStationaryBelief(f64),
    #[error("invalid problem document: {0}")]
    Parse(String),
}

/// Switching intensities of the state chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovRates {
    /// Intensity of the 0 -> 1 transition.
    pub lambda0: f64,
    /// Intensity of the 1 -> 0 transition.
    pub lambda1: f64,
}

impl MarkovRates {
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self, ModelError> {
        for (name, v) in [("lambda0", lambda0), ("lambda1", lambda1)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::BadRates(format!("{name} = {v}")));
            }
        }
        Ok(Self { lambda0, lambda1 })
    }

    pub fn total(&self) -> f64 {
        self.lambda0 + self.lambda1
    }

    /// Stationary probability of state 1.
    pub fn p_star(&self) -> f64 {
        self.lambda0 / (self.lambda0 + self.lambda1)
    }

    /// Per-period switching probabilities `(P(0 -> 1), P(1 -> 0))` of the chain
    /// observed every `delta` time units.
    pub fn switch_probs(&self, delta: f64) -> (f64, f64) {
        let mix = -(-self.total() * delta).exp_m1();
        let p_star = self.p_star();
        (p_star * mix, (1.0 - p_star) * mix)
    }

    /// Generator matrix, rows indexed by the current state.
    pub fn generator(&self) -> [[f64; 2]; 2] {
        [[-self.lambda0, self.lambda0], [self.lambda1, -self.lambda1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discounting {
    pub r: f64,
}

impl Discounting {
    pub fn new(r: f64) -> Result<Self, ModelError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(ModelError::BadRates(format!("r = {r}")));
        }
        Ok(Self { r })
    }

    /// Ratio of the discount rate to the total switching rate.
    pub fn mu(&self, rates: &MarkovRates) -> f64 {
        self.r / rates.total()
    }
}

/// Increasing step payoff `u(p) = h_i` on `[p_i, p_{i+1})`, closed at 1.
///
/// Stored with raw (zero-based) indices; `pivot` is the raw index of the cut
/// the signed labelling calls `p_0`, so cut `i` in signed labelling is
/// `cuts[pivot + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPayoff {
    cuts: Vec<f64>,
    levels: Vec<f64>,
    pivot: usize,
}

impl StepPayoff {
    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Raw index of `p_0`.
    pub fn pivot_index(&self) -> usize {
        self.pivot
    }

    /// Number of continuity intervals strictly below `p_0` (`m`).
    pub fn m_below(&self) -> usize {
        self.pivot
    }

    /// Number of continuity intervals from `p_0` upward (`m'`).
    pub fn m_above(&self) -> usize {
        self.cuts.len() - 1 - self.pivot
    }

    /// Cut `p_i` in signed labelling, `-m <= i <= m'`.
    pub fn cut(&self, i: isize) -> f64 {
        self.cuts[self.raw(i)]
    }

    /// Level `h_i` in signed labelling, `-m <= i <= m'-1`.
    pub fn level(&self, i: isize) -> f64 {
        self.levels[self.raw(i)]
    }

    fn raw(&self, i: isize) -> usize {
        let idx = self.pivot as isize + i;
        assert!(idx >= 0, "signed index {i} below the support");
        idx as usize
    }

    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    pub fn max_level(&self) -> f64 {
        *self.levels.last().expect("at least one level")
    }

    pub fn range(&self) -> f64 {
        self.max_level() - self.min_level()
    }

    /// Raw index of the continuity interval containing `p`.
    pub fn interval_index(&self, p: f64) -> usize {
        let n = self.levels.len();
        // number of interior cuts <= p
        let k = self.cuts[1..n].partition_point(|&c| c <= p);
        k.min(n - 1)
    }

    pub fn eval(&self, p: f64) -> Result<f64, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::OutOfRange(p));
        }
        Ok(self.eval_unchecked(p))
    }

    /// Evaluation without the range check; beliefs outside `[0, 1]` clamp to
    /// the end levels.
    pub fn eval_unchecked(&self, p: f64) -> f64 {
        self.levels[self.interval_index(p)]
    }

    pub fn min_width(&self) -> f64 {
        self.cuts
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// A validated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub rates: MarkovRates,
    pub discount: Discounting,
    pub payoff: StepPayoff,
    /// Whether the stationary belief sits on `p_0` (within the tie tolerance).
    stationary_at_cut: bool,
}

impl ProblemSpec {
    /// Stationary belief. When it ties with `p_0` the cut value is returned.
    pub fn p_star(&self) -> f64 {
        if self.stationary_at_cut {
            self.payoff.cut(0)
        } else {
            self.rates.p_star()
        }
    }

    pub fn mu(&self) -> f64 {
        self.discount.mu(&self.rates)
    }

    pub fn r(&self) -> f64 {
        self.discount.r
    }

    pub fn stationary_at_cut(&self) -> bool {
        self.stationary_at_cut
    }

    pub fn u(&self, p: f64) -> Result<f64, ModelError> {
        self.payoff.eval(p)
    }

    pub fn to_input(&self) -> ProblemInput {
        ProblemInput {
            lambda0: self.rates.lambda0,
            lambda1: self.rates.lambda1,
            r: self.discount.r,
            cuts: self.payoff.cuts.clone(),
            levels: self.payoff.levels.clone(),
        }
    }

    /// Rebuilds the problem with levels mapped by `h -> scale * h + shift`.
    pub fn with_affine_levels(&self, scale: f64, shift: f64) -> Result<Self, ModelError> {
        let levels: Vec<f64> = self
            .payoff
            .levels
            .iter()
            .map(|h| scale * h + shift)
            .collect();
        validate_problem(self.rates, self.discount, &self.payoff.cuts, &levels)
    }

    /// Rebuilds the problem with all rates (both intensities and `r`) scaled.
    pub fn with_time_scale(&self, factor: f64) -> Result<Self, ModelError> {
        validate_problem(
            MarkovRates::new(self.rates.lambda0 * factor, self.rates.lambda1 * factor)?,
            Discounting::new(self.discount.r * factor)?,
            &self.payoff.cuts,
            &self.payoff.levels,
        )
    }
}

/// On-disk problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInput {
    pub lambda0: f64,
    pub lambda1: f64,
    pub r: f64,
    pub cuts: Vec<f64>,
    pub levels: Vec<f64>,
}

impl ProblemInput {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<ProblemSpec, ModelError> {
        validate_problem(
            MarkovRates::new(self.lambda0, self.lambda1)?,
            Discounting::new(self.r)?,
            &self.cuts,
            &self.levels,
        )
    }
}

pub fn validate_problem(
    rates: MarkovRates,
    discount: Discounting,
    raw_cuts: &[f64],
    raw_levels: &[f64],
) -> Result<ProblemSpec, ModelError> {
    // the public constructors already check, but fields are public
    MarkovRates::new(rates.lambda0, rates.lambda1)?;
    Discounting::new(discount.r)?;

    if raw_cuts.len() < 2 {
        return Err(ModelError::BadSupport(format!(
            "need at least the cuts 0 and 1, got {} values",
            raw_cuts.len()
        )));
    }
    if raw_cuts.iter().chain(raw_levels).any(|v| !v.is_finite()) {
        return Err(ModelError::BadSupport("non-finite cut or level".into()));
    }
    if raw_cuts[0] != 0.0 || raw_cuts[raw_cuts.len() - 1] != 1.0 {
        return Err(ModelError::BadSupport(format!(
            "cuts must start at 0 and end at 1, got {} .. {}",
            raw_cuts[0],
            raw_cuts[raw_cuts.len() - 1]
        )));
    }
    for w in raw_cuts.windows(2) {
        if w[1] - w[0] <= CUT_DEDUP_TOL {
            return Err(ModelError::BadSupport(format!(
                "cuts must increase by more than {CUT_DEDUP_TOL}: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if raw_levels.len() + 1 != raw_cuts.len() {
        return Err(ModelError::BadSupport(format!(
            "{} cuts need {} levels, got {}",
            raw_cuts.len(),
            raw_cuts.len() - 1,
            raw_levels.len()
        )));
    }
    for (i, w) in raw_levels.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(ModelError::NonMonotoneLevels {
                index: i,
                prev: w[0],
                next: w[1],
            });
        }
    }
    for i in 1..raw_levels.len().saturating_sub(1) {
        let (x0, x1, x2) = (raw_cuts[i - 1], raw_cuts[i], raw_cuts[i + 1]);
        let (y0, y1, y2) = (raw_levels[i - 1], raw_levels[i], raw_levels[i + 1]);
        let chord = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0);
        if !(y1 > chord + ENVELOPE_SLACK) {
            return Err(ModelError::EnvelopeViolation {
                indices: [i - 1, i, i + 1],
                cuts: [x0, x1, x2],
                level: y1,
            });
        }
    }

    let p_star = rates.p_star();
    let n = raw_levels.len();
    let mut pivot = raw_cuts[1..n].partition_point(|&c| c <= p_star);
    let mut at_cut = (p_star - raw_cuts[pivot]).abs() <= STATIONARY_TIE_TOL;
    if pivot + 1 < raw_cuts.len() - 1 && (raw_cuts[pivot + 1] - p_star).abs() <= STATIONARY_TIE_TOL
    {
        pivot += 1;
        at_cut = true;
    }

    Ok(ProblemSpec {
        rates,
        discount,
        payoff: StepPayoff {
            cuts: raw_cuts.to_vec(),
            levels: raw_levels.to_vec(),
            pivot,
        },
        stationary_at_cut: at_cut,
    })
}

/// Continuous piecewise-linear function through sorted knots, flat outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Segments as `(x_lo, x_hi, y_lo, y_hi)`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (x[0], x[1], y[0], y[1]))
    }
}

/// Upper concave envelope of `u`: the polyline through every `(p_i, h_i)`,
/// flat on the top interval.
pub fn cav_u(payoff: &StepPayoff) -> PiecewiseLinear {
    let n = payoff.levels.len();
    let mut xs: Vec<f64> = payoff.cuts[..n].to_vec();
    let mut ys = payoff.levels.clone();
    xs.push(1.0);
    ys.push(payoff.levels[n - 1]);
    PiecewiseLinear { xs, ys }
}

/// Continuous over-approximation of `u` with linear ramps of width `delta`
/// just below every interior cut.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaApprox<'a> {
    delta: f64,
    base: &'a StepPayoff,
}

impl<'a> DeltaApprox<'a> {
    pub fn new(base: &'a StepPayoff, delta: f64) -> Result<Self, ModelError> {
        let min_width = base.min_width();
        if !(delta > 0.0 && delta < min_width) {
            return Err(ModelError::DeltaTooLarge { delta, min_width });
        }
        Ok(Self { delta, base })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eval(&self, p: f64) -> Result<f64, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::OutOfRange(p));
        }
        let k = self.base.interval_index(p);
        let h = self.base.levels[k];
        if k + 1 == self.base.levels.len() {
            return Ok(h);
        }
        let next_cut = self.base.cuts[k + 1];
        let ramp_start = next_cut - self.delta;
        if p <= ramp_start {
            Ok(h)
        } else {
            let h_next = self.base.levels[k + 1];
            Ok(h + (h_next - h) * (p - ramp_start) / self.delta)
        }
    }
}

pub fn build_u_delta(approx: &DeltaApprox<'_>, p: f64) -> Result<f64, ModelError> {
    approx.eval(p)
}

/// `mu * (payoff(p) - value(p)) / (p - p*)`.
///
/// At extreme points of the hypograph of the value function this equals the
/// derivative of the value in the direction of the drift.
pub fn g_eval<V, U>(
    spec: &ProblemSpec,
    value_fn: V,
    payoff_fn: U,
    p: f64,
) -> Result<f64, ModelError>
where
    V: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&p) {
        return Err(ModelError::OutOfRange(p));
    }
    let p_star = spec.p_star();
    if (p - p_star).abs() <= STATIONARY_TIE_TOL {
        return Err(ModelError::AtStationaryBelief(p));
    }
    Ok(spec.mu() * (payoff_fn(p) - value_fn(p)) / (p - p_star))
}

/// The reference instance used throughout the tests and docs.
pub fn canonical() -> ProblemSpec {
    validate_problem(
        MarkovRates::new(1.0, 1.0).unwrap(),
        Discounting::new(1.0).unwrap(),
        &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        &[0.0, 0.5, 0.8, 0.95, 1.0],
    )
    .expect("canonical instance is valid")
}

//! Belief kinetics: drift with no information, Bayes-plausible binary
//! splits, and discounted reach times under repeated splitting or sliding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MarkovRates, ProblemSpec};

const BAYES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("prior {q} outside the bracket [{a}, {b}]")]
    PriorOutsideBracket { q: f64, a: f64, b: f64 },
    #[error("degenerate bracket: low {a} is not below high {b}")]
    DegenerateBracket { a: f64, b: f64 },
    #[error("split from {from} to {to} does not move toward the stationary belief {p_star}")]
    WrongSideOfStationary { from: f64, to: f64, p_star: f64 },
    #[error("sliding from {from} never reaches {to} (stationary belief {p_star})")]
    Unreachable { from: f64, to: f64, p_star: f64 },
    #[error("bracket [{lo}, {hi}] does not contain the stationary belief {p_star}")]
    BracketDoesNotStraddle { lo: f64, hi: f64, p_star: f64 },
}

/// Belief after `t` units of time without information.
pub fn drift_continuous(rates: &MarkovRates, p: f64, t: f64) -> f64 {
    let p_star = rates.p_star();
    p_star + (p - p_star) * (-rates.total() * t).exp()
}

/// One-period posterior with no message, written in the per-period switching
/// probabilities of the sampled chain: `p (1 - s1) + (1 - p) s0`.
pub fn drift_discrete(rates: &MarkovRates, p: f64, delta: f64) -> f64 {
    let (s0, s1) = rates.switch_probs(delta);
    p * (1.0 - s1) + (1.0 - p) * s0
}

/// Precomputed affine one-period drift `p -> a + b p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteDrift {
    pub offset: f64,
    pub slope: f64,
}

impl DiscreteDrift {
    pub fn new(rates: &MarkovRates, delta: f64) -> Self {
        let (s0, s1) = rates.switch_probs(delta);
        Self {
            offset: s0,
            slope: 1.0 - s1 - s0,
        }
    }

    #[inline]
    pub fn apply(&self, p: f64) -> f64 {
        (self.offset + self.slope * p).clamp(0.0, 1.0)
    }
}

/// Binary signal that splits prior `q` into posteriors `a` (low message) and
/// `b` (high message).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSignal {
    pub prior: f64,
    pub low_target: f64,
    pub high_target: f64,
    /// Unconditional probability of the high message.
    pub prob_high: f64,
    /// P(high | state 1).
    pub beta1: f64,
    /// P(high | state 0).
    pub beta0: f64,
}

impl SplitSignal {
    pub fn posterior_high(&self) -> f64 {
        let num = self.prior * self.beta1;
        num / (num + (1.0 - self.prior) * self.beta0)
    }

    pub fn posterior_low(&self) -> f64 {
        let num = self.prior * (1.0 - self.beta1);
        num / (num + (1.0 - self.prior) * (1.0 - self.beta0))
    }

    /// P(high | state).
    #[inline]
    pub fn prob_high_given(&self, state: u8) -> f64 {
        if state == 1 {
            self.beta1
        } else {
            self.beta0
        }
    }
}

pub fn make_split_signal(q: f64, a: f64, b: f64) -> Result<SplitSignal, DynamicsError> {
    if !(a < b) {
        return Err(DynamicsError::DegenerateBracket { a, b });
    }
    if q < a - BAYES_TOL || q > b + BAYES_TOL {
        return Err(DynamicsError::PriorOutsideBracket { q, a, b });
    }
    let q = q.clamp(a, b);
    let prob_high = (q - a) / (b - a);
    let (beta1, beta0) = if prob_high <= 0.0 {
        (0.0, 0.0)
    } else if prob_high >= 1.0 {
        (1.0, 1.0)
    } else {
        (
            (b * prob_high / q).clamp(0.0, 1.0),
            ((1.0 - b) * prob_high / (1.0 - q)).clamp(0.0, 1.0),
        )
    };
    Ok(SplitSignal {
        prior: q,
        low_target: a,
        high_target: b,
        prob_high,
        beta1,
        beta0,
    })
}

/// Reach-time summary between two beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitTiming {
    pub from: f64,
    pub to: f64,
    /// Jump intensity of the split process (split case only).
    pub intensity: Option<f64>,
    /// Expected discounted time `1 - E[exp(-r tau)]`.
    pub y: f64,
    /// Deterministic travel time (slide case only).
    pub tau: Option<f64>,
}

/// Repeated splitting between `p_from` and `p_to`, started at `p_from`.
/// The first visit to `p_to` is exponential with rate
/// `(lambda0 - p_from (lambda0 + lambda1)) / (p_to - p_from)`, which must be
/// positive: the drift at `p_from` has to point toward `p_to`. This covers
/// `p_from < p_to <= p*`, its mirror image, and brackets straddling `p*`.
pub fn discounted_time_split(
    spec: &ProblemSpec,
    p_from: f64,
    p_to: f64,
) -> Result<SplitTiming, DynamicsError> {
    let p_star = spec.p_star();
    if p_from == p_to {
        return Ok(SplitTiming {
            from: p_from,
            to: p_to,
            intensity: None,
            y: 0.0,
            tau: None,
        });
    }
    let mu = spec.mu();
    let total = spec.rates.total();
    let gap = p_to - p_from;
    let intensity = total * (p_star - p_from) / gap;
    if !(intensity > 0.0) {
        return Err(DynamicsError::WrongSideOfStationary {
            from: p_from,
            to: p_to,
            p_star,
        });
    }
    let y = mu * gap / (p_star - p_from + mu * gap);
    Ok(SplitTiming {
        from: p_from,
        to: p_to,
        intensity: Some(intensity),
        y,
        tau: None,
    })
}

/// Sliding from `p_from` to `p_to` with no information.
pub fn discounted_time_slide(
    spec: &ProblemSpec,
    p_from: f64,
    p_to: f64,
) -> Result<SplitTiming, DynamicsError> {
    let p_star = spec.p_star();
    let upward = p_from <= p_to && p_to < p_star;
    let downward = p_star < p_to && p_to <= p_from;
    if !(upward || downward) {
        return Err(DynamicsError::Unreachable {
            from: p_from,
            to: p_to,
            p_star,
        });
    }
    let ratio = (p_star - p_to) / (p_star - p_from);
    let tau = -ratio.ln() / spec.rates.total();
    let y = 1.0 - ratio.powf(spec.mu());
    Ok(SplitTiming {
        from: p_from,
        to: p_to,
        intensity: None,
        y,
        tau: Some(tau),
    })
}

/// Value of splitting forever between `p_lo` and `p_hi` around `p*`, with
/// payoffs `u_lo`, `u_hi` at the two posteriors. Linear in `p`.
pub fn split_value_linear(
    spec: &ProblemSpec,
    p: f64,
    p_lo: f64,
    p_hi: f64,
    u_lo: f64,
    u_hi: f64,
) -> Result<f64, DynamicsError> {
    let (intercept, slope) = split_line(spec, p_lo, p_hi, u_lo, u_hi)?;
    Ok(intercept + slope * p)
}

/// `(intercept, slope)` of [`split_value_linear`].
pub fn split_line(
    spec: &ProblemSpec,
    p_lo: f64,
    p_hi: f64,
    u_lo: f64,
    u_hi: f64,
) -> Result<(f64, f64), DynamicsError> {
    let p_star = spec.p_star();
    if !(p_lo < p_hi) {
        return Err(DynamicsError::DegenerateBracket { a: p_lo, b: p_hi });
    }
    if !(p_lo <= p_star && p_star <= p_hi) {
        return Err(DynamicsError::BracketDoesNotStraddle {
            lo: p_lo,
            hi: p_hi,
            p_star,
        });
    }
    let mu = spec.mu();
    let denom = (p_hi - p_lo) * (mu + 1.0);
    let intercept =
        u_lo * (p_hi * (mu + 1.0) - p_star) / denom + u_hi * (p_star - p_lo * (mu + 1.0)) / denom;
    let slope = mu * (u_hi - u_lo) / denom;
    Ok((intercept, slope))
}

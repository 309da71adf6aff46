//! Markovian sender policies: a partition of belief space into regions where
//! the sender either stays silent (slide) or splits the belief between two
//! targets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{cav_u, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no policy region covers belief {0}")]
    PolicyGap(f64),
    #[error("regions overlap or leave a gap near {0}")]
    BadPartition(f64),
    #[error("split targets [{low}, {high}] do not bracket region [{lo}, {hi}]")]
    BadTargets {
        lo: f64,
        hi: f64,
        low: f64,
        high: f64,
    },
    #[error("invalid policy document: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyAction {
    Slide,
    Split { low_target: f64, high_target: f64 },
}

/// Interval of beliefs with explicit endpoint inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyRegion {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub action: PolicyAction,
}

impl PolicyRegion {
    /// `[lo, hi)`.
    pub fn half_open(lo: f64, hi: f64, action: PolicyAction) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
            action,
        }
    }

    pub fn closed(lo: f64, hi: f64, action: PolicyAction) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
            action,
        }
    }

    pub fn open(lo: f64, hi: f64, action: PolicyAction) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
            action,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_closed {
            p >= self.lo
        } else {
            p > self.lo
        };
        let below = if self.hi_closed {
            p <= self.hi
        } else {
            p < self.hi
        };
        above && below
    }
}

/// A cutoff `q_j` between the slide and split parts of the continuity
/// interval `[p_j, p_{j+1})`, `j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    /// Signed interval index `j`.
    pub interval: isize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub regions: Vec<PolicyRegion>,
    #[serde(default)]
    pub cutoffs: Vec<Cutoff>,
}

impl MarkovPolicy {
    /// Checks that the regions partition `[0, 1]` and that every split
    /// bracket contains its region.
    pub fn new(regions: Vec<PolicyRegion>, cutoffs: Vec<Cutoff>) -> Result<Self, PolicyError> {
        let policy = Self { regions, cutoffs };
        policy.check()?;
        Ok(policy)
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let policy: Self =
            serde_json::from_str(text).map_err(|e| PolicyError::Parse(e.to_string()))?;
        policy.check()?;
        Ok(policy)
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        let first = self.regions.first().ok_or(PolicyError::PolicyGap(0.0))?;
        if first.lo != 0.0 || !first.lo_closed {
            return Err(PolicyError::PolicyGap(0.0));
        }
        let last = self.regions.last().expect("non-empty");
        if last.hi != 1.0 || !last.hi_closed {
            return Err(PolicyError::PolicyGap(1.0));
        }
        for w in self.regions.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            // adjacent regions share an endpoint owned by exactly one side
            if a.hi != b.lo || a.hi_closed == b.lo_closed {
                return Err(PolicyError::BadPartition(a.hi));
            }
        }
        for reg in &self.regions {
            if reg.lo > reg.hi || (reg.lo == reg.hi && !(reg.lo_closed && reg.hi_closed)) {
                return Err(PolicyError::BadPartition(reg.lo));
            }
            if let PolicyAction::Split {
                low_target,
                high_target,
            } = reg.action
            {
                if !(low_target <= reg.lo && reg.hi <= high_target && low_target < high_target) {
                    return Err(PolicyError::BadTargets {
                        lo: reg.lo,
                        hi: reg.hi,
                        low: low_target,
                        high: high_target,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn region_at(&self, p: f64) -> Result<&PolicyRegion, PolicyError> {
        // regions are sorted; the candidate is the last one starting at or before p
        let k = self.regions.partition_point(|r| r.lo <= p);
        let lo = k.saturating_sub(2);
        self.regions[lo..k.min(self.regions.len())]
            .iter()
            .rev()
            .find(|r| r.contains(p))
            .ok_or(PolicyError::PolicyGap(p))
    }

    pub fn action_at(&self, p: f64) -> Result<PolicyAction, PolicyError> {
        self.region_at(p).map(|r| r.action)
    }

    /// Region boundaries and split targets; useful as mandatory grid points.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for r in &self.regions {
            pts.push(r.lo);
            pts.push(r.hi);
            if let PolicyAction::Split {
                low_target,
                high_target,
            } = r.action
            {
                pts.push(low_target);
                pts.push(high_target);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Whether two policies agree region by region within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        self.regions.len() == other.regions.len()
            && self.cutoffs.len() == other.cutoffs.len()
            && self.regions.iter().zip(&other.regions).all(|(a, b)| {
                close(a.lo, b.lo)
                    && close(a.hi, b.hi)
                    && a.lo_closed == b.lo_closed
                    && a.hi_closed == b.hi_closed
                    && match (a.action, b.action) {
                        (PolicyAction::Slide, PolicyAction::Slide) => true,
                        (
                            PolicyAction::Split {
                                low_target: l1,
                                high_target: h1,
                            },
                            PolicyAction::Split {
                                low_target: l2,
                                high_target: h2,
                            },
                        ) => close(l1, l2) && close(h1, h2),
                        _ => false,
                    }
            })
            && self
                .cutoffs
                .iter()
                .zip(&other.cutoffs)
                .all(|(a, b)| a.interval == b.interval && close(a.value, b.value))
    }
}

/// Never reveal anything.
pub fn slide_only_policy() -> MarkovPolicy {
    MarkovPolicy {
        regions: vec![PolicyRegion::closed(0.0, 1.0, PolicyAction::Slide)],
        cutoffs: vec![],
    }
}

/// Reveal the state every period.
pub fn full_disclosure_policy() -> MarkovPolicy {
    let split = PolicyAction::Split {
        low_target: 0.0,
        high_target: 1.0,
    };
    MarkovPolicy {
        regions: vec![PolicyRegion::closed(0.0, 1.0, split)],
        cutoffs: vec![],
    }
}

/// Greedy policy: split to the supporting segment of `cav u` wherever the
/// envelope lies strictly above `u`, stay silent where they coincide.
pub fn myopic_policy(spec: &ProblemSpec) -> MarkovPolicy {
    let cav = cav_u(&spec.payoff);
    let mut regions: Vec<PolicyRegion> = Vec::new();
    for (x0, x1, y0, y1) in cav.segments() {
        // u is constant on [x0, x1) at level y0; the envelope rises above it
        // exactly when the segment is not flat
        let action = if y1 > y0 {
            PolicyAction::Split {
                low_target: x0,
                high_target: x1,
            }
        } else {
            PolicyAction::Slide
        };
        match regions.last_mut() {
            Some(prev) if prev.action == action && action == PolicyAction::Slide => {
                prev.hi = x1;
            }
            _ => regions.push(PolicyRegion::half_open(x0, x1, action)),
        }
    }
    if let Some(last) = regions.last_mut() {
        last.hi_closed = true;
    }
    MarkovPolicy {
        regions,
        cutoffs: vec![],
    }
}

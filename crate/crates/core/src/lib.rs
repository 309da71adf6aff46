//! Optimal dynamic Bayesian persuasion with a two-state Markov world.
//!
//! The sender observes a state that switches between 0 and 1 at rates
//! `lambda0` and `lambda1` and commits to a message policy; the receiver's
//! belief drives a monotone step payoff `u`. This crate computes the
//! continuous-time value function and the optimal slide/split policy in
//! closed form ([`solver`]), checks it against a discrete-time dynamic
//! programming oracle ([`oracle`]) and Monte-Carlo simulation ([`sim`]).

// `!(a < b)` is used on purpose throughout so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod hull;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod sim;
pub mod solver;
pub mod verify;

pub use dynamics::{
    discounted_time_slide, discounted_time_split, drift_continuous, drift_discrete,
    make_split_signal, split_value_linear, DynamicsError, SplitSignal, SplitTiming,
};
pub use model::{
    build_u_delta, canonical, cav_u, g_eval, validate_problem, DeltaApprox, Discounting,
    MarkovRates, ModelError, ProblemInput, ProblemSpec, StepPayoff,
};
pub use oracle::{
    evaluate_policy_discrete, value_iteration, BeliefGrid, OracleError, OracleResult,
    PolicyEvaluation,
};
pub use policy::{
    full_disclosure_policy, myopic_policy, slide_only_policy, Cutoff, MarkovPolicy, PolicyAction,
    PolicyError, PolicyRegion,
};
pub use sim::{compare_policies, simulate, SimConfig, SimError, SimResult};
pub use solver::{solve, PiecewiseValue, Side, Solution, SolveError, ValueSegment};
pub use verify::{verify_solution, Diagnostics, Violation};

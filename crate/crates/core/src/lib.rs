//! Belief-state planning for restless bandits over Markov channels with
//! imperfect sensing.
//!
//! A user senses k of N independent two-state Markov channels per slot,
//! observing only ACK feedback distorted by false alarms and miss
//! detections. The crate tracks the posterior channel beliefs exactly,
//! evaluates policies by exact expansion of the belief decision tree, and
//! checks the closed-form conditions under which the greedy
//! (largest-belief) policy is provably optimal, both analytically and
//! against brute-force oracles and Monte Carlo simulation.
//!
//! Modules:
//! - [`belief`]: channel/sensing models, belief operators, outcome law
//! - [`rewards`]: the g-regular slot-reward family
//! - [`policy`]: myopic, random and explicit-tree policies
//! - [`planner`]: exact optimal value, pseudo values, structural checks
//! - [`conditions`]: closed-form optimality conditions
//! - [`simulator`]: channel-level and belief-level Monte Carlo
//! - [`verify`]: randomized verification suites over generated instances

// validation uses `!(x > y)` so NaN parameters fail closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod conditions;
pub mod planner;
pub mod policy;
pub mod rewards;
pub mod simulator;
pub mod verify;

pub use belief::{
    enumerate_outcomes, outcome_probability, update_belief, ActionSet, AckOutcome, BeliefVector,
    ChannelModel, Horizon, ModelError, SensingModel,
};
pub use conditions::{
    compute_quantities, evaluate_conditions, iid_special_case_check, IidSpecialCase,
    OptimalityReport, QuantitySet, RegularityStatus,
};
pub use planner::{
    lemma4_bound_check, lemma5_check, myopic_value, optimal_value, optimal_value_with_cap,
    optimal_value_with_myopic_audit, policy_value, pseudo_value, symmetry_check, Instance,
    MyopicAudit, PlannerError, ValueReport, DEFAULT_NODE_CAP,
};
pub use policy::{
    argmax_equivalence_check, enumerate_tree_policies, myopic_action, MyopicPolicy, PolicyError,
    PolicyTree, RandomPolicy, SensingPolicy, TreePolicy,
};
pub use rewards::{CustomReward, RegularReward, RewardError};
pub use simulator::{
    simulate_belief_level, simulate_belief_level_logged, simulate_channel_level,
    simulate_channel_level_logged, EpisodeRecord, Fidelity, SimError, SimStats,
};
pub use verify::{GeneratorRanges, RewardSpec, SuiteReport, VerifyParams, VerifySuite};

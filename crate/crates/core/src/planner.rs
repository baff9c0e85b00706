//! Exact finite-horizon planning over the belief decision tree.
//!
//! Values are computed by expanding the tree of reachable beliefs without
//! any memoization or quantized state merging: desk-scale instances keep
//! exactness affordable, and merging float-keyed beliefs would risk silent
//! incorrectness. The node budget is checked a priori from the pessimistic
//! count `(C(N,k) * 2^k)^T`; oversized instances are refused rather than
//! truncated.
//!
//! Besides the optimal value (backward induction over all actions) the
//! module evaluates the pseudo value `W_t` — the discounted return of
//! playing a fixed action now and the myopic policy afterwards — and uses
//! exact `W` evaluations to verify the structural properties the optimality
//! argument rests on: the case-wise difference bounds, the swap dominance
//! condition, and the symmetry of `W` under exchanging channels.

use serde::Serialize;
use thiserror::Error;

use crate::belief::{
    binomial, enumerate_outcomes, outcome_probability, update_belief, ActionSet, AckOutcome,
    BeliefVector, ChannelModel, Horizon, ModelError, SensingModel,
};
use crate::conditions::{compute_quantities, geometric_gap_sum, QuantitySet};
use crate::policy::{myopic_action, PolicyError, SensingPolicy};
use crate::rewards::{RegularReward, RewardError};

/// Default ceiling on the a-priori node estimate of one exact solve.
pub const DEFAULT_NODE_CAP: u128 = 100_000_000;

/// Two backward-induction action values within this distance of the maximum
/// are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Permitted slack when checking exact W-differences against the case-wise
/// closed-form bounds.
pub const BOUND_SLACK: f64 = 1e-10;

/// Permitted asymmetry of W under a channel swap.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("node budget exceeded: a-priori estimate {estimated} > cap {cap}")]
    CapExceeded { estimated: u128, cap: u128 },

    #[error("slot {t} outside the horizon 1..={horizon}")]
    SlotOutOfRange { t: usize, horizon: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("verification failure: {0}")]
    Verification(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Reward(#[from] RewardError),

    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One experiment: channels, sensing quality, action width, horizon,
/// reward and the belief the first slot starts from.
#[derive(Debug, Clone)]
pub struct Instance {
    channels: Vec<ChannelModel>,
    sensing: SensingModel,
    k: usize,
    horizon: Horizon,
    reward: RegularReward,
    initial_belief: BeliefVector,
}

impl Instance {
    pub fn new(
        channels: Vec<ChannelModel>,
        sensing: SensingModel,
        k: usize,
        horizon: Horizon,
        reward: RegularReward,
        initial_belief: BeliefVector,
    ) -> Result<Self, ModelError> {
        let n = channels.len();
        if k == 0 || k > n {
            return Err(ModelError::InvalidSubsetSize { k, n });
        }
        if initial_belief.len() != n {
            return Err(ModelError::LengthMismatch {
                belief: initial_belief.len(),
                channels: n,
            });
        }
        Ok(Self {
            channels,
            sensing,
            k,
            horizon,
            reward,
            initial_belief,
        })
    }

    /// Starts from the per-channel stationary beliefs.
    pub fn with_stationary_belief(
        channels: Vec<ChannelModel>,
        sensing: SensingModel,
        k: usize,
        horizon: Horizon,
        reward: RegularReward,
    ) -> Result<Self, ModelError> {
        let belief = BeliefVector::stationary(&channels);
        Self::new(channels, sensing, k, horizon, reward, belief)
    }

    pub fn n(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelModel] {
        &self.channels
    }

    pub fn sensing(&self) -> &SensingModel {
        &self.sensing
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn reward(&self) -> &RegularReward {
        &self.reward
    }

    pub fn initial_belief(&self) -> &BeliefVector {
        &self.initial_belief
    }

    pub fn with_initial_belief(&self, belief: BeliefVector) -> Result<Self, ModelError> {
        Self::new(
            self.channels.clone(),
            self.sensing,
            self.k,
            self.horizon,
            self.reward.clone(),
            belief,
        )
    }

    /// Copy with channels `i` and `j` exchanged together with their belief
    /// entries.
    pub fn with_swapped_channels(&self, i: usize, j: usize) -> Self {
        let mut channels = self.channels.clone();
        channels.swap(i, j);
        Self {
            channels,
            sensing: self.sensing,
            k: self.k,
            horizon: self.horizon,
            reward: self.reward.clone(),
            initial_belief: self.initial_belief.with_swapped(i, j),
        }
    }
}

/// Result of one exact solve.
#[derive(Debug, Clone, Serialize)]
pub struct ValueReport {
    /// Optimal expected total discounted reward from slot 1.
    pub value: f64,
    /// Every first action within `TIE_TOLERANCE` of the maximum.
    pub first_actions: Vec<ActionSet>,
    /// Belief nodes actually expanded.
    pub node_count: u64,
}

/// Outcome of checking, at every belief node reachable under the myopic
/// policy, that the myopic action is among the optimal ones.
#[derive(Debug, Clone, Serialize)]
pub struct MyopicAudit {
    pub nodes_audited: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl MyopicAudit {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Pessimistic a-priori node estimate `(C(N,k) * 2^k)^T`.
pub fn estimated_node_count(instance: &Instance) -> u128 {
    let base = binomial(instance.n(), instance.k())
        .saturating_mul(1u128 << instance.k().min(127));
    let mut acc: u128 = 1;
    for _ in 0..instance.horizon().slots() {
        acc = acc.saturating_mul(base);
    }
    acc
}

fn check_cap(estimated: u128, cap: u128) -> Result<(), PlannerError> {
    if estimated > cap {
        Err(PlannerError::CapExceeded { estimated, cap })
    } else {
        Ok(())
    }
}

struct AuditState {
    nodes_audited: u64,
    failures: u64,
    first_failure: Option<String>,
}

/// Per-action backward-induction values at one belief node, plus the nodes
/// expanded below (and including) it. Zero-probability outcome branches are
/// not expanded; with `beta = 0` the future is dropped entirely, so the
/// expansion coincides with the single-slot problem.
fn action_values(
    instance: &Instance,
    actions: &[ActionSet],
    remaining: usize,
    belief: &BeliefVector,
    on_myopic_path: bool,
    audit: &mut Option<AuditState>,
) -> Result<(Vec<f64>, u64), PlannerError> {
    let beta = instance.horizon().discount();
    let myopic = myopic_action(belief, instance.channels(), instance.k())?;
    let mut values = Vec::with_capacity(actions.len());
    let mut nodes: u64 = 1;
    for action in actions {
        let immediate = instance.reward().immediate_reward(belief, action);
        let mut value = immediate;
        if remaining > 1 && beta > 0.0 {
            let child_on_path = on_myopic_path && *action == myopic;
            let mut future = 0.0;
            for outcome in enumerate_outcomes(action) {
                let p = outcome_probability(belief, instance.sensing(), action, &outcome)?;
                if p == 0.0 {
                    continue;
                }
                let child = update_belief(
                    belief,
                    instance.channels(),
                    instance.sensing(),
                    action,
                    &outcome,
                )?;
                let (child_value, child_nodes) = node_value(
                    instance,
                    actions,
                    remaining - 1,
                    &child,
                    child_on_path,
                    audit,
                )?;
                future += p * child_value;
                nodes += child_nodes;
            }
            value += beta * future;
        }
        values.push(value);
    }
    if on_myopic_path {
        if let Some(state) = audit.as_mut() {
            state.nodes_audited += 1;
            let best = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let myopic_idx = actions
                .iter()
                .position(|a| *a == myopic)
                .expect("myopic action is a k-subset");
            if values[myopic_idx] < best - TIE_TOLERANCE {
                state.failures += 1;
                if state.first_failure.is_none() {
                    state.first_failure = Some(format!(
                        "myopic action {:?} scores {} vs optimum {} at belief {:?} \
                         with {} slots remaining",
                        myopic.channels(),
                        values[myopic_idx],
                        best,
                        belief.as_slice(),
                        remaining,
                    ));
                }
            }
        }
    }
    Ok((values, nodes))
}

fn node_value(
    instance: &Instance,
    actions: &[ActionSet],
    remaining: usize,
    belief: &BeliefVector,
    on_myopic_path: bool,
    audit: &mut Option<AuditState>,
) -> Result<(f64, u64), PlannerError> {
    let (values, nodes) = action_values(
        instance,
        actions,
        remaining,
        belief,
        on_myopic_path,
        audit,
    )?;
    let best = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    Ok((best, nodes))
}

fn solve(
    instance: &Instance,
    cap: u128,
    with_audit: bool,
) -> Result<(ValueReport, Option<MyopicAudit>), PlannerError> {
    check_cap(estimated_node_count(instance), cap)?;
    let actions = ActionSet::enumerate_all(instance.n(), instance.k())?;
    let mut audit = with_audit.then_some(AuditState {
        nodes_audited: 0,
        failures: 0,
        first_failure: None,
    });
    let (values, node_count) = action_values(
        instance,
        &actions,
        instance.horizon().slots(),
        instance.initial_belief(),
        true,
        &mut audit,
    )?;
    let best = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let first_actions = actions
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= best - TIE_TOLERANCE)
        .map(|(a, _)| a.clone())
        .collect();
    let report = ValueReport {
        value: best,
        first_actions,
        node_count,
    };
    let audit = audit.map(|state| MyopicAudit {
        nodes_audited: state.nodes_audited,
        failures: state.failures,
        first_failure: state.first_failure,
    });
    Ok((report, audit))
}

/// Optimal expected total discounted reward by exact backward induction.
pub fn optimal_value(instance: &Instance) -> Result<ValueReport, PlannerError> {
    optimal_value_with_cap(instance, DEFAULT_NODE_CAP)
}

pub fn optimal_value_with_cap(
    instance: &Instance,
    cap: u128,
) -> Result<ValueReport, PlannerError> {
    solve(instance, cap, false).map(|(report, _)| report)
}

/// Exact solve that additionally verifies, at every belief node reachable
/// under the myopic policy, that the myopic action attains the optimum.
pub fn optimal_value_with_myopic_audit(
    instance: &Instance,
    cap: u128,
) -> Result<(ValueReport, MyopicAudit), PlannerError> {
    solve(instance, cap, true).map(|(report, audit)| {
        (report, audit.expect("audit was requested"))
    })
}

/// Node estimate of a single-policy expansion, `sum of 2^(k*j)` over the
/// remaining slots.
fn policy_tree_estimate(k: usize, remaining: usize) -> u128 {
    let branch = 1u128 << k.min(127);
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..remaining {
        total = total.saturating_add(level);
        level = level.saturating_mul(branch);
    }
    total
}

fn w_value(
    instance: &Instance,
    remaining: usize,
    belief: &BeliefVector,
    forced: Option<&ActionSet>,
) -> Result<f64, PlannerError> {
    let action = match forced {
        Some(action) => action.clone(),
        None => myopic_action(belief, instance.channels(), instance.k())?,
    };
    let mut value = instance.reward().immediate_reward(belief, &action);
    let beta = instance.horizon().discount();
    if remaining > 1 && beta > 0.0 {
        let mut future = 0.0;
        for outcome in enumerate_outcomes(&action) {
            let p = outcome_probability(belief, instance.sensing(), &action, &outcome)?;
            if p == 0.0 {
                continue;
            }
            let child = update_belief(
                belief,
                instance.channels(),
                instance.sensing(),
                &action,
                &outcome,
            )?;
            future += p * w_value(instance, remaining - 1, &child, None)?;
        }
        value += beta * future;
    }
    Ok(value)
}

fn check_slot(instance: &Instance, t: usize) -> Result<usize, PlannerError> {
    let horizon = instance.horizon().slots();
    if t == 0 || t > horizon {
        return Err(PlannerError::SlotOutOfRange { t, horizon });
    }
    Ok(horizon - t + 1)
}

/// The pseudo value `W_t`: play `action` in slot `t` against `belief`, then
/// follow the myopic policy until the horizon.
pub fn pseudo_value(
    instance: &Instance,
    t: usize,
    belief: &BeliefVector,
    action: &ActionSet,
) -> Result<f64, PlannerError> {
    pseudo_value_with_cap(instance, t, belief, action, DEFAULT_NODE_CAP)
}

pub fn pseudo_value_with_cap(
    instance: &Instance,
    t: usize,
    belief: &BeliefVector,
    action: &ActionSet,
    cap: u128,
) -> Result<f64, PlannerError> {
    let remaining = check_slot(instance, t)?;
    if belief.len() != instance.n() {
        return Err(PlannerError::Model(ModelError::LengthMismatch {
            belief: belief.len(),
            channels: instance.n(),
        }));
    }
    if action.k() != instance.k() {
        return Err(PlannerError::Precondition(format!(
            "action senses {} channels but the instance fixes k = {}",
            action.k(),
            instance.k()
        )));
    }
    check_cap(policy_tree_estimate(instance.k(), remaining), cap)?;
    w_value(instance, remaining, belief, Some(action))
}

/// Total value of the myopic policy from slot 1.
pub fn myopic_value(instance: &Instance) -> Result<f64, PlannerError> {
    check_cap(
        policy_tree_estimate(instance.k(), instance.horizon().slots()),
        DEFAULT_NODE_CAP,
    )?;
    w_value(
        instance,
        instance.horizon().slots(),
        instance.initial_belief(),
        None,
    )
}

fn policy_value_rec(
    instance: &Instance,
    slot: usize,
    belief: &BeliefVector,
    history: &mut Vec<AckOutcome>,
    policy: &dyn SensingPolicy,
) -> Result<f64, PlannerError> {
    let action = policy.choose(slot, belief, history)?;
    if action.k() != instance.k() {
        return Err(PlannerError::Precondition(format!(
            "policy chose {} channels but the instance fixes k = {}",
            action.k(),
            instance.k()
        )));
    }
    let mut value = instance.reward().immediate_reward(belief, &action);
    let beta = instance.horizon().discount();
    if slot < instance.horizon().slots() && beta > 0.0 {
        let mut future = 0.0;
        for outcome in enumerate_outcomes(&action) {
            let p = outcome_probability(belief, instance.sensing(), &action, &outcome)?;
            if p == 0.0 {
                continue;
            }
            let child = update_belief(
                belief,
                instance.channels(),
                instance.sensing(),
                &action,
                &outcome,
            )?;
            history.push(outcome);
            let child_value = policy_value_rec(instance, slot + 1, &child, history, policy)?;
            history.pop();
            future += p * child_value;
        }
        value += beta * future;
    }
    Ok(value)
}

/// Exact expected total discounted reward of an arbitrary deterministic
/// policy, by the same tree expansion the optimal solve uses.
pub fn policy_value(
    instance: &Instance,
    policy: &dyn SensingPolicy,
) -> Result<f64, PlannerError> {
    check_cap(
        policy_tree_estimate(instance.k(), instance.horizon().slots()),
        DEFAULT_NODE_CAP,
    )?;
    let mut history = Vec::new();
    policy_value_rec(instance, 1, instance.initial_belief(), &mut history, policy)
}

/// Which of the three possible sensed-set memberships a perturbed channel
/// ended up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma4Case {
    /// Sensed under both the raised and the original belief.
    BothSensed,
    /// Sensed under neither.
    NeitherSensed,
    /// Sensed only under the raised belief.
    EntersSensedSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma4Report {
    pub case: Lemma4Case,
    pub w_raised: f64,
    pub w_original: f64,
    pub difference: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub quantities: QuantitySet,
}

/// Raise one belief entry and compare the exact W-difference against the
/// case-wise closed-form bounds.
///
/// The two beliefs differ only at channel `l` (`omega_l <= omega_l_prime`);
/// each side plays its own myopic first action and the myopic policy
/// afterwards. The slope bounds behind the closed forms hold on
/// `[p01_min, p11_max]`, the envelope every belief enters after one update,
/// so callers probing non-linear rewards should pick the two values inside
/// that interval.
pub fn lemma4_bound_check(
    instance: &Instance,
    t: usize,
    l: usize,
    omega_l: f64,
    omega_l_prime: f64,
) -> Result<Lemma4Report, PlannerError> {
    let remaining = check_slot(instance, t)?;
    if l >= instance.n() {
        return Err(PlannerError::Model(ModelError::ChannelOutOfRange {
            channel: l,
            n: instance.n(),
        }));
    }
    if !(omega_l <= omega_l_prime) {
        return Err(PlannerError::Precondition(format!(
            "omega_l={omega_l} must not exceed omega_l_prime={omega_l_prime}"
        )));
    }
    let base = instance.initial_belief();
    let belief_original = base.with_entry(l, omega_l)?;
    let belief_raised = base.with_entry(l, omega_l_prime)?;
    let set_original = myopic_action(&belief_original, instance.channels(), instance.k())?;
    let set_raised = myopic_action(&belief_raised, instance.channels(), instance.k())?;

    let case = match (set_raised.contains(l), set_original.contains(l)) {
        (true, true) => Lemma4Case::BothSensed,
        (false, false) => Lemma4Case::NeitherSensed,
        (true, false) => Lemma4Case::EntersSensedSet,
        (false, true) => {
            return Err(PlannerError::Verification(format!(
                "raising omega_{l} from {omega_l} to {omega_l_prime} dropped the channel \
                 from the myopic set, which the selection rule makes impossible; \
                 instance: {instance:?}"
            )));
        }
    };

    let w_original = w_value(instance, remaining, &belief_original, Some(&set_original))?;
    let w_raised = w_value(instance, remaining, &belief_raised, Some(&set_raised))?;
    let difference = w_raised - w_original;

    let quantities = compute_quantities(instance)?;
    let beta = instance.horizon().discount();
    let span = remaining - 1; // T - t
    let gap = omega_l_prime - omega_l;
    let c = quantities.c;
    let sum_from_zero = geometric_gap_sum(beta, quantities.delta_p_max, 0, span);
    let sum_from_one = geometric_gap_sum(beta, quantities.delta_p_max, 1, span);
    let (lower_bound, upper_bound) = match case {
        Lemma4Case::BothSensed => (
            c * gap * quantities.g_prime_min * quantities.delta_min,
            c * gap * quantities.g_prime_max * quantities.delta_max * sum_from_zero,
        ),
        Lemma4Case::NeitherSensed => (
            0.0,
            c * gap * quantities.g_prime_max * quantities.delta_max * sum_from_one,
        ),
        Lemma4Case::EntersSensedSet => (
            0.0,
            c * gap * quantities.g_prime_max * quantities.delta_max * sum_from_zero,
        ),
    };

    let report = Lemma4Report {
        case,
        w_raised,
        w_original,
        difference,
        lower_bound,
        upper_bound,
        quantities,
    };
    if difference < lower_bound - BOUND_SLACK || difference > upper_bound + BOUND_SLACK {
        return Err(PlannerError::Verification(format!(
            "W-difference {difference} escapes [{lower_bound}, {upper_bound}] \
             (case {case:?}, t={t}, l={l}, omega_l={omega_l}, \
             omega_l_prime={omega_l_prime}); instance: {instance:?}"
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma5Report {
    pub action_with_l: ActionSet,
    pub action_with_m: ActionSet,
    pub w_with_l: f64,
    pub w_with_m: f64,
    pub premise_lhs: f64,
    pub premise_rhs: f64,
}

/// Swap dominance: senses containing the higher-belief channel `l` beat
/// senses containing `m` instead, provided the closed-form premise
/// `g'_min d_min / (g'_max d_max) >= sum over 1..T-1 of (beta d_p^max)^i`
/// holds.
///
/// The shared k-1 channels are picked deterministically: the best-ranked
/// channels other than `l` and `m` under the myopic ordering.
pub fn lemma5_check(
    instance: &Instance,
    t: usize,
    belief: &BeliefVector,
    l: usize,
    m: usize,
) -> Result<Lemma5Report, PlannerError> {
    let remaining = check_slot(instance, t)?;
    let n = instance.n();
    if l >= n || m >= n {
        return Err(PlannerError::Model(ModelError::ChannelOutOfRange {
            channel: l.max(m),
            n,
        }));
    }
    if l == m || !(belief.entry(l) > belief.entry(m)) {
        return Err(PlannerError::Precondition(format!(
            "need distinct channels with omega_l > omega_m, got omega_{l}={} and omega_{m}={}",
            belief.entry(l),
            belief.entry(m)
        )));
    }

    let quantities = compute_quantities(instance)?;
    let premise_lhs = quantities.g_prime_min * quantities.delta_min
        / (quantities.g_prime_max * quantities.delta_max);
    let premise_rhs = geometric_gap_sum(
        instance.horizon().discount(),
        quantities.delta_p_max,
        1,
        instance.horizon().slots() - 1,
    );
    if !(premise_lhs >= premise_rhs) {
        return Err(PlannerError::Precondition(format!(
            "dominance premise fails: {premise_lhs} < {premise_rhs}"
        )));
    }

    // best-ranked shared channels, excluding l and m
    let mut others: Vec<usize> = (0..n).filter(|&i| i != l && i != m).collect();
    others.sort_by(|&a, &b| {
        let wa = belief.entry(a);
        let wb = belief.entry(b);
        wb.total_cmp(&wa)
            .then_with(|| {
                let ta = instance.channels()[a].tau_raw(wa);
                let tb = instance.channels()[b].tau_raw(wb);
                tb.total_cmp(&ta)
            })
            .then_with(|| a.cmp(&b))
    });
    others.truncate(instance.k() - 1);

    let mut with_l = others.clone();
    with_l.push(l);
    let mut with_m = others;
    with_m.push(m);
    let action_with_l = ActionSet::new(with_l, n)?;
    let action_with_m = ActionSet::new(with_m, n)?;

    let w_with_l = w_value(instance, remaining, belief, Some(&action_with_l))?;
    let w_with_m = w_value(instance, remaining, belief, Some(&action_with_m))?;

    if w_with_l < w_with_m - BOUND_SLACK {
        return Err(PlannerError::Verification(format!(
            "W({:?}) = {w_with_l} fell below W({:?}) = {w_with_m} although the \
             premise holds (lhs={premise_lhs}, rhs={premise_rhs}); instance: {instance:?}",
            action_with_l.channels(),
            action_with_m.channels(),
        )));
    }
    Ok(Lemma5Report {
        action_with_l,
        action_with_m,
        w_with_l,
        w_with_m,
        premise_lhs,
        premise_rhs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub pairs_checked: usize,
    pub max_abs_difference: f64,
}

/// W is invariant under exchanging two channels (model and belief together)
/// when both are sensed or both are unsensed under the myopic first action.
pub fn symmetry_check(instance: &Instance) -> Result<SymmetryReport, PlannerError> {
    let n = instance.n();
    let slots = instance.horizon().slots();
    let myopic = myopic_action(
        instance.initial_belief(),
        instance.channels(),
        instance.k(),
    )?;
    let base_value = w_value(instance, slots, instance.initial_belief(), None)?;
    let mut pairs_checked = 0;
    let mut max_abs_difference: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if myopic.contains(i) != myopic.contains(j) {
                continue;
            }
            let swapped = instance.with_swapped_channels(i, j);
            let swapped_value = w_value(&swapped, slots, swapped.initial_belief(), None)?;
            let diff = (swapped_value - base_value).abs();
            pairs_checked += 1;
            max_abs_difference = max_abs_difference.max(diff);
            if diff > SYMMETRY_TOLERANCE {
                return Err(PlannerError::Verification(format!(
                    "swapping channels {i} and {j} moved W by {diff}; instance: {instance:?}"
                )));
            }
        }
    }
    Ok(SymmetryReport {
        pairs_checked,
        max_abs_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{enumerate_tree_policies, MyopicPolicy, TreePolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ch(p01: f64, p11: f64) -> ChannelModel {
        ChannelModel::new(p01, p11).unwrap()
    }

    /// The two-channel, two-slot instance whose exact values are known by
    /// hand enumeration.
    fn worked_example() -> Instance {
        Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7)],
            SensingModel::perfect(),
            1,
            Horizon::new(2, 1.0).unwrap(),
            RegularReward::linear(0.0).unwrap(),
            BeliefVector::new(vec![0.5, 0.6]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn optimal_value_matches_hand_enumeration() {
        let report = optimal_value(&worked_example()).unwrap();
        assert!((report.value - 1.22).abs() < 1e-12, "got {}", report.value);
        assert_eq!(report.first_actions.len(), 1);
        assert_eq!(report.first_actions[0].channels(), &[1]);
        // root plus two actions times two outcome leaves
        assert_eq!(report.node_count, 5);
    }

    #[test]
    fn single_slot_linear_perfect_sensing_is_belief_max() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7), ch(0.1, 0.6)],
            SensingModel::perfect(),
            1,
            Horizon::new(1, 1.0).unwrap(),
            RegularReward::linear(0.0).unwrap(),
            BeliefVector::new(vec![0.45, 0.72, 0.1]).unwrap(),
        )
        .unwrap();
        let report = optimal_value(&instance).unwrap();
        assert!((report.value - 0.72).abs() < 1e-15);
        assert_eq!(report.first_actions[0].channels(), &[1]);
    }

    #[test]
    fn zero_discount_collapses_to_single_slot() {
        let long = Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7)],
            SensingModel::new(0.1, 0.2).unwrap(),
            1,
            Horizon::new(5, 0.0).unwrap(),
            RegularReward::linear(0.1).unwrap(),
            BeliefVector::new(vec![0.5, 0.6]).unwrap(),
        )
        .unwrap();
        let short = Instance::new(
            long.channels().to_vec(),
            *long.sensing(),
            1,
            Horizon::new(1, 0.0).unwrap(),
            long.reward().clone(),
            long.initial_belief().clone(),
        )
        .unwrap();
        let a = optimal_value(&long).unwrap();
        let b = optimal_value(&short).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.node_count, b.node_count);
    }

    #[test]
    fn pseudo_values_match_hand_enumeration() {
        let instance = worked_example();
        let sense_1 = ActionSet::new([1], 2).unwrap();
        let sense_0 = ActionSet::new([0], 2).unwrap();
        let w1 = pseudo_value(&instance, 1, instance.initial_belief(), &sense_1).unwrap();
        let w0 = pseudo_value(&instance, 1, instance.initial_belief(), &sense_0).unwrap();
        assert!((w1 - 1.22).abs() < 1e-12, "got {w1}");
        assert!((w0 - 1.17).abs() < 1e-12, "got {w0}");
    }

    #[test]
    fn pseudo_value_at_last_slot_is_immediate_reward() {
        let instance = worked_example();
        let action = ActionSet::new([0], 2).unwrap();
        let w = pseudo_value(&instance, 2, instance.initial_belief(), &action).unwrap();
        assert_eq!(w, 0.5);
    }

    #[test]
    fn myopic_policy_value_equals_pseudo_value_of_myopic_first_action() {
        let instance = worked_example();
        let myopic_first =
            myopic_action(instance.initial_belief(), instance.channels(), 1).unwrap();
        let via_pseudo =
            pseudo_value(&instance, 1, instance.initial_belief(), &myopic_first).unwrap();
        let via_w = myopic_value(&instance).unwrap();
        let via_policy = policy_value(&instance, &MyopicPolicy::for_instance(&instance)).unwrap();
        assert_eq!(via_pseudo, via_w);
        assert_eq!(via_w, via_policy);
        assert!((via_w - 1.22).abs() < 1e-12);
    }

    #[test]
    fn constant_policy_value_matches_hand_enumeration() {
        use crate::policy::PolicyTree;
        let instance = worked_example();
        let constant = PolicyTree {
            action: vec![0],
            children: vec![
                PolicyTree { action: vec![0], children: vec![] },
                PolicyTree { action: vec![0], children: vec![] },
            ],
        };
        let value = policy_value(&instance, &TreePolicy::new(constant, 2)).unwrap();
        // 0.5 + 0.5 * 0.8 + 0.5 * 0.2: both branches sense channel 0 again
        assert!((value - 1.0).abs() < 1e-12, "got {value}");
    }

    #[test]
    fn best_enumerated_policy_attains_the_optimum() {
        let instance = worked_example();
        let optimal = optimal_value(&instance).unwrap().value;
        let best = enumerate_tree_policies(&instance, 1 << 30)
            .unwrap()
            .map(|tree| policy_value(&instance, &TreePolicy::new(tree, 2)).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - optimal).abs() <= 1e-12);
    }

    #[test]
    fn no_enumerated_policy_beats_the_optimum() {
        let instance = Instance::new(
            vec![ch(0.15, 0.85), ch(0.3, 0.6), ch(0.05, 0.75)],
            SensingModel::new(0.15, 0.1).unwrap(),
            1,
            Horizon::new(2, 0.7).unwrap(),
            RegularReward::power(2.0).unwrap(),
            BeliefVector::new(vec![0.3, 0.55, 0.42]).unwrap(),
        )
        .unwrap();
        let optimal = optimal_value(&instance).unwrap().value;
        for tree in enumerate_tree_policies(&instance, 1 << 30).unwrap() {
            let value = policy_value(&instance, &TreePolicy::new(tree, 3)).unwrap();
            assert!(value <= optimal + 1e-12);
        }
    }

    #[test]
    fn cap_refusal_reports_estimate() {
        let instance = worked_example();
        match optimal_value_with_cap(&instance, 3) {
            Err(PlannerError::CapExceeded { estimated, cap: 3 }) => {
                assert_eq!(estimated, 16); // (C(2,1) * 2)^2
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn lemma4_equal_inputs_give_zero_difference() {
        let instance = worked_example();
        let report = lemma4_bound_check(&instance, 1, 0, 0.4, 0.4).unwrap();
        assert_eq!(report.difference, 0.0);
    }

    #[test]
    fn lemma4_neither_sensed_at_last_slot_is_exactly_zero() {
        let instance = worked_example();
        // at t = T only the immediate reward counts; channel 0 stays
        // unsensed for both values below 0.6
        let report = lemma4_bound_check(&instance, 2, 0, 0.2, 0.35).unwrap();
        assert_eq!(report.case, Lemma4Case::NeitherSensed);
        assert_eq!(report.difference, 0.0);
    }

    #[test]
    fn lemma4_rejects_reversed_inputs() {
        let instance = worked_example();
        assert!(matches!(
            lemma4_bound_check(&instance, 1, 0, 0.5, 0.4),
            Err(PlannerError::Precondition(_))
        ));
    }

    #[test]
    fn lemma5_zero_discount_reduces_to_immediate_monotonicity() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7), ch(0.25, 0.75)],
            SensingModel::new(0.1, 0.0).unwrap(),
            2,
            Horizon::new(3, 0.0).unwrap(),
            RegularReward::linear(0.1).unwrap(),
            BeliefVector::new(vec![0.7, 0.4, 0.5]).unwrap(),
        )
        .unwrap();
        let report = lemma5_check(&instance, 1, instance.initial_belief(), 0, 1).unwrap();
        assert!(report.w_with_l >= report.w_with_m);
        assert_eq!(report.premise_rhs, 0.0);
    }

    #[test]
    fn lemma5_rejects_equal_beliefs() {
        let instance = worked_example();
        let belief = BeliefVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            lemma5_check(&instance, 1, &belief, 0, 1),
            Err(PlannerError::Precondition(_))
        ));
    }

    #[test]
    fn symmetry_for_identical_channels() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8), ch(0.2, 0.8), ch(0.2, 0.8)],
            SensingModel::new(0.1, 0.0).unwrap(),
            1,
            Horizon::new(3, 0.9).unwrap(),
            RegularReward::log(2.0).unwrap(),
            BeliefVector::new(vec![0.9, 0.3, 0.4]).unwrap(),
        )
        .unwrap();
        let report = symmetry_check(&instance).unwrap();
        assert_eq!(report.pairs_checked, 1); // channels 1 and 2, both unsensed
        assert!(report.max_abs_difference <= SYMMETRY_TOLERANCE);
    }

    #[test]
    fn swapping_a_channel_with_itself_changes_nothing() {
        let instance = worked_example();
        let same = instance.with_swapped_channels(1, 1);
        assert_eq!(
            optimal_value(&instance).unwrap().value,
            optimal_value(&same).unwrap().value
        );
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
        let n = rng.random_range(2..=3);
        let k = rng.random_range(1..=n.min(2));
        let channels: Vec<ChannelModel> = (0..n)
            .map(|_| {
                let p01 = rng.random_range(0.05..0.5);
                ch(p01, rng.random_range((p01 + 0.05)..0.95))
            })
            .collect();
        let belief =
            BeliefVector::new((0..n).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        Instance::new(
            channels,
            SensingModel::new(rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)).unwrap(),
            k,
            Horizon::new(rng.random_range(1..=3), rng.random_range(0.0..=1.0)).unwrap(),
            RegularReward::linear(0.1).unwrap(),
            belief,
        )
        .unwrap()
    }

    #[test]
    fn optimal_value_dominates_sampled_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let instance = random_instance(&mut rng);
            let optimal = optimal_value(&instance).unwrap().value;
            let myopic = myopic_value(&instance).unwrap();
            assert!(myopic <= optimal + 1e-12);
            let random = crate::policy::RandomPolicy::for_instance(&instance, rng.random());
            let random_value = policy_value(&instance, &random).unwrap();
            assert!(random_value <= optimal + 1e-12);
        }
    }

    #[test]
    fn raising_a_belief_entry_never_lowers_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..25 {
            let instance = random_instance(&mut rng);
            let base = optimal_value(&instance).unwrap().value;
            let channel = rng.random_range(0..instance.n());
            let old = instance.initial_belief().entry(channel);
            let raised = instance
                .with_initial_belief(
                    instance
                        .initial_belief()
                        .with_entry(channel, rng.random_range(old..=1.0))
                        .unwrap(),
                )
                .unwrap();
            let lifted = optimal_value(&raised).unwrap().value;
            assert!(lifted >= base - 1e-12, "lifted {lifted} < base {base}");
        }
    }

    #[test]
    fn optimal_value_is_nondecreasing_in_discount() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..25 {
            let instance = random_instance(&mut rng);
            let lower_beta = rng.random_range(0.0..=instance.horizon().discount());
            let damped = Instance::new(
                instance.channels().to_vec(),
                *instance.sensing(),
                instance.k(),
                Horizon::new(instance.horizon().slots(), lower_beta).unwrap(),
                instance.reward().clone(),
                instance.initial_belief().clone(),
            )
            .unwrap();
            let high = optimal_value(&instance).unwrap().value;
            let low = optimal_value(&damped).unwrap().value;
            assert!(low <= high + 1e-12);
        }
    }

    #[test]
    fn slot_bounds_are_enforced() {
        let instance = worked_example();
        let action = ActionSet::new([0], 2).unwrap();
        assert!(matches!(
            pseudo_value(&instance, 0, instance.initial_belief(), &action),
            Err(PlannerError::SlotOutOfRange { .. })
        ));
        assert!(matches!(
            pseudo_value(&instance, 3, instance.initial_belief(), &action),
            Err(PlannerError::SlotOutOfRange { .. })
        ));
    }
}

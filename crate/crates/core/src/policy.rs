//! Sensing policies: myopic, seeded-random, and explicit decision trees.
//!
//! The myopic policy senses the k channels of largest belief. For any
//! g-regular slot reward that choice maximizes the expected immediate
//! reward, which `argmax_equivalence_check` verifies exhaustively. Ties are
//! broken by the one-step predicted belief `tau(w)` (descending) and then
//! by channel index (ascending), so every policy here is a deterministic
//! function of the slot, the belief and the ACK history, a requirement for
//! exact tree evaluation.
//!
//! `enumerate_tree_policies` yields every deterministic history-dependent
//! policy of an instance exactly once, which serves as the brute-force
//! optimality oracle at desk scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{binomial, ActionSet, AckOutcome, BeliefVector, ChannelModel, ModelError};
use crate::planner::Instance;
use crate::rewards::RegularReward;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("policy has no decision at slot {slot} for the reached history")]
    Undefined { slot: usize },

    #[error(
        "policy family too large: (C(n,k) * 2^k)^T = {estimate} exceeds the cap {cap}"
    )]
    EnumerationTooLarge { estimate: u128, cap: u128 },
}

/// Channels of largest belief; ties broken by descending `tau(w)`, then by
/// ascending index.
pub fn myopic_action(
    belief: &BeliefVector,
    channels: &[ChannelModel],
    k: usize,
) -> Result<ActionSet, ModelError> {
    let n = channels.len();
    if belief.len() != n {
        return Err(ModelError::LengthMismatch {
            belief: belief.len(),
            channels: n,
        });
    }
    if k == 0 || k > n {
        return Err(ModelError::InvalidSubsetSize { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let wa = belief.entry(a);
        let wb = belief.entry(b);
        wb.total_cmp(&wa)
            .then_with(|| {
                let ta = channels[a].tau_raw(wa);
                let tb = channels[b].tau_raw(wb);
                tb.total_cmp(&ta)
            })
            .then_with(|| a.cmp(&b))
    });
    order.truncate(k);
    ActionSet::new(order, n)
}

/// True iff the myopic set attains the maximum of the immediate reward over
/// all k-subsets (checked exhaustively, to 1e-12).
pub fn argmax_equivalence_check(
    belief: &BeliefVector,
    channels: &[ChannelModel],
    reward: &RegularReward,
    k: usize,
) -> Result<bool, ModelError> {
    let chosen = myopic_action(belief, channels, k)?;
    let chosen_value = reward.immediate_reward(belief, &chosen);
    let best = ActionSet::enumerate_all(channels.len(), k)?
        .iter()
        .map(|a| reward.immediate_reward(belief, a))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(chosen_value >= best - 1e-12)
}

/// A deterministic sensing rule: slot and observed ACK history in, action
/// out. Implementations must return the same action for the same inputs.
pub trait SensingPolicy: Send + Sync {
    fn choose(
        &self,
        slot: usize,
        belief: &BeliefVector,
        history: &[AckOutcome],
    ) -> Result<ActionSet, PolicyError>;

    fn label(&self) -> String;
}

/// Largest-belief policy with the deterministic tie-break.
#[derive(Debug, Clone)]
pub struct MyopicPolicy {
    channels: Vec<ChannelModel>,
    k: usize,
}

impl MyopicPolicy {
    pub fn new(channels: Vec<ChannelModel>, k: usize) -> Self {
        Self { channels, k }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Self::new(instance.channels().to_vec(), instance.k())
    }
}

impl SensingPolicy for MyopicPolicy {
    fn choose(
        &self,
        _slot: usize,
        belief: &BeliefVector,
        _history: &[AckOutcome],
    ) -> Result<ActionSet, PolicyError> {
        Ok(myopic_action(belief, &self.channels, self.k)?)
    }

    fn label(&self) -> String {
        "myopic".to_string()
    }
}

/// Uniformly random action, derived deterministically from
/// (seed, slot, history) so that tree evaluation and simulation see the
/// same decisions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    seed: u64,
    actions: Vec<ActionSet>,
}

impl RandomPolicy {
    pub fn new(seed: u64, n: usize, k: usize) -> Result<Self, ModelError> {
        Ok(Self {
            seed,
            actions: ActionSet::enumerate_all(n, k)?,
        })
    }

    pub fn for_instance(instance: &Instance, seed: u64) -> Self {
        Self::new(seed, instance.n(), instance.k()).expect("instance validated k <= n")
    }
}

fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl SensingPolicy for RandomPolicy {
    fn choose(
        &self,
        slot: usize,
        _belief: &BeliefVector,
        history: &[AckOutcome],
    ) -> Result<ActionSet, PolicyError> {
        use rand::{Rng, SeedableRng};
        let mut bytes = Vec::with_capacity(16 + history.len() * 8);
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(&(slot as u64).to_le_bytes());
        for outcome in history {
            bytes.push(0xfe); // outcome separator
            for &c in outcome.acked() {
                bytes.extend_from_slice(&(c as u32).to_le_bytes());
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(fnv1a64(bytes));
        let idx = rng.random_range(0..self.actions.len());
        Ok(self.actions[idx].clone())
    }

    fn label(&self) -> String {
        format!("random({})", self.seed)
    }
}

/// One node of an explicit decision tree: the action to sense, and one
/// child per ACK outcome of that action, indexed in the order produced by
/// `enumerate_outcomes` (outcome bitmask over the action's sorted
/// channels). Leaves have no children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    pub action: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PolicyTree>,
}

impl PolicyTree {
    pub fn node_count(&self) -> u64 {
        1 + self.children.iter().map(Self::node_count).sum::<u64>()
    }
}

/// A fully enumerated history-dependent policy.
#[derive(Debug, Clone)]
pub struct TreePolicy {
    root: PolicyTree,
    n: usize,
}

impl TreePolicy {
    pub fn new(root: PolicyTree, n: usize) -> Self {
        Self { root, n }
    }

    pub fn root(&self) -> &PolicyTree {
        &self.root
    }
}

impl SensingPolicy for TreePolicy {
    fn choose(
        &self,
        slot: usize,
        _belief: &BeliefVector,
        history: &[AckOutcome],
    ) -> Result<ActionSet, PolicyError> {
        let mut node = &self.root;
        for outcome in history {
            let action = ActionSet::new(node.action.iter().copied(), self.n)?;
            if !outcome.is_subset_of(&action) {
                return Err(PolicyError::Undefined { slot });
            }
            let idx: usize = action
                .channels()
                .iter()
                .enumerate()
                .filter(|(_, &c)| outcome.is_acked(c))
                .map(|(j, _)| 1usize << j)
                .sum();
            node = node.children.get(idx).ok_or(PolicyError::Undefined { slot })?;
        }
        Ok(ActionSet::new(node.action.iter().copied(), self.n)?)
    }

    fn label(&self) -> String {
        "fixed-tree".to_string()
    }
}

/// Size gate for the brute-force policy family, `(C(n,k) * 2^k)^T`.
pub fn policy_family_estimate(n: usize, k: usize, horizon: usize) -> u128 {
    let base = binomial(n, k).saturating_mul(1u128 << k.min(127));
    let mut acc: u128 = 1;
    for _ in 0..horizon {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// Lazily yields every deterministic history-dependent policy of the
/// instance exactly once.
///
/// A policy assigns one of the C(n,k) actions to each of the
/// `sum over j < T of 2^(k*j)` decision nodes; enumeration counts through
/// those assignments in mixed radix, least-significant node first, with
/// nodes ordered depth-first (node before its children, children in
/// outcome order).
pub fn enumerate_tree_policies(
    instance: &Instance,
    cap: u128,
) -> Result<TreePolicyEnumerator, PolicyError> {
    let n = instance.n();
    let k = instance.k();
    let horizon = instance.horizon().slots();
    let estimate = policy_family_estimate(n, k, horizon);
    if estimate > cap {
        return Err(PolicyError::EnumerationTooLarge { estimate, cap });
    }
    let actions = ActionSet::enumerate_all(n, k)?;
    let mut nodes: u64 = 0;
    let mut level: u64 = 1;
    for _ in 0..horizon {
        nodes += level;
        level *= 1 << k;
    }
    Ok(TreePolicyEnumerator {
        actions,
        digits: vec![0; nodes as usize],
        horizon,
        branching: 1 << k,
        exhausted: false,
    })
}

#[derive(Debug)]
pub struct TreePolicyEnumerator {
    actions: Vec<ActionSet>,
    digits: Vec<usize>,
    horizon: usize,
    branching: usize,
    exhausted: bool,
}

impl TreePolicyEnumerator {
    fn build(&self, depth: usize, cursor: &mut usize) -> PolicyTree {
        let action = self.actions[self.digits[*cursor]].channels().to_vec();
        *cursor += 1;
        let children = if depth + 1 < self.horizon {
            (0..self.branching)
                .map(|_| self.build(depth + 1, cursor))
                .collect()
        } else {
            Vec::new()
        };
        PolicyTree { action, children }
    }

    fn advance(&mut self) -> bool {
        for digit in self.digits.iter_mut() {
            *digit += 1;
            if *digit < self.actions.len() {
                return true;
            }
            *digit = 0;
        }
        false
    }
}

impl Iterator for TreePolicyEnumerator {
    type Item = PolicyTree;

    fn next(&mut self) -> Option<PolicyTree> {
        if self.exhausted {
            return None;
        }
        let mut cursor = 0;
        let tree = self.build(0, &mut cursor);
        debug_assert_eq!(cursor, self.digits.len());
        if !self.advance() {
            self.exhausted = true;
        }
        Some(tree)
    }
}

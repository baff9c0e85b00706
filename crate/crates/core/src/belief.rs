//! Belief arithmetic for two-state Markov channels observed through ACKs.
//!
//! Each channel is a Gilbert-Elliott chain over {bad, good} with transition
//! probabilities `p01` (bad to good) and `p11` (good stays good). A user
//! senses `k` of `N` channels per slot, transmits on the ones sensed good,
//! and observes only the resulting ACK/NACK feedback, so channel states are
//! tracked through a belief vector: the posterior probability that each
//! channel is good.
//!
//! The module provides the two belief operators (one-step Markov prediction
//! `tau` and the Bayes correction `phi` applied after a missing ACK), the
//! full per-slot belief update, and the probability law of the ACK outcomes
//! of an action.

use serde::Serialize;
use thiserror::Error;

/// Errors from constructing or combining the model types of this module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("channel must be positively correlated: p11={p11} <= p01={p01}")]
    NotPositivelyCorrelated { p01: f64, p11: f64 },

    /// p01=0 together with p11=1 makes the chain reducible; there is no
    /// stationary distribution and 1 + p01 - p11 = 0.
    #[error("degenerate chain: p01={p01}, p11={p11} leaves 1 + p01 - p11 = 0")]
    DegenerateChain { p01: f64, p11: f64 },

    #[error("false alarm rate must lie in [0, 1), got {0}")]
    FalseAlarmOutOfRange(f64),

    #[error("belief entry {index} must lie in [0, 1], got {value}")]
    BeliefOutOfRange { index: usize, value: f64 },

    #[error("action set must hold at least one channel")]
    EmptyActionSet,

    #[error("action channel {channel} out of range for {n} channels")]
    ChannelOutOfRange { channel: usize, n: usize },

    #[error("action set repeats channel {channel}")]
    DuplicateChannel { channel: usize },

    #[error("ack outcome {acked:?} is not a subset of the action {action:?}")]
    OutcomeNotSubset { acked: Vec<usize>, action: Vec<usize> },

    #[error("belief vector has {belief} entries but there are {channels} channels")]
    LengthMismatch { belief: usize, channels: usize },

    #[error("cannot sense k={k} of {n} channels")]
    InvalidSubsetSize { k: usize, n: usize },

    #[error("horizon must span at least one slot")]
    EmptyHorizon,
}

fn check_probability(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::ProbabilityOutOfRange { name, value })
    }
}

/// A positively correlated two-state Markov channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    p01: f64,
    p11: f64,
}

impl ChannelModel {
    /// Requires `0 <= p01 < p11 <= 1` and a proper (irreducible) chain,
    /// i.e. not `p01 = 0, p11 = 1`.
    pub fn new(p01: f64, p11: f64) -> Result<Self, ModelError> {
        check_probability("p01", p01)?;
        check_probability("p11", p11)?;
        if p11 <= p01 {
            return Err(ModelError::NotPositivelyCorrelated { p01, p11 });
        }
        if 1.0 + p01 - p11 <= 0.0 {
            return Err(ModelError::DegenerateChain { p01, p11 });
        }
        Ok(Self { p01, p11 })
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p11(&self) -> f64 {
        self.p11
    }

    /// Transition gap `p11 - p01`, positive by construction.
    pub fn gap(&self) -> f64 {
        self.p11 - self.p01
    }

    /// One-step Markov prediction of a belief:
    /// `tau(w) = w * p11 + (1 - w) * p01`.
    ///
    /// The result always lies in `[p01, p11]`.
    pub fn tau(&self, omega: f64) -> Result<f64, ModelError> {
        check_probability("omega", omega)?;
        Ok(self.tau_raw(omega))
    }

    #[inline]
    pub(crate) fn tau_raw(&self, omega: f64) -> f64 {
        omega * self.p11 + (1.0 - omega) * self.p01
    }

    /// Stationary probability of the good state, `p01 / (1 + p01 - p11)`.
    /// The fixed point of `tau`.
    pub fn stationary_belief(&self) -> f64 {
        self.p01 / (1.0 + self.p01 - self.p11)
    }
}

/// System-wide sensing error rates: false alarm `epsilon` (a good channel
/// sensed bad) and miss detection `delta` (a bad channel sensed good).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensingModel {
    epsilon: f64,
    delta: f64,
}

impl SensingModel {
    /// Requires `0 <= epsilon < 1` and `0 <= delta <= 1`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, ModelError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(ModelError::FalseAlarmOutOfRange(epsilon));
        }
        check_probability("delta", delta)?;
        Ok(Self { epsilon, delta })
    }

    /// Error-free sensing.
    pub fn perfect() -> Self {
        Self {
            epsilon: 0.0,
            delta: 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Bayes correction of a belief after a NACK on a sensed channel:
    /// `phi(w) = eps * w / (eps * w + 1 - w)`.
    ///
    /// At `w = 1` the value is 1 for every `epsilon`: the formula gives
    /// `eps/eps` when `eps > 0`, and the `eps = 0` case is defined as 1 by
    /// continuity (a surely-good channel with no false alarms can never
    /// produce a NACK, so the branch is unreachable).
    pub fn phi(&self, omega: f64) -> Result<f64, ModelError> {
        check_probability("omega", omega)?;
        Ok(self.phi_raw(omega))
    }

    #[inline]
    pub(crate) fn phi_raw(&self, omega: f64) -> f64 {
        if omega == 1.0 {
            return 1.0;
        }
        let num = self.epsilon * omega;
        num / (num + 1.0 - omega)
    }
}

/// Per-channel posterior probability of the good state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    /// Validates every entry into `[0, 1]`.
    pub fn new(omega: Vec<f64>) -> Result<Self, ModelError> {
        for (index, &value) in omega.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::BeliefOutOfRange { index, value });
            }
        }
        Ok(Self(omega))
    }

    /// Entries in `[0, 1]` by construction of the caller.
    pub(crate) fn from_validated(omega: Vec<f64>) -> Self {
        debug_assert!(omega.iter().all(|w| (0.0..=1.0).contains(w)));
        Self(omega)
    }

    /// The stationary belief of every channel; the conventional start when
    /// nothing is known about the initial states.
    pub fn stationary(channels: &[ChannelModel]) -> Self {
        Self(channels.iter().map(|c| c.stationary_belief()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entry(&self, channel: usize) -> f64 {
        self.0[channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The sensed sub-vector, in ascending channel order.
    pub fn sub_vector(&self, action: &ActionSet) -> Vec<f64> {
        action.channels().iter().map(|&i| self.0[i]).collect()
    }

    /// Copy with one entry replaced.
    pub fn with_entry(&self, channel: usize, value: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ModelError::BeliefOutOfRange {
                index: channel,
                value,
            });
        }
        let mut omega = self.0.clone();
        omega[channel] = value;
        Ok(Self(omega))
    }

    /// Copy with two entries exchanged.
    pub fn with_swapped(&self, i: usize, j: usize) -> Self {
        let mut omega = self.0.clone();
        omega.swap(i, j);
        Self(omega)
    }
}

/// The set of channels sensed in one slot. Indices are distinct, 0-based,
/// stored in ascending order; the set is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ActionSet(Vec<usize>);

impl ActionSet {
    pub fn new(channels: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, ModelError> {
        let mut sorted: Vec<usize> = channels.into_iter().collect();
        sorted.sort_unstable();
        if sorted.is_empty() {
            return Err(ModelError::EmptyActionSet);
        }
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicateChannel { channel: pair[0] });
            }
        }
        if let Some(&last) = sorted.last() {
            if last >= n {
                return Err(ModelError::ChannelOutOfRange { channel: last, n });
            }
        }
        Ok(Self(sorted))
    }

    pub(crate) fn from_sorted(channels: Vec<usize>) -> Self {
        debug_assert!(channels.windows(2).all(|p| p[0] < p[1]));
        debug_assert!(!channels.is_empty());
        Self(channels)
    }

    pub fn channels(&self) -> &[usize] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.0.binary_search(&channel).is_ok()
    }

    /// All k-subsets of `{0, .., n-1}` in lexicographic order.
    pub fn enumerate_all(n: usize, k: usize) -> Result<Vec<ActionSet>, ModelError> {
        if k == 0 {
            return Err(ModelError::EmptyActionSet);
        }
        if k > n {
            return Err(ModelError::InvalidSubsetSize { k, n });
        }
        let mut out = Vec::with_capacity(binomial(n, k) as usize);
        let mut current = Vec::with_capacity(k);
        fn rec(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<ActionSet>) {
            if current.len() == k {
                out.push(ActionSet::from_sorted(current.clone()));
                return;
            }
            let remaining = k - current.len();
            for i in start..=(n - remaining) {
                current.push(i);
                rec(n, k, i + 1, current, out);
                current.pop();
            }
        }
        rec(n, k, 0, &mut current, &mut out);
        Ok(out)
    }
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// The subset of a sensed action that returned ACK = 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AckOutcome(Vec<usize>);

impl AckOutcome {
    /// `acked` must be a subset of `action`.
    pub fn new(
        acked: impl IntoIterator<Item = usize>,
        action: &ActionSet,
    ) -> Result<Self, ModelError> {
        let mut sorted: Vec<usize> = acked.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        if !sorted.iter().all(|&i| action.contains(i)) {
            return Err(ModelError::OutcomeNotSubset {
                acked: sorted,
                action: action.channels().to_vec(),
            });
        }
        Ok(Self(sorted))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub(crate) fn from_sorted(acked: Vec<usize>) -> Self {
        debug_assert!(acked.windows(2).all(|p| p[0] < p[1]));
        Self(acked)
    }

    pub fn acked(&self) -> &[usize] {
        &self.0
    }

    pub fn is_acked(&self, channel: usize) -> bool {
        self.0.binary_search(&channel).is_ok()
    }

    pub fn is_subset_of(&self, action: &ActionSet) -> bool {
        self.0.iter().all(|&i| action.contains(i))
    }
}

/// Number of slots `T >= 1` and discount `beta` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    slots: usize,
    discount: f64,
}

impl Horizon {
    pub fn new(slots: usize, discount: f64) -> Result<Self, ModelError> {
        if slots == 0 {
            return Err(ModelError::EmptyHorizon);
        }
        check_probability("beta", discount)?;
        Ok(Self { slots, discount })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Bayes update of the full belief vector after one slot.
///
/// Sensed and acked channels jump to `p11`; sensed channels without an ACK
/// go through `tau(phi(w))`; unsensed channels evolve by `tau(w)` alone.
pub fn update_belief(
    belief: &BeliefVector,
    channels: &[ChannelModel],
    sensing: &SensingModel,
    action: &ActionSet,
    outcome: &AckOutcome,
) -> Result<BeliefVector, ModelError> {
    if belief.len() != channels.len() {
        return Err(ModelError::LengthMismatch {
            belief: belief.len(),
            channels: channels.len(),
        });
    }
    if let Some(&last) = action.channels().last() {
        if last >= channels.len() {
            return Err(ModelError::ChannelOutOfRange {
                channel: last,
                n: channels.len(),
            });
        }
    }
    if !outcome.is_subset_of(action) {
        return Err(ModelError::OutcomeNotSubset {
            acked: outcome.acked().to_vec(),
            action: action.channels().to_vec(),
        });
    }
    let omega = belief
        .as_slice()
        .iter()
        .zip(channels)
        .enumerate()
        .map(|(i, (&w, ch))| {
            if outcome.is_acked(i) {
                ch.p11()
            } else if action.contains(i) {
                ch.tau_raw(sensing.phi_raw(w))
            } else {
                ch.tau_raw(w)
            }
        })
        .collect();
    Ok(BeliefVector::from_validated(omega))
}

/// Probability of observing exactly the ACK subset `outcome` when sensing
/// `action` under belief `belief`:
/// the product of `(1 - eps) * w_i` over acked channels times
/// `1 - (1 - eps) * w_j` over the sensed-but-unacked ones.
pub fn outcome_probability(
    belief: &BeliefVector,
    sensing: &SensingModel,
    action: &ActionSet,
    outcome: &AckOutcome,
) -> Result<f64, ModelError> {
    if !outcome.is_subset_of(action) {
        return Err(ModelError::OutcomeNotSubset {
            acked: outcome.acked().to_vec(),
            action: action.channels().to_vec(),
        });
    }
    let reach = 1.0 - sensing.epsilon();
    let mut prob = 1.0;
    for &i in action.channels() {
        let ack = reach * belief.entry(i);
        prob *= if outcome.is_acked(i) { ack } else { 1.0 - ack };
    }
    Ok(prob)
}

/// All `2^k` ACK outcomes of an action, each exactly once.
///
/// Deterministic order: outcome `m` holds the `j`-th smallest channel of the
/// action iff bit `j` of `m` is set, for `m = 0, .., 2^k - 1`. For the
/// action `{0, 3}` this yields `[{}, {0}, {3}, {0, 3}]`.
pub fn enumerate_outcomes(action: &ActionSet) -> Vec<AckOutcome> {
    let k = action.k();
    let channels = action.channels();
    (0u64..(1u64 << k))
        .map(|mask| {
            let acked = (0..k)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| channels[j])
                .collect();
            AckOutcome::from_sorted(acked)
        })
        .collect()
}

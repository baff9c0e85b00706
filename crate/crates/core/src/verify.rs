//! Randomized verification suites over generated instances.
//!
//! Every suite is driven by one master seed; trial `i` always draws from
//! the ChaCha stream `(seed, stream = i)`, so reports are reproducible
//! byte for byte regardless of how many threads run the expensive parts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefVector, ChannelModel, Horizon, SensingModel};
use crate::conditions::{compute_quantities, evaluate_conditions, geometric_gap_sum};
use crate::planner::{
    lemma4_bound_check, lemma5_check, myopic_value, optimal_value_with_myopic_audit,
    symmetry_check, Instance, PlannerError, DEFAULT_NODE_CAP,
};
use crate::rewards::{RegularReward, RewardError};

/// Relative agreement demanded between the myopic and the optimal value
/// on instances whose optimality condition holds.
pub const VALUE_MATCH_REL_TOL: f64 = 1e-9;

/// A reward selected by name, instantiated against the instance's false
/// alarm rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    Linear,
    Log { base: f64 },
    Power { exponent: f64 },
}

impl RewardSpec {
    pub fn build(&self, epsilon: f64) -> Result<RegularReward, RewardError> {
        match self {
            RewardSpec::Linear => RegularReward::linear(epsilon),
            RewardSpec::Log { base } => RegularReward::log(*base),
            RewardSpec::Power { exponent } => RegularReward::power(*exponent),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RewardSpec::Linear => "linear".into(),
            RewardSpec::Log { base } => format!("log({base})"),
            RewardSpec::Power { exponent } => format!("power({exponent})"),
        }
    }
}

/// Sampling ranges for the instance generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorRanges {
    pub n_choices: Vec<usize>,
    pub k_choices: Vec<usize>,
    pub t_choices: Vec<usize>,
    pub beta: (f64, f64),
    pub epsilon: (f64, f64),
    pub delta: (f64, f64),
    pub p01: (f64, f64),
    pub gap: (f64, f64),
    /// Upper bound forced onto every channel's transition gap.
    pub delta_p_max_cap: Option<f64>,
    /// Draw one channel per instance and clone it, producing identical
    /// (i.i.d.) channels.
    pub identical_channels: bool,
    /// Rewards rotated across trials.
    pub rewards: Vec<RewardSpec>,
}

impl Default for GeneratorRanges {
    fn default() -> Self {
        Self {
            n_choices: vec![2, 3, 4],
            k_choices: vec![1, 2],
            t_choices: vec![2, 3, 4, 5],
            beta: (0.0, 1.0),
            epsilon: (0.0, 0.3),
            delta: (0.0, 0.3),
            p01: (0.05, 0.6),
            gap: (0.05, 0.9),
            delta_p_max_cap: None,
            identical_channels: false,
            rewards: vec![
                RewardSpec::Linear,
                RewardSpec::Log { base: 2.0 },
                RewardSpec::Power { exponent: 2.0 },
            ],
        }
    }
}

impl GeneratorRanges {
    pub fn with_reward(mut self, reward: RewardSpec) -> Self {
        self.rewards = vec![reward];
        self
    }

    pub fn with_gap_cap(mut self, cap: f64) -> Self {
        self.delta_p_max_cap = Some(cap);
        self
    }

    pub fn with_identical_channels(mut self) -> Self {
        self.identical_channels = true;
        self
    }
}

fn random_channel(rng: &mut ChaCha8Rng, ranges: &GeneratorRanges) -> ChannelModel {
    let p01 = rng.random_range(ranges.p01.0..=ranges.p01.1.min(0.9));
    let mut hi = ranges.gap.1.min(0.98 - p01);
    if let Some(cap) = ranges.delta_p_max_cap {
        hi = hi.min(cap);
    }
    let lo = ranges.gap.0.min(hi).max(0.01);
    let gap = rng.random_range(lo..=hi.max(lo));
    ChannelModel::new(p01, p01 + gap).expect("generator keeps p01 < p11 < 1")
}

/// One random instance. Initial beliefs for the linear reward roam all of
/// `[0, 1]`; for the curved rewards they stay inside `[p01_min, p11_max]`,
/// the envelope on which the closed-form slope bounds are valid (every
/// belief enters it after one update anyway).
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    ranges: &GeneratorRanges,
    reward: &RewardSpec,
) -> Instance {
    let n = ranges.n_choices[rng.random_range(0..ranges.n_choices.len())];
    let k = ranges.k_choices[rng.random_range(0..ranges.k_choices.len())].min(n);
    let channels: Vec<ChannelModel> = if ranges.identical_channels {
        vec![random_channel(rng, ranges); n]
    } else {
        (0..n).map(|_| random_channel(rng, ranges)).collect()
    };
    let slots = ranges.t_choices[rng.random_range(0..ranges.t_choices.len())];
    let beta = rng.random_range(ranges.beta.0..=ranges.beta.1);
    let epsilon = rng.random_range(ranges.epsilon.0..=ranges.epsilon.1.min(0.999));
    let delta = rng.random_range(ranges.delta.0..=ranges.delta.1);
    let (belief_lo, belief_hi) = match reward {
        RewardSpec::Linear => (0.0, 1.0),
        _ => (
            channels.iter().map(|c| c.p01()).fold(f64::INFINITY, f64::min),
            channels.iter().map(|c| c.p11()).fold(0.0_f64, f64::max),
        ),
    };
    let belief = BeliefVector::new(
        (0..n)
            .map(|_| rng.random_range(belief_lo..=belief_hi))
            .collect(),
    )
    .expect("generator keeps beliefs in range");
    Instance::new(
        channels,
        SensingModel::new(epsilon, delta).expect("generator keeps rates in range"),
        k,
        Horizon::new(slots, beta).expect("generator keeps the horizon valid"),
        reward.build(epsilon).expect("generator builds valid rewards"),
        belief,
    )
    .expect("generator builds valid instances")
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Outcome of one randomized suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub notes: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Sampled axiom checks over the built-in rewards.
pub fn run_axiom_suite(samples: usize, seed: u64) -> SuiteReport {
    let rewards = [
        ("linear(eps=0)", RegularReward::linear(0.0)),
        ("linear(eps=0.15)", RegularReward::linear(0.15)),
        ("linear(eps=0.3)", RegularReward::linear(0.3)),
        ("log(2)", RegularReward::log(2.0)),
        ("power(2)", RegularReward::power(2.0)),
        ("power(3)", RegularReward::power(3.0)),
    ];
    let mut failures = 0;
    let mut first_failure = None;
    let mut labels = Vec::new();
    for (idx, (label, reward)) in rewards.into_iter().enumerate() {
        let reward = reward.expect("built-in parameters are valid");
        labels.push(label);
        for k in [1, 2, 3] {
            let sub_seed = seed.wrapping_add(idx as u64 * 31 + k as u64);
            if let Err(failure) = reward.check_axioms(k, samples, sub_seed) {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!(
                        "{label} at k={k}: {} axiom falsified at {:?}: {}",
                        failure.axiom, failure.point, failure.detail
                    ));
                }
            }
        }
    }
    SuiteReport {
        suite: "axioms".into(),
        seed,
        trials: samples,
        failures,
        first_failure,
        notes: format!("rewards: {}", labels.join(", ")),
    }
}

/// Exact W-differences against the case-wise closed-form bounds, plus the
/// impossibility of the leave-the-set case.
pub fn run_lemma4_suite(ranges: &GeneratorRanges, trials: usize, seed: u64) -> SuiteReport {
    let mut failures = 0;
    let mut first_failure = None;
    let mut case_counts = [0usize; 3];
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let reward = ranges.rewards[trial % ranges.rewards.len()];
        let instance = random_instance(&mut rng, ranges, &reward);
        let q = compute_quantities(&instance).expect("built-in quantities");
        let t = rng.random_range(1..=instance.horizon().slots());
        let l = rng.random_range(0..instance.n());
        let a = rng.random_range(q.p01_min..=q.p11_max);
        let b = rng.random_range(q.p01_min..=q.p11_max);
        let (omega_l, omega_l_prime) = if a <= b { (a, b) } else { (b, a) };
        match lemma4_bound_check(&instance, t, l, omega_l, omega_l_prime) {
            Ok(report) => {
                case_counts[report.case as usize] += 1;
            }
            Err(err) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!("trial {trial}: {err}"));
                }
            }
        }
    }
    SuiteReport {
        suite: "lemma4".into(),
        seed,
        trials,
        failures,
        first_failure,
        notes: format!(
            "cases: both-sensed {}, neither-sensed {}, enters-set {}",
            case_counts[0], case_counts[1], case_counts[2]
        ),
    }
}

/// Swap dominance on premise-satisfying instances.
pub fn run_lemma5_suite(ranges: &GeneratorRanges, trials: usize, seed: u64) -> SuiteReport {
    let mut failures = 0;
    let mut first_failure = None;
    let mut executed = 0;
    let mut attempt: u64 = 0;
    let max_attempts = (trials as u64) * 200;
    while executed < trials && attempt < max_attempts {
        let mut rng = trial_rng(seed, attempt);
        attempt += 1;
        let reward = ranges.rewards[(attempt as usize) % ranges.rewards.len()];
        let instance = random_instance(&mut rng, ranges, &reward);
        if instance.n() < 2 {
            continue;
        }
        let q = compute_quantities(&instance).expect("built-in quantities");
        let premise_lhs = q.g_prime_min * q.delta_min / (q.g_prime_max * q.delta_max);
        let premise_rhs = geometric_gap_sum(
            instance.horizon().discount(),
            q.delta_p_max,
            1,
            instance.horizon().slots() - 1,
        );
        if !(premise_lhs >= premise_rhs) {
            continue;
        }
        // two distinct channels with strictly ordered beliefs
        let i = rng.random_range(0..instance.n());
        let j = rng.random_range(0..instance.n());
        if i == j {
            continue;
        }
        let (l, m) = if instance.initial_belief().entry(i) > instance.initial_belief().entry(j) {
            (i, j)
        } else if instance.initial_belief().entry(j) > instance.initial_belief().entry(i) {
            (j, i)
        } else {
            continue;
        };
        let t = rng.random_range(1..=instance.horizon().slots());
        executed += 1;
        match lemma5_check(&instance, t, instance.initial_belief(), l, m) {
            Ok(_) => {}
            Err(PlannerError::Precondition(_)) => {
                executed -= 1; // does not count as an informative trial
            }
            Err(err) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!("attempt {attempt}: {err}"));
                }
            }
        }
    }
    SuiteReport {
        suite: "lemma5".into(),
        seed,
        trials: executed,
        failures,
        first_failure,
        notes: format!("attempts: {attempt}"),
    }
}

/// W invariance under exchanging two channels together with their beliefs.
pub fn run_symmetry_suite(ranges: &GeneratorRanges, trials: usize, seed: u64) -> SuiteReport {
    let mut failures = 0;
    let mut first_failure = None;
    let mut pairs = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let reward = ranges.rewards[trial % ranges.rewards.len()];
        let instance = random_instance(&mut rng, ranges, &reward);
        match symmetry_check(&instance) {
            Ok(report) => pairs += report.pairs_checked,
            Err(err) => {
                failures += 1;
                if first_failure.is_none() {
                    first_failure = Some(format!("trial {trial}: {err}"));
                }
            }
        }
    }
    SuiteReport {
        suite: "symmetry".into(),
        seed,
        trials,
        failures,
        first_failure,
        notes: format!("pairs swapped: {pairs}"),
    }
}

/// On instances satisfying the finite-horizon condition, the myopic action
/// must be optimal at every belief node it reaches and the myopic value
/// must equal the optimal value.
pub fn run_optimality_suite(
    ranges: &GeneratorRanges,
    target_accepted: usize,
    max_attempts: usize,
    seed: u64,
    node_cap: u128,
) -> SuiteReport {
    // cheap closed-form filter first, sequential and deterministic
    let mut accepted: Vec<(usize, Instance)> = Vec::with_capacity(target_accepted);
    let mut attempts = 0;
    while accepted.len() < target_accepted && attempts < max_attempts {
        let mut rng = trial_rng(seed, attempts as u64);
        let reward = ranges.rewards[attempts % ranges.rewards.len()];
        let instance = random_instance(&mut rng, ranges, &reward);
        attempts += 1;
        if estimated_within(&instance, node_cap) {
            let report = evaluate_conditions(&instance).expect("built-in rewards evaluate");
            if report.myopic_proven_optimal() {
                accepted.push((attempts - 1, instance));
            }
        }
    }

    // expensive exact solves in parallel, collected in deterministic order
    let outcomes: Vec<Option<String>> = accepted
        .par_iter()
        .map(|(attempt, instance)| -> Option<String> {
            let (report, audit) = match optimal_value_with_myopic_audit(instance, node_cap) {
                Ok(pair) => pair,
                Err(err) => return Some(format!("attempt {attempt}: solve failed: {err}")),
            };
            if !audit.passed() {
                return Some(format!(
                    "attempt {attempt}: {}",
                    audit.first_failure.unwrap_or_else(|| "audit failed".into())
                ));
            }
            let myopic = match myopic_value(instance) {
                Ok(v) => v,
                Err(err) => return Some(format!("attempt {attempt}: myopic eval failed: {err}")),
            };
            let gap = (report.value - myopic).abs();
            if gap > VALUE_MATCH_REL_TOL * report.value.abs().max(1e-12) {
                return Some(format!(
                    "attempt {attempt}: V_myopic={myopic} differs from V_optimal={} by {gap}; \
                     instance: {instance:?}",
                    report.value
                ));
            }
            None
        })
        .collect();

    let failures = outcomes.iter().flatten().count();
    let first_failure = outcomes.iter().flatten().next().cloned();
    SuiteReport {
        suite: "optimality".into(),
        seed,
        trials: accepted.len(),
        failures,
        first_failure,
        notes: format!(
            "{} of {} attempts satisfied the condition",
            accepted.len(),
            attempts
        ),
    }
}

fn estimated_within(instance: &Instance, cap: u128) -> bool {
    crate::planner::estimated_node_count(instance) <= cap
}

/// The named suites the verification front end can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifySuite {
    Axioms,
    Lemma4,
    Lemma5,
    Symmetry,
    Optimality,
}

impl std::str::FromStr for VerifySuite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "axioms" => Ok(Self::Axioms),
            "lemma4" => Ok(Self::Lemma4),
            "lemma5" => Ok(Self::Lemma5),
            "symmetry" => Ok(Self::Symmetry),
            "optimality" => Ok(Self::Optimality),
            other => Err(format!(
                "unknown suite '{other}' (expected axioms, lemma4, lemma5, symmetry or optimality)"
            )),
        }
    }
}

/// Knobs for [`run_suite`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub seed: u64,
    pub generator: GeneratorRanges,
    pub axiom_samples: usize,
    pub lemma4_trials: usize,
    pub lemma5_trials: usize,
    pub symmetry_trials: usize,
    pub optimality_target: usize,
    pub optimality_max_attempts: usize,
    pub node_cap: u128,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            seed: 0,
            generator: GeneratorRanges::default(),
            axiom_samples: 10_000,
            lemma4_trials: 500,
            lemma5_trials: 200,
            symmetry_trials: 200,
            optimality_target: 200,
            optimality_max_attempts: 10_000,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

pub fn run_suite(suite: VerifySuite, params: &VerifyParams) -> SuiteReport {
    match suite {
        VerifySuite::Axioms => run_axiom_suite(params.axiom_samples, params.seed),
        VerifySuite::Lemma4 => {
            run_lemma4_suite(&params.generator, params.lemma4_trials, params.seed)
        }
        VerifySuite::Lemma5 => {
            run_lemma5_suite(&params.generator, params.lemma5_trials, params.seed)
        }
        VerifySuite::Symmetry => {
            run_symmetry_suite(&params.generator, params.symmetry_trials, params.seed)
        }
        VerifySuite::Optimality => run_optimality_suite(
            &params.generator,
            params.optimality_target,
            params.optimality_max_attempts,
            params.seed,
            params.node_cap,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_ranges_and_gap_cap() {
        let ranges = GeneratorRanges::default().with_gap_cap(0.5);
        for trial in 0..200 {
            let mut rng = trial_rng(3, trial);
            let instance = random_instance(&mut rng, &ranges, &RewardSpec::Linear);
            assert!(ranges.n_choices.contains(&instance.n()));
            assert!(instance.k() <= instance.n());
            for c in instance.channels() {
                assert!(c.gap() <= 0.5 + 1e-12);
                assert!(c.p01() >= 0.05 && c.p11() <= 0.98);
            }
        }
    }

    #[test]
    fn curved_reward_beliefs_stay_in_envelope() {
        let ranges = GeneratorRanges::default();
        for trial in 0..100 {
            let mut rng = trial_rng(5, trial);
            let instance =
                random_instance(&mut rng, &ranges, &RewardSpec::Power { exponent: 2.0 });
            let q = compute_quantities(&instance).unwrap();
            for &w in instance.initial_belief().as_slice() {
                assert!(q.p01_min <= w && w <= q.p11_max);
            }
        }
    }

    #[test]
    fn suites_are_reproducible() {
        let ranges = GeneratorRanges::default();
        let a = run_lemma4_suite(&ranges, 20, 77);
        let b = run_lemma4_suite(&ranges, 20, 77);
        assert_eq!(a.notes, b.notes);
        assert_eq!(a.failures, b.failures);
    }

    #[test]
    fn small_suite_smoke() {
        let ranges = GeneratorRanges {
            t_choices: vec![2, 3],
            ..GeneratorRanges::default()
        };
        assert!(run_symmetry_suite(&ranges, 10, 13).passed());
        assert!(run_axiom_suite(200, 15).passed());
        let optimality = run_optimality_suite(
            &ranges.clone().with_identical_channels(),
            10,
            2_000,
            14,
            DEFAULT_NODE_CAP,
        );
        assert_eq!(optimality.trials, 10, "{}", optimality.notes);
        assert!(optimality.passed(), "{:?}", optimality.first_failure);
    }

    /// The closed-form condition does not imply myopic optimality for
    /// non-identical channels; the suite must surface such instances as
    /// failures rather than hide them.
    #[test]
    fn heterogeneous_optimality_suite_reports_counterexamples() {
        let ranges = GeneratorRanges {
            t_choices: vec![2, 3],
            ..GeneratorRanges::default()
        };
        let report = run_optimality_suite(&ranges, 40, 4_000, 14, DEFAULT_NODE_CAP);
        assert_eq!(report.trials, 40, "{}", report.notes);
        assert!(
            !report.passed(),
            "expected the known counterexamples to surface in 40 trials"
        );
        assert!(report.first_failure.is_some());
    }
}

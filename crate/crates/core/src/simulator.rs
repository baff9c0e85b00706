//! Monte Carlo validation of the analytical machinery, at two fidelities.
//!
//! The channel-level simulator draws true Markov states, sensing errors,
//! transmissions and collisions; ACKs arise mechanically (transmitted on a
//! channel that is actually good). The belief-level simulator never draws
//! states: it samples each sensed channel's ACK directly from the
//! belief-implied probability `(1 - eps) * w`. The two must agree in
//! distribution — that agreement, and the match against the planner's exact
//! policy value, is what the test suites check.
//!
//! Two reward accountings are kept per episode: the discounted sum of the
//! slot reward F over beliefs (the planner's objective) and the discounted
//! count of realized successes. For the linear reward the two coincide in
//! expectation.
//!
//! Reproducibility: episode `e` of a run seeded with `s` always uses the
//! ChaCha stream `(seed = s, stream = e)`, so results are independent of
//! execution order and the parallel and sequential paths are bit-identical.
//! Within an episode the draw order is fixed: initial states by channel,
//! then per slot the sensed channels in ascending order, then (channel
//! level, before the next slot) the state transitions by channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{update_belief, AckOutcome, ModelError};
use crate::planner::Instance;
use crate::policy::{PolicyError, SensingPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation needs at least one episode")]
    NoEpisodes,

    #[error(transparent)]
    Policy(#[from] PolicyError),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which random quantities an episode draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// True states, sensing outcomes, mechanical ACKs and collisions.
    ChannelLevel,
    /// ACKs sampled from the belief-implied law; no states exist.
    BeliefLevel,
}

/// Aggregate outcome of a batch of episodes.
#[derive(Debug, Clone, Serialize)]
pub struct SimStats {
    pub fidelity: Fidelity,
    pub episodes: usize,
    pub seed: u64,
    /// Mean discounted sum of the slot reward F over beliefs.
    pub mean_discounted_f: f64,
    pub stderr_f: f64,
    /// Mean discounted count of ACKed transmissions.
    pub mean_discounted_success: f64,
    pub stderr_success: f64,
    pub sensed_slots: u64,
    pub acks: u64,
    /// Channel level only: sensed-good slots whose channel was actually bad.
    pub collisions: Option<u64>,
    pub collision_rate: Option<f64>,
}

/// One slot of one episode, as written to an episode log.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRecord {
    pub fidelity: Fidelity,
    pub episode: usize,
    pub slot: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_states: Option<Vec<u8>>,
    pub action: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensed_good: Option<Vec<usize>>,
    pub acked: Vec<usize>,
    pub belief_before: Vec<f64>,
    pub belief_after: Vec<f64>,
    pub slot_reward: f64,
    pub successes: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collisions: Option<Vec<usize>>,
}

#[derive(Default, Clone, Copy)]
struct EpisodeTotals {
    discounted_f: f64,
    discounted_success: f64,
    sensed: u64,
    acks: u64,
    collisions: u64,
}

fn run_episode(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    fidelity: Fidelity,
    seed: u64,
    episode: usize,
    mut log: Option<&mut Vec<EpisodeRecord>>,
) -> Result<EpisodeTotals, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);

    let n = instance.n();
    let slots = instance.horizon().slots();
    let beta = instance.horizon().discount();
    let epsilon = instance.sensing().epsilon();
    let delta = instance.sensing().delta();

    let mut belief = instance.initial_belief().clone();
    let mut states: Vec<bool> = match fidelity {
        Fidelity::ChannelLevel => (0..n).map(|i| rng.random_bool(belief.entry(i))).collect(),
        Fidelity::BeliefLevel => Vec::new(),
    };

    let mut totals = EpisodeTotals::default();
    let mut history: Vec<AckOutcome> = Vec::with_capacity(slots);
    let mut discount = 1.0;

    for slot in 1..=slots {
        let action = policy.choose(slot, &belief, &history)?;
        totals.sensed += action.k() as u64;

        let mut acked = Vec::new();
        let mut sensed_good = Vec::new();
        let mut collisions = Vec::new();
        match fidelity {
            Fidelity::ChannelLevel => {
                for &i in action.channels() {
                    let good = states[i];
                    let sensed = if good {
                        !rng.random_bool(epsilon)
                    } else {
                        rng.random_bool(delta)
                    };
                    if sensed {
                        // the user transmits on every channel sensed good
                        sensed_good.push(i);
                        if good {
                            acked.push(i);
                        } else {
                            collisions.push(i);
                        }
                    }
                }
            }
            Fidelity::BeliefLevel => {
                for &i in action.channels() {
                    if rng.random_bool((1.0 - epsilon) * belief.entry(i)) {
                        acked.push(i);
                    }
                }
            }
        }
        totals.acks += acked.len() as u64;
        totals.collisions += collisions.len() as u64;

        let slot_reward = instance.reward().immediate_reward(&belief, &action);
        totals.discounted_f += discount * slot_reward;
        totals.discounted_success += discount * acked.len() as f64;

        let outcome = AckOutcome::new(acked.iter().copied(), &action)?;
        let next_belief = update_belief(
            &belief,
            instance.channels(),
            instance.sensing(),
            &action,
            &outcome,
        )?;

        if let Some(records) = log.as_deref_mut() {
            records.push(EpisodeRecord {
                fidelity,
                episode,
                slot,
                true_states: match fidelity {
                    Fidelity::ChannelLevel => {
                        Some(states.iter().map(|&s| s as u8).collect())
                    }
                    Fidelity::BeliefLevel => None,
                },
                action: action.channels().to_vec(),
                sensed_good: match fidelity {
                    Fidelity::ChannelLevel => Some(sensed_good),
                    Fidelity::BeliefLevel => None,
                },
                acked: acked.clone(),
                belief_before: belief.as_slice().to_vec(),
                belief_after: next_belief.as_slice().to_vec(),
                slot_reward,
                successes: acked.len() as u32,
                collisions: match fidelity {
                    Fidelity::ChannelLevel => Some(collisions),
                    Fidelity::BeliefLevel => None,
                },
            });
        }

        belief = next_belief;
        history.push(outcome);
        discount *= beta;

        if fidelity == Fidelity::ChannelLevel && slot < slots {
            // state transitions, channel by channel
            for (i, state) in states.iter_mut().enumerate() {
                let ch = instance.channels()[i];
                let p = if *state { ch.p11() } else { ch.p01() };
                *state = rng.random_bool(p);
            }
        }
    }

    Ok(totals)
}

fn aggregate(
    fidelity: Fidelity,
    seed: u64,
    per_episode: &[EpisodeTotals],
) -> SimStats {
    let episodes = per_episode.len();
    let n = episodes as f64;
    let mean =
        |f: &dyn Fn(&EpisodeTotals) -> f64| per_episode.iter().map(f).sum::<f64>() / n;
    let stderr = |f: &dyn Fn(&EpisodeTotals) -> f64, mean: f64| {
        if episodes < 2 {
            return 0.0;
        }
        let var = per_episode
            .iter()
            .map(|e| {
                let d = f(e) - mean;
                d * d
            })
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    };
    let mean_f = mean(&|e: &EpisodeTotals| e.discounted_f);
    let mean_s = mean(&|e: &EpisodeTotals| e.discounted_success);
    let sensed: u64 = per_episode.iter().map(|e| e.sensed).sum();
    let acks: u64 = per_episode.iter().map(|e| e.acks).sum();
    let collisions: u64 = per_episode.iter().map(|e| e.collisions).sum();
    let (collisions, collision_rate) = match fidelity {
        Fidelity::ChannelLevel => (
            Some(collisions),
            Some(if sensed > 0 {
                collisions as f64 / sensed as f64
            } else {
                0.0
            }),
        ),
        Fidelity::BeliefLevel => (None, None),
    };
    SimStats {
        fidelity,
        episodes,
        seed,
        mean_discounted_f: mean_f,
        stderr_f: stderr(&|e: &EpisodeTotals| e.discounted_f, mean_f),
        mean_discounted_success: mean_s,
        stderr_success: stderr(&|e: &EpisodeTotals| e.discounted_success, mean_s),
        sensed_slots: sensed,
        acks,
        collisions,
        collision_rate,
    }
}

fn simulate(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    fidelity: Fidelity,
    episodes: usize,
    seed: u64,
    sink: Option<&mut dyn FnMut(EpisodeRecord)>,
) -> Result<SimStats, SimError> {
    if episodes == 0 {
        return Err(SimError::NoEpisodes);
    }
    let per_episode: Vec<EpisodeTotals> = if let Some(sink) = sink {
        // logging keeps episodes in order on one thread
        let mut all = Vec::with_capacity(episodes);
        for episode in 0..episodes {
            let mut records = Vec::new();
            let totals = run_episode(
                instance,
                policy,
                fidelity,
                seed,
                episode,
                Some(&mut records),
            )?;
            for record in records {
                sink(record);
            }
            all.push(totals);
        }
        all
    } else {
        (0..episodes)
            .into_par_iter()
            .map(|episode| run_episode(instance, policy, fidelity, seed, episode, None))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(aggregate(fidelity, seed, &per_episode))
}

/// Simulate with true Markov states, sensing errors and collisions.
pub fn simulate_channel_level(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    episodes: usize,
    seed: u64,
) -> Result<SimStats, SimError> {
    simulate(instance, policy, Fidelity::ChannelLevel, episodes, seed, None)
}

/// Simulate ACKs straight from the belief-implied outcome law.
pub fn simulate_belief_level(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    episodes: usize,
    seed: u64,
) -> Result<SimStats, SimError> {
    simulate(instance, policy, Fidelity::BeliefLevel, episodes, seed, None)
}

/// As [`simulate_channel_level`], delivering every slot record to `sink`.
pub fn simulate_channel_level_logged(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    episodes: usize,
    seed: u64,
    sink: &mut dyn FnMut(EpisodeRecord),
) -> Result<SimStats, SimError> {
    simulate(
        instance,
        policy,
        Fidelity::ChannelLevel,
        episodes,
        seed,
        Some(sink),
    )
}

/// As [`simulate_belief_level`], delivering every slot record to `sink`.
pub fn simulate_belief_level_logged(
    instance: &Instance,
    policy: &dyn SensingPolicy,
    episodes: usize,
    seed: u64,
    sink: &mut dyn FnMut(EpisodeRecord),
) -> Result<SimStats, SimError> {
    simulate(
        instance,
        policy,
        Fidelity::BeliefLevel,
        episodes,
        seed,
        Some(sink),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefVector, ChannelModel, Horizon, SensingModel};
    use crate::planner::{policy_value, Instance};
    use crate::policy::MyopicPolicy;
    use crate::rewards::RegularReward;

    fn ch(p01: f64, p11: f64) -> ChannelModel {
        ChannelModel::new(p01, p11).unwrap()
    }

    fn small_instance(epsilon: f64, delta: f64, slots: usize, beta: f64) -> Instance {
        Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7), ch(0.1, 0.6)],
            SensingModel::new(epsilon, delta).unwrap(),
            1,
            Horizon::new(slots, beta).unwrap(),
            RegularReward::linear(epsilon).unwrap(),
            BeliefVector::new(vec![0.5, 0.6, 0.4]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn certainty_start_yields_full_first_slot_reward() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7)],
            SensingModel::perfect(),
            2,
            Horizon::new(1, 1.0).unwrap(),
            RegularReward::linear(0.0).unwrap(),
            BeliefVector::new(vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let policy = MyopicPolicy::for_instance(&instance);
        let stats = simulate_channel_level(&instance, &policy, 200, 5).unwrap();
        assert_eq!(stats.mean_discounted_f, 2.0);
        assert_eq!(stats.stderr_f, 0.0);
        // beliefs are certain and sensing is perfect, so every slot succeeds
        assert_eq!(stats.acks, 400);
    }

    #[test]
    fn certain_miss_detection_collides_without_ack() {
        // belief zero forces the true state bad; delta = 1 senses it good
        let instance = Instance::new(
            vec![ch(0.2, 0.8)],
            SensingModel::new(0.0, 1.0).unwrap(),
            1,
            Horizon::new(1, 1.0).unwrap(),
            RegularReward::linear(0.0).unwrap(),
            BeliefVector::new(vec![0.0]).unwrap(),
        )
        .unwrap();
        let policy = MyopicPolicy::for_instance(&instance);
        let mut records = Vec::new();
        let stats = simulate_channel_level_logged(&instance, &policy, 50, 9, &mut |r| {
            records.push(r)
        })
        .unwrap();
        assert_eq!(stats.acks, 0);
        assert_eq!(stats.collisions, Some(50));
        assert!(records
            .iter()
            .all(|r| r.sensed_good == Some(vec![0]) && r.collisions == Some(vec![0])));
    }

    #[test]
    fn seeded_runs_are_bit_reproducible() {
        let instance = small_instance(0.1, 0.2, 4, 0.9);
        let policy = MyopicPolicy::for_instance(&instance);
        let a = simulate_channel_level(&instance, &policy, 500, 123).unwrap();
        let b = simulate_channel_level(&instance, &policy, 500, 123).unwrap();
        assert_eq!(a.mean_discounted_f, b.mean_discounted_f);
        assert_eq!(a.acks, b.acks);
        let c = simulate_channel_level(&instance, &policy, 500, 124).unwrap();
        assert_ne!(a.acks, c.acks);
    }

    #[test]
    fn parallel_and_logged_paths_agree_exactly() {
        let instance = small_instance(0.15, 0.1, 3, 0.8);
        let policy = MyopicPolicy::for_instance(&instance);
        let parallel = simulate_belief_level(&instance, &policy, 300, 7).unwrap();
        let mut sink = |_r: EpisodeRecord| {};
        let logged =
            simulate_belief_level_logged(&instance, &policy, 300, 7, &mut sink).unwrap();
        assert_eq!(parallel.mean_discounted_f, logged.mean_discounted_f);
        assert_eq!(parallel.mean_discounted_success, logged.mean_discounted_success);
        assert_eq!(parallel.acks, logged.acks);
    }

    #[test]
    fn single_episode_log_is_reproducible() {
        let instance = small_instance(0.1, 0.3, 3, 1.0);
        let policy = MyopicPolicy::for_instance(&instance);
        let mut first = Vec::new();
        simulate_channel_level_logged(&instance, &policy, 1, 11, &mut |r| first.push(r)).unwrap();
        let mut second = Vec::new();
        simulate_channel_level_logged(&instance, &policy, 1, 11, &mut |r| second.push(r)).unwrap();
        assert_eq!(first.len(), 3);
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.acked, b.acked);
            assert_eq!(a.belief_after, b.belief_after);
            assert_eq!(a.true_states, b.true_states);
        }
    }

    #[test]
    fn ack_marginal_matches_belief_implied_probability() {
        // single slot, so the sensed belief is exactly the initial one
        let instance = Instance::new(
            vec![ch(0.2, 0.8)],
            SensingModel::new(0.2, 0.0).unwrap(),
            1,
            Horizon::new(1, 1.0).unwrap(),
            RegularReward::linear(0.2).unwrap(),
            BeliefVector::new(vec![0.6]).unwrap(),
        )
        .unwrap();
        let policy = MyopicPolicy::for_instance(&instance);
        let episodes = 20_000;
        let stats = simulate_channel_level(&instance, &policy, episodes, 17).unwrap();
        let expected = 0.8 * 0.6;
        let rate = stats.acks as f64 / stats.sensed_slots as f64;
        let sigma = (expected * (1.0 - expected) / episodes as f64).sqrt();
        assert!(
            (rate - expected).abs() <= 4.0 * sigma,
            "rate {rate} vs expected {expected} (sigma {sigma})"
        );
    }

    #[test]
    fn collision_marginal_matches_miss_detection_law() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8)],
            SensingModel::new(0.1, 0.3).unwrap(),
            1,
            Horizon::new(1, 1.0).unwrap(),
            RegularReward::linear(0.1).unwrap(),
            BeliefVector::new(vec![0.4]).unwrap(),
        )
        .unwrap();
        let policy = MyopicPolicy::for_instance(&instance);
        let episodes = 20_000;
        let stats = simulate_channel_level(&instance, &policy, episodes, 19).unwrap();
        let expected = 0.3 * 0.6; // delta * (1 - omega)
        let rate = stats.collision_rate.unwrap();
        let sigma = (expected * (1.0 - expected) / episodes as f64).sqrt();
        assert!(
            (rate - expected).abs() <= 4.0 * sigma,
            "rate {rate} vs expected {expected} (sigma {sigma})"
        );
    }

    #[test]
    fn fidelities_agree_with_each_other_and_the_planner() {
        let instance = small_instance(0.1, 0.2, 3, 0.9);
        let policy = MyopicPolicy::for_instance(&instance);
        let episodes = 20_000;
        let channel = simulate_channel_level(&instance, &policy, episodes, 23).unwrap();
        let belief = simulate_belief_level(&instance, &policy, episodes, 29).unwrap();
        let exact = policy_value(&instance, &policy).unwrap();

        let two_sample =
            (channel.stderr_f.powi(2) + belief.stderr_f.powi(2)).sqrt();
        assert!(
            (channel.mean_discounted_f - belief.mean_discounted_f).abs() <= 4.0 * two_sample,
            "channel {} vs belief {}",
            channel.mean_discounted_f,
            belief.mean_discounted_f
        );
        for stats in [&channel, &belief] {
            assert!(
                (stats.mean_discounted_f - exact).abs() <= 4.0 * stats.stderr_f,
                "{:?} mean {} vs exact {exact}",
                stats.fidelity,
                stats.mean_discounted_f
            );
        }
    }

    #[test]
    fn near_certain_false_alarm_silences_acks() {
        let instance = Instance::new(
            vec![ch(0.2, 0.8), ch(0.3, 0.7)],
            SensingModel::new(1.0 - 1e-9, 0.0).unwrap(),
            1,
            Horizon::new(3, 1.0).unwrap(),
            RegularReward::linear(1.0 - 1e-9).unwrap(),
            BeliefVector::new(vec![0.5, 0.6]).unwrap(),
        )
        .unwrap();
        let policy = MyopicPolicy::for_instance(&instance);
        let stats = simulate_belief_level(&instance, &policy, 1_000, 31).unwrap();
        assert_eq!(stats.acks, 0);
    }

    #[test]
    fn zero_episodes_is_an_error() {
        let instance = small_instance(0.1, 0.1, 2, 1.0);
        let policy = MyopicPolicy::for_instance(&instance);
        assert!(matches!(
            simulate_channel_level(&instance, &policy, 0, 1),
            Err(SimError::NoEpisodes)
        ));
    }
}

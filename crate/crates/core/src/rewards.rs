//! The g-regular slot-reward family.
//!
//! A slot reward `F` maps the beliefs of the k sensed channels to a real
//! number. The family used throughout the crate is characterized by three
//! axioms: symmetry in its arguments, strict monotonicity in each argument,
//! and g-decomposability: there is a continuous increasing `g` on [0, 1]
//! and a constant `c` such that
//!
//! ```text
//! F(.., w_i, ..) = c * g(w_i) * F(.., 1, ..) + c * (1 - g(w_i)) * F(.., 0, ..)
//! ```
//!
//! holds at every coordinate. Three built-in rewards are provided:
//!
//! - `linear(eps)`:  F = sum of (1 - eps) * w_i, g(w) = w
//! - `log(a)`, a > 1: F = sum of log_a(1 + w_i), g(w) = log2(1 + w)
//! - `power(a)`, a > 0: F = sum of w_i^a, g(w) = w^a
//!
//! All built-ins decompose with c = 1; the identity is exercised to 1e-12
//! by the test suite. Custom rewards supply their own `F`, `g` and `c`, and
//! get numeric fallbacks for the derivative and difference bounds.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::belief::{ActionSet, BeliefVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("linear reward needs a false alarm rate in [0, 1), got {0}")]
    BadEpsilon(f64),

    #[error("logarithmic reward needs base > 1, got {0}")]
    BadLogBase(f64),

    #[error("power reward needs exponent > 0, got {0}")]
    BadExponent(f64),

    #[error("derivative bounds need 0 <= lo <= hi <= 1, got [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },

    #[error(
        "grid search over [0,1]^{dims} is too large for a custom reward; \
         analytic delta bounds required beyond 4 free coordinates"
    )]
    AnalyticDeltaRequired { dims: usize },

    #[error("custom reward decomposition constant must be positive, got {0}")]
    BadConstant(f64),
}

/// Which axiom a sampled check falsified, with the witness point.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomFailure {
    pub axiom: Axiom,
    pub point: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Symmetry,
    Monotonicity,
    Decomposability,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axiom::Symmetry => write!(f, "symmetry"),
            Axiom::Monotonicity => write!(f, "monotonicity"),
            Axiom::Decomposability => write!(f, "g-decomposability"),
        }
    }
}

pub type SlotFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DecompositionFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied reward. `slot` is F, `g` and `c` its decomposition pair.
pub struct CustomReward {
    pub name: String,
    pub slot: SlotFn,
    pub g: DecompositionFn,
    pub c: f64,
}

/// A slot reward together with its decomposition pair.
#[derive(Clone)]
pub enum RegularReward {
    Linear { epsilon: f64 },
    Log { base: f64 },
    Power { exponent: f64 },
    Custom(Arc<CustomReward>),
}

impl fmt::Debug for RegularReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegularReward({})", self.kind_label())
    }
}

impl RegularReward {
    /// One unit of expected reward per successfully used channel:
    /// `F = sum of (1 - eps) * w_i`.
    pub fn linear(epsilon: f64) -> Result<Self, RewardError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(RewardError::BadEpsilon(epsilon));
        }
        Ok(Self::Linear { epsilon })
    }

    /// `F = sum of log_base(1 + w_i)`, base > 1.
    pub fn log(base: f64) -> Result<Self, RewardError> {
        if !(base > 1.0) {
            return Err(RewardError::BadLogBase(base));
        }
        Ok(Self::Log { base })
    }

    /// `F = sum of w_i^exponent`, exponent > 0.
    pub fn power(exponent: f64) -> Result<Self, RewardError> {
        if !(exponent > 0.0) {
            return Err(RewardError::BadExponent(exponent));
        }
        Ok(Self::Power { exponent })
    }

    pub fn custom(custom: CustomReward) -> Result<Self, RewardError> {
        if !(custom.c > 0.0) {
            return Err(RewardError::BadConstant(custom.c));
        }
        Ok(Self::Custom(Arc::new(custom)))
    }

    /// Stable label used in reports and CSV rows.
    pub fn kind_label(&self) -> String {
        match self {
            Self::Linear { .. } => "linear".to_string(),
            Self::Log { base } => format!("log({base})"),
            Self::Power { exponent } => format!("power({exponent})"),
            Self::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, Self::Custom(_))
    }

    fn term(&self, w: f64) -> f64 {
        match self {
            Self::Linear { epsilon } => (1.0 - epsilon) * w,
            Self::Log { base } => (1.0 + w).log(*base),
            Self::Power { exponent } => w.powf(*exponent),
            Self::Custom(_) => unreachable!("custom rewards evaluate F directly"),
        }
    }

    /// The slot reward F on a sensed belief sub-vector.
    ///
    /// Built-ins sum a per-channel term over the entries sorted by value, so
    /// the result is bit-for-bit invariant under permutations of the input.
    pub fn slot_reward(&self, sensed: &[f64]) -> f64 {
        match self {
            Self::Custom(c) => (c.slot)(sensed),
            _ => {
                let mut sorted = sensed.to_vec();
                sorted.sort_unstable_by(f64::total_cmp);
                sorted.iter().map(|&w| self.term(w)).sum()
            }
        }
    }

    /// F applied to the beliefs of the sensed channels.
    pub fn immediate_reward(&self, belief: &BeliefVector, action: &ActionSet) -> f64 {
        self.slot_reward(&belief.sub_vector(action))
    }

    /// The decomposition function g.
    pub fn g(&self, omega: f64) -> f64 {
        match self {
            Self::Linear { .. } => omega,
            Self::Log { .. } => (1.0 + omega).log2(),
            Self::Power { exponent } => omega.powf(*exponent),
            Self::Custom(c) => (c.g)(omega),
        }
    }

    /// The decomposition constant c.
    pub fn c(&self) -> f64 {
        match self {
            Self::Custom(c) => c.c,
            _ => 1.0,
        }
    }

    /// `|F(.., w_i, ..) - c g(w_i) F(.., 1, ..) - c (1 - g(w_i)) F(.., 0, ..)|`
    /// at one point; zero (to rounding) whenever the decomposition pair is
    /// exact.
    pub fn decomposition_residual(&self, sub: &[f64], i: usize) -> f64 {
        assert!(i < sub.len(), "coordinate {i} out of {}", sub.len());
        let mut hi = sub.to_vec();
        hi[i] = 1.0;
        let mut lo = sub.to_vec();
        lo[i] = 0.0;
        let g = self.g(sub[i]);
        let c = self.c();
        let recomposed = c * g * self.slot_reward(&hi) + c * (1.0 - g) * self.slot_reward(&lo);
        (self.slot_reward(sub) - recomposed).abs()
    }

    /// Minimum and maximum of dg/dw over `[lo, hi]`.
    ///
    /// Analytic for built-ins. Custom rewards get central finite differences
    /// (step 1e-6) on a 1025-point grid, with the result widened by 1% in
    /// each direction so downstream optimality checks err toward "not
    /// proven".
    pub fn g_derivative_bounds(&self, lo: f64, hi: f64) -> Result<(f64, f64), RewardError> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(RewardError::BadInterval { lo, hi });
        }
        match self {
            Self::Linear { .. } => Ok((1.0, 1.0)),
            Self::Log { .. } => {
                let d = |w: f64| 1.0 / ((1.0 + w) * std::f64::consts::LN_2);
                Ok((d(hi), d(lo)))
            }
            Self::Power { exponent } => {
                let a = *exponent;
                let d = |w: f64| a * w.powf(a - 1.0);
                if a == 1.0 {
                    Ok((1.0, 1.0))
                } else if a > 1.0 {
                    Ok((d(lo), d(hi)))
                } else {
                    // derivative decreasing; unbounded at 0
                    Ok((d(hi), d(lo)))
                }
            }
            Self::Custom(c) => {
                const POINTS: usize = 1025;
                const STEP: f64 = 1e-6;
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for idx in 0..POINTS {
                    let x = if hi > lo {
                        lo + (hi - lo) * idx as f64 / (POINTS - 1) as f64
                    } else {
                        lo
                    };
                    let a = (x - STEP).max(0.0);
                    let b = (x + STEP).min(1.0);
                    let d = ((c.g)(b) - (c.g)(a)) / (b - a);
                    min = min.min(d);
                    max = max.max(d);
                }
                Ok((min * 0.99, max * 1.01))
            }
        }
    }

    /// Minimum and maximum over the free coordinates of
    /// `F(1, rest) - F(0, rest)`.
    ///
    /// Constant for the separable built-ins; custom rewards are searched on
    /// a 33-point-per-axis grid over `[0,1]^(k-1)`, refused beyond 4 axes.
    pub fn delta_bounds(&self, k: usize) -> Result<(f64, f64), RewardError> {
        assert!(k >= 1, "delta bounds need k >= 1");
        match self {
            Self::Linear { epsilon } => Ok((1.0 - epsilon, 1.0 - epsilon)),
            Self::Power { .. } => Ok((1.0, 1.0)),
            Self::Log { base } => {
                let d = 2.0_f64.log(*base);
                Ok((d, d))
            }
            Self::Custom(c) => {
                let dims = k - 1;
                if dims > 4 {
                    return Err(RewardError::AnalyticDeltaRequired { dims });
                }
                const AXIS: usize = 33;
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                let mut point = vec![0.0; k];
                let combos = AXIS.pow(dims as u32);
                for mut code in 0..combos {
                    for d in 0..dims {
                        point[d + 1] = (code % AXIS) as f64 / (AXIS - 1) as f64;
                        code /= AXIS;
                    }
                    point[0] = 1.0;
                    let top = (c.slot)(&point);
                    point[0] = 0.0;
                    let bottom = (c.slot)(&point);
                    let diff = top - bottom;
                    min = min.min(diff);
                    max = max.max(diff);
                }
                Ok((min, max))
            }
        }
    }

    /// Sampled falsification of the three axioms at arity `k`.
    ///
    /// Returns the first falsifying point found, if any. A pass proves
    /// nothing for custom rewards; it only reports that `samples` random
    /// points failed to disprove the axioms.
    pub fn check_axioms(
        &self,
        k: usize,
        samples: usize,
        seed: u64,
    ) -> Result<(), Box<AxiomFailure>> {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tol = 1e-12;
        for _ in 0..samples {
            let sub: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();

            let mut permuted = sub.clone();
            permuted.shuffle(&mut rng);
            let direct = self.slot_reward(&sub);
            let shuffled = self.slot_reward(&permuted);
            if (direct - shuffled).abs() > tol {
                return Err(Box::new(AxiomFailure {
                    axiom: Axiom::Symmetry,
                    point: sub,
                    detail: format!("F={direct} vs F(permuted)={shuffled}"),
                }));
            }

            let i = rng.random_range(0..k);
            let mut raised = sub.clone();
            // keep a visible gap so strictness is meaningful in floats
            raised[i] = (sub[i] + rng.random_range(1e-3..1.0)).min(1.0);
            if raised[i] > sub[i] + 1e-4 {
                let up = self.slot_reward(&raised);
                if !(up > direct) {
                    return Err(Box::new(AxiomFailure {
                        axiom: Axiom::Monotonicity,
                        point: sub,
                        detail: format!(
                            "raising coordinate {i} to {} moved F from {direct} to {up}",
                            raised[i]
                        ),
                    }));
                }
            }

            let residual = self.decomposition_residual(&sub, i);
            if residual > tol {
                return Err(Box::new(AxiomFailure {
                    axiom: Axiom::Decomposability,
                    point: sub,
                    detail: format!("residual {residual} at coordinate {i}"),
                }));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{ActionSet, BeliefVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_immediate_reward_hand_sum() {
        let reward = RegularReward::linear(0.1).unwrap();
        let belief = BeliefVector::new(vec![0.5, 0.6, 0.2]).unwrap();
        let action = ActionSet::new([0, 1], 3).unwrap();
        let got = reward.immediate_reward(&belief, &action);
        assert!((got - 0.99).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn power_reward_at_zero() {
        let reward = RegularReward::power(2.0).unwrap();
        assert_eq!(reward.slot_reward(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn log_reward_identity_case() {
        let reward = RegularReward::log(2.0).unwrap();
        assert!((reward.slot_reward(&[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_decomposition_is_algebraically_exact() {
        let reward = RegularReward::linear(0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let sub: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=1.0)).collect();
            for i in 0..3 {
                assert!(reward.decomposition_residual(&sub, i) <= 1e-15);
            }
        }
    }

    #[test]
    fn log_decomposition_residual_small() {
        let reward = RegularReward::log(2.0).unwrap();
        let residual = reward.decomposition_residual(&[0.3, 0.77, 0.11], 0);
        assert!(residual <= 1e-12, "residual {residual}");
    }

    #[test]
    fn log_decomposition_holds_for_other_bases_too() {
        // the pair (c = 1, g = log2(1 + w)) makes the identity exact for
        // every base, not only base 2
        for base in [1.5, 3.0, 10.0] {
            let reward = RegularReward::log(base).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(base.to_bits());
            for _ in 0..200 {
                let sub: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..=1.0)).collect();
                let r = reward.decomposition_residual(&sub, 0);
                assert!(r <= 1e-12, "base {base}: residual {r} at {sub:?}");
            }
        }
    }

    #[test]
    fn power_decomposition_residual_small() {
        let reward = RegularReward::power(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let sub: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..=1.0)).collect();
            let i = rng.random_range(0..4);
            assert!(reward.decomposition_residual(&sub, i) <= 1e-12);
        }
    }

    #[test]
    fn derivative_bounds_linear() {
        let reward = RegularReward::linear(0.3).unwrap();
        assert_eq!(reward.g_derivative_bounds(0.1, 0.9).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn derivative_bounds_power_two() {
        let reward = RegularReward::power(2.0).unwrap();
        let (lo, hi) = reward.g_derivative_bounds(0.2, 0.8).unwrap();
        assert!((lo - 0.4).abs() < 1e-12 && (hi - 1.6).abs() < 1e-12);
    }

    #[test]
    fn derivative_bounds_log_two() {
        let reward = RegularReward::log(2.0).unwrap();
        let (lo, hi) = reward.g_derivative_bounds(0.2, 0.8).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((lo - 1.0 / (1.8 * ln2)).abs() < 1e-12);
        assert!((hi - 1.0 / (1.2 * ln2)).abs() < 1e-12);
    }

    #[test]
    fn derivative_bounds_reject_bad_interval() {
        let reward = RegularReward::linear(0.0).unwrap();
        assert!(reward.g_derivative_bounds(0.9, 0.1).is_err());
    }

    #[test]
    fn delta_bounds_builtins() {
        let linear = RegularReward::linear(0.1).unwrap();
        assert_eq!(linear.delta_bounds(3).unwrap(), (0.9, 0.9));
        let power = RegularReward::power(5.0).unwrap();
        assert_eq!(power.delta_bounds(2).unwrap(), (1.0, 1.0));
        let log3 = RegularReward::log(3.0).unwrap();
        let d = 2.0_f64.log(3.0);
        let (lo, hi) = log3.delta_bounds(2).unwrap();
        assert!((lo - d).abs() < 1e-15 && (hi - d).abs() < 1e-15);
    }

    #[test]
    fn custom_reward_numeric_bounds_cover_linear() {
        let custom = RegularReward::custom(CustomReward {
            name: "handwritten-linear".into(),
            slot: Box::new(|sub: &[f64]| sub.iter().sum()),
            g: Box::new(|w| w),
            c: 1.0,
        })
        .unwrap();
        let (lo, hi) = custom.g_derivative_bounds(0.0, 1.0).unwrap();
        assert!(lo <= 1.0 && hi >= 1.0);
        let (dlo, dhi) = custom.delta_bounds(3).unwrap();
        assert!((dlo - 1.0).abs() < 1e-9 && (dhi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn custom_delta_bounds_refused_for_large_arity() {
        let custom = RegularReward::custom(CustomReward {
            name: "big".into(),
            slot: Box::new(|sub: &[f64]| sub.iter().sum()),
            g: Box::new(|w| w),
            c: 1.0,
        })
        .unwrap();
        assert!(matches!(
            custom.delta_bounds(6),
            Err(RewardError::AnalyticDeltaRequired { dims: 5 })
        ));
    }

    #[test]
    fn builtin_axiom_checks_pass() {
        for reward in [
            RegularReward::linear(0.0).unwrap(),
            RegularReward::linear(0.25).unwrap(),
            RegularReward::log(2.0).unwrap(),
            RegularReward::power(2.0).unwrap(),
            RegularReward::power(0.5).unwrap(),
        ] {
            reward
                .check_axioms(3, 2_000, 99)
                .unwrap_or_else(|f| panic!("{}: {:?}", reward.kind_label(), f));
        }
    }

    #[test]
    fn symmetry_is_bit_exact_for_builtins() {
        let reward = RegularReward::log(2.0).unwrap();
        let v = [0.12345678901234, 0.9876543210987, 0.5, 0.3333333333];
        let twisted = [v[2], v[0], v[3], v[1]];
        assert_eq!(reward.slot_reward(&v), reward.slot_reward(&twisted));
    }

    #[test]
    fn mismatched_decomposition_pair_is_falsified() {
        // the hump F with the identity g: the decomposition identity fails
        // before monotonicity gets a chance
        let broken = RegularReward::custom(CustomReward {
            name: "hump".into(),
            slot: Box::new(|sub: &[f64]| sub.iter().map(|w| w * (1.5 - w)).sum()),
            g: Box::new(|w| w),
            c: 1.0,
        })
        .unwrap();
        let failure = broken.check_axioms(2, 5_000, 7).unwrap_err();
        assert_eq!(failure.axiom, Axiom::Decomposability);
    }

    #[test]
    fn non_monotone_custom_reward_is_falsified() {
        // per-term 1.5w - w^2 decomposes exactly against g = 3w - 2w^2
        // (both vanish at 0, and h = 0.5 g with h(1) = 0.5), so the first
        // falsifiable axiom is monotonicity, violated above w = 0.75
        let broken = RegularReward::custom(CustomReward {
            name: "hump".into(),
            slot: Box::new(|sub: &[f64]| sub.iter().map(|w| w * (1.5 - w)).sum()),
            g: Box::new(|w| 3.0 * w - 2.0 * w * w),
            c: 1.0,
        })
        .unwrap();
        let failure = broken.check_axioms(2, 5_000, 7).unwrap_err();
        assert_eq!(failure.axiom, Axiom::Monotonicity);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(RegularReward::linear(1.0).is_err());
        assert!(RegularReward::log(1.0).is_err());
        assert!(RegularReward::power(0.0).is_err());
    }
}

//! Belief-state dynamics for a single Gilbert-Elliott channel observed
//! through noisy CQI reports.
//!
//! A channel is a two-state Markov chain (0 = poor, 1 = good). The scheduler
//! never sees the state directly; it tracks the belief `ω = Pr(S = 1 | history)`.
//! When the channel is left idle the belief moves through the affine map
//!
//! ```text
//! T(ω) = p11·ω + p01·(1 − ω)
//! ```
//!
//! and when it is used, the reported CQI level `i` first conditions the belief
//! through Bayes' rule and the result is then propagated one slot with `T`.
//!
//! CQI levels are 1-based throughout (`1..=K`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the column sums of the observation matrix.
pub const OBS_SUM_TOLERANCE: f64 = 1e-12;

/// Rounding slack tolerated before a computed belief is clamped into `[0, 1]`.
pub const BELIEF_ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("{name} = {value} must lie strictly inside (0, 1)")]
    InvalidTransition { name: &'static str, value: f64 },

    #[error("p01 == p11 = {0}: belief dynamics do not depend on the state")]
    DegenerateTransitions(f64),

    #[error("observation matrix needs at least one CQI level")]
    NoObservationLevels,

    #[error("observation entry for level {level}, state {state} is {value}, not a probability")]
    InvalidObservation { level: usize, state: u8, value: f64 },

    #[error("observation column for state {state} sums to {sum}, expected 1")]
    ObservationColumnSum { state: u8, sum: f64 },

    #[error("throughput {0} must be positive and finite")]
    InvalidThroughput(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BeliefError {
    #[error("belief {0} lies outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ObservationError {
    #[error("CQI level {cqi} outside 1..={levels}")]
    CqiOutOfRange { cqi: usize, levels: usize },

    /// The reported level is impossible under both states at this belief.
    #[error("CQI level {cqi} has zero likelihood at belief {belief}")]
    ZeroLikelihood { cqi: usize, belief: f64 },
}

// ── Belief ───────────────────────────────────────────────────────────────

/// Probability that a channel is currently in the good state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Belief(f64);

impl Belief {
    pub const ZERO: Belief = Belief(0.0);
    pub const ONE: Belief = Belief(1.0);

    pub fn new(value: f64) -> Result<Self, BeliefError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Belief(value))
        } else {
            Err(BeliefError::OutOfRange(value))
        }
    }

    /// Accepts a computed value that may overshoot `[0, 1]` by rounding.
    pub fn from_computed(value: f64) -> Result<Self, BeliefError> {
        if (-BELIEF_ROUNDING_SLACK..=1.0 + BELIEF_ROUNDING_SLACK).contains(&value) {
            Ok(Belief(value.clamp(0.0, 1.0)))
        } else {
            Err(BeliefError::OutOfRange(value))
        }
    }

    /// Internal variant of [`Belief::from_computed`] for maps that are convex
    /// combinations of valid beliefs and so cannot leave the unit interval.
    pub(crate) fn settle(value: f64) -> Self {
        debug_assert!(
            (-BELIEF_ROUNDING_SLACK..=1.0 + BELIEF_ROUNDING_SLACK).contains(&value),
            "belief {value} escaped [0, 1]"
        );
        Belief(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Belief {
    type Error = BeliefError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Belief::new(value)
    }
}

impl From<Belief> for f64 {
    fn from(b: Belief) -> f64 {
        b.0
    }
}

// ── Channel parameters ───────────────────────────────────────────────────

/// Likelihood of one CQI level under each channel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ObservationLevel {
    /// `p_{i,0}`: probability of reporting this level when the channel is poor.
    pub given_poor: f64,
    /// `p_{i,1}`: probability of reporting this level when the channel is good.
    pub given_good: f64,
}

impl ObservationLevel {
    pub fn new(given_poor: f64, given_good: f64) -> Self {
        Self {
            given_poor,
            given_good,
        }
    }

    /// `p_{i,1} − p_{i,0}`; nonnegative levels are evidence for the good state.
    #[inline]
    pub fn signal(&self) -> f64 {
        self.given_good - self.given_poor
    }

    #[inline]
    pub fn is_uninformative(&self) -> bool {
        self.given_good == self.given_poor
    }
}

impl From<[f64; 2]> for ObservationLevel {
    fn from([given_poor, given_good]: [f64; 2]) -> Self {
        Self::new(given_poor, given_good)
    }
}

impl From<ObservationLevel> for [f64; 2] {
    fn from(l: ObservationLevel) -> Self {
        [l.given_poor, l.given_good]
    }
}

/// One channel's transition probabilities, CQI observation model and
/// throughput. Construction validates every invariant, so the belief maps
/// below never need to re-check their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct ChannelParams {
    p01: f64,
    p11: f64,
    obs: Vec<ObservationLevel>,
    throughput: f64,
}

#[derive(Serialize, Deserialize)]
struct RawChannel {
    p01: f64,
    p11: f64,
    obs: Vec<ObservationLevel>,
    throughput: f64,
}

impl TryFrom<RawChannel> for ChannelParams {
    type Error = ChannelError;

    fn try_from(raw: RawChannel) -> Result<Self, Self::Error> {
        ChannelParams::new(raw.p01, raw.p11, raw.obs, raw.throughput)
    }
}

impl From<ChannelParams> for RawChannel {
    fn from(ch: ChannelParams) -> Self {
        RawChannel {
            p01: ch.p01,
            p11: ch.p11,
            obs: ch.obs,
            throughput: ch.throughput,
        }
    }
}

fn check_transition(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ChannelError::InvalidTransition { name, value })
    }
}

impl ChannelParams {
    pub fn new(
        p01: f64,
        p11: f64,
        obs: Vec<ObservationLevel>,
        throughput: f64,
    ) -> Result<Self, ChannelError> {
        check_transition("p01", p01)?;
        check_transition("p11", p11)?;
        if p01 == p11 {
            return Err(ChannelError::DegenerateTransitions(p01));
        }
        if obs.is_empty() {
            return Err(ChannelError::NoObservationLevels);
        }
        for (idx, level) in obs.iter().enumerate() {
            for (state, value) in [(0u8, level.given_poor), (1u8, level.given_good)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ChannelError::InvalidObservation {
                        level: idx + 1,
                        state,
                        value,
                    });
                }
            }
        }
        let poor_sum: f64 = obs.iter().map(|l| l.given_poor).sum();
        let good_sum: f64 = obs.iter().map(|l| l.given_good).sum();
        for (state, sum) in [(0u8, poor_sum), (1u8, good_sum)] {
            if (sum - 1.0).abs() > OBS_SUM_TOLERANCE {
                return Err(ChannelError::ObservationColumnSum { state, sum });
            }
        }
        if !(throughput.is_finite() && throughput > 0.0) {
            return Err(ChannelError::InvalidThroughput(throughput));
        }
        Ok(Self {
            p01,
            p11,
            obs,
            throughput,
        })
    }

    /// A single-level observation model: the CQI carries no information.
    pub fn uninformative(p01: f64, p11: f64, throughput: f64) -> Result<Self, ChannelError> {
        Self::new(p01, p11, vec![ObservationLevel::new(1.0, 1.0)], throughput)
    }

    #[inline]
    pub fn p01(&self) -> f64 {
        self.p01
    }

    #[inline]
    pub fn p11(&self) -> f64 {
        self.p11
    }

    #[inline]
    pub fn throughput(&self) -> f64 {
        self.throughput
    }

    pub fn observation_levels(&self) -> &[ObservationLevel] {
        &self.obs
    }

    /// Number of CQI levels `K`.
    #[inline]
    pub fn levels(&self) -> usize {
        self.obs.len()
    }

    /// Same channel with a different throughput.
    pub fn with_throughput(&self, throughput: f64) -> Result<Self, ChannelError> {
        Self::new(self.p01, self.p11, self.obs.clone(), throughput)
    }

    #[inline]
    fn level(&self, cqi: usize) -> Result<&ObservationLevel, ObservationError> {
        if cqi == 0 || cqi > self.obs.len() {
            return Err(ObservationError::CqiOutOfRange {
                cqi,
                levels: self.obs.len(),
            });
        }
        Ok(&self.obs[cqi - 1])
    }

    /// `p_d = p11 − p01`.
    #[inline]
    pub fn correlation(&self) -> f64 {
        self.p11 - self.p01
    }

    /// `Σ_{i∈P} (p_{i,1} − p_{i,0})` over the levels that favour the good state.
    pub fn positive_signal_mass(&self) -> f64 {
        self.obs
            .iter()
            .map(ObservationLevel::signal)
            .filter(|s| *s >= 0.0)
            .sum()
    }

    pub fn derived(&self) -> DerivedChannelQuantities {
        let (pos, neg): (Vec<usize>, Vec<usize>) =
            (1..=self.levels()).partition(|&i| self.obs[i - 1].signal() >= 0.0);
        DerivedChannelQuantities {
            p_d: self.correlation(),
            omega_s: self.steady_state().value(),
            pos_signal_set: pos,
            neg_signal_set: neg,
        }
    }

    // ── Belief maps ──────────────────────────────────────────────────────

    /// One idle slot: `T(ω) = p11·ω + p01·(1 − ω)`.
    #[inline]
    pub fn passive_update(&self, w: Belief) -> Belief {
        let w = w.value();
        Belief::settle(self.p11 * w + self.p01 * (1.0 - w))
    }

    /// `k` idle slots in closed form:
    /// `T^k(ω) = (p01 − p_d^k·(p01 − (1 + p01 − p11)·ω)) / (1 + p01 − p11)`.
    pub fn passive_update_k(&self, w: Belief, k: u64) -> Belief {
        if k == 0 {
            return w;
        }
        let pd = self.correlation();
        let denom = 1.0 + self.p01 - self.p11;
        let decay = if k > i32::MAX as u64 {
            0.0
        } else {
            pd.powi(k as i32)
        };
        Belief::settle((self.p01 - decay * (self.p01 - denom * w.value())) / denom)
    }

    /// Stationary belief `ω_s = p01 / (1 + p01 − p11)`, the fixed point of `T`.
    #[inline]
    pub fn steady_state(&self) -> Belief {
        Belief::settle(self.p01 / (1.0 + self.p01 - self.p11))
    }

    /// `p_i(ω) = p_{i,1}·ω + p_{i,0}·(1 − ω)`.
    pub fn observation_prob(&self, w: Belief, cqi: usize) -> Result<f64, ObservationError> {
        let level = self.level(cqi)?;
        Ok(level_likelihood(level, w.value()))
    }

    /// Bayes posterior `φ_i(ω)` of the good state after seeing level `cqi`,
    /// without the one-slot propagation.
    pub fn bayes_filter(&self, w: Belief, cqi: usize) -> Result<Belief, ObservationError> {
        let level = self.level(cqi)?;
        if level.is_uninformative() {
            return Ok(w);
        }
        let denom = level_likelihood(level, w.value());
        if denom <= 0.0 {
            return Err(ObservationError::ZeroLikelihood {
                cqi,
                belief: w.value(),
            });
        }
        Ok(Belief::settle(level.given_good * w.value() / denom))
    }

    /// Belief for the next slot after using the channel and observing `cqi`:
    /// `ω_i = T(φ_i(ω))`.
    pub fn active_update(&self, w: Belief, cqi: usize) -> Result<Belief, ObservationError> {
        let level = self.level(cqi)?;
        active_update_level(self, level, w).ok_or(ObservationError::ZeroLikelihood {
            cqi,
            belief: w.value(),
        })
    }

    /// Iterates `(p_i(ω), ω_i)` over all levels with nonzero likelihood.
    pub(crate) fn successors(&self, w: Belief) -> impl Iterator<Item = (f64, Belief)> + '_ {
        self.obs.iter().filter_map(move |level| {
            let prob = level_likelihood(level, w.value());
            if prob > 0.0 {
                active_update_level(self, level, w).map(|next| (prob, next))
            } else {
                None
            }
        })
    }
}

#[inline]
fn level_likelihood(level: &ObservationLevel, w: f64) -> f64 {
    level.given_good * w + level.given_poor * (1.0 - w)
}

#[inline]
fn active_update_level(ch: &ChannelParams, level: &ObservationLevel, w: Belief) -> Option<Belief> {
    // An uninformative level leaves the posterior untouched; route it through
    // `T` directly so the result is bit-identical to the idle update.
    if level.is_uninformative() {
        return Some(ch.passive_update(w));
    }
    let w = w.value();
    let good = level.given_good * w;
    let poor = level.given_poor * (1.0 - w);
    let denom = good + poor;
    if denom <= 0.0 {
        return None;
    }
    Some(Belief::settle((ch.p11 * good + ch.p01 * poor) / denom))
}

/// Quantities that depend only on the channel, not on the belief.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedChannelQuantities {
    pub p_d: f64,
    pub omega_s: f64,
    /// Levels with `p_{i,1} − p_{i,0} ≥ 0` (1-based).
    pub pos_signal_set: Vec<usize>,
    pub neg_signal_set: Vec<usize>,
}

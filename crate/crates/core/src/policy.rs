//! Channel selection over the vector of per-channel beliefs.
//!
//! Every slot each channel gets a scalar priority and the `M` channels with
//! the largest priorities are used. Channel positions are 0-based here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, ChannelParams, ObservationError};
use crate::index::{approx_whittle, Discount, IterationDepth};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("{beliefs} beliefs for {channels} channels")]
    LengthMismatch { channels: usize, beliefs: usize },

    #[error("must use between 1 and {max} of {channels} channels, got {active}")]
    InvalidActiveCount {
        active: usize,
        channels: usize,
        max: usize,
    },

    #[error("channel {0} out of range")]
    ChannelOutOfRange(usize),

    #[error("observations do not match the used channels")]
    ObservationMismatch,

    #[error("channel {channel}: {source}")]
    Observation {
        channel: usize,
        #[source]
        source: ObservationError,
    },

    #[error("unknown policy '{0}' (expected myopic, random or awi:<n>)")]
    UnknownPolicy(String),
}

// ── Belief vector ────────────────────────────────────────────────────────

/// Beliefs aligned with a slice of channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefVector(Vec<Belief>);

impl BeliefVector {
    pub fn new(channels: &[ChannelParams], beliefs: Vec<Belief>) -> Result<Self, PolicyError> {
        if channels.len() != beliefs.len() {
            return Err(PolicyError::LengthMismatch {
                channels: channels.len(),
                beliefs: beliefs.len(),
            });
        }
        Ok(Self(beliefs))
    }

    pub fn steady_state(channels: &[ChannelParams]) -> Self {
        Self(channels.iter().map(ChannelParams::steady_state).collect())
    }

    pub fn as_slice(&self) -> &[Belief] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Channels chosen for one slot, in ascending position order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet(Vec<usize>);

impl ActionSet {
    pub fn new(mut chosen: Vec<usize>, channels: usize) -> Result<Self, PolicyError> {
        chosen.sort_unstable();
        chosen.dedup();
        if let Some(&bad) = chosen.iter().find(|&&c| c >= channels) {
            return Err(PolicyError::ChannelOutOfRange(bad));
        }
        Ok(Self(chosen))
    }

    pub fn channels(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.0.binary_search(&channel).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

// ── Policy descriptions ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Myopic,
    Awi(IterationDepth),
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub tie_break: TieBreak,
}

impl PolicySpec {
    pub fn myopic() -> Self {
        PolicyKind::Myopic.into()
    }

    pub fn awi(n: IterationDepth) -> Self {
        PolicyKind::Awi(n).into()
    }

    pub fn random() -> Self {
        PolicyKind::Random.into()
    }

    /// Iteration depth for AWI policies.
    pub fn iterations(&self) -> Option<u32> {
        match self.kind {
            PolicyKind::Awi(n) => Some(n.get()),
            _ => None,
        }
    }

    /// Whether [`select`] draws from its random stream.
    pub fn uses_randomness(&self) -> bool {
        self.kind == PolicyKind::Random || self.tie_break == TieBreak::Random
    }
}

impl From<PolicyKind> for PolicySpec {
    fn from(kind: PolicyKind) -> Self {
        Self {
            kind,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Myopic => f.write_str("myopic"),
            PolicyKind::Random => f.write_str("random"),
            PolicyKind::Awi(n) => write!(f, "awi:{}", n.get()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tie_break {
            TieBreak::LowestIndex => write!(f, "{}", self.kind),
            TieBreak::Random => write!(f, "{}+random-ties", self.kind),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyError;

    /// `myopic`, `random`, `awi:<n>` (also `awi<n>`), optionally followed by
    /// `+random-ties`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PolicyError::UnknownPolicy(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let (base, tie_break) = match lower.strip_suffix("+random-ties") {
            Some(base) => (base, TieBreak::Random),
            None => (lower.as_str(), TieBreak::LowestIndex),
        };
        let kind = match base {
            "myopic" => PolicyKind::Myopic,
            "random" => PolicyKind::Random,
            other => {
                let digits = other
                    .strip_prefix("awi")
                    .map(|rest| rest.trim_start_matches([':', '(']).trim_end_matches(')'))
                    .ok_or_else(unknown)?;
                let n: u32 = digits.parse().map_err(|_| unknown())?;
                PolicyKind::Awi(IterationDepth::new(n).map_err(|_| unknown())?)
            }
        };
        Ok(Self { kind, tie_break })
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ── Selection ────────────────────────────────────────────────────────────

/// Immediate expected reward `ω·B`.
#[inline]
pub fn myopic_index(ch: &ChannelParams, w: Belief) -> f64 {
    w.value() * ch.throughput()
}

/// Per-channel priorities under `policy`, in channel order.
pub fn channel_indices<R: Rng + ?Sized>(
    policy: &PolicySpec,
    channels: &[ChannelParams],
    beliefs: &BeliefVector,
    beta: Discount,
    rng: &mut R,
) -> Vec<f64> {
    let pairs = channels.iter().zip(beliefs.as_slice());
    match policy.kind {
        PolicyKind::Myopic => pairs.map(|(ch, &w)| myopic_index(ch, w)).collect(),
        PolicyKind::Awi(n) => pairs
            .map(|(ch, &w)| approx_whittle(ch, beta, w, n).value)
            .collect(),
        PolicyKind::Random => channels.iter().map(|_| rng.gen::<f64>()).collect(),
    }
}

/// Positions of the `active` largest entries of `indices`.
pub fn top_m<R: Rng + ?Sized>(
    indices: &[f64],
    active: usize,
    tie_break: TieBreak,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    if tie_break == TieBreak::Random {
        // A random pre-shuffle followed by a stable sort breaks ties uniformly.
        order.shuffle(rng);
    }
    order.sort_by(|&a, &b| indices[b].total_cmp(&indices[a]));
    order.truncate(active);
    order.sort_unstable();
    order
}

pub fn select<R: Rng + ?Sized>(
    policy: &PolicySpec,
    channels: &[ChannelParams],
    beliefs: &BeliefVector,
    active: usize,
    beta: Discount,
    rng: &mut R,
) -> Result<ActionSet, PolicyError> {
    if beliefs.len() != channels.len() {
        return Err(PolicyError::LengthMismatch {
            channels: channels.len(),
            beliefs: beliefs.len(),
        });
    }
    if active == 0 || active >= channels.len() {
        return Err(PolicyError::InvalidActiveCount {
            active,
            channels: channels.len(),
            max: channels.len().saturating_sub(1),
        });
    }
    let indices = channel_indices(policy, channels, beliefs, beta, rng);
    Ok(ActionSet(top_m(&indices, active, policy.tie_break, rng)))
}

/// Next-slot beliefs: used channels condition on their reported CQI, idle
/// channels drift with `T`.
pub fn update_beliefs(
    channels: &[ChannelParams],
    beliefs: &BeliefVector,
    actions: &ActionSet,
    observations: &BTreeMap<usize, usize>,
) -> Result<BeliefVector, PolicyError> {
    if beliefs.len() != channels.len() {
        return Err(PolicyError::LengthMismatch {
            channels: channels.len(),
            beliefs: beliefs.len(),
        });
    }
    if observations.len() != actions.len()
        || !actions.channels().iter().all(|c| observations.contains_key(c))
    {
        return Err(PolicyError::ObservationMismatch);
    }
    let next = channels
        .iter()
        .zip(beliefs.as_slice())
        .enumerate()
        .map(|(n, (ch, &w))| match observations.get(&n) {
            Some(&cqi) => ch
                .active_update(w, cqi)
                .map_err(|source| PolicyError::Observation { channel: n, source }),
            None => Ok(ch.passive_update(w)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BeliefVector(next))
}

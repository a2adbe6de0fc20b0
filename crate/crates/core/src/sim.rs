//! Monte-Carlo evaluation of channel-selection policies.
//!
//! Each run draws its randomness from three independent ChaCha streams keyed
//! by `(master_seed, run_id, tag)`: one for the hidden channel states, one for
//! CQI reports and one for the policy itself. Every slot consumes exactly one
//! state draw and one CQI draw per channel whether or not the channel is used,
//! so run `r` of two different policies sees the same channel realisation
//! (common random numbers) and the comparison between them is paired.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, ChannelParams};
use crate::index::Discount;
use crate::policy::{select, update_beliefs, BeliefVector, PolicyError, PolicySpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("a system needs at least two channels, got {0}")]
    TooFewChannels(usize),

    #[error("active channel count {active} must satisfy 1 <= M < N = {channels}")]
    InvalidActiveCount { active: usize, channels: usize },

    #[error("horizon must be at least 1")]
    EmptyHorizon,

    #[error("at least one run is required")]
    NoRuns,

    #[error("run {run_id} out of range for {runs} runs")]
    RunOutOfRange { run_id: u32, runs: u32 },

    #[error("explicit initial beliefs: expected {expected}, got {got}")]
    InitialBeliefCount { expected: usize, got: usize },

    #[error("no policies to evaluate")]
    NoPolicies,

    #[error("run {run_id}, slot {slot}: {source}")]
    Policy {
        run_id: u32,
        slot: u32,
        #[source]
        source: PolicyError,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBelief {
    #[default]
    SteadyState,
    Explicit(Vec<Belief>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub channels: Vec<ChannelParams>,
    /// `M`, channels used per slot.
    pub active: usize,
    pub beta: Discount,
    pub horizon: u32,
    pub initial_belief: InitialBelief,
    pub runs: u32,
    pub master_seed: u64,
}

pub const DEFAULT_HORIZON: u32 = 100;
pub const DEFAULT_RUNS: u32 = 10_000;

impl SystemConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.channels.len();
        if n < 2 {
            return Err(SimError::TooFewChannels(n));
        }
        if self.active == 0 || self.active >= n {
            return Err(SimError::InvalidActiveCount {
                active: self.active,
                channels: n,
            });
        }
        if self.horizon == 0 {
            return Err(SimError::EmptyHorizon);
        }
        if self.runs == 0 {
            return Err(SimError::NoRuns);
        }
        if let InitialBelief::Explicit(values) = &self.initial_belief {
            if values.len() != n {
                return Err(SimError::InitialBeliefCount {
                    expected: n,
                    got: values.len(),
                });
            }
        }
        Ok(())
    }

    pub fn initial_beliefs(&self) -> Vec<Belief> {
        match &self.initial_belief {
            InitialBelief::SteadyState => self
                .channels
                .iter()
                .map(ChannelParams::steady_state)
                .collect(),
            InitialBelief::Explicit(values) => values.clone(),
        }
    }

    /// Short textual identity of everything that determines the results.
    pub fn fingerprint(&self) -> String {
        let mut text = format!(
            "N={};M={};beta={:e};T={};runs={};seed={};init=",
            self.channels.len(),
            self.active,
            self.beta.value(),
            self.horizon,
            self.runs,
            self.master_seed
        );
        match &self.initial_belief {
            InitialBelief::SteadyState => text.push_str("steady"),
            InitialBelief::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|b| format!("{:e}", b.value())).collect();
                text.push_str(&parts.join(","));
            }
        }
        for ch in &self.channels {
            text.push_str(&format!(
                ";[{:e},{:e},{:e}",
                ch.p01(),
                ch.p11(),
                ch.throughput()
            ));
            for l in ch.observation_levels() {
                text.push_str(&format!(",{:e}/{:e}", l.given_poor, l.given_good));
            }
            text.push(']');
        }
        text
    }
}

// ── Random streams ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    State = 1,
    Observation = 2,
    Policy = 3,
}

/// Independent generator for one `(master_seed, run_id, tag)` triple.
pub fn stream_rng(master_seed: u64, run_id: u32, tag: StreamTag) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(run_id as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(tag as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

// ── Channel state sampling ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8")]
pub enum ChannelState {
    Poor,
    Good,
}

impl ChannelState {
    #[inline]
    pub fn is_good(self) -> bool {
        self == ChannelState::Good
    }
}

impl From<ChannelState> for u8 {
    fn from(s: ChannelState) -> u8 {
        s as u8
    }
}

#[inline]
fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> ChannelState {
    if rng.gen::<f64>() < p {
        ChannelState::Good
    } else {
        ChannelState::Poor
    }
}

/// Draws the hidden initial state from the prior and starts the belief there.
pub fn sample_initial<R: Rng + ?Sized>(initial: Belief, rng: &mut R) -> (ChannelState, Belief) {
    (bernoulli(initial.value(), rng), initial)
}

/// One Gilbert-Elliott transition.
pub fn step_state<R: Rng + ?Sized>(
    ch: &ChannelParams,
    state: ChannelState,
    rng: &mut R,
) -> ChannelState {
    let p_good = match state {
        ChannelState::Good => ch.p11(),
        ChannelState::Poor => ch.p01(),
    };
    bernoulli(p_good, rng)
}

/// Draws a 1-based CQI level from the observation column for `state`.
pub fn sample_cqi<R: Rng + ?Sized>(ch: &ChannelParams, state: ChannelState, rng: &mut R) -> usize {
    let u = rng.gen::<f64>();
    let levels = ch.observation_levels();
    let mut acc = 0.0;
    for (idx, level) in levels.iter().enumerate() {
        acc += match state {
            ChannelState::Good => level.given_good,
            ChannelState::Poor => level.given_poor,
        };
        if u < acc {
            return idx + 1;
        }
    }
    // Column sums can fall short of 1 by rounding; settle on the last level
    // that can actually be reported.
    levels
        .iter()
        .rposition(|l| match state {
            ChannelState::Good => l.given_good > 0.0,
            ChannelState::Poor => l.given_poor > 0.0,
        })
        .map_or(levels.len(), |i| i + 1)
}

// ── Episodes ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u32,
    pub states: Vec<ChannelState>,
    /// Beliefs the decision was based on.
    pub beliefs: Vec<Belief>,
    pub actions: Vec<usize>,
    /// `(channel, cqi)` for every used channel.
    pub observations: Vec<(usize, usize)>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub slots: Vec<SlotRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Discounted return `G = Σ_t β^(t−1)·R(t)`.
    pub discounted_return: f64,
    /// `G` truncated after each slot, `partial[t−1] = Σ_{s≤t} β^(s−1)·R(s)`.
    pub partial_returns: Vec<f64>,
    pub trace: Option<EpisodeTrace>,
}

pub fn run_episode(
    config: &SystemConfig,
    policy: &PolicySpec,
    run_id: u32,
    keep_trace: bool,
) -> Result<Episode, SimError> {
    config.validate()?;
    if run_id >= config.runs {
        return Err(SimError::RunOutOfRange {
            run_id,
            runs: config.runs,
        });
    }
    let channels = &config.channels;
    let mut state_rng = stream_rng(config.master_seed, run_id, StreamTag::State);
    let mut obs_rng = stream_rng(config.master_seed, run_id, StreamTag::Observation);
    let mut policy_rng = stream_rng(config.master_seed, run_id, StreamTag::Policy);

    let (mut states, initial): (Vec<ChannelState>, Vec<Belief>) = config
        .initial_beliefs()
        .into_iter()
        .map(|w| sample_initial(w, &mut state_rng))
        .unzip();
    let mut beliefs = BeliefVector::new(channels, initial).expect("validated lengths");

    let beta = config.beta.value();
    let mut discount = 1.0;
    let mut total = 0.0;
    let mut partial_returns = Vec::with_capacity(config.horizon as usize);
    let mut trace = keep_trace.then(EpisodeTrace::default);

    for slot in 1..=config.horizon {
        let wrap = |source| SimError::Policy {
            run_id,
            slot,
            source,
        };
        let actions = select(
            policy,
            channels,
            &beliefs,
            config.active,
            config.beta,
            &mut policy_rng,
        )
        .map_err(wrap)?;

        let reward: f64 = actions
            .channels()
            .iter()
            .filter(|&&n| states[n].is_good())
            .map(|&n| channels[n].throughput())
            .sum();

        let mut observations = BTreeMap::new();
        for (n, ch) in channels.iter().enumerate() {
            let cqi = sample_cqi(ch, states[n], &mut obs_rng);
            if actions.contains(n) {
                observations.insert(n, cqi);
            }
        }

        if let Some(t) = trace.as_mut() {
            t.slots.push(SlotRecord {
                slot,
                states: states.clone(),
                beliefs: beliefs.as_slice().to_vec(),
                actions: actions.channels().to_vec(),
                observations: observations.iter().map(|(&n, &q)| (n, q)).collect(),
                reward,
            });
        }

        total += discount * reward;
        partial_returns.push(total);
        discount *= beta;

        for (n, ch) in channels.iter().enumerate() {
            states[n] = step_state(ch, states[n], &mut state_rng);
        }
        beliefs = update_beliefs(channels, &beliefs, &actions, &observations).map_err(wrap)?;
    }

    Ok(Episode {
        discounted_return: total,
        partial_returns,
        trace,
    })
}

// ── Experiments ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub policy: PolicySpec,
    pub mean_return: f64,
    /// Sample standard deviation over runs divided by `√runs` (0 for one run).
    pub std_err: f64,
    /// Returns indexed by run id.
    pub per_run_returns: Vec<f64>,
    /// Mean of `G(t)` for `t = 1..=T`.
    pub mean_curve: Vec<f64>,
    pub fingerprint: String,
}

/// Mean and standard error of a sample, accumulated in index order.
pub fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean difference `a − b` over paired runs and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_err: f64,
}

impl PairedDifference {
    /// `None` if the two runs sets do not line up.
    pub fn between(a: &RunStats, b: &RunStats) -> Option<Self> {
        if a.per_run_returns.len() != b.per_run_returns.len() || a.fingerprint != b.fingerprint {
            return None;
        }
        let diffs: Vec<f64> = a
            .per_run_returns
            .iter()
            .zip(&b.per_run_returns)
            .map(|(x, y)| x - y)
            .collect();
        let (mean, std_err) = mean_and_std_err(&diffs);
        Some(Self { mean, std_err })
    }

    /// Difference expressed in paired standard errors (∞ sign-preserving when
    /// the runs never differ in a nonzero mean, 0 for identical runs).
    pub fn z_score(&self) -> f64 {
        if self.std_err > 0.0 {
            self.mean / self.std_err
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }
}

/// Runs every policy over the same `runs` channel realisations. Runs are
/// evaluated in parallel on the current rayon pool; aggregation follows run id
/// order, so results do not depend on the thread count.
pub fn run_experiment(
    config: &SystemConfig,
    policies: &[PolicySpec],
) -> Result<Vec<RunStats>, SimError> {
    config.validate()?;
    if policies.is_empty() {
        return Err(SimError::NoPolicies);
    }
    let fingerprint = config.fingerprint();
    policies
        .iter()
        .map(|policy| {
            let episodes: Vec<Episode> = (0..config.runs)
                .into_par_iter()
                .map(|run_id| run_episode(config, policy, run_id, false))
                .collect::<Result<_, _>>()?;
            let per_run_returns: Vec<f64> =
                episodes.iter().map(|e| e.discounted_return).collect();
            let (mean_return, std_err) = mean_and_std_err(&per_run_returns);
            let mut mean_curve = vec![0.0; config.horizon as usize];
            for e in &episodes {
                for (acc, g) in mean_curve.iter_mut().zip(&e.partial_returns) {
                    *acc += g;
                }
            }
            for acc in &mut mean_curve {
                *acc /= config.runs as f64;
            }
            Ok(RunStats {
                policy: *policy,
                mean_return,
                std_err,
                per_run_returns,
                mean_curve,
                fingerprint: fingerprint.clone(),
            })
        })
        .collect()
}

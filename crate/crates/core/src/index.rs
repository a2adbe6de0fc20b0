//! Closed-form approximated Whittle index.
//!
//! Fix a threshold `ω′`. Under the threshold policy "use the channel iff its
//! belief is above `ω′`", a channel starting at belief `ω` idles for
//! `L(ω, ω′)` slots (the first crossing time), is then used once at belief
//! `Ω = T^L(ω)`, and restarts from one of the `K` successor beliefs
//! `f_i = ω_i(Ω)`. Its value at subsidy `m` therefore expands as
//!
//! ```text
//! V(ω) = b1·m + b2·Ω + Σ_i b3_i · V(f_i)
//! b1 = (1 − β^L)/(1 − β),  b2 = β^L,  b3_i = β^(L+1)·p_i(Ω)
//! ```
//!
//! Unrolling this `n` times and dropping the depth-`n+1` continuations gives an
//! estimate that is affine in the subsidy, `V̂_n(ω) = k_n(ω)·m + a_n(ω)`.
//! Plugging the estimates at `T(ω)` and at every `ω_i` into the indifference
//! condition between the two actions, with the threshold set to `ω` itself,
//! yields a linear equation in `m` whose root is the index `Ŵ_n(ω)`.
//!
//! All value computations are carried out with unit throughput; the returned
//! index is scaled by the channel's throughput afterwards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, ChannelParams};

/// Deepest supported unrolling. Each index evaluation visits up to
/// `(K + 1)·K^(n+1)` expansion nodes.
pub const MAX_ITERATION_DEPTH: u8 = 8;

/// Default `ε` for the "linear equation has a solution" test.
pub const DEFAULT_DENOMINATOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IndexError {
    #[error("discount factor {0} must lie strictly inside (0, 1)")]
    InvalidDiscount(f64),

    #[error("iteration depth {0} exceeds the supported maximum of {MAX_ITERATION_DEPTH}")]
    DepthTooLarge(u32),
}

/// Discount factor `β ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Discount(f64);

impl Discount {
    pub fn new(beta: f64) -> Result<Self, IndexError> {
        if beta > 0.0 && beta < 1.0 {
            Ok(Discount(beta))
        } else {
            Err(IndexError::InvalidDiscount(beta))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Discount {
    type Error = IndexError;

    fn try_from(beta: f64) -> Result<Self, Self::Error> {
        Discount::new(beta)
    }
}

impl From<Discount> for f64 {
    fn from(d: Discount) -> f64 {
        d.0
    }
}

/// Number of unrolled expansion levels `n` (0 gives the imperfect index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct IterationDepth(u8);

impl IterationDepth {
    pub const ZERO: IterationDepth = IterationDepth(0);

    pub fn new(n: u32) -> Result<Self, IndexError> {
        if n <= MAX_ITERATION_DEPTH as u32 {
            Ok(IterationDepth(n as u8))
        } else {
            Err(IndexError::DepthTooLarge(n))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0 as u32
    }
}

impl TryFrom<u32> for IterationDepth {
    type Error = IndexError;

    fn try_from(n: u32) -> Result<Self, Self::Error> {
        IterationDepth::new(n)
    }
}

impl From<IterationDepth> for u32 {
    fn from(n: IterationDepth) -> u32 {
        n.get()
    }
}

// ── First crossing time ──────────────────────────────────────────────────

/// `L(ω, ω′) = min{k ≥ 0 : T^k(ω) > ω′}`, or `Infinite` if the idle belief
/// trajectory never rises above `ω′`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CrossingTime {
    Finite(u64),
    Infinite,
}

impl CrossingTime {
    pub fn finite(self) -> Option<u64> {
        match self {
            CrossingTime::Finite(k) => Some(k),
            CrossingTime::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, CrossingTime::Infinite)
    }
}

pub fn first_crossing_time(ch: &ChannelParams, w: Belief, w_thresh: Belief) -> CrossingTime {
    let (w, thresh) = (w.value(), w_thresh.value());
    if w > thresh {
        return CrossingTime::Finite(0);
    }
    let pd = ch.correlation();
    if pd < 0.0 {
        // Idle beliefs oscillate around ω_s with shrinking amplitude, so after
        // one step they can only drift back towards ω ≤ ω′.
        return if ch.passive_update(Belief::settle(w)).value() > thresh {
            CrossingTime::Finite(1)
        } else {
            CrossingTime::Infinite
        };
    }
    let steady = ch.steady_state().value();
    if thresh >= steady {
        return CrossingTime::Infinite;
    }
    // ω ≤ ω′ < ω_s: the trajectory rises monotonically towards ω_s.
    let ratio = (ch.p01() - thresh * (1.0 - pd)) / (ch.p01() - w * (1.0 - pd));
    let x = ratio.ln() / pd.ln();
    let candidate = if x.is_finite() && x >= 0.0 {
        (x.floor() as u64).saturating_add(1)
    } else {
        1
    };
    refine_crossing(ch, Belief::settle(w), thresh, candidate)
}

/// Corrects an off-by-one from the floor-log formula by checking the
/// definition on either side of the candidate.
fn refine_crossing(ch: &ChannelParams, w: Belief, thresh: f64, candidate: u64) -> CrossingTime {
    let above = |k: u64| -> bool {
        if k == 0 {
            return w.value() > thresh;
        }
        let before = ch.passive_update_k(w, k - 1);
        ch.passive_update(before).value() > thresh
    };
    let mut k = candidate.max(1);
    for _ in 0..2 {
        if k > 1 && above(k - 1) {
            k -= 1;
        } else {
            break;
        }
    }
    let mut steps = 0u32;
    while !above(k) {
        k += 1;
        steps += 1;
        if steps > 64 {
            // Only reachable if rounding pins the closed form below ω′.
            return CrossingTime::Infinite;
        }
    }
    CrossingTime::Finite(k)
}

// ── Expansion coefficients ───────────────────────────────────────────────

/// Where a channel is first used under the threshold policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    /// `Ω = T^L(ω)`.
    pub omega: Belief,
    /// `f_i = ω_i(Ω)`; `None` for levels with zero likelihood at `Ω`.
    pub successors: Vec<Option<Belief>>,
}

/// Coefficients of the one-step value expansion at a fixed threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoeffs {
    pub crossing: CrossingTime,
    pub b1: f64,
    pub b2: f64,
    pub b3: Vec<f64>,
    /// `None` when the channel is never used (`L = ∞`).
    pub activation: Option<Activation>,
}

pub fn expansion_coeffs(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    w_thresh: Belief,
) -> ExpansionCoeffs {
    let beta = beta.value();
    let crossing = first_crossing_time(ch, w, w_thresh);
    match crossing {
        CrossingTime::Infinite => ExpansionCoeffs {
            crossing,
            b1: 1.0 / (1.0 - beta),
            b2: 0.0,
            b3: vec![0.0; ch.levels()],
            activation: None,
        },
        CrossingTime::Finite(l) => {
            let discount = discount_pow(beta, l);
            let omega = ch.passive_update_k(w, l);
            let mut b3 = Vec::with_capacity(ch.levels());
            let mut successors = Vec::with_capacity(ch.levels());
            for cqi in 1..=ch.levels() {
                let prob = ch
                    .observation_prob(omega, cqi)
                    .expect("level within 1..=K");
                b3.push(discount * beta * prob);
                successors.push(ch.active_update(omega, cqi).ok());
            }
            ExpansionCoeffs {
                crossing,
                b1: (1.0 - discount) / (1.0 - beta),
                b2: discount,
                b3,
                activation: Some(Activation { omega, successors }),
            }
        }
    }
}

#[inline]
fn discount_pow(beta: f64, l: u64) -> f64 {
    if l > i32::MAX as u64 {
        0.0
    } else {
        beta.powi(l as i32)
    }
}

// ── Affine value estimate ────────────────────────────────────────────────

/// A value estimate `V̂ = k·m + a`, affine in the subsidy `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineValue {
    pub k: f64,
    pub a: f64,
}

impl AffineValue {
    #[inline]
    pub fn eval(&self, m: f64) -> f64 {
        self.k * m + self.a
    }
}

/// `n`-iteration estimate `(k_n(ω), a_n(ω))` of the value at `ω` under the
/// threshold policy with threshold `w_thresh` (unit throughput).
pub fn affine_value(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    w_thresh: Belief,
    n: IterationDepth,
) -> AffineValue {
    let (k, a) = affine_rec(ch, beta.value(), w, w_thresh, n.get());
    AffineValue { k, a }
}

fn affine_rec(ch: &ChannelParams, beta: f64, w: Belief, thresh: Belief, depth: u32) -> (f64, f64) {
    let l = match first_crossing_time(ch, w, thresh) {
        CrossingTime::Infinite => return (1.0 / (1.0 - beta), 0.0),
        CrossingTime::Finite(l) => l,
    };
    let discount = discount_pow(beta, l);
    let omega = ch.passive_update_k(w, l);
    let mut k = (1.0 - discount) / (1.0 - beta);
    let mut a = discount * omega.value();
    if depth == 0 {
        return (k, a);
    }
    let weight = discount * beta;
    for (prob, next) in ch.successors(omega) {
        let (k_next, a_next) = affine_rec(ch, beta, next, thresh, depth - 1);
        k += weight * prob * k_next;
        a += weight * prob * a_next;
    }
    (k, a)
}

// ── Index ────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    ApproxWhittle,
    /// The linear equation had no usable root; the value is `ω·B`.
    FallbackMyopic,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::ApproxWhittle => "approx_whittle",
            IndexKind::FallbackMyopic => "fallback_myopic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub value: f64,
    pub kind: IndexKind,
}

/// The linear equation `den·m = num` obtained from the indifference condition
/// at belief `ω` with the threshold set to `ω` (unit throughput).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEquation {
    /// Estimate at `T(ω)`: `(k_{n,0}, a_{n,0})`.
    pub idle: AffineValue,
    /// `(p_i(ω), (k_{n,i}, a_{n,i}))` for every level with nonzero likelihood.
    pub used: Vec<(f64, AffineValue)>,
    pub numerator: f64,
    pub denominator: f64,
}

pub fn index_equation(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    n: IterationDepth,
) -> IndexEquation {
    let b = beta.value();
    let thresh = w;
    let idle = affine_value(ch, beta, ch.passive_update(w), thresh, n);
    let used: Vec<(f64, AffineValue)> = ch
        .successors(w)
        .map(|(prob, next)| (prob, affine_value(ch, beta, next, thresh, n)))
        .collect();
    let (mut k_used, mut a_used) = (0.0, 0.0);
    for (prob, v) in &used {
        k_used += prob * v.k;
        a_used += prob * v.a;
    }
    IndexEquation {
        numerator: w.value() + b * (a_used - idle.a),
        denominator: 1.0 + b * (idle.k - k_used),
        idle,
        used,
    }
}

/// `Ŵ_n(ω)·B`, or `ω·B` when the linear equation is (near-)singular.
pub fn approx_whittle(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    n: IterationDepth,
) -> IndexResult {
    approx_whittle_with_eps(ch, beta, w, n, DEFAULT_DENOMINATOR_EPS)
}

pub fn approx_whittle_with_eps(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    n: IterationDepth,
    eps: f64,
) -> IndexResult {
    let eq = index_equation(ch, beta, w, n);
    if eq.denominator.abs() > eps {
        IndexResult {
            value: eq.numerator / eq.denominator * ch.throughput(),
            kind: IndexKind::ApproxWhittle,
        }
    } else {
        IndexResult {
            value: w.value() * ch.throughput(),
            kind: IndexKind::FallbackMyopic,
        }
    }
}

/// The 0-iteration index `c0 / c1`.
pub fn imperfect_whittle(ch: &ChannelParams, beta: Discount, w: Belief) -> IndexResult {
    approx_whittle(ch, beta, w, IterationDepth::ZERO)
}

/// Approximated action values `(V̂(ω; a=0), V̂(ω; a=1))` at subsidy `m`,
/// expressed in throughput units (reward `ω·B`).
pub fn approx_action_values(
    ch: &ChannelParams,
    beta: Discount,
    w: Belief,
    n: IterationDepth,
    m: f64,
) -> (f64, f64) {
    let eq = index_equation(ch, beta, w, n);
    let b = beta.value();
    let scale = ch.throughput();
    let value = |v: &AffineValue| v.k * m + v.a * scale;
    let passive = m + b * value(&eq.idle);
    let active = w.value() * scale + b * eq.used.iter().map(|(p, v)| p * value(v)).sum::<f64>();
    (passive, active)
}

// ── Discount admissibility ───────────────────────────────────────────────

/// Largest `β` for which the threshold structure and indexability are
/// guaranteed on this channel.
pub fn beta_bound(ch: &ChannelParams) -> f64 {
    let pd = ch.correlation();
    let mass = ch.positive_signal_mass();
    let raw = if pd > 0.0 {
        1.0 / (2.0 * pd.abs() * (1.0 + mass))
    } else {
        1.0 / (pd.abs() * (3.0 + 4.0 * mass))
    };
    raw.min(0.5)
}

/// Minimum of [`beta_bound`] over a system; `None` for an empty system.
pub fn system_beta_bound(channels: &[ChannelParams]) -> Option<f64> {
    channels.iter().map(beta_bound).reduce(f64::min)
}

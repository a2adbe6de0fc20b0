//! Exact finite-horizon dynamic programming for the single-channel problem
//! with a passive subsidy `m`.
//!
//! The `T`-horizon value satisfies
//!
//! ```text
//! V_T(ω; idle) = m + β·V_{T−1}(T(ω))
//! V_T(ω; use)  = ω·B + β·Σ_i p_i(ω)·V_{T−1}(ω_i)
//! V_T(ω)       = max of the two,   V_0 ≡ 0
//! ```
//!
//! and is evaluated exactly over the reachable belief tree. The results are
//! ground truth for the closed-form index in [`crate::index`] and for the
//! structural properties checked in [`suites`].

pub mod suites;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, ChannelParams};
use crate::index::{beta_bound, Discount};

pub const DEFAULT_HORIZON: u32 = 12;
pub const DEFAULT_HORIZON_CAP: u32 = 14;
pub const DEFAULT_BISECTION_STEPS: u32 = 80;
pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// Beliefs closer than this share a memo entry.
const MEMO_RESOLUTION: f64 = 1e-12;
/// Subtrees shallower than this are cheaper to recompute than to look up.
const MEMO_MIN_DEPTH: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("horizon {horizon} exceeds the cap of {cap}")]
    HorizonTooLarge { horizon: u32, cap: u32 },

    #[error("index bisection needs a horizon of at least 1")]
    EmptyHorizon,

    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),

    #[error("no sign change of idle-minus-use advantage on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
}

/// `V_T(ω)` with its two action values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonValue {
    pub total: f64,
    pub passive: f64,
    pub active: f64,
}

/// Expected discounted number of idle slots under an optimal policy, taking
/// the idle-heaviest optimal policy where several exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassiveTimeValue {
    pub passive_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleIndex {
    pub value: f64,
    /// `β^T·B/(1 − β)`: worst-case effect of the horizon cut-off on values.
    pub truncation_bound: f64,
    pub bisection_steps: u32,
    /// False when `β` exceeds the channel's admissible bound, in which case
    /// the bisection still runs but the index may not be well defined.
    pub within_beta_bound: bool,
}

/// `1 / (1 − β|p_d|(1 + 2Σ_P))`, the Lipschitz constant of the unit-throughput
/// value in the belief, when the denominator is positive.
pub fn lipschitz_constant(ch: &ChannelParams, beta: Discount) -> Option<f64> {
    let den =
        1.0 - beta.value() * ch.correlation().abs() * (1.0 + 2.0 * ch.positive_signal_mass());
    (den > 0.0).then(|| 1.0 / den)
}

pub fn truncation_bound(beta: Discount, horizon: u32, throughput: f64) -> f64 {
    beta.value().powi(horizon as i32) * throughput / (1.0 - beta.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    pub horizon_cap: u32,
    pub max_bisection_steps: u32,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            horizon_cap: DEFAULT_HORIZON_CAP,
            max_bisection_steps: DEFAULT_BISECTION_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    passive_time: f64,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    passive: f64,
    active: f64,
    passive_time: f64,
}

struct Evaluator<'a> {
    ch: &'a ChannelParams,
    beta: f64,
    m: f64,
    memo: HashMap<(u32, i64), Node>,
}

impl<'a> Evaluator<'a> {
    fn new(ch: &'a ChannelParams, beta: Discount, m: f64) -> Self {
        Self {
            ch,
            beta: beta.value(),
            m,
            memo: HashMap::new(),
        }
    }

    fn split(&mut self, w: Belief, horizon: u32) -> Split {
        let reward = w.value() * self.ch.throughput();
        if horizon == 0 {
            return Split {
                passive: 0.0,
                active: 0.0,
                passive_time: 0.0,
            };
        }
        if horizon == 1 {
            return Split {
                passive: self.m,
                active: reward,
                passive_time: if self.m >= reward { 1.0 } else { 0.0 },
            };
        }
        let idle = self.node(self.ch.passive_update(w), horizon - 1);
        let passive = self.m + self.beta * idle.value;
        let d_passive = 1.0 + self.beta * idle.passive_time;

        let (mut cont, mut d_cont) = (0.0, 0.0);
        let ch = self.ch;
        for (prob, next) in ch.successors(w) {
            let child = self.node(next, horizon - 1);
            cont += prob * child.value;
            d_cont += prob * child.passive_time;
        }
        let active = reward + self.beta * cont;
        let d_active = self.beta * d_cont;

        let passive_time = if passive > active {
            d_passive
        } else if active > passive {
            d_active
        } else {
            d_passive.max(d_active)
        };
        Split {
            passive,
            active,
            passive_time,
        }
    }

    fn node(&mut self, w: Belief, horizon: u32) -> Node {
        if horizon < MEMO_MIN_DEPTH {
            return self.compute(w, horizon);
        }
        let key = (horizon, (w.value() / MEMO_RESOLUTION).round() as i64);
        if let Some(node) = self.memo.get(&key) {
            return *node;
        }
        let node = self.compute(w, horizon);
        self.memo.insert(key, node);
        node
    }

    fn compute(&mut self, w: Belief, horizon: u32) -> Node {
        let s = self.split(w, horizon);
        Node {
            value: s.passive.max(s.active),
            passive_time: s.passive_time,
        }
    }
}

impl Oracle {
    fn check_horizon(&self, horizon: u32) -> Result<(), OracleError> {
        if horizon > self.horizon_cap {
            Err(OracleError::HorizonTooLarge {
                horizon,
                cap: self.horizon_cap,
            })
        } else {
            Ok(())
        }
    }

    pub fn finite_horizon_value(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        m: f64,
        w: Belief,
        horizon: u32,
    ) -> Result<HorizonValue, OracleError> {
        self.check_horizon(horizon)?;
        let s = Evaluator::new(ch, beta, m).split(w, horizon);
        Ok(HorizonValue {
            total: s.passive.max(s.active),
            passive: s.passive,
            active: s.active,
        })
    }

    pub fn passive_time(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        m: f64,
        w: Belief,
        horizon: u32,
    ) -> Result<PassiveTimeValue, OracleError> {
        self.check_horizon(horizon)?;
        let s = Evaluator::new(ch, beta, m).split(w, horizon);
        Ok(PassiveTimeValue {
            passive_t: s.passive_time,
        })
    }

    /// Finite-horizon Whittle index: the smallest subsidy at which idling is
    /// at least as good as using the channel, located by bisection on
    /// `[−B/(1−β), B/(1−β)]`.
    pub fn whittle(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        w: Belief,
        horizon: u32,
        tol: f64,
    ) -> Result<OracleIndex, OracleError> {
        self.check_horizon(horizon)?;
        if horizon == 0 {
            return Err(OracleError::EmptyHorizon);
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(OracleError::InvalidTolerance(tol));
        }
        let span = ch.throughput() / (1.0 - beta.value());
        let idles = |m: f64| {
            let s = Evaluator::new(ch, beta, m).split(w, horizon);
            s.passive >= s.active
        };
        let (mut lo, mut hi) = (-span, span);
        if idles(lo) || !idles(hi) {
            return Err(OracleError::BracketFailure { lo, hi });
        }
        let mut steps = 0;
        while hi - lo >= tol && steps < self.max_bisection_steps {
            let mid = 0.5 * (lo + hi);
            if idles(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
        }
        Ok(OracleIndex {
            value: 0.5 * (lo + hi),
            truncation_bound: truncation_bound(beta, horizon, ch.throughput()),
            bisection_steps: steps,
            within_beta_bound: beta.value() <= beta_bound(ch),
        })
    }

    /// Preferred action on a uniform belief grid of `grid_n` points.
    /// Using the channel is preferred only when it beats idling by more than
    /// `tie_tolerance`.
    pub fn preferred_actions(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        m: f64,
        horizon: u32,
        grid_n: usize,
        tie_tolerance: f64,
    ) -> Result<Vec<bool>, OracleError> {
        self.check_horizon(horizon)?;
        let mut eval = Evaluator::new(ch, beta, m);
        Ok(belief_grid(grid_n)
            .map(|w| {
                let s = eval.split(w, horizon);
                s.active > s.passive + tie_tolerance
            })
            .collect())
    }

    pub fn threshold_scan(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        m: f64,
        horizon: u32,
        grid_n: usize,
    ) -> Result<ThresholdScan, OracleError> {
        let grid_n = grid_n.max(3);
        let active = self.preferred_actions(ch, beta, m, horizon, grid_n, SCAN_TIE_TOLERANCE)?;
        Ok(ThresholdScan::from_actions(m, &active))
    }

    pub fn indexability_probe(
        &self,
        ch: &ChannelParams,
        beta: Discount,
        m_grid: &[f64],
        horizon: u32,
        grid_n: usize,
    ) -> Result<IndexabilityReport, OracleError> {
        let grid_n = grid_n.max(3);
        let mut scans = Vec::with_capacity(m_grid.len());
        let mut monotone = true;
        let mut first_violation = None;
        let mut previous: Option<Vec<bool>> = None;
        for &m in m_grid {
            let active =
                self.preferred_actions(ch, beta, m, horizon, grid_n, SCAN_TIE_TOLERANCE)?;
            if let Some(prev) = &previous {
                // Every belief idle at the smaller subsidy must stay idle.
                let shrinks = prev.iter().zip(&active).any(|(&was_active, &is_active)| {
                    !was_active && is_active
                });
                if shrinks {
                    monotone = false;
                    first_violation.get_or_insert(m);
                }
            }
            scans.push(ThresholdScan::from_actions(m, &active));
            previous = Some(active);
        }
        Ok(IndexabilityReport {
            monotone,
            first_violation,
            scans,
        })
    }
}

pub const SCAN_TIE_TOLERANCE: f64 = 1e-12;

/// `grid_n` evenly spaced beliefs from 0 to 1 inclusive.
pub fn belief_grid(grid_n: usize) -> impl Iterator<Item = Belief> {
    let last = grid_n.saturating_sub(1).max(1) as f64;
    (0..grid_n).map(move |j| Belief::settle(j as f64 / last))
}

/// Outcome of scanning the preferred action across the belief grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub m: f64,
    /// Midpoint between the last idle and first used grid belief when the
    /// pattern is idle-then-use. An all-used grid reports `−h/2` and an
    /// all-idle grid `1 + h/2` (`h` = grid spacing). `None` when the pattern
    /// has more than one switch.
    pub threshold: Option<f64>,
    pub structure_violation: bool,
    pub grid_n: usize,
}

impl ThresholdScan {
    pub fn from_actions(m: f64, active: &[bool]) -> Self {
        let grid_n = active.len();
        let h = 1.0 / (grid_n.max(2) - 1) as f64;
        let first_active = active.iter().position(|&a| a).unwrap_or(grid_n);
        let single_switch = active[first_active..].iter().all(|&a| a);
        let threshold = single_switch.then_some((first_active as f64 - 0.5) * h);
        Self {
            m,
            threshold,
            structure_violation: !single_switch,
            grid_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexabilityReport {
    /// Passive sets never shrink as the subsidy grows.
    pub monotone: bool,
    pub first_violation: Option<f64>,
    pub scans: Vec<ThresholdScan>,
}

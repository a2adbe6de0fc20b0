//! Randomised property suites built on the exact oracle.
//!
//! Each suite draws its instances from a seeded generator, checks a family of
//! properties and reports per-property counts and the worst residual, where a
//! residual is "observed minus allowed" (a property passes when every checked
//! residual is at most zero).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    belief_grid, lipschitz_constant, Oracle, OracleError, DEFAULT_TOLERANCE,
};
use crate::belief::{Belief, ChannelParams, ObservationLevel};
use crate::index::{
    approx_whittle, beta_bound, first_crossing_time, CrossingTime, Discount, IterationDepth,
};
use crate::presets::SYSTEMS;

// ── Reports ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Crossing,
    Lemmas,
    Oracle,
    Indexability,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Crossing,
        Suite::Lemmas,
        Suite::Oracle,
        Suite::Indexability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Crossing => "crossing",
            Suite::Lemmas => "lemmas",
            Suite::Oracle => "oracle",
            Suite::Indexability => "indexability",
        }
    }

    /// Number of random instances drawn when no budget is given.
    pub fn default_budget(self) -> usize {
        match self {
            Suite::Crossing => 10_000,
            Suite::Lemmas => 24,
            Suite::Oracle => 50,
            Suite::Indexability => 12,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                format!("unknown suite '{s}' (expected crossing, lemmas, oracle or indexability)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    pub checked: u64,
    pub failures: u64,
    pub skipped: u64,
    /// Largest observed-minus-allowed value; `None` if nothing was checked.
    pub worst_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub budget: usize,
    pub passed: bool,
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, budget: usize, properties: Vec<PropertyReport>) -> Self {
        Self {
            suite,
            seed,
            budget,
            passed: properties.iter().all(|p| p.passed),
            properties,
        }
    }

    pub fn property(&self, name: &str) -> Option<&PropertyReport> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Accumulates residuals for one property.
#[derive(Debug, Clone)]
struct Tally {
    name: &'static str,
    checked: u64,
    failures: u64,
    skipped: u64,
    worst: Option<f64>,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            failures: 0,
            skipped: 0,
            worst: None,
            first_failure: None,
        }
    }

    fn record(&mut self, residual: f64, context: impl FnOnce() -> String) {
        self.checked += 1;
        self.worst = Some(self.worst.map_or(residual, |w| w.max(residual)));
        if residual.is_nan() || residual > 0.0 {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(context());
            }
        }
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn finish(self) -> PropertyReport {
        PropertyReport {
            name: self.name.to_string(),
            passed: self.failures == 0 && self.checked > 0,
            checked: self.checked,
            failures: self.failures,
            skipped: self.skipped,
            worst_residual: self.worst,
            first_failure: self.first_failure,
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, budget: Option<usize>) -> Result<SuiteReport, OracleError> {
    let budget = budget.unwrap_or(suite.default_budget()).max(1);
    let properties = match suite {
        Suite::Crossing => crossing_suite(seed, budget),
        Suite::Lemmas => lemma_suite(seed, budget)?,
        Suite::Oracle => oracle_suite(seed, budget)?,
        Suite::Indexability => indexability_suite(seed, budget)?,
    };
    Ok(SuiteReport::new(suite, seed, budget, properties))
}

// ── Random instances ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correlation {
    Any,
    /// `p11 > p01`.
    Positive,
    /// `p11 < p01`.
    Negative,
}

/// A random channel with `levels` CQI levels whose likelihoods are all
/// strictly positive. A single level is uninformative.
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    correlation: Correlation,
    levels: usize,
    throughput: f64,
) -> ChannelParams {
    let (p01, p11) = loop {
        let p01 = rng.gen_range(0.02..0.98);
        let p11 = rng.gen_range(0.02..0.98);
        let pd: f64 = p11 - p01;
        let sign_ok = match correlation {
            Correlation::Any => true,
            Correlation::Positive => pd > 0.0,
            Correlation::Negative => pd < 0.0,
        };
        if sign_ok && pd.abs() >= 0.02 {
            break (p01, p11);
        }
    };
    let levels = levels.max(1);
    let column = |rng: &mut R| {
        let raw: Vec<f64> = (0..levels).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let poor = column(rng);
    let good = column(rng);
    let obs = if levels == 1 {
        vec![ObservationLevel::new(1.0, 1.0)]
    } else {
        poor.into_iter()
            .zip(good)
            .map(|(p, g)| ObservationLevel::new(p, g))
            .collect()
    };
    ChannelParams::new(p01, p11, obs, throughput).expect("generated channel is valid")
}

/// `β` drawn uniformly from `[lo, hi]` times the channel's admissible bound.
fn random_admissible_beta<R: Rng + ?Sized>(
    rng: &mut R,
    ch: &ChannelParams,
    lo: f64,
    hi: f64,
) -> Discount {
    let bound = beta_bound(ch);
    Discount::new(bound * rng.gen_range(lo..=hi)).expect("bound is in (0, 0.5]")
}

fn random_belief<R: Rng + ?Sized>(rng: &mut R) -> Belief {
    Belief::settle(rng.gen_range(0.0..=1.0))
}

/// Horizon used for grid sweeps: keeps each exact evaluation around 10⁴ nodes.
fn sweep_horizon(ch: &ChannelParams) -> u32 {
    match ch.levels() {
        1 | 2 => 8,
        3 => 6,
        _ => 5,
    }
}

fn max_horizon(ch: &ChannelParams) -> u32 {
    match ch.levels() {
        1 | 2 => 10,
        3 => 7,
        _ => 6,
    }
}

fn describe(ch: &ChannelParams) -> String {
    let obs: Vec<String> = ch
        .observation_levels()
        .iter()
        .map(|l| format!("[{:.4},{:.4}]", l.given_poor, l.given_good))
        .collect();
    format!(
        "p01={:.6} p11={:.6} B={:.4} obs={}",
        ch.p01(),
        ch.p11(),
        ch.throughput(),
        obs.join("")
    )
}

// ── Crossing suite ───────────────────────────────────────────────────────

/// Steps after which the direct iteration declares the crossing infinite.
pub const BRUTE_FORCE_CROSSING_CAP: u64 = 10_000;

/// `min{k : T^k(ω) > ω′}` by direct iteration of the one-step map.
pub fn brute_force_crossing(ch: &ChannelParams, w: Belief, w_thresh: Belief) -> CrossingTime {
    let mut current = w;
    for k in 0..=BRUTE_FORCE_CROSSING_CAP {
        if current.value() > w_thresh.value() {
            return CrossingTime::Finite(k);
        }
        current = ch.passive_update(current);
    }
    CrossingTime::Infinite
}

fn crossing_suite(seed: u64, budget: usize) -> Vec<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crossing = Tally::new("first_crossing_time_matches_iteration");
    let mut k_step = Tally::new("passive_update_k_matches_iteration");
    for _ in 0..budget {
        let ch = random_channel(&mut rng, Correlation::Any, 2, 1.0);
        let w = random_belief(&mut rng);
        // Bias half the thresholds to just below the steady state, where the
        // crossing times are long.
        let thresh = if rng.gen_bool(0.5) {
            random_belief(&mut rng)
        } else {
            let s = ch.steady_state().value();
            Belief::settle(s - (s * rng.gen_range(1e-9f64..1.0).powi(3)))
        };
        let closed = first_crossing_time(&ch, w, thresh);
        let direct = brute_force_crossing(&ch, w, thresh);
        let residual = if closed == direct { 0.0 } else { 1.0 };
        crossing.record(residual, || {
            format!(
                "{}: w={:e} thresh={:e}: closed form {:?}, iteration {:?}",
                describe(&ch),
                w.value(),
                thresh.value(),
                closed,
                direct
            )
        });

        let k = rng.gen_range(0..=200u64);
        let mut iterated = w;
        for _ in 0..k {
            iterated = ch.passive_update(iterated);
        }
        let closed = ch.passive_update_k(w, k);
        let gap = (closed.value() - iterated.value()).abs();
        k_step.record(gap - 1e-10, || {
            format!("{}: w={:e} k={k}: gap {gap:e}", describe(&ch), w.value())
        });
    }
    vec![crossing.finish(), k_step.finish()]
}

// ── Lemma suite ──────────────────────────────────────────────────────────

const CONVEXITY_SLACK: f64 = 1e-10;
const LIPSCHITZ_SLACK: f64 = 1e-10;
const MONOTONE_SLACK: f64 = 1e-12;
const SWEEP_POINTS: usize = 1001;
const SCAN_POINTS: usize = 201;
const DIFF_STEP: f64 = 1e-6;
/// Two one-sided differences closer than this are taken to lie on one linear
/// piece.
const LINEARITY_TOLERANCE: f64 = 1e-7;

fn random_subsidy<R: Rng + ?Sized>(rng: &mut R, ch: &ChannelParams) -> f64 {
    ch.throughput() * rng.gen_range(-0.25..1.25)
}

fn lemma_suite(seed: u64, budget: usize) -> Result<Vec<PropertyReport>, OracleError> {
    let oracle = Oracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut convex_w = Tally::new("lemma1_convex_in_belief");
    let mut monotone = Tally::new("lemma2_monotone_in_belief");
    let mut lipschitz_w = Tally::new("lemma3_lipschitz_in_belief");
    let mut derivative_order = Tally::new("lemma4_use_slope_dominates_idle_slope");
    let mut convex_m = Tally::new("lemma5_convex_in_subsidy");
    let mut lipschitz_m = Tally::new("lemma6_lipschitz_in_subsidy");
    let mut threshold = Tally::new("theorem1_threshold_structure");
    let mut passive_slope = Tally::new("theorem3_subsidy_slope_is_passive_time");

    for idx in 0..budget {
        // Alternate correlation signs so both admissibility regimes appear;
        // every third channel has three CQI levels.
        let correlation = if idx % 2 == 0 {
            Correlation::Positive
        } else {
            Correlation::Negative
        };
        let levels = if idx % 3 == 2 { 3 } else { 2 };
        let throughput = rng.gen_range(0.4..1.0);
        let ch = random_channel(&mut rng, correlation, levels, throughput);
        let beta = random_admissible_beta(&mut rng, &ch, 0.1, 1.0);
        let b = beta.value();
        let ctx = |extra: String| format!("{} beta={b:e}: {extra}", describe(&ch));
        let value = |m: f64, w: Belief, t: u32| -> Result<f64, OracleError> {
            Ok(oracle.finite_horizon_value(&ch, beta, m, w, t)?.total)
        };

        // Belief sweep: monotonicity and Lipschitz continuity in ω.
        let t_sweep = sweep_horizon(&ch);
        let m = random_subsidy(&mut rng, &ch);
        let grid: Vec<Belief> = belief_grid(SWEEP_POINTS).collect();
        let values = grid
            .iter()
            .map(|&w| value(m, w, t_sweep))
            .collect::<Result<Vec<_>, _>>()?;
        let c = lipschitz_constant(&ch, beta).expect("admissible beta keeps C finite")
            * ch.throughput();
        for (j, pair) in values.windows(2).enumerate() {
            let dw = grid[j + 1].value() - grid[j].value();
            if ch.correlation() > 0.0 {
                monotone.record(pair[0] - pair[1] - MONOTONE_SLACK, || {
                    ctx(format!("m={m:e} T={t_sweep} at w={:e}", grid[j].value()))
                });
            }
            let gap = (pair[1] - pair[0]).abs();
            lipschitz_w.record(gap - c * dw - LIPSCHITZ_SLACK, || {
                ctx(format!("m={m:e} T={t_sweep} C={c:e} at w={:e}", grid[j].value()))
            });
        }
        for _ in 0..20 {
            let (u, v) = (random_belief(&mut rng), random_belief(&mut rng));
            let t = rng.gen_range(1..=max_horizon(&ch));
            let gap = (value(m, u, t)? - value(m, v, t)?).abs();
            let allowed = c * (u.value() - v.value()).abs();
            lipschitz_w.record(gap - allowed - LIPSCHITZ_SLACK, || {
                ctx(format!("m={m:e} T={t} pair ({:e}, {:e})", u.value(), v.value()))
            });
        }

        // Midpoint convexity in ω and in m, Lipschitz continuity in m.
        for _ in 0..30 {
            let t = rng.gen_range(1..=max_horizon(&ch));
            let m = random_subsidy(&mut rng, &ch);
            let (u, v) = (random_belief(&mut rng), random_belief(&mut rng));
            let mid = Belief::settle(0.5 * (u.value() + v.value()));
            let lhs = value(m, mid, t)?;
            let rhs = 0.5 * (value(m, u, t)? + value(m, v, t)?);
            convex_w.record(lhs - rhs - CONVEXITY_SLACK, || {
                ctx(format!("m={m:e} T={t} ends ({:e}, {:e})", u.value(), v.value()))
            });

            let w = random_belief(&mut rng);
            let (m1, m2) = (random_subsidy(&mut rng, &ch), random_subsidy(&mut rng, &ch));
            let (v1, v2) = (value(m1, w, t)?, value(m2, w, t)?);
            let vmid = value(0.5 * (m1 + m2), w, t)?;
            convex_m.record(vmid - 0.5 * (v1 + v2) - CONVEXITY_SLACK, || {
                ctx(format!("w={:e} T={t} ends ({m1:e}, {m2:e})", w.value()))
            });
            let allowed = (m1 - m2).abs() / (1.0 - b);
            lipschitz_m.record((v1 - v2).abs() - allowed - LIPSCHITZ_SLACK, || {
                ctx(format!("w={:e} T={t} ends ({m1:e}, {m2:e})", w.value()))
            });
        }

        // Right slopes in ω of the two action values, away from kinks.
        for _ in 0..20 {
            let t = rng.gen_range(1..=max_horizon(&ch));
            let m = random_subsidy(&mut rng, &ch);
            let w = Belief::settle(rng.gen_range(0.0..(1.0 - 2.0 * DIFF_STEP)));
            let split = |x: f64| oracle.finite_horizon_value(&ch, beta, m, Belief::settle(x), t);
            let at = split(w.value())?;
            let half = split(w.value() + 0.5 * DIFF_STEP)?;
            let full = split(w.value() + DIFF_STEP)?;
            let slope = |a: f64, h: f64, step: f64| (h - a) / step;
            let use_full = slope(at.active, full.active, DIFF_STEP);
            let use_half = slope(at.active, half.active, 0.5 * DIFF_STEP);
            let idle_full = slope(at.passive, full.passive, DIFF_STEP);
            let idle_half = slope(at.passive, half.passive, 0.5 * DIFF_STEP);
            if (use_full - use_half).abs() > LINEARITY_TOLERANCE
                || (idle_full - idle_half).abs() > LINEARITY_TOLERANCE
            {
                derivative_order.skip();
                continue;
            }
            derivative_order.record(idle_half - use_half - LINEARITY_TOLERANCE, || {
                ctx(format!(
                    "m={m:e} T={t} w={:e}: use slope {use_half:e}, idle slope {idle_half:e}",
                    w.value()
                ))
            });
        }

        // Slope in m equals the discounted idle time, away from policy switches.
        for _ in 0..20 {
            let t = rng.gen_range(1..=max_horizon(&ch));
            let m = random_subsidy(&mut rng, &ch);
            let w = random_belief(&mut rng);
            let base = value(m, w, t)?;
            let full = (value(m + DIFF_STEP, w, t)? - base) / DIFF_STEP;
            let half = (value(m + 0.5 * DIFF_STEP, w, t)? - base) / (0.5 * DIFF_STEP);
            if (full - half).abs() > LINEARITY_TOLERANCE {
                passive_slope.skip();
                continue;
            }
            let d = oracle.passive_time(&ch, beta, m, w, t)?.passive_t;
            passive_slope.record((half - d).abs() - LINEARITY_TOLERANCE, || {
                ctx(format!("m={m:e} T={t} w={:e}: slope {half:e}, D={d:e}", w.value()))
            });
        }

        // Threshold structure of the optimal action.
        for _ in 0..4 {
            let t = rng.gen_range(1..=max_horizon(&ch));
            let m = random_subsidy(&mut rng, &ch);
            let scan = oracle.threshold_scan(&ch, beta, m, t, SCAN_POINTS)?;
            threshold.record(if scan.structure_violation { 1.0 } else { 0.0 }, || {
                ctx(format!("m={m:e} T={t}: action pattern switches more than once"))
            });
        }
    }

    Ok(vec![
        convex_w.finish(),
        monotone.finish(),
        lipschitz_w.finish(),
        derivative_order.finish(),
        convex_m.finish(),
        lipschitz_m.finish(),
        threshold.finish(),
        passive_slope.finish(),
    ])
}

// ── Indexability suite ───────────────────────────────────────────────────

const PROBE_SUBSIDIES: usize = 41;
const PROBE_POINTS: usize = 101;

/// Ascending subsidies spanning every belief's switching point.
fn probe_subsidies(ch: &ChannelParams) -> Vec<f64> {
    let (lo, hi) = (-0.1 * ch.throughput(), 1.1 * ch.throughput());
    (0..PROBE_SUBSIDIES)
        .map(|j| lo + (hi - lo) * j as f64 / (PROBE_SUBSIDIES - 1) as f64)
        .collect()
}

fn indexability_suite(seed: u64, budget: usize) -> Result<Vec<PropertyReport>, OracleError> {
    let oracle = Oracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = Tally::new("corollary1_passive_set_monotone");
    let mut presets = Tally::new("preset_channels_monotone_at_beta_0_3");

    let probe = |tally: &mut Tally, ch: &ChannelParams, beta: Discount| {
        let t = sweep_horizon(ch);
        let report = oracle.indexability_probe(ch, beta, &probe_subsidies(ch), t, PROBE_POINTS)?;
        tally.record(if report.monotone { 0.0 } else { 1.0 }, || {
            format!(
                "{} beta={:e} T={t}: passive set shrinks at m={:?}",
                describe(ch),
                beta.value(),
                report.first_violation
            )
        });
        Ok::<_, OracleError>(())
    };

    for idx in 0..budget {
        let correlation = if idx % 2 == 0 {
            Correlation::Positive
        } else {
            Correlation::Negative
        };
        let throughput = rng.gen_range(0.4..1.0);
        let ch = random_channel(&mut rng, correlation, 2, throughput);
        let beta = random_admissible_beta(&mut rng, &ch, 0.1, 1.0);
        probe(&mut random, &ch, beta)?;
    }

    let beta = Discount::new(0.3).expect("valid discount");
    for preset in &SYSTEMS {
        for ch in preset.channels() {
            probe(&mut presets, &ch, beta)?;
        }
    }
    Ok(vec![random.finish(), presets.finish()])
}

// ── Oracle suite and index convergence ───────────────────────────────────

pub const CONVERGENCE_HORIZON: u32 = 13;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;
/// Deepest unrolling compared, so that differences cover `n = 0..=6`.
pub const CONVERGENCE_MAX_DEPTH: u32 = 7;
/// Depths whose successive differences fit the decay constant.
const DECAY_FIT_DEPTHS: usize = 3;
/// Differences below this are rounding noise.
const DECAY_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePair {
    pub channel: ChannelParams,
    pub beta: Discount,
    pub belief: Belief,
    /// Finite-horizon bisection index.
    pub oracle: f64,
    /// Oracle accuracy: bisection tolerance plus horizon truncation.
    pub resolution: f64,
    /// `Ŵ_n(ω)·B` for `n = 0..=max_depth`.
    pub approx: Vec<f64>,
}

impl ConvergencePair {
    pub fn error(&self, n: usize) -> f64 {
        (self.approx[n] - self.oracle).abs()
    }

    /// [`Self::error`], or zero when it is within the bisection tolerance.
    pub fn resolved_error(&self, n: usize) -> f64 {
        let e = self.error(n);
        if e > CONVERGENCE_TOLERANCE {
            e
        } else {
            0.0
        }
    }

    /// `|Ŵ_{n+1} − Ŵ_n|`.
    pub fn step(&self, n: usize) -> f64 {
        (self.approx[n + 1] - self.approx[n]).abs()
    }

    /// Smallest `A` with `|Ŵ_{n+1} − Ŵ_n| ≤ A·β^(n+1)` on the fit depths.
    pub fn fitted_decay_constant(&self) -> f64 {
        let b = self.beta.value();
        (0..DECAY_FIT_DEPTHS)
            .map(|n| self.step(n) / b.powi(n as i32 + 1))
            .fold(0.0, f64::max)
    }
}

/// Closed-form indices against the exact finite-horizon index on random
/// `(channel, ω)` pairs with admissible `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub seed: u64,
    pub pairs: Vec<ConvergencePair>,
}

impl ConvergenceStudy {
    pub fn run(seed: u64, pairs: usize) -> Result<Self, OracleError> {
        let oracle = Oracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let throughput = rng.gen_range(0.4..1.0);
            let ch = random_channel(&mut rng, Correlation::Any, 2, throughput);
            let beta = random_admissible_beta(&mut rng, &ch, 0.2, 0.99);
            let w = random_belief(&mut rng);
            let exact =
                oracle.whittle(&ch, beta, w, CONVERGENCE_HORIZON, CONVERGENCE_TOLERANCE)?;
            let b = beta.value();
            let resolution = CONVERGENCE_TOLERANCE
                + b.powi(CONVERGENCE_HORIZON as i32 - 1) * ch.throughput() / (1.0 - b);
            let approx = (0..=CONVERGENCE_MAX_DEPTH)
                .map(|n| {
                    let depth = IterationDepth::new(n).expect("within the depth cap");
                    approx_whittle(&ch, beta, w, depth).value
                })
                .collect();
            out.push(ConvergencePair {
                channel: ch,
                beta,
                belief: w,
                oracle: exact.value,
                resolution,
                approx,
            });
        }
        Ok(Self { seed, pairs: out })
    }

    pub fn max_depth(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.approx.len() - 1)
    }

    pub fn mean_error(&self, n: usize) -> f64 {
        self.pairs.iter().map(|p| p.error(n)).sum::<f64>() / self.pairs.len() as f64
    }

    pub fn median_error(&self, n: usize) -> f64 {
        median(self.pairs.iter().map(|p| p.error(n)).collect())
    }

    /// Mean oracle resolution, the slack allowed between average errors.
    pub fn mean_resolution(&self) -> f64 {
        self.pairs.iter().map(|p| p.resolution).sum::<f64>() / self.pairs.len() as f64
    }

    /// The average error never grows with `n` by more than the oracle's own
    /// resolution.
    pub fn check_mean_error_non_increasing(&self) -> PropertyReport {
        let mut tally = Tally::new("mean_error_non_increasing_in_depth");
        let slack = self.mean_resolution();
        for n in 0..self.max_depth() {
            let (now, next) = (self.mean_error(n), self.mean_error(n + 1));
            tally.record(next - now - slack, || {
                format!("mean error {now:e} at n={n} grows to {next:e} at n={}", n + 1)
            });
        }
        tally.finish()
    }

    /// Median error at `n = 3` is at most the median of `β·err_0`.
    ///
    /// Errors no larger than the bisection tolerance cannot be told apart from
    /// zero and count as zero. The comparison is repeated on raw errors over
    /// the pairs whose `n = 0` error is resolvable, so that it cannot pass
    /// only because both medians vanish.
    pub fn check_depth_three_gain(&self) -> PropertyReport {
        let mut tally = Tally::new("median_error_depth3_below_beta_times_depth0");
        let compare = |tally: &mut Tally, pairs: &[&ConvergencePair], err: &dyn Fn(&ConvergencePair, usize) -> f64, label: &str| {
            if pairs.is_empty() {
                tally.skip();
                return;
            }
            let at3 = median(pairs.iter().map(|p| err(p, 3)).collect());
            let scaled0 = median(pairs.iter().map(|p| p.beta.value() * err(p, 0)).collect());
            tally.record(at3 - scaled0, || {
                format!("{label}: median error at n=3 is {at3:e}, median beta*err0 is {scaled0:e}")
            });
        };
        let all: Vec<&ConvergencePair> = self.pairs.iter().collect();
        compare(&mut tally, &all, &|p, n| p.resolved_error(n), "all pairs");
        let resolvable: Vec<&ConvergencePair> =
            self.pairs.iter().filter(|p| p.resolved_error(0) > 0.0).collect();
        compare(&mut tally, &resolvable, &|p, n| p.error(n), "resolvable pairs");
        tally.finish()
    }

    /// `|Ŵ_{n+1} − Ŵ_n| ≤ A·β^(n+1)` for `n = 0..=6`, with `A` fitted on the
    /// first differences and checked on the remaining ones.
    pub fn check_geometric_decay(&self) -> PropertyReport {
        let mut tally = Tally::new("successive_differences_decay_geometrically");
        for (idx, pair) in self.pairs.iter().enumerate() {
            let a = pair.fitted_decay_constant();
            let b = pair.beta.value();
            for n in DECAY_FIT_DEPTHS..self.max_depth() {
                let allowed = a * b.powi(n as i32 + 1) + DECAY_NOISE_FLOOR;
                let step = pair.step(n);
                tally.record(step - allowed, || {
                    format!(
                        "pair {idx} ({}, beta={b:e}, w={:e}): step {step:e} at n={n} exceeds A*beta^{} = {allowed:e}",
                        describe(&pair.channel),
                        pair.belief.value(),
                        n + 1
                    )
                });
            }
        }
        tally.finish()
    }

    pub fn properties(&self) -> Vec<PropertyReport> {
        vec![
            self.check_mean_error_non_increasing(),
            self.check_depth_three_gain(),
            self.check_geometric_decay(),
        ]
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn oracle_suite(seed: u64, budget: usize) -> Result<Vec<PropertyReport>, OracleError> {
    let oracle = Oracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uninformative = Tally::new("uninformative_index_is_myopic");
    let mut truncation = Tally::new("horizon_12_vs_13_within_truncation_bound");
    let mut passive_bounds = Tally::new("passive_time_within_bounds");

    for idx in 0..budget {
        let throughput = rng.gen_range(0.4..1.0);
        let levels = if idx % 2 == 0 { 1 } else { 3 };
        let flat = random_channel(&mut rng, Correlation::Any, levels, throughput);
        let flat = if levels == 1 {
            flat
        } else {
            // Equal columns: every level is uninformative.
            let obs = flat
                .observation_levels()
                .iter()
                .map(|l| ObservationLevel::new(l.given_poor, l.given_poor))
                .collect();
            ChannelParams::new(flat.p01(), flat.p11(), obs, throughput)
                .expect("equal columns are valid")
        };
        let beta = random_admissible_beta(&mut rng, &flat, 0.1, 1.0);
        let w = random_belief(&mut rng);
        let t = sweep_horizon(&flat);
        let index = oracle.whittle(&flat, beta, w, t, DEFAULT_TOLERANCE)?;
        let gap = (index.value - w.value() * throughput).abs();
        uninformative.record(gap - DEFAULT_TOLERANCE, || {
            format!("{} w={:e}: index {:e}", describe(&flat), w.value(), index.value)
        });

        let ch = random_channel(&mut rng, Correlation::Any, 2, throughput);
        let beta = random_admissible_beta(&mut rng, &ch, 0.1, 1.0);
        let b = beta.value();
        for _ in 0..4 {
            let t = rng.gen_range(0..=max_horizon(&ch));
            let m = ch.throughput() * rng.gen_range(-0.5..1.5);
            let w = random_belief(&mut rng);
            let d = oracle.passive_time(&ch, beta, m, w, t)?.passive_t;
            let cap = (1.0 - b.powi(t as i32)) / (1.0 - b);
            passive_bounds.record((-d).max(d - cap) - 1e-12, || {
                format!("{} T={t} m={m:e} w={:e}: D={d:e}", describe(&ch), w.value())
            });
        }

        if idx < budget.div_ceil(5) {
            let w = random_belief(&mut rng);
            let short = oracle.whittle(&ch, beta, w, 12, CONVERGENCE_TOLERANCE)?;
            let long = oracle.whittle(&ch, beta, w, 13, CONVERGENCE_TOLERANCE)?;
            let allowed = short.truncation_bound + 2.0 * CONVERGENCE_TOLERANCE;
            let gap = (short.value - long.value).abs();
            truncation.record(gap - allowed, || {
                format!("{} w={:e}: T=12 {:e}, T=13 {:e}", describe(&ch), w.value(), short.value, long.value)
            });
        }
    }

    let mut properties = vec![uninformative.finish(), truncation.finish(), passive_bounds.finish()];
    let study = ConvergenceStudy::run(seed, budget)?;
    properties.extend(study.properties());
    Ok(properties)
}

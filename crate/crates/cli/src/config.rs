//! Experiment description files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "systems": [
//!     { "preset": "system-1", "reconstructed_obs": true },
//!     { "name": "pair", "channels": [
//!         { "p01": 0.1, "p11": 0.9, "obs": [[0.9, 0.1], [0.1, 0.9]], "throughput": 1.0 },
//!         { "p01": 0.3, "p11": 0.6, "obs": [[1.0, 1.0]], "throughput": 0.5 } ] }
//!   ],
//!   "policies": ["myopic", "awi:0", "awi:2"],
//!   "betas": ["paper-bound", 0.9],
//!   "horizon": 100,
//!   "runs": 10000,
//!   "active": 1,
//!   "initial_belief": "steady_state",
//!   "output": { "path": "results.csv", "curves": "curves.csv" }
//! }
//! ```
//!
//! Each `obs` row is one CQI level as `[P(level | poor), P(level | good)]`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use awi_core::belief::{ChannelParams, ObservationLevel};
use awi_core::index::{system_beta_bound, Discount};
use awi_core::policy::PolicySpec;
use awi_core::presets::SystemPreset;
use awi_core::sim::{InitialBelief, DEFAULT_HORIZON, DEFAULT_RUNS};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    pub systems: Vec<SystemEntry>,
    pub policies: Vec<PolicySpec>,
    pub betas: Vec<BetaSpec>,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_active")]
    pub active: usize,
    #[serde(default)]
    pub initial_belief: InitialBelief,
    #[serde(default, skip_serializing_if = "OutputOptions::is_empty")]
    pub output: OutputOptions,
}

fn default_horizon() -> u32 {
    DEFAULT_HORIZON
}

fn default_runs() -> u32 {
    DEFAULT_RUNS
}

fn default_active() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Mean partial-return curves, one row per slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<PathBuf>,
}

impl OutputOptions {
    fn is_empty(&self) -> bool {
        self.path.is_none() && self.curves.is_none()
    }
}

/// Either a built-in preset (optionally with its own observation model) or
/// an explicit list of channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Set on presets that use the shipped observation model, which is a
    /// reconstruction rather than a published matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructed_obs: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Vec<ObservationLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelParams>>,
}

impl SystemEntry {
    pub fn preset(name: &str) -> Self {
        Self {
            name: None,
            preset: Some(name.to_string()),
            reconstructed_obs: Some(true),
            obs: None,
            channels: None,
        }
    }
}

/// A system ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSystem {
    pub name: String,
    pub channels: Vec<ChannelParams>,
    pub reconstructed_obs: bool,
}

impl ResolvedSystem {
    pub fn beta(&self, spec: BetaSpec) -> Result<Discount, CliError> {
        let value = match spec {
            BetaSpec::PaperBound => system_beta_bound(&self.channels)
                .ok_or_else(|| CliError::Config(format!("system '{}' has no channels", self.name)))?,
            BetaSpec::Fixed(b) => b,
        };
        Discount::new(value)
            .map_err(|e| CliError::Config(format!("system '{}': {e}", self.name)))
    }
}

pub fn resolve_system(entry: &SystemEntry, position: usize) -> Result<ResolvedSystem, CliError> {
    let at = |msg: String| CliError::Config(format!("systems[{position}]: {msg}"));
    match (&entry.preset, &entry.channels) {
        (Some(_), Some(_)) => Err(at("give either 'preset' or 'channels', not both".into())),
        (None, None) => Err(at("missing 'preset' or 'channels'".into())),
        (Some(preset_name), None) => {
            let preset = SystemPreset::by_name(preset_name)
                .ok_or_else(|| at(format!("unknown preset '{preset_name}'")))?;
            let (channels, reconstructed) = match (&entry.obs, entry.reconstructed_obs) {
                (None, Some(false)) => {
                    return Err(at(
                        "'reconstructed_obs': false requires an explicit 'obs' matrix".into(),
                    ))
                }
                (None, _) => (preset.channels(), true),
                (Some(_), Some(true)) => {
                    return Err(at("an explicit 'obs' matrix is not reconstructed".into()))
                }
                (Some(obs), _) => (
                    preset
                        .channels_with_obs(obs)
                        .map_err(|e| at(e.to_string()))?,
                    false,
                ),
            };
            Ok(ResolvedSystem {
                name: entry.name.clone().unwrap_or_else(|| preset.name.to_string()),
                channels,
                reconstructed_obs: reconstructed,
            })
        }
        (None, Some(channels)) => {
            if entry.obs.is_some() || entry.reconstructed_obs == Some(true) {
                return Err(at("'obs' and 'reconstructed_obs' apply to presets only".into()));
            }
            Ok(ResolvedSystem {
                name: entry
                    .name
                    .clone()
                    .unwrap_or_else(|| format!("system{position}")),
                channels: channels.clone(),
                reconstructed_obs: false,
            })
        }
    }
}

// ── Discount factor values ───────────────────────────────────────────────

/// A fixed discount factor or the largest admissible one for each system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    PaperBound,
    Fixed(f64),
}

const PAPER_BOUND: &str = "paper-bound";

impl fmt::Display for BetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaSpec::PaperBound => f.write_str(PAPER_BOUND),
            BetaSpec::Fixed(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for BetaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case(PAPER_BOUND) {
            return Ok(BetaSpec::PaperBound);
        }
        let b: f64 = s
            .parse()
            .map_err(|_| format!("expected a number in (0, 1) or '{PAPER_BOUND}', got '{s}'"))?;
        if b > 0.0 && b < 1.0 {
            Ok(BetaSpec::Fixed(b))
        } else {
            Err(format!("discount factor {b} must lie in (0, 1)"))
        }
    }
}

impl Serialize for BetaSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            BetaSpec::PaperBound => serializer.serialize_str(PAPER_BOUND),
            BetaSpec::Fixed(b) => serializer.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for BetaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Token(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(b) => b.to_string().parse(),
            Raw::Token(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

// ── Loading ──────────────────────────────────────────────────────────────

impl ExperimentFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let file: ExperimentFile = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!(
                "{}:{}:{}: {}",
                origin.display(),
                e.line(),
                e.column(),
                e
            ))
        })?;
        file.check(origin)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    fn check(&self, origin: &Path) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(format!("{}: {msg}", origin.display())));
        if self.version != FORMAT_VERSION {
            return fail(&format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            ));
        }
        if self.systems.is_empty() {
            return fail("'systems' is empty");
        }
        if self.policies.is_empty() {
            return fail("'policies' is empty");
        }
        if self.betas.is_empty() {
            return fail("'betas' is empty");
        }
        Ok(())
    }

    pub fn resolve_systems(&self) -> Result<Vec<ResolvedSystem>, CliError> {
        self.systems
            .iter()
            .enumerate()
            .map(|(i, entry)| resolve_system(entry, i))
            .collect()
    }
}

/// Parses `"p0,p1;p0,p1;..."` into observation levels, one level per group.
pub fn parse_obs(text: &str) -> Result<Vec<ObservationLevel>, String> {
    text.split(';')
        .map(|level| {
            let parts: Vec<&str> = level.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [poor, good] => {
                    let poor: f64 = poor.parse().map_err(|_| format!("bad number '{poor}'"))?;
                    let good: f64 = good.parse().map_err(|_| format!("bad number '{good}'"))?;
                    Ok(ObservationLevel::new(poor, good))
                }
                _ => Err(format!(
                    "observation level '{level}' must be 'P(level|poor),P(level|good)'"
                )),
            }
        })
        .collect()
}

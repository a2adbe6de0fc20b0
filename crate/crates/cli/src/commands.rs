use std::io::Write as _;
use std::path::{Path, PathBuf};

use awi_core::belief::ChannelParams;
use awi_core::index::{approx_whittle, beta_bound, system_beta_bound, Discount, IterationDepth};
use awi_core::oracle::belief_grid;
use awi_core::oracle::suites::{run_suite, Suite, SuiteReport};
use awi_core::policy::PolicySpec;
use awi_core::presets::{reconstructed_obs, SystemPreset, SYSTEMS};
use awi_core::sim::{run_episode, run_experiment, SystemConfig};
use serde::Serialize;

use crate::config::{
    parse_obs, BetaSpec, ExperimentFile, OutputOptions, ResolvedSystem, SystemEntry,
    FORMAT_VERSION,
};
use crate::output::{render_curves, render_index, render_results, write_atomic, CurveRows, ResultsRow};
use crate::{Cli, CliError, Command, IndexArgs, SimulateArgs, ValidateArgs};

pub const DEFAULT_AWI_DEPTH: u32 = 2;

pub fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let run = move || match cli.command {
        Command::Simulate(args) => simulate(args).map(|()| 0),
        Command::Index(args) => index(args).map(|()| 0),
        Command::Validate(args) => validate(args),
    };
    match cli.threads {
        None => run(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(run),
    }
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}

// ── simulate ─────────────────────────────────────────────────────────────

/// Parses a policy name; a bare `awi` takes `iters` as its depth.
pub fn parse_policy(name: &str, iters: Option<u32>) -> Result<PolicySpec, CliError> {
    let lower = name.trim().to_ascii_lowercase();
    let depth = iters.unwrap_or(DEFAULT_AWI_DEPTH);
    let expanded = match lower.as_str() {
        "awi" => format!("awi:{depth}"),
        "awi+random-ties" => format!("awi:{depth}+random-ties"),
        _ => lower,
    };
    expanded
        .parse()
        .map_err(|e: awi_core::policy::PolicyError| CliError::Usage(e.to_string()))
}

fn default_experiment(systems: &[String]) -> ExperimentFile {
    let names: Vec<&str> = if systems.is_empty() {
        SYSTEMS.iter().map(|s| s.name).collect()
    } else {
        systems.iter().map(String::as_str).collect()
    };
    ExperimentFile {
        version: FORMAT_VERSION,
        systems: names.into_iter().map(SystemEntry::preset).collect(),
        policies: (0..=DEFAULT_AWI_DEPTH)
            .map(|n| PolicySpec::awi(IterationDepth::new(n).expect("small depth")))
            .fold(vec![PolicySpec::myopic()], |mut v, p| {
                v.push(p);
                v
            }),
        betas: vec![BetaSpec::PaperBound],
        horizon: awi_core::sim::DEFAULT_HORIZON,
        runs: awi_core::sim::DEFAULT_RUNS,
        active: 1,
        initial_belief: Default::default(),
        output: OutputOptions::default(),
    }
}

struct Job {
    system: ResolvedSystem,
    beta: Discount,
    config: SystemConfig,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let seed = args
        .seed
        .ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    let mut file = match &args.config {
        Some(path) => {
            if !args.system.is_empty() {
                return Err(CliError::Usage(
                    "--system cannot be combined with --config".into(),
                ));
            }
            ExperimentFile::load(path)?
        }
        None => default_experiment(&args.system),
    };
    if let Some(runs) = args.runs {
        file.runs = runs;
    }
    if let Some(horizon) = args.horizon {
        file.horizon = horizon;
    }
    if let Some(active) = args.active {
        file.active = active;
    }
    if !args.beta.is_empty() {
        file.betas = args.beta.clone();
    }
    if !args.policy.is_empty() {
        file.policies = args
            .policy
            .iter()
            .map(|name| parse_policy(name, args.iters))
            .collect::<Result<_, _>>()?;
    } else if let Some(n) = args.iters {
        file.policies = vec![PolicySpec::myopic(), parse_policy("awi", Some(n))?];
    }
    let out = args.out.clone().or(file.output.path.clone());
    let curves_path = args.curves.clone().or(file.output.curves.clone());
    let trace_path = if args.emit_trace {
        let out = out.as_ref().ok_or_else(|| {
            CliError::Usage("--emit-trace needs --out to name the trace file".into())
        })?;
        let mut name = out.clone().into_os_string();
        name.push(".trace.jsonl");
        Some(PathBuf::from(name))
    } else {
        None
    };

    let mut jobs = Vec::new();
    for system in file.resolve_systems()? {
        for &spec in &file.betas {
            let beta = system.beta(spec)?;
            let config = SystemConfig {
                channels: system.channels.clone(),
                active: file.active,
                beta,
                horizon: file.horizon,
                initial_belief: file.initial_belief.clone(),
                runs: file.runs,
                master_seed: seed,
            };
            config
                .validate()
                .map_err(|e| CliError::Config(format!("system '{}': {e}", system.name)))?;
            jobs.push(Job {
                system: system.clone(),
                beta,
                config,
            });
        }
    }

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut traces = String::new();
    for job in &jobs {
        let stats = run_experiment(&job.config, &file.policies)
            .map_err(|e| CliError::Runtime(format!("system '{}': {e}", job.system.name)))?;
        for s in stats {
            rows.push(ResultsRow {
                system: job.system.name.clone(),
                policy: s.policy,
                beta: job.beta.value(),
                runs: job.config.runs,
                horizon: job.config.horizon,
                mean_return: s.mean_return,
                std_err: s.std_err,
                seed,
            });
            curves.push((job.system.name.clone(), s.policy, job.beta.value(), s.mean_curve));
        }
        if trace_path.is_some() {
            for policy in &file.policies {
                let episode = run_episode(&job.config, policy, 0, true)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                let record = TraceRecord {
                    system: &job.system.name,
                    policy: *policy,
                    beta: job.beta.value(),
                    run_id: 0,
                    discounted_return: episode.discounted_return,
                    trace: episode.trace.expect("trace requested"),
                };
                traces.push_str(
                    &serde_json::to_string(&record)
                        .map_err(|e| CliError::Runtime(e.to_string()))?,
                );
                traces.push('\n');
            }
        }
    }

    emit(out.as_deref(), &render_results(&rows))?;
    if let Some(path) = curves_path {
        let views: Vec<CurveRows<'_>> = curves
            .iter()
            .map(|(system, policy, beta, curve)| CurveRows {
                system,
                policy: *policy,
                beta: *beta,
                mean_curve: curve,
            })
            .collect();
        emit(Some(&path), &render_curves(&views))?;
    }
    if let Some(path) = trace_path {
        emit(Some(&path), &traces)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    system: &'a str,
    policy: PolicySpec,
    beta: f64,
    run_id: u32,
    discounted_return: f64,
    trace: awi_core::sim::EpisodeTrace,
}

// ── index ────────────────────────────────────────────────────────────────

fn index_channel(args: &IndexArgs) -> Result<(ChannelParams, Vec<ChannelParams>), CliError> {
    let obs = args
        .obs
        .as_deref()
        .map(parse_obs)
        .transpose()
        .map_err(CliError::Usage)?;
    let invalid = |e: awi_core::belief::ChannelError| CliError::Usage(e.to_string());
    match &args.system {
        Some(name) => {
            let preset = SystemPreset::by_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown system '{name}'")))?;
            let mut channels = match &obs {
                Some(obs) => preset.channels_with_obs(obs).map_err(invalid)?,
                None => preset.channels(),
            };
            if let Some(b) = args.throughput {
                channels = channels
                    .iter()
                    .map(|c| c.with_throughput(b))
                    .collect::<Result<_, _>>()
                    .map_err(invalid)?;
            }
            let position = args.channel.unwrap_or(1);
            if position == 0 || position > channels.len() {
                return Err(CliError::Usage(format!(
                    "--channel must be between 1 and {}",
                    channels.len()
                )));
            }
            Ok((channels[position - 1].clone(), channels))
        }
        None => {
            let (Some(p01), Some(p11)) = (args.p01, args.p11) else {
                return Err(CliError::Usage(
                    "give --system or both --p01 and --p11".into(),
                ));
            };
            let ch = ChannelParams::new(
                p01,
                p11,
                obs.unwrap_or_else(reconstructed_obs),
                args.throughput.unwrap_or(1.0),
            )
            .map_err(invalid)?;
            Ok((ch.clone(), vec![ch]))
        }
    }
}

pub fn index(args: IndexArgs) -> Result<(), CliError> {
    let (ch, system) = index_channel(&args)?;
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let depth = IterationDepth::new(args.iters).map_err(|e| CliError::Usage(e.to_string()))?;
    let beta = match args.beta {
        BetaSpec::PaperBound if args.system.is_some() => {
            system_beta_bound(&system).expect("presets are nonempty")
        }
        BetaSpec::PaperBound => beta_bound(&ch),
        BetaSpec::Fixed(b) => b,
    };
    let beta = Discount::new(beta).map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<_> = belief_grid(args.grid)
        .map(|w| {
            let r = approx_whittle(&ch, beta, w, depth);
            (w.value(), r.value, r.kind)
        })
        .collect();
    emit(args.out.as_deref(), &render_index(&rows))
}

// ── validate ─────────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn validate(args: ValidateArgs) -> Result<i32, CliError> {
    let suites: Vec<Suite> = if args.suite.trim().eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse().map_err(CliError::Usage)?]
    };
    if args.budget == Some(0) {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let reports = suites
        .into_iter()
        .map(|suite| run_suite(suite, args.seed, args.budget))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = ValidationReport {
        passed: reports.iter().all(|r| r.passed),
        suites: reports,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    for suite in &report.suites {
        for p in &suite.properties {
            eprintln!(
                "{} {}/{}: {} checked, {} failed, {} skipped",
                if p.passed { "PASS" } else { "FAIL" },
                suite.suite,
                p.name,
                p.checked,
                p.failures,
                p.skipped
            );
        }
    }
    Ok(if report.passed { 0 } else { 1 })
}

//! CSV rendering and atomic file output.
//!
//! Reals are written in scientific notation with 17 significant digits, so
//! every value parses back to the identical `f64`. Lines end in `\n`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use awi_core::index::IndexKind;
use awi_core::policy::{PolicyKind, PolicySpec, TieBreak};

pub const RESULTS_HEADER: &str =
    "system,policy,n_iter,beta,runs,horizon,mean_return,std_err,seed";
pub const CURVES_HEADER: &str = "system,policy,n_iter,beta,t,mean_partial_return";
pub const INDEX_HEADER: &str = "omega,index_value,kind";

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub system: String,
    pub policy: PolicySpec,
    pub beta: f64,
    pub runs: u32,
    pub horizon: u32,
    pub mean_return: f64,
    pub std_err: f64,
    pub seed: u64,
}

/// Policy name without its depth, and the depth column (blank unless AWI).
fn policy_columns(policy: &PolicySpec) -> (String, String) {
    let (base, depth) = match policy.kind {
        PolicyKind::Myopic => ("myopic", String::new()),
        PolicyKind::Random => ("random", String::new()),
        PolicyKind::Awi(n) => ("awi", n.get().to_string()),
    };
    let name = match policy.tie_break {
        TieBreak::LowestIndex => base.to_string(),
        TieBreak::Random => format!("{base}+random-ties"),
    };
    (name, depth)
}

/// Commas and quotes are not expected in system names; quote defensively.
fn field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn render_results(rows: &[ResultsRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let (policy, n_iter) = policy_columns(&row.policy);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            field(&row.system),
            policy,
            n_iter,
            real(row.beta),
            row.runs,
            row.horizon,
            real(row.mean_return),
            real(row.std_err),
            row.seed
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRows<'a> {
    pub system: &'a str,
    pub policy: PolicySpec,
    pub beta: f64,
    pub mean_curve: &'a [f64],
}

pub fn render_curves(curves: &[CurveRows<'_>]) -> String {
    let mut out = String::new();
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for c in curves {
        let (policy, n_iter) = policy_columns(&c.policy);
        for (t, g) in c.mean_curve.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                field(c.system),
                policy,
                n_iter,
                real(c.beta),
                t + 1,
                real(*g)
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn render_index(rows: &[(f64, f64, IndexKind)]) -> String {
    let mut out = String::new();
    out.push_str(INDEX_HEADER);
    out.push('\n');
    for (omega, value, kind) in rows {
        writeln!(out, "{},{},{}", real(*omega), real(*value), kind.as_str())
            .expect("writing to a String");
    }
    out
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

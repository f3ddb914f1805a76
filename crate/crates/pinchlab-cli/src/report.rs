//! Check records and report emission.  Serialisation is hand-rolled so
//! that key order and number formatting are byte-stable across runs.

use crate::config::{ExperimentConfig, OutputFormat};
use std::time::Duration;

/// One verified inequality or identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    /// Machine-friendly check id.
    pub check: String,
    /// Human-readable statement of the fact being checked.
    pub anchor: String,
    pub pass: bool,
    /// The measured extreme over all trials (worst case for the check).
    pub measured: f64,
    /// The value the measurement is compared against.
    pub bound: f64,
    /// Slack allowed beyond the bound.
    pub tolerance: f64,
}

impl CheckRecord {
    /// A check that passes when `measured <= bound + tolerance`.
    pub fn upper(check: &str, anchor: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            anchor: anchor.into(),
            pass: measured <= bound + tolerance,
            measured,
            bound,
            tolerance,
        }
    }

    /// A check that passes when `measured >= bound - tolerance`.
    pub fn lower(check: &str, anchor: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            anchor: anchor.into(),
            pass: measured >= bound - tolerance,
            measured,
            bound,
            tolerance,
        }
    }
}

/// A full experiment report: the effective configuration, every check
/// record, and the wall-clock time (kept out of the serialised forms so
/// that identical configurations emit identical bytes).
#[derive(Debug, Clone)]
pub struct Report {
    pub config: ExperimentConfig,
    pub checks: Vec<CheckRecord>,
    pub wall_clock: Duration,
}

impl Report {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }
}

/// Decimal with 12 significant digits, the same spelling everywhere.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".into();
    }
    format!("{x:.11e}")
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

pub fn emit(report: &Report, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => emit_json(report),
        OutputFormat::Csv => emit_csv(report),
    }
}

/// JSON with a fixed key order: config, checks, summary.
pub fn emit_json(report: &Report) -> String {
    let cfg = &report.config;
    let mut out = String::new();
    out.push_str("{\n  \"config\": {\n");
    out.push_str(&format!("    \"command\": \"{}\",\n", cfg.command.as_str()));
    out.push_str(&format!("    \"dim\": {},\n", cfg.dim));
    out.push_str(&format!("    \"norm\": \"{}\",\n", json_escape(&cfg.norm_spec)));
    let blocks: Vec<String> = cfg.blocks.iter().map(|b| b.to_string()).collect();
    out.push_str(&format!("    \"blocks\": [{}],\n", blocks.join(", ")));
    out.push_str(&format!("    \"seed\": {},\n", cfg.seed));
    out.push_str(&format!("    \"trials\": {}\n", cfg.trials));
    out.push_str("  },\n  \"checks\": [");
    for (i, c) in report.checks.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("\n    {");
        out.push_str(&format!("\"check\": \"{}\", ", json_escape(&c.check)));
        out.push_str(&format!("\"anchor\": \"{}\", ", json_escape(&c.anchor)));
        out.push_str(&format!("\"status\": \"{}\", ", if c.pass { "pass" } else { "fail" }));
        out.push_str(&format!("\"measured\": {}, ", sig12(c.measured)));
        out.push_str(&format!("\"bound\": {}, ", sig12(c.bound)));
        out.push_str(&format!("\"tolerance\": {}}}", sig12(c.tolerance)));
    }
    if !report.checks.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("],\n  \"summary\": {");
    out.push_str(&format!(
        "\"passed\": {}, \"failed\": {}, \"total\": {}",
        report.passed(),
        report.failed(),
        report.checks.len()
    ));
    out.push_str("}\n}\n");
    out
}

/// CSV with the fixed header `check,anchor,status,measured,bound,tolerance`.
/// Field text never contains commas or quotes, so no quoting is needed.
pub fn emit_csv(report: &Report) -> String {
    let mut out = String::from("check,anchor,status,measured,bound,tolerance\n");
    for c in &report.checks {
        debug_assert!(!c.check.contains(',') && !c.anchor.contains(','));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.check,
            c.anchor,
            if c.pass { "pass" } else { "fail" },
            sig12(c.measured),
            sig12(c.bound),
            sig12(c.tolerance),
        ));
    }
    out
}

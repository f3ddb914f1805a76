//! Experiment configuration: merged from defaults, an optional key=value
//! file, and command line flags (flags win), then validated as a whole.

use pinchlab::norms::SymmetricNorm;
use std::fmt;
use std::path::PathBuf;

/// Which check suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Verify,
    Fiber,
    Section,
    Distance,
    TopologyGap,
    NormalOrbit,
    Lipschitz,
}

impl CommandKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "verify" => Some(Self::Verify),
            "fiber" => Some(Self::Fiber),
            "section" => Some(Self::Section),
            "distance" => Some(Self::Distance),
            "topology-gap" => Some(Self::TopologyGap),
            "normal-orbit" => Some(Self::NormalOrbit),
            "lipschitz" => Some(Self::Lipschitz),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Fiber => "fiber",
            Self::Section => "section",
            Self::Distance => "distance",
            Self::TopologyGap => "topology-gap",
            Self::NormalOrbit => "normal-orbit",
            Self::Lipschitz => "lipschitz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

/// A configuration problem, pointing at the offending field and, when it
/// came from a config file, the 1-based line.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self { field: field.into(), line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error in field `{}` (line {}): {}", self.field, l, self.message),
            None => write!(f, "config error in field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Fully validated experiment parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub dim: usize,
    pub norm: SymmetricNorm,
    /// Canonical spelling of the norm, echoed into reports.
    pub norm_spec: String,
    /// Ranks of the designated blocks; the complement takes the rest.
    pub blocks: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Raw settings before validation; every field is optional so that file
/// and flag layers can be merged with flag precedence.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub command: Option<String>,
    pub dim: Option<usize>,
    pub norm: Option<String>,
    pub blocks: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

impl RawConfig {
    /// Merge `self` over `base`: fields set here win.
    pub fn over(self, base: RawConfig) -> RawConfig {
        RawConfig {
            command: self.command.or(base.command),
            dim: self.dim.or(base.dim),
            norm: self.norm.or(base.norm),
            blocks: self.blocks.or(base.blocks),
            seed: self.seed.or(base.seed),
            trials: self.trials.or(base.trials),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

/// Parses a plain-text `key = value` config file.  Blank lines and lines
/// starting with `#` are skipped; later duplicates win.
pub fn parse_config_file(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            ConfigError::new("<file>", Some(lineno), "expected `key = value`")
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "command" => raw.command = Some(value.to_string()),
            "dim" => {
                raw.dim = Some(value.parse().map_err(|_| {
                    ConfigError::new("dim", Some(lineno), format!("`{value}` is not a positive integer"))
                })?)
            }
            "norm" => raw.norm = Some(value.to_string()),
            "blocks" => raw.blocks = Some(value.to_string()),
            "seed" => {
                raw.seed = Some(value.parse().map_err(|_| {
                    ConfigError::new("seed", Some(lineno), format!("`{value}` is not an unsigned integer"))
                })?)
            }
            "trials" => {
                raw.trials = Some(value.parse().map_err(|_| {
                    ConfigError::new("trials", Some(lineno), format!("`{value}` is not a positive integer"))
                })?)
            }
            "out" => raw.out = Some(PathBuf::from(value)),
            "format" => raw.format = Some(value.to_string()),
            other => {
                return Err(ConfigError::new(
                    other,
                    Some(lineno),
                    "unknown key (expected command, dim, norm, blocks, seed, trials, out, format)",
                ))
            }
        }
    }
    Ok(raw)
}

/// Parses a norm spec: `op | s1 | s2 | sp:<p> | kyfan:<k>`.
pub fn parse_norm(spec: &str) -> Result<(SymmetricNorm, String), ConfigError> {
    let s = spec.trim().to_ascii_lowercase();
    let bad = |msg: String| ConfigError::new("norm", None, msg);
    match s.as_str() {
        "op" => Ok((SymmetricNorm::Operator, "op".into())),
        "s1" => Ok((SymmetricNorm::schatten(1.0).unwrap(), "s1".into())),
        "s2" => Ok((SymmetricNorm::schatten(2.0).unwrap(), "s2".into())),
        _ => {
            if let Some(p) = s.strip_prefix("sp:") {
                let p: f64 = p
                    .parse()
                    .map_err(|_| bad(format!("`{p}` is not a number in sp:<p>")))?;
                let norm = SymmetricNorm::schatten(p)
                    .map_err(|e| bad(format!("invalid Schatten exponent: {e}")))?;
                Ok((norm, format!("sp:{p}")))
            } else if let Some(k) = s.strip_prefix("kyfan:") {
                let k: usize = k
                    .parse()
                    .map_err(|_| bad(format!("`{k}` is not an integer in kyfan:<k>")))?;
                let norm = SymmetricNorm::ky_fan(k)
                    .map_err(|e| bad(format!("invalid Ky Fan order: {e}")))?;
                Ok((norm, format!("kyfan:{k}")))
            } else {
                Err(bad(format!("unknown norm `{s}` (expected op, s1, s2, sp:<p>, kyfan:<k>)")))
            }
        }
    }
}

fn parse_blocks(spec: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let r: usize = part.parse().map_err(|_| {
            ConfigError::new("blocks", None, format!("`{part}` is not a positive integer"))
        })?;
        if r == 0 {
            return Err(ConfigError::new("blocks", None, "block ranks must be at least 1"));
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(ConfigError::new("blocks", None, "at least one block is required"));
    }
    Ok(out)
}

/// Validates the merged raw settings into a runnable configuration.
pub fn validate(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let command_str = raw.command.unwrap_or_else(|| "verify".into());
    let command = CommandKind::parse(&command_str).ok_or_else(|| {
        ConfigError::new(
            "command",
            None,
            format!(
                "unknown command `{command_str}` (expected verify, fiber, section, distance, \
                 topology-gap, normal-orbit, lipschitz)"
            ),
        )
    })?;
    let dim = raw.dim.unwrap_or(6);
    if !(2..=32).contains(&dim) {
        return Err(ConfigError::new("dim", None, format!("dimension {dim} outside the supported range 2..=32")));
    }
    let (norm, norm_spec) = parse_norm(raw.norm.as_deref().unwrap_or("s2"))?;
    let blocks = parse_blocks(raw.blocks.as_deref().unwrap_or("1,2"))?;
    let total: usize = blocks.iter().sum();
    if total > dim {
        return Err(ConfigError::new(
            "blocks",
            None,
            format!("block ranks sum to {total}, which exceeds the dimension {dim}"),
        ));
    }
    let trials = raw.trials.unwrap_or(20);
    if trials < 1 {
        return Err(ConfigError::new("trials", None, "at least one trial is required"));
    }
    if command == CommandKind::TopologyGap && trials > 12 {
        return Err(ConfigError::new(
            "trials",
            None,
            "for topology-gap the trial count is the table depth k_max; at most 12 is supported",
        ));
    }
    let format = match raw.format.as_deref() {
        None => OutputFormat::Json,
        Some(f) => OutputFormat::parse(f).ok_or_else(|| {
            ConfigError::new("format", None, format!("unknown format `{f}` (expected json or csv)"))
        })?,
    };
    Ok(ExperimentConfig {
        command,
        dim,
        norm,
        norm_spec,
        blocks,
        seed: raw.seed.unwrap_or(42),
        trials,
        out: raw.out,
        format,
    })
}

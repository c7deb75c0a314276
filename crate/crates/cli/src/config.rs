//! Run configuration: flags merged over an optional `key=value` file, then
//! validated in full before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mls_collocation::fredholm::StudyConfig;
use mls_collocation::{
    DomainBox, Expr, FredholmProblem, MlsConfig, NodeKind, QuadSpec, WeightKind,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file line {line}: {message}")]
    FileSyntax { line: usize, message: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("--{key}: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("missing required option --{0}")]
    Missing(&'static str),
    #[error("{0}")]
    Problem(String),
}

fn bad(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "mlscol", version, about = "MLS collocation for second-kind Fredholm equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// MLS approximation of --exact sampled at the trial nodes.
    Approx(RawArgs),
    /// Solve at a single level and write the nodal values.
    Solve(RawArgs),
    /// Convergence study over --levels.
    Study(RawArgs),
    /// Stability diagnostics per level.
    Diagnose(RawArgs),
}

impl CommandArgs {
    pub fn split(self) -> (Command, RawArgs) {
        match self {
            CommandArgs::Approx(a) => (Command::Approx, a),
            CommandArgs::Solve(a) => (Command::Solve, a),
            CommandArgs::Study(a) => (Command::Study, a),
            CommandArgs::Diagnose(a) => (Command::Diagnose, a),
        }
    }
}

/// Flag values as given; parsing happens after merging with the config file.
#[derive(Debug, Default, Args)]
pub struct RawArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spatial dimension, 1 or 2.
    #[arg(long)]
    pub dim: Option<String>,
    /// Box bounds: lo,hi (1D) or lo1,hi1,lo2,hi2 (2D).
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Kernel κ in x and s (x1, x2, s1, s2 in 2D).
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    /// Right-hand side f; manufactured from --exact when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub rhs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub exact: Option<String>,
    /// Polynomial degree.
    #[arg(long)]
    pub m: Option<String>,
    /// Nodes per axis, comma separated.
    #[arg(long)]
    pub levels: Option<String>,
    /// gl:<n> or trap:<n> per axis.
    #[arg(long)]
    pub quad: Option<String>,
    /// Support radius factor δ = σ h.
    #[arg(long)]
    pub sigma: Option<String>,
    /// uniform, halton or perturbed.
    #[arg(long)]
    pub nodes: Option<String>,
    /// wendland-c2, quartic or bump.
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Test-to-trial point ratio M/N.
    #[arg(long)]
    pub oversample: Option<String>,
    /// Error grid points per axis.
    #[arg(long)]
    pub dense: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<String>,
    /// csv or jsonl.
    #[arg(long)]
    pub format: Option<String>,
    /// Fill the assemble_ms and solve_ms columns.
    #[arg(long)]
    pub timings: bool,
    /// Skip Φ_N, C₁ and ‖F_N‖ measurements.
    #[arg(long)]
    pub no_diagnostics: bool,
}

const KEYS: &[&str] = &[
    "dim", "domain", "lambda", "kernel", "rhs", "exact", "m", "levels", "quad", "sigma", "nodes",
    "weight", "seed", "oversample", "dense", "out", "format", "timings", "diagnostics",
];

impl RawArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("dim", self.dim.clone()),
            ("domain", self.domain.clone()),
            ("lambda", self.lambda.clone()),
            ("kernel", self.kernel.clone()),
            ("rhs", self.rhs.clone()),
            ("exact", self.exact.clone()),
            ("m", self.m.clone()),
            ("levels", self.levels.clone()),
            ("quad", self.quad.clone()),
            ("sigma", self.sigma.clone()),
            ("nodes", self.nodes.clone()),
            ("weight", self.weight.clone()),
            ("seed", self.seed.clone()),
            ("oversample", self.oversample.clone()),
            ("dense", self.dense.clone()),
            ("out", self.out.clone()),
            ("format", self.format.clone()),
            ("timings", self.timings.then(|| "true".to_string())),
            ("diagnostics", self.no_diagnostics.then(|| "false".to_string())),
        ]
    }

    /// Config file entries overridden by any flag that was given.
    pub fn settings(&self) -> Result<BTreeMap<String, String>, ConfigError> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        for (key, value) in self.flag_pairs() {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        }
        Ok(map)
    }
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

/// One `key=value` per line; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::FileSyntax {
            line: i + 1,
            message: format!("expected key=value, got '{line}'"),
        })?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Approx,
    Solve,
    Study,
    Diagnose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

/// A fully validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainBox,
    /// `None` for `approx`.
    pub problem: Option<FredholmProblem>,
    pub exact: Option<Expr>,
    pub study: StudyConfig,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn parse_num<T: std::str::FromStr>(key: &'static str, text: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    text.trim()
        .parse()
        .map_err(|e: T::Err| bad(key, format!("cannot parse '{text}': {e}")))
}

fn parse_bool(key: &'static str, text: &str) -> Result<bool, ConfigError> {
    match text.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(bad(key, format!("expected true or false, got '{other}'"))),
    }
}

fn parse_expr(key: &'static str, text: &str, dim: usize) -> Result<Expr, ConfigError> {
    Expr::parse(text, dim).map_err(|e| bad(key, e.to_string()))
}

fn parse_domain(text: &str, dim: usize) -> Result<DomainBox, ConfigError> {
    let values = text
        .split(',')
        .map(|t| parse_num::<f64>("domain", t))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != 2 * dim {
        return Err(bad(
            "domain",
            format!("expected {} comma separated bounds for dimension {dim}", 2 * dim),
        ));
    }
    let lower: Vec<f64> = values.iter().step_by(2).copied().collect();
    let upper: Vec<f64> = values.iter().skip(1).step_by(2).copied().collect();
    DomainBox::new(lower, upper).map_err(|e| bad("domain", e.to_string()))
}

fn parse_levels(text: &str) -> Result<Vec<usize>, ConfigError> {
    text.split(',')
        .map(|t| parse_num::<usize>("levels", t))
        .collect()
}

impl RunConfig {
    pub fn from_settings(
        command: Command,
        settings: &BTreeMap<String, String>,
    ) -> Result<Self, ConfigError> {
        let get = |key: &str| settings.get(key).map(String::as_str);

        let dim = match get("dim") {
            Some(t) => parse_num::<usize>("dim", t)?,
            None => 1,
        };
        if !(dim == 1 || dim == 2) {
            return Err(bad("dim", format!("dimension must be 1 or 2, got {dim}")));
        }
        let domain = match get("domain") {
            Some(t) => parse_domain(t, dim)?,
            None => DomainBox::unit(dim).map_err(|e| bad("domain", e.to_string()))?,
        };
        let lambda = match get("lambda") {
            Some(t) => parse_num::<f64>("lambda", t)?,
            None => 1.0,
        };
        if !(lambda != 0.0 && lambda.is_finite()) {
            return Err(bad("lambda", "must be finite and nonzero"));
        }
        let kernel = get("kernel").map(|t| parse_expr("kernel", t, dim)).transpose()?;
        let rhs = get("rhs").map(|t| parse_expr("rhs", t, dim)).transpose()?;
        let exact = get("exact").map(|t| parse_expr("exact", t, dim)).transpose()?;

        let degree = match get("m") {
            Some(t) => parse_num::<u32>("m", t)?,
            None => 1,
        };
        if degree > 8 {
            return Err(bad("m", format!("degree {degree} is above the supported maximum 8")));
        }
        let levels = parse_levels(get("levels").ok_or(ConfigError::Missing("levels"))?)?;
        if levels.is_empty() {
            return Err(bad("levels", "at least one level is required"));
        }
        if let Some(&n) = levels.iter().find(|&&n| n < (degree as usize + 1).max(2)) {
            return Err(bad(
                "levels",
                format!("level {n} has fewer than max(m + 1, 2) = {} nodes per axis", (degree + 1).max(2)),
            ));
        }
        if command == Command::Solve && levels.len() != 1 {
            return Err(bad("levels", "solve takes exactly one level"));
        }
        let quadrature = get("quad")
            .map(|t| t.parse::<QuadSpec>().map_err(|e| bad("quad", e)))
            .transpose()?;
        let sigma = get("sigma").map(|t| parse_num::<f64>("sigma", t)).transpose()?;
        if let Some(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad("sigma", "must be positive"));
            }
        }
        let node_kind = match get("nodes") {
            Some(t) => t.parse::<NodeKind>().map_err(|e| bad("nodes", e))?,
            None => NodeKind::UniformGrid,
        };
        let weight = match get("weight") {
            Some(t) => t.parse::<WeightKind>().map_err(|e| bad("weight", e))?,
            None => WeightKind::default(),
        };
        let seed = match get("seed") {
            Some(t) => parse_num::<u64>("seed", t)?,
            None => 0,
        };
        let oversample = match get("oversample") {
            Some(t) => parse_num::<f64>("oversample", t)?,
            None => 1.0,
        };
        if !(oversample >= 1.0 && oversample.is_finite()) {
            return Err(bad("oversample", "ratio must be at least 1"));
        }
        let dense = get("dense").map(|t| parse_num::<usize>("dense", t)).transpose()?;
        if let Some(d) = dense {
            if d < 2 {
                return Err(bad("dense", "need at least 2 points per axis"));
            }
        }
        let format = match get("format") {
            None | Some("csv") => Format::Csv,
            Some("jsonl") => Format::Jsonl,
            Some(other) => return Err(bad("format", format!("expected csv or jsonl, got '{other}'"))),
        };
        let timings = get("timings").map(|t| parse_bool("timings", t)).transpose()?.unwrap_or(false);
        let diagnostics = get("diagnostics")
            .map(|t| parse_bool("diagnostics", t))
            .transpose()?
            .unwrap_or(true);
        let out = get("out").map(PathBuf::from);

        let problem = match command {
            Command::Approx => {
                if exact.is_none() {
                    return Err(ConfigError::Missing("exact"));
                }
                None
            }
            _ => {
                let kernel = kernel.ok_or(ConfigError::Missing("kernel"))?;
                let built = match rhs {
                    Some(f) => FredholmProblem::new(lambda, kernel, f, exact.clone(), domain.clone()),
                    None => {
                        let u = exact.clone().ok_or(ConfigError::Missing("rhs (or --exact)"))?;
                        FredholmProblem::manufactured(lambda, kernel, u, domain.clone())
                    }
                };
                Some(built.map_err(|e| ConfigError::Problem(e.to_string()))?)
            }
        };

        let mut mls = MlsConfig::new(degree).with_weight(weight);
        if let Some(s) = sigma {
            mls = mls.with_sigma(s);
        }
        let mut study = StudyConfig::new(mls, levels);
        study.quadrature = quadrature;
        study.node_kind = node_kind;
        study.seed = seed;
        study.oversample = oversample;
        study.dense_per_axis = dense;
        study.diagnostics = diagnostics;
        study.timings = timings;

        Ok(Self {
            command,
            domain,
            problem,
            exact,
            study,
            out,
            format,
        })
    }
}

//! Command-line front end: `verify`, `flow`, `relax`, `interface`, `probe`
//! and `identities`.
//!
//! Each subcommand reads an optional JSON config (`--config`), applies the
//! flags given on the command line on top of it, runs, and writes a JSON
//! report plus a CSV file into `--out`. Reports embed the resolved config, its
//! SHA-256 and the crate version, and nothing time dependent, so identical
//! inputs give identical bytes.
//!
//! Exit codes: 0 when every assertion passes, 1 when one fails (or the
//! computation itself fails), 2 for configuration errors.

mod commands;

use crate::error::LabError;
use crate::hamiltonians::HamiltonianSpec;
use crate::solutions::{Domain, FamilySpec, MapFamily};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub use commands::{
    FlowConfig, FlowKind, IdentitiesConfig, InterfaceConfig, OperatorName, ProbeConfig, ProbeKind,
    RelaxConfig, VerifyConfig,
};

pub const THREADS_ENV: &str = "ARONSSON_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "aronsson-lab",
    version,
    about = "Numerical laboratory for L-infinity variational problems of vector maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an operator on analytic jets over a sampled region.
    Verify(commands::VerifyArgs),
    /// Integrate a tangential or horizontal flow with invariant monitors.
    Flow(commands::FlowArgs),
    /// Solve discrete p-Dirichlet problems and sweep p.
    Relax(commands::RelaxArgs),
    /// Locate the rank-jump interface of a separable map.
    Interface(commands::InterfaceArgs),
    /// Lipschitz, absolute-minimality and competitor probes.
    Probe(commands::ProbeArgs),
    /// Check the identities linking the operators on random jets.
    Identities(commands::IdentitiesArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config; command-line flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the report and CSV files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for every sampling step.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Failure modes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_)
            | LabError::InvalidParameter(_)
            | LabError::DimensionMismatch(_)
            | LabError::Json(_)
            | LabError::Io(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// One named check and whether it held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    config: &'a C,
    passed: bool,
    assertions: &'a [Assertion],
    result: &'a R,
}

/// What a command hands back for writing.
pub struct Outcome<C: Serialize, R: Serialize> {
    pub command: &'static str,
    pub config: C,
    pub result: R,
    pub assertions: Vec<Assertion>,
    pub csv: String,
    pub summary: Vec<String>,
}

/// SHA-256 of the compact JSON form of a config.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Reads a JSON config, reporting parse errors as `path:line:column: message`.
pub fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C, CliError> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {}",
            path.display(),
            e.line(),
            e.column(),
            strip_position(&e.to_string())
        ))
    })
}

fn strip_position(msg: &str) -> &str {
    msg.rsplit_once(" at line ").map(|(m, _)| m).unwrap_or(msg)
}

fn write_outcome<C: Serialize, R: Serialize>(
    out: &Path,
    o: &Outcome<C, R>,
) -> Result<bool, CliError> {
    let passed = o.assertions.iter().all(|a| a.passed);
    let env = Envelope {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: o.command,
        config_hash: config_hash(&o.config)?,
        config: &o.config,
        passed,
        assertions: &o.assertions,
        result: &o.result,
    };
    let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let mut json =
        serde_json::to_string_pretty(&env).map_err(|e| CliError::Runtime(e.to_string()))?;
    json.push('\n');
    let report = out.join(format!("{}.json", o.command));
    let csv = out.join(format!("{}.csv", o.command));
    std::fs::write(&report, json).map_err(io)?;
    std::fs::write(&csv, &o.csv).map_err(io)?;
    // a closed stdout (e.g. piped into `head`) must not turn a run into a panic
    let mut stdout = std::io::stdout().lock();
    for line in &o.summary {
        let _ = writeln!(stdout, "{line}");
    }
    for a in &o.assertions {
        let tag = if a.passed { "pass" } else { "FAIL" };
        let _ = writeln!(stdout, "[{tag}] {}: {}", a.name, a.detail);
    }
    let _ = writeln!(stdout, "report: {}", report.display());
    let _ = writeln!(stdout, "fields: {}", csv.display());
    if let Some(first) = o.assertions.iter().find(|a| !a.passed) {
        eprintln!("assertion failed: {}", first.name);
    }
    Ok(passed)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got '{v}'"
        ))
    })?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Verify(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::verify(a)?)
        }
        Command::Flow(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::flow(a)?)
        }
        Command::Relax(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::relax(a)?)
        }
        Command::Interface(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::interface(a)?)
        }
        Command::Probe(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::probe(a)?)
        }
        Command::Identities(a) => {
            let out = a.common.out.clone();
            write_outcome(&out, &commands::identities(a)?)
        }
    }
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

/// `exp-diff` or a JSON object such as `{"family":"scalar-aronsson","signs":[1,1]}`.
pub fn parse_family(s: &str) -> Result<FamilySpec, String> {
    let json = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        format!(
            "{{\"family\":{}}}",
            serde_json::to_string(s).map_err(|e| e.to_string())?
        )
    };
    serde_json::from_str(&json).map_err(|e| e.to_string())
}

/// `euclidean`, `dual-op-norm` or a JSON object.
pub fn parse_hamiltonian(s: &str) -> Result<HamiltonianSpec, String> {
    let json = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        format!(
            "{{\"name\":{}}}",
            serde_json::to_string(s).map_err(|e| e.to_string())?
        )
    };
    serde_json::from_str(&json).map_err(|e| e.to_string())
}

/// Comma-separated reals, e.g. `1,0` or `-0.5,2e-3`.
pub fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

/// Comma-separated reals as a single flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

pub fn parse_floats(s: &str) -> Result<Floats, String> {
    parse_vec(s).map(Floats)
}

/// Region over which a command samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    /// The family's own domain shrunk by `inset`.
    DomainInset {
        inset: f64,
    },
    /// `{|x + y| <= pi - inset, |x - y| <= pi - inset}`.
    RhombusInset {
        inset: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec::DomainInset { inset: 0.05 }
    }
}

impl RegionSpec {
    /// From `--box` values: `rhombus-inset 0.1`, `domain-inset 0.05`,
    /// `box 0,1,2,3` or just `0,1,2,3` (pairs of `lo,hi` per axis). Bounds
    /// starting with a minus sign go in one token: `--box=-1,1,-1,1`.
    pub fn from_words(words: &[String]) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("unrecognised region {words:?}"));
        let num = |s: &String| s.parse::<f64>().map_err(|_| bad());
        let bounds = |s: &String| -> Result<Self, CliError> {
            let v = parse_vec(s).map_err(CliError::Config)?;
            if v.is_empty() || v.len() % 2 != 0 {
                return Err(bad());
            }
            Ok(RegionSpec::Box {
                lo: v.iter().step_by(2).copied().collect(),
                hi: v.iter().skip(1).step_by(2).copied().collect(),
            })
        };
        match words {
            [k, v] if k == "rhombus-inset" => Ok(RegionSpec::RhombusInset { inset: num(v)? }),
            [k, v] if k == "domain-inset" => Ok(RegionSpec::DomainInset { inset: num(v)? }),
            [k, v] if k == "box" => bounds(v),
            [v] => bounds(v),
            _ => Err(bad()),
        }
    }

    pub fn resolve(&self, family: &MapFamily) -> Result<Domain, CliError> {
        let d = match self {
            RegionSpec::DomainInset { inset } => match &family.domain {
                Domain::Box { lo, hi } => Domain::Box {
                    lo: lo.iter().map(|v| v + inset).collect(),
                    hi: hi.iter().map(|v| v - inset).collect(),
                },
                Domain::Rhombus { half_width } => Domain::Rhombus {
                    half_width: half_width - inset,
                },
            },
            RegionSpec::RhombusInset { inset } => Domain::Rhombus {
                half_width: std::f64::consts::PI - inset,
            },
            RegionSpec::Box { lo, hi } => Domain::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        };
        let (lo, hi) = d.bounds();
        if d.dim() != family.source_dim() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(CliError::Config(format!(
                "region {self:?} is empty or does not match the {}-dimensional family",
                family.source_dim()
            )));
        }
        Ok(d)
    }
}

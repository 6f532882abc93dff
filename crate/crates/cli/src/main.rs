//! `beachlab <command> --config experiments/x.toml --out DIR`
//!
//! Writes one CSV per table, one JSON per field artifact and `summary.json`
//! with the named checks. Failures print a JSON object on stderr and, when
//! the output directory is usable, also write it to `error.json`.

use beachlab::lab::{self, ExperimentConfig, Outcome, Tolerances};
use beachlab::sector_analysis::BoundaryConditionPair;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OUT_ENV: &str = "BEACHLAB_OUT";

mod exit {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const MONITOR: u8 = 5;
    pub const CHECK: u8 = 6;
}

#[derive(Parser)]
#[command(name = "beachlab", version, about = "Corner singularities, DtN calculus and free-surface runs on sloping beaches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML); its `command` must match the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; the BEACHLAB_OUT environment variable takes precedence.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// JSON object overriding named pass/fail tolerances.
    #[arg(long, global = true, value_name = "PATH")]
    tolerance_overrides: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Corner exponents: closed form against the pencil determinant; Mellin checks.
    Exponents {
        #[arg(long)]
        bc: Option<BoundaryConditionPair>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Sector problem with a singular function as exact solution.
    Solve,
    /// Mesh refinement study on the Dirichlet-Neumann sector.
    Convergence,
    /// DtN operator structure and spectrum.
    Dtn,
    /// Taylor coefficient: hydrostatics, corner formula, cascade oracle.
    Taylor,
    /// Energy along monitored runs, still water, translation, residual.
    Energy,
    /// Free-surface run with conservation and dispersion checks.
    Simulate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exponents { .. } => "exponents",
            Command::Solve => "solve",
            Command::Convergence => "convergence",
            Command::Dtn => "dtn",
            Command::Taylor => "taylor",
            Command::Energy => "energy",
            Command::Simulate => "simulate",
        }
    }
}

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: exit::CONFIG, kind: "config".into(), message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure { code: exit::IO, kind: "io".into(), message: format!("{}: {e}", path.display()) }
    }
}

impl From<beachlab::Error> for Failure {
    fn from(e: beachlab::Error) -> Self {
        let code = match e {
            beachlab::Error::Config(_) => exit::CONFIG,
            beachlab::Error::Monitor { .. } => exit::MONITOR,
            _ => exit::SOLVER,
        };
        Failure { code, kind: e.kind().into(), message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    if let Command::Exponents { bc, omega, count } = &cli.command {
        if cli.common.config.is_none() {
            let omega = omega.ok_or_else(|| Failure::config("exponents needs --config or --omega"))?;
            let bcs = bc.map_or_else(|| BoundaryConditionPair::ALL.to_vec(), |b| vec![b]);
            return Ok(ExperimentConfig::Exponents { omegas: vec![omega], count: *count, bcs, mellin: None });
        }
    }
    let path = cli.common.config.as_ref().ok_or_else(|| Failure::config(format!("{} needs --config", cli.command.name())))?;
    let cfg: ExperimentConfig = toml::from_str(&read(path)?).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if cfg.command() != cli.command.name() {
        return Err(Failure::config(format!("{} holds a `{}` experiment, not `{}`", path.display(), cfg.command(), cli.command.name())));
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cli.command.name())),
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), Failure> {
    std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_outcome(dir: &Path, o: &Outcome) -> Result<(), Failure> {
    for t in &o.tables {
        write(dir.join(format!("{}.csv", t.name)), &t.to_csv())?;
    }
    for (name, v) in &o.json {
        write(dir.join(format!("{name}.json")), &pretty(v))?;
    }
    write(dir.join("summary.json"), &pretty(&o.summary()))
}

fn execute(cli: &Cli, dir: &Path) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let tol = match &cli.common.tolerance_overrides {
        Some(p) => Tolerances::from_json(&read(p)?)?,
        None => Tolerances::default(),
    };
    cfg.validate()?;
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            return Err(Failure::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::config(e.to_string()))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let outcome = lab::run(&cfg, &tol)?;
    write_outcome(dir, &outcome)?;
    for c in &outcome.checks {
        eprintln!("{} {}: {} (limit {})", if c.passed { "ok  " } else { "FAIL" }, c.name, lab::format_number(c.value), lab::format_number(c.limit));
    }
    if let Some(h) = &outcome.halt {
        return Err(Failure { code: exit::MONITOR, kind: "monitor".into(), message: h.clone() });
    }
    Ok(if outcome.passed() { 0 } else { exit::CHECK })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "usage", "exit_code": exit::CONFIG, "message": e.to_string() }));
            return ExitCode::from(exit::CONFIG);
        }
    };
    let dir = out_dir(&cli);
    match execute(&cli, &dir) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let v = serde_json::json!({ "error": f.kind, "exit_code": f.code, "message": f.message });
            eprintln!("{v}");
            if dir.is_dir() {
                let _ = std::fs::write(dir.join("error.json"), pretty(&v));
            }
            ExitCode::from(f.code)
        }
    }
}

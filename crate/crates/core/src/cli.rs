//! Command-line front end: `verify`, `compare` and `gen`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{replay, verify, EngineError, EngineOptions, ReplayCase, ReplayError, Verdict, VerificationResult};
use crate::gen::{random_program, GenConfig};
use crate::lang::{parse_program, parse_property, ParseError, Program, PropertySpec};
use crate::semantics::BufferMode;

pub const SEED_VAR: &str = "MSGVERIF_SEED";

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "msgverif", version, about = "Verify message-passing programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify a property of a program.
    Verify(RunConfig),
    /// Verify with pruning off, then on, and compare the verdicts.
    Compare(RunConfig),
    /// Write random programs to a directory.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Keyvalue,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    pub program: PathBuf,
    pub property: PathBuf,
    #[arg(long, value_enum, default_value = "on")]
    pub por: Switch,
    #[arg(long, value_enum, default_value = "on")]
    pub prune: Switch,
    #[arg(long, default_value = "infinite")]
    pub buffer: BufferMode,
    #[arg(long, default_value_t = crate::engine::DEFAULT_MAX_PATHS)]
    pub max_paths: usize,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = crate::engine::DEFAULT_TIMEOUT.as_secs())]
    pub timeout: u64,
    /// Print every generated CSP model.
    #[arg(long)]
    pub dump_model: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
    /// Re-execute a replay file instead of verifying.
    #[arg(long, value_name = "FILE")]
    pub replay: Option<PathBuf>,
    /// Where replay files (and, when given, report files) are written.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Overrides the MSGVERIF_SEED environment variable.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub with_input: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("replay file: {0}")]
    ReplayFormat(#[from] serde_json::Error),
    #[error("replay failed: {0}")]
    Replay(#[from] ReplayError),
    #[error("{SEED_VAR} is not an integer: `{0}`")]
    Seed(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

impl RunConfig {
    pub fn options(&self) -> EngineOptions {
        EngineOptions {
            por: self.por.on(),
            prune: self.prune.on(),
            buffer: self.buffer,
            max_paths: self.max_paths,
            timeout: Duration::from_secs(self.timeout),
            dump_models: self.dump_model,
        }
    }

    pub fn load(&self) -> Result<(Program, PropertySpec), CliError> {
        let program = parse_program(&read(&self.program)?)
            .map_err(|source| CliError::Parse { path: self.program.clone(), source })?;
        let prop = parse_property(&read(&self.property)?, &program)
            .map_err(|source| CliError::Parse { path: self.property.clone(), source })?;
        Ok((program, prop))
    }

    fn stem(&self) -> String {
        self.program.file_stem().map_or("program".into(), |s| s.to_string_lossy().into_owned())
    }
}

/// The printed outcome of one verification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub verdict: Verdict,
    pub violation: Option<String>,
    pub paths_explored: usize,
    pub states_pruned: usize,
    pub model_checker_calls: usize,
    pub wall_time_ms: u128,
    pub replay_file: Option<PathBuf>,
    pub counterexample: Option<String>,
    pub note: Option<String>,
}

/// `x=97 | issue(P0#0) ... | P1#0<-P3#0`
pub fn render_case(case: &ReplayCase) -> String {
    let inputs: Vec<String> = case.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let steps: Vec<String> = case.interleaving.iter().map(ToString::to_string).collect();
    let wild: Vec<String> = case.wildcard_matchings.iter().map(|m| format!("{}<-{}", m.recv, m.send)).collect();
    format!("{} | {} | {}", inputs.join(","), steps.join(" "), wild.join(","))
}

impl Report {
    pub fn new(r: &VerificationResult, replay_file: Option<PathBuf>) -> Self {
        Report {
            verdict: r.verdict,
            violation: r.counterexample.as_ref().map(|c| c.violation.to_string()),
            paths_explored: r.stats.paths_explored,
            states_pruned: r.stats.states_pruned,
            model_checker_calls: r.stats.model_checker_calls,
            wall_time_ms: r.stats.wall_time.as_millis(),
            replay_file,
            counterexample: r.counterexample.as_ref().map(render_case),
            note: r.note.clone(),
        }
    }

    /// `key: value` lines in a fixed order; absent values print as `none`.
    pub fn keyvalue(&self) -> String {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "none".into());
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", self.verdict);
        let _ = writeln!(out, "violation: {}", opt(&self.violation));
        let _ = writeln!(out, "paths_explored: {}", self.paths_explored);
        let _ = writeln!(out, "states_pruned: {}", self.states_pruned);
        let _ = writeln!(out, "model_checker_calls: {}", self.model_checker_calls);
        let _ = writeln!(out, "wall_time_ms: {}", self.wall_time_ms);
        let _ = writeln!(out, "replay_file: {}", opt(&self.replay_file.as_ref().map(|p| p.display().to_string())));
        let _ = writeln!(out, "counterexample: {}", opt(&self.counterexample));
        let _ = writeln!(out, "note: {}", opt(&self.note));
        out
    }

    pub fn text(&self) -> String {
        let mut out = match self.verdict {
            Verdict::ViolationFound => format!("VIOLATION ({})\n", self.violation.as_deref().unwrap_or("?")),
            Verdict::PropertyHolds => "property holds\n".to_string(),
            Verdict::Exhausted => "undecided\n".to_string(),
            Verdict::BudgetExceeded => "budget exceeded\n".to_string(),
        };
        let _ = writeln!(
            out,
            "{} paths, {} pruned, {} model checks, {} ms",
            self.paths_explored, self.states_pruned, self.model_checker_calls, self.wall_time_ms
        );
        if let Some(c) = &self.counterexample {
            let _ = writeln!(out, "counterexample: {c}");
        }
        if let Some(p) = &self.replay_file {
            let _ = writeln!(out, "replay file: {}", p.display());
        }
        if let Some(n) = &self.note {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.text(),
            ReportFormat::Keyvalue => self.keyvalue(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::PropertyHolds => EXIT_HOLDS,
            Verdict::ViolationFound => EXIT_VIOLATION,
            Verdict::Exhausted | Verdict::BudgetExceeded => EXIT_ERROR,
        }
    }
}

/// Verifies once and writes the replay file on a violation.
pub fn run_task(cfg: &RunConfig, out: &mut dyn std::io::Write) -> Result<Report, CliError> {
    let (program, prop) = cfg.load()?;
    let result = verify(&program, &prop, &cfg.options())?;
    for m in &result.models {
        let _ = writeln!(out, "{m}");
    }
    let replay_file = match &result.counterexample {
        Some(case) => {
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
            let path = dir.join(format!("{}.replay.json", cfg.stem()));
            write(&path, &serde_json::to_string_pretty(case)?)?;
            Some(path)
        }
        None => None,
    };
    let report = Report::new(&result, replay_file);
    if let Some(dir) = &cfg.output_dir {
        let ext = match cfg.report {
            ReportFormat::Text => "report.txt",
            ReportFormat::Keyvalue => "report.kv",
        };
        write(&dir.join(format!("{}.{ext}", cfg.stem())), &report.render(cfg.report))?;
    }
    Ok(report)
}

/// Re-executes a replay file; exit 1 when the violation is reproduced.
fn run_replay(cfg: &RunConfig, file: &Path, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let (program, _) = cfg.load()?;
    let case: ReplayCase = serde_json::from_str(&read(file)?)?;
    replay(&program, &case)?;
    let _ = writeln!(out, "reproduced: {}", case.violation);
    let _ = writeln!(out, "counterexample: {}", render_case(&case));
    Ok(EXIT_VIOLATION)
}

/// Runs pruning off, then on. Mismatched verdicts exit with 3.
pub fn compare_modes(cfg: &RunConfig, out: &mut dyn std::io::Write) -> Result<(Report, Report), CliError> {
    let off = run_task(&RunConfig { prune: Switch::Off, ..cfg.clone() }, out)?;
    let on = run_task(&RunConfig { prune: Switch::On, ..cfg.clone() }, out)?;
    Ok((off, on))
}

fn run_gen(args: &GenArgs, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    let seed = match args.seed {
        Some(s) => s,
        None => match std::env::var(SEED_VAR) {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Seed(v))?,
            Err(_) => 0,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig { with_input: args.with_input, ..GenConfig::default() };
    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io { path: args.out_dir.clone(), source })?;
    for i in 0..args.count {
        let path = args.out_dir.join(format!("gen_{seed}_{i}.mpl"));
        write(&path, &random_program(&mut rng, &cfg).to_string())?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(EXIT_HOLDS)
}

fn dispatch(cli: &Cli, out: &mut dyn std::io::Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Verify(cfg) => {
            if let Some(file) = &cfg.replay {
                return run_replay(cfg, file, out);
            }
            let report = run_task(cfg, out)?;
            let _ = write!(out, "{}", report.render(cfg.report));
            Ok(report.exit_code())
        }
        Command::Compare(cfg) => {
            let (off, on) = compare_modes(cfg, out)?;
            let _ = writeln!(out, "verdict_prune_off: {}", off.verdict);
            let _ = writeln!(out, "verdict_prune_on: {}", on.verdict);
            let _ = writeln!(out, "paths_prune_off: {}", off.paths_explored);
            let _ = writeln!(out, "paths_prune_on: {}", on.paths_explored);
            if off.verdict != on.verdict {
                let _ = writeln!(out, "mismatch: verdicts differ between modes");
                return Ok(EXIT_MISMATCH);
            }
            Ok(on.exit_code())
        }
        Command::Gen(args) => run_gen(args, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_HOLDS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or configuration error, 2 incomplete task
//! tree, 3 no feasible alternative.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::llm::{run_planning_session, Backend, LiveBackend, LiveConfig, ReplayBackend, SessionError, Transcript};
use crate::model::{validate_tree, Fleet, TaskTree, UtilityModel, UtilityWeights};
use crate::mrta::{decompose, AlternativesFile, Rho};
use crate::render;
use crate::schedule::{build_schedule, verify_schedule, Schedule};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INCOMPLETE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "mrta-planner", version, about = "Hierarchical mission planning for heterogeneous robot fleets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a task tree with an LLM session, then allocate and schedule.
    Plan(PlanArgs),
    /// Compute ranked alternatives for an existing task tree.
    Decompose(DecomposeArgs),
    /// Schedule one alternative from an alternatives file.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Emit {
    Dot,
    Json,
    Txt,
}

#[derive(Debug, Clone, Args)]
pub struct AllocationArgs {
    /// Alternatives kept per node, or "unbounded".
    #[arg(long, default_value_t = Rho::DEFAULT)]
    pub rho: Rho,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

impl AllocationArgs {
    fn model(&self, fleet: &Fleet) -> Result<UtilityModel> {
        Ok(UtilityModel::from_fleet(fleet).with_weights(UtilityWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        })?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub mission: String,
    /// Fleet description (JSON).
    #[arg(long)]
    pub fleet: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Live)]
    pub backend: BackendKind,
    /// Recorded transcript to play back with `--backend replay`.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// JSON file with `endpoint`, `model` and `timeout_seconds`; flags override it.
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub timeout_seconds: Option<u64>,
    #[arg(long, default_value_t = crate::llm::DEFAULT_MAX_TURNS)]
    pub max_turns: usize,
    #[command(flatten)]
    pub allocation: AllocationArgs,
    /// Number of top alternatives to schedule.
    #[arg(long, default_value_t = 2)]
    pub top: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dot,json,txt")]
    pub emit: Vec<Emit>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub fleet: PathBuf,
    #[command(flatten)]
    pub allocation: AllocationArgs,
    #[arg(long, default_value = "alternatives.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub alternatives: PathBuf,
    #[arg(long)]
    pub tree: PathBuf,
    /// 1-based rank of the alternative.
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    /// Schedule JSON path; a `.txt` rendering is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    let mut text = contents.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn live_config(args: &PlanArgs) -> Result<LiveConfig> {
    let mut config = match &args.llm_config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid LLM config {}", path.display()))?
        }
        None => LiveConfig {
            endpoint: String::new(),
            model: String::new(),
            timeout_seconds: 60,
        },
    };
    if let Some(endpoint) = &args.endpoint {
        config.endpoint = endpoint.clone();
    }
    if let Some(model) = &args.model {
        config.model = model.clone();
    }
    if let Some(t) = args.timeout_seconds {
        config.timeout_seconds = t;
    }
    if config.endpoint.is_empty() || config.model.is_empty() {
        bail!("the live backend needs --endpoint and --model (or --llm-config)");
    }
    Ok(config)
}

fn schedule_text(rank: usize, utility: f64, schedule: &Schedule) -> String {
    format!("A{rank} (utility {utility}):\n{}", schedule.to_text())
}

pub fn cmd_plan(args: &PlanArgs) -> Result<u8> {
    let fleet = Fleet::load(&args.fleet)?;
    let model = args.allocation.model(&fleet)?;
    if args.mission.trim().is_empty() {
        bail!("--mission must not be empty");
    }
    let mut backend: Box<dyn Backend> = match args.backend {
        BackendKind::Replay => {
            let path = args.replay.as_ref().ok_or_else(|| anyhow!("--backend replay needs --replay <path>"))?;
            Box::new(ReplayBackend::new(&Transcript::load(path)?))
        }
        BackendKind::Live => Box::new(LiveBackend::new(live_config(args)?)?),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let emit = |e: Emit| args.emit.contains(&e);
    let out = |name: &str| args.out.join(name);

    let session = match run_planning_session(&args.mission, &fleet, backend.as_mut(), args.max_turns) {
        Ok(s) => s,
        Err(SessionError::Backend { source, transcript }) => {
            if emit(Emit::Json) {
                write(&out("transcript.json"), &transcript.to_json())?;
            }
            bail!("planning session failed: {source}");
        }
        Err(other) => return Err(other.into()),
    };
    if emit(Emit::Json) {
        write(&out("transcript.json"), &session.transcript.to_json())?;
        write(&out("tree.json"), &session.tree.to_json())?;
    }
    if emit(Emit::Dot) {
        write(&out("tree.dot"), &render::to_dot(&session.tree))?;
    }
    if emit(Emit::Txt) {
        write(&out("tree.txt"), &render::to_text(&session.tree))?;
    }
    if session.turns_exhausted {
        eprintln!("warning: turn limit of {} reached", args.max_turns);
    }
    if !session.report.complete {
        eprintln!("task tree is incomplete: {}", session.report.summary());
        return Ok(EXIT_INCOMPLETE);
    }
    allocate(&session.tree, &fleet, &model, args.allocation.rho, args.top, &args.out, &args.emit)
}

fn allocate(
    tree: &TaskTree,
    fleet: &Fleet,
    model: &UtilityModel,
    rho: Rho,
    top: usize,
    dir: &Path,
    emit: &[Emit],
) -> Result<u8> {
    let decomposition = decompose(tree, fleet, model, rho)?;
    let file = AlternativesFile::new(tree, rho, &decomposition);
    if emit.contains(&Emit::Json) {
        write(&dir.join("alternatives.json"), &file.to_json())?;
    }
    if decomposition.alternatives.is_empty() {
        eprintln!("no feasible allocation for this fleet");
        return Ok(EXIT_INFEASIBLE);
    }
    for (i, alt) in decomposition.alternatives.iter().take(top).enumerate() {
        let k = i + 1;
        let schedule = build_schedule(alt, tree)?;
        if emit.contains(&Emit::Json) {
            write(&dir.join(format!("schedule_{k}.json")), &schedule.to_json())?;
        }
        let text = schedule_text(k, alt.utility, &schedule);
        if emit.contains(&Emit::Txt) {
            write(&dir.join(format!("schedule_{k}.txt")), &text)?;
        }
        println!("{text}");
    }
    Ok(EXIT_OK)
}

pub fn cmd_decompose(args: &DecomposeArgs) -> Result<u8> {
    let fleet = Fleet::load(&args.fleet)?;
    let model = args.allocation.model(&fleet)?;
    let tree = TaskTree::load(&args.tree)?;
    let report = validate_tree(&tree);
    if !report.complete {
        eprintln!("task tree is incomplete: {}", report.summary());
        return Ok(EXIT_INCOMPLETE);
    }
    let rho = args.allocation.rho;
    let decomposition = decompose(&tree, &fleet, &model, rho)?;
    write(&args.out, &AlternativesFile::new(&tree, rho, &decomposition).to_json())?;
    println!("{} alternative(s) written to {}", decomposition.alternatives.len(), args.out.display());
    if decomposition.alternatives.is_empty() {
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

pub fn cmd_schedule(args: &ScheduleArgs) -> Result<u8> {
    let tree = TaskTree::load(&args.tree)?;
    let text = fs::read_to_string(&args.alternatives)
        .with_context(|| format!("cannot read {}", args.alternatives.display()))?;
    let file = AlternativesFile::from_json(&text)?;
    let alternatives = file.alternatives(&tree);
    if args.index == 0 || args.index > alternatives.len() {
        bail!("index {} is out of range (1..={})", args.index, alternatives.len());
    }
    let alt = &alternatives[args.index - 1];
    let schedule = build_schedule(alt, &tree)?;
    if !verify_schedule(&schedule, &tree, alt) {
        bail!("alternative {} does not match the tree", args.index);
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("schedule_{}.json", args.index)));
    let rendered = schedule_text(args.index, alt.utility, &schedule);
    write(&out, &schedule.to_json())?;
    write(&out.with_extension("txt"), &rendered)?;
    println!("{rendered}");
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Schedule(a) => cmd_schedule(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_ERROR
        }
    }
}

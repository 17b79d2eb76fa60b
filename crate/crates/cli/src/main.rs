//! `introspect`: generate worlds, run tasks and suites, inspect traces.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use introspect_core::baselines::{run_strategy, StrategyKind};
use introspect_core::engine::{EngineConfig, TaskOutcome, TaskResult};
use introspect_core::env::{generate_world, SimEnv, SimWorld, WorldProfile};
use introspect_core::harness::{self, SuiteConfig};
use introspect_core::oracle::{HttpTransport, LiveConfig, LiveOracle, PromptSet};
use introspect_core::trace::{read_jsonl, write_jsonl, Event, TraceEvent};
use introspect_core::types::{ActionBudget, TaskSpec};

#[derive(Parser)]
#[command(name = "introspect", version, about = "Introspective web-agent loop over a simulated web world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and its task set.
    Generate(GenerateArgs),
    /// Run one task and write its trace.
    Run(RunArgs),
    /// Run every task under several strategies and write a report.
    Suite(SuiteArgs),
    /// Summarize a trace file.
    Inspect(InspectArgs),
    /// Check that prompt templates carry exactly their placeholders.
    ValidatePrompts(ValidatePromptsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON world profile; defaults apply to omitted fields.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Inputs {
    #[arg(long, default_value = "out/world.json")]
    world: PathBuf,
    #[arg(long, default_value = "out/tasks.json")]
    tasks: PathBuf,
}

/// Engine and scripted-oracle settings shared by `run` and `suite`.
#[derive(Args)]
struct Knobs {
    /// Suite seed; per-task randomness derives from it and the task id.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remedies per expansion (R).
    #[arg(long = "R", visible_alias = "remedies", default_value_t = 2)]
    remedies: usize,
    #[arg(long, default_value_t = 30)]
    max_actions: u32,
    #[arg(long, default_value_t = 7)]
    max_trials: u32,
    /// Probability of a corrupted first attempt at each solution hop.
    #[arg(long, default_value_t = 0.0)]
    inject_p: f64,
    /// Remedies of a corrupted hop omit the correct action.
    #[arg(long)]
    remedy_excludes_truth: bool,
    /// Sample count for lats_like (default R + 1).
    #[arg(long)]
    k: Option<usize>,
    /// Duplicate-sample probability for lats_like.
    #[arg(long, default_value_t = 0.5)]
    homogeneity: f64,
    /// One action pool shared by every trial of a task.
    #[arg(long)]
    per_task_budget: bool,
    #[arg(long)]
    enable_visited_pruning: bool,
}

impl Knobs {
    fn suite_config(&self) -> Result<SuiteConfig, String> {
        let mut engine = if self.per_task_budget {
            EngineConfig::per_task(self.max_actions, self.max_trials)
        } else {
            EngineConfig {
                budget: ActionBudget {
                    max_actions_per_trial: self.max_actions,
                    max_trials: self.max_trials,
                },
                ..EngineConfig::default()
            }
        };
        engine.remedies = self.remedies;
        engine.enable_visited_pruning = self.enable_visited_pruning;
        engine.validate().map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.inject_p) {
            return Err("--inject-p must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.homogeneity) {
            return Err("--homogeneity must lie in [0, 1]".into());
        }
        if self.k == Some(0) {
            return Err("--k must be at least 1".into());
        }
        Ok(SuiteConfig {
            seed: self.seed,
            engine,
            injection_p: self.inject_p,
            remedy_contains_truth: !self.remedy_excludes_truth,
            homogeneity: self.homogeneity,
            lats_k: self.k,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Scripted,
    Live,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    task_id: String,
    #[arg(long, default_value = "ar")]
    strategy: StrategyKind,
    #[arg(long, value_enum, default_value = "scripted")]
    oracle: OracleKind,
    #[command(flatten)]
    knobs: Knobs,
    /// Where to write the JSONL trace.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Prompt template directory for the live oracle.
    #[arg(long)]
    prompts: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated strategy names.
    #[arg(long, default_value = "ar,plan_act,plan_act_reflexion,lats_like")]
    strategies: String,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value = "suite-out")]
    out_dir: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct InspectArgs {
    trace: PathBuf,
    /// Print every event instead of the summary only.
    #[arg(long)]
    events: bool,
}

#[derive(Args)]
struct ValidatePromptsArgs {
    /// Directory of template files; the built-in set when absent.
    #[arg(long)]
    dir: Option<PathBuf>,
}

/// Exit 2: bad input or configuration.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Suite(a) => cmd_suite(&a),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::ValidatePrompts(a) => cmd_validate_prompts(&a),
    };
    match result {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn load_inputs(inputs: &Inputs) -> Result<(Arc<SimWorld>, Vec<TaskSpec>), Fatal> {
    let world = SimWorld::from_json(&read_file(&inputs.world)?)
        .map_err(|e| Fatal(format!("{}: {e}", inputs.world.display())))?;
    let tasks: Vec<TaskSpec> = serde_json::from_str(&read_file(&inputs.tasks)?)
        .map_err(|e| Fatal(format!("{}: {e}", inputs.tasks.display())))?;
    for t in &tasks {
        t.validate().map_err(|e| Fatal(format!("task {}: {e}", t.task_id)))?;
    }
    Ok((Arc::new(world), tasks))
}

fn cmd_generate(a: &GenerateArgs) -> Result<ExitCode, Fatal> {
    let profile = match &a.profile {
        Some(p) => serde_json::from_str::<WorldProfile>(&read_file(p)?)
            .map_err(|e| Fatal(format!("{}: {e}", p.display())))?,
        None => WorldProfile::default(),
    };
    let (world, tasks) = generate_world(a.seed, &profile)?;
    fs::create_dir_all(&a.out_dir)?;
    fs::write(a.out_dir.join("world.json"), world.to_json() + "\n")?;
    fs::write(
        a.out_dir.join("tasks.json"),
        serde_json::to_string_pretty(&tasks)? + "\n",
    )?;

    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &tasks {
        *hist.entry(t.ground_truth.depth).or_default() += 1;
    }
    let info = tasks.iter().filter(|t| t.is_information_seeking()).count();
    println!(
        "pages {}  tasks {} ({} information, {} navigation)",
        world.pages.len(),
        tasks.len(),
        info,
        tasks.len() - info
    );
    println!("depth histogram:");
    let widest = hist.values().copied().max().unwrap_or(1);
    for (d, n) in &hist {
        let bar = "#".repeat((n * 40).div_ceil(widest));
        println!("  {d:>2} {n:>5} {bar}");
    }
    println!("wrote {}", a.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn print_result(result: &TaskResult, kind: StrategyKind) {
    let outcome = match result.outcome() {
        TaskOutcome::Success => "success",
        TaskOutcome::Failure => "failure",
        TaskOutcome::Aborted => "aborted",
    };
    println!("task {}  strategy {}  outcome {outcome}", result.task_id, kind.name());
    let actions: Vec<String> = result.trials.iter().map(|t| t.actions_used.to_string()).collect();
    println!(
        "trials {}  actions per trial [{}]  plan revisions {}",
        result.trials.len(),
        actions.join(", "),
        result.plan_revisions
    );
    if let Some(a) = result.answer() {
        println!("answer {a}");
    }
    if let Some(u) = result.final_url() {
        println!("final url {u}");
    }
    if let Some(why) = &result.aborted {
        println!("aborted: {why}");
    }
}

fn cmd_run(a: &RunArgs) -> Result<ExitCode, Fatal> {
    let cfg = a.knobs.suite_config().map_err(Fatal)?;
    // Configuration problems surface before any input is touched.
    let live = match a.oracle {
        OracleKind::Live => {
            let mut lc = LiveConfig::from_env()?;
            lc.summarize_threshold = cfg.engine.summarize_threshold;
            let prompts = match &a.prompts {
                Some(dir) => PromptSet::load_dir(dir)?,
                None => PromptSet::builtin(),
            };
            Some((lc, prompts))
        }
        OracleKind::Scripted => None,
    };
    let (world, tasks) = load_inputs(&a.inputs)?;
    let task = tasks
        .iter()
        .find(|t| t.task_id == a.task_id)
        .ok_or_else(|| Fatal(format!("no task with id {}", a.task_id)))?;

    let result = match live {
        None => harness::run_scripted(&world, task, a.strategy, &cfg),
        Some((mut lc, prompts)) => {
            let root = world.start_url.rsplit_once('/').map_or(world.start_url.as_str(), |(h, _)| h);
            lc.webarena_root = root.to_string();
            let transport = Arc::new(HttpTransport::new(&lc));
            let mut oracle = LiveOracle::new(transport, lc).with_prompts(prompts);
            let mut env = SimEnv::new(world.clone());
            let mut r = run_strategy(a.strategy, task, &mut env, &mut oracle, &cfg.engine, cfg.lats_k);
            r.success = harness::check_success(task, &r);
            r
        }
    };
    print_result(&result, a.strategy);
    if let Some(path) = &a.trace_out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let events: Vec<TraceEvent> = result.events().cloned().collect();
        write_jsonl(io::BufWriter::new(fs::File::create(path)?), &events)?;
    }
    Ok(match result.outcome() {
        TaskOutcome::Success => ExitCode::SUCCESS,
        TaskOutcome::Failure => ExitCode::from(1),
        TaskOutcome::Aborted => ExitCode::from(2),
    })
}

fn parse_strategies(list: &str) -> Result<Vec<StrategyKind>, Fatal> {
    let kinds = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<StrategyKind>().map_err(Fatal))
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() {
        return Err(Fatal("strategy list is empty".into()));
    }
    Ok(kinds)
}

fn cmd_suite(a: &SuiteArgs) -> Result<ExitCode, Fatal> {
    let cfg = a.knobs.suite_config().map_err(Fatal)?;
    let kinds = parse_strategies(&a.strategies)?;
    if a.parallelism == 0 {
        return Err(Fatal("--parallelism must be at least 1".into()));
    }
    let (world, tasks) = load_inputs(&a.inputs)?;
    let run = harness::run_suite(world, &tasks, &kinds, &cfg, a.parallelism)?;
    harness::write_outputs(&run, &a.out_dir)?;
    print!("{}", run.report.to_table());
    println!("wrote {}", a.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(a: &InspectArgs) -> Result<ExitCode, Fatal> {
    let file = fs::File::open(&a.trace).map_err(|e| Fatal(format!("{}: {e}", a.trace.display())))?;
    let events = read_jsonl(BufReader::new(file))?;
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut trials: BTreeMap<u32, usize> = BTreeMap::new();
    for ev in &events {
        *counts.entry(ev.event.kind()).or_default() += 1;
        if let Event::ActionExecuted(e) = &ev.event {
            *trials.entry(e.trial).or_default() += 1;
        }
        if a.events {
            println!("{:>5} {}", ev.seq, describe(&ev.event));
        }
    }
    println!("events {}", events.len());
    for (k, n) in &counts {
        println!("  {k:<18} {n}");
    }
    for (t, n) in &trials {
        println!("trial {t}: {n} actions executed");
    }
    let answer = events.iter().rev().find_map(|e| match &e.event {
        Event::AnswerDelivered(a) => Some(a.answer.as_str()),
        _ => None,
    });
    let completed = counts.contains_key("task_completed");
    println!(
        "task completed: {}{}",
        if completed { "yes" } else { "no" },
        answer.map(|a| format!("  answer: {a}")).unwrap_or_default()
    );
    Ok(ExitCode::SUCCESS)
}

fn describe(ev: &Event) -> String {
    match ev {
        Event::PlanCreated(e) => format!("plan r{} with {} subtasks", e.revision, e.subtasks.len()),
        Event::ActionExecuted(e) => format!(
            "t{} {:?} frame {} {} -> {}",
            e.trial, e.purpose, e.frame, e.action, e.post_url
        ),
        Event::RemedyPushed(e) => format!("remedy rank {} for frame {}: {}", e.rank, e.parent, e.action),
        Event::Backtracked(e) => format!(
            "backtrack frame {} to {}{}",
            e.frame,
            e.to_url,
            match (e.remapped_from, e.remapped_to) {
                (Some(f), Some(t)) => format!(" (element {f} -> {t})"),
                _ => String::new(),
            }
        ),
        Event::AlignmentChecked(e) => format!("frame {} aligned={}", e.frame, e.aligned),
        Event::SubtaskCompleted(e) => format!("subtask {} completed{}", e.index, if e.skipped { " (skipped)" } else { "" }),
        Event::TaskCompleted(e) => format!("task completed at {}", e.url),
        Event::PlanRevised(e) => format!("plan revised to r{}", e.revision),
        Event::BudgetExhausted(e) => format!("budget exhausted after {} actions", e.actions_used),
        Event::AnswerDelivered(e) => format!("answer {}", e.answer),
        Event::FrameFailed(e) => format!("frame {} failed: {}", e.frame, e.reason),
    }
}

fn cmd_validate_prompts(a: &ValidatePromptsArgs) -> Result<ExitCode, Fatal> {
    let set = match &a.dir {
        Some(d) => PromptSet::load_dir(d)?,
        None => PromptSet::builtin(),
    };
    set.validate()?;
    println!("prompt templates ok");
    Ok(ExitCode::SUCCESS)
}

//! Suite runner, scoring and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::StrategyKind;
use crate::engine::{run_task, EngineConfig, TaskResult};
use crate::env::{SimEnv, SimWorld};
use crate::oracle::{ErrorInjection, ScriptedOracle};
use crate::seed::derive_seed;
use crate::trace::write_jsonl;
use crate::types::{normalize_text, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub engine: EngineConfig,
    /// Chance of a corrupted first attempt at each solution hop.
    pub injection_p: f64,
    pub remedy_contains_truth: bool,
    /// Duplicate-sample probability of the LATS-like strategy.
    pub homogeneity: f64,
    /// LATS-like sample count; R + 1 when absent.
    pub lats_k: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            engine: EngineConfig::default(),
            injection_p: 0.0,
            remedy_contains_truth: true,
            homogeneity: 0.5,
            lats_k: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no tasks to run")]
    NoTasks,
    #[error("no strategies selected")]
    NoStrategies,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One strategy's row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n_tasks: usize,
    /// Fraction of tasks solved within their first `e` trials, for e = 1, 2, ...
    pub success_rate_by_episode: Vec<f64>,
    pub mean_actions_first_trial: f64,
    pub mean_actions_last_trial: f64,
    pub mean_plan_revisions: f64,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub n_tasks: usize,
    pub max_trials: u32,
    pub injection_p: f64,
    pub per_strategy: BTreeMap<StrategyKind, MetricsRow>,
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: SuiteReport,
    pub results: BTreeMap<StrategyKind, Vec<TaskResult>>,
}

/// Seed for everything random about one task, shared by all strategies.
pub fn task_seed(suite_seed: u64, task_id: &str) -> u64 {
    derive_seed(suite_seed, &["task", task_id])
}

fn strip_answer(s: &str) -> &str {
    let s = s.trim();
    match s.strip_prefix("###Answer") {
        Some(rest) => rest.trim_start_matches(':').trim(),
        None => s,
    }
}

/// Scores a finished task: navigation tasks by final URL against the goal's
/// equivalent URLs, information tasks by normalized answer text.
pub fn check_success(task: &TaskSpec, result: &TaskResult) -> bool {
    if result.aborted.is_some() {
        return false;
    }
    match &task.answer_key {
        Some(key) => result
            .answer()
            .is_some_and(|a| normalize_text(strip_answer(a)) == normalize_text(key)),
        None => result
            .final_url()
            .is_some_and(|u| task.ground_truth.equivalent_urls.iter().any(|e| e == u)),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregates results of one strategy. A successful task counts as solved
/// in episode `trials.len()` and in every later one.
pub fn compute_metrics(results: &[TaskResult], max_trials: u32) -> MetricsRow {
    let n = results.len();
    let episodes = max_trials as usize;
    let mut solved_by = vec![0usize; episodes];
    for r in results.iter().filter(|r| r.success) {
        let first = r.trials.len().max(1);
        for slot in solved_by.iter_mut().skip(first - 1) {
            *slot += 1;
        }
    }
    MetricsRow {
        n_tasks: n,
        success_rate_by_episode: solved_by
            .into_iter()
            .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect(),
        mean_actions_first_trial: mean(
            results
                .iter()
                .map(|r| r.trials.first().map_or(0, |t| t.actions_used) as f64),
        ),
        mean_actions_last_trial: mean(
            results
                .iter()
                .map(|r| r.trials.last().map_or(0, |t| t.actions_used) as f64),
        ),
        mean_plan_revisions: mean(results.iter().map(|r| r.plan_revisions as f64)),
        aborted: results.iter().filter(|r| r.aborted.is_some()).count(),
    }
}

/// Runs one task with the scripted oracle under a strategy.
pub fn run_scripted(
    world: &Arc<SimWorld>,
    task: &TaskSpec,
    kind: StrategyKind,
    cfg: &SuiteConfig,
) -> TaskResult {
    let injection = ErrorInjection {
        wrong_first_action_prob: cfg.injection_p,
        remedy_contains_truth: cfg.remedy_contains_truth,
        rng_seed: task_seed(cfg.seed, &task.task_id),
    };
    let mut oracle = ScriptedOracle::new(world.clone(), injection).with_homogeneity(cfg.homogeneity);
    let mut env = SimEnv::new(world.clone());
    let engine = kind.configure(&cfg.engine, cfg.lats_k);
    let mut result = run_task(task, &mut env, &mut oracle, &engine);
    result.success = check_success(task, &result);
    result
}

/// Runs every (task, strategy) pair on up to `parallelism` threads. Output
/// does not depend on scheduling.
pub fn run_suite(
    world: Arc<SimWorld>,
    tasks: &[TaskSpec],
    strategies: &[StrategyKind],
    cfg: &SuiteConfig,
    parallelism: usize,
) -> Result<SuiteRun, HarnessError> {
    if tasks.is_empty() {
        return Err(HarnessError::NoTasks);
    }
    if strategies.is_empty() {
        return Err(HarnessError::NoStrategies);
    }
    cfg.engine
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    ErrorInjection {
        wrong_first_action_prob: cfg.injection_p,
        ..ErrorInjection::default()
    }
    .validate()
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    if !(0.0..=1.0).contains(&cfg.homogeneity) {
        return Err(HarnessError::Config("homogeneity must lie in [0, 1]".into()));
    }

    let mut kinds: Vec<StrategyKind> = strategies.to_vec();
    kinds.sort();
    kinds.dedup();
    let jobs: Vec<(StrategyKind, &TaskSpec)> = kinds
        .iter()
        .flat_map(|&k| tasks.iter().map(move |t| (k, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outputs: Vec<TaskResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(k, t)| run_scripted(&world, t, *k, cfg))
            .collect()
    });

    let mut results: BTreeMap<StrategyKind, Vec<TaskResult>> = BTreeMap::new();
    for ((k, _), r) in jobs.iter().zip(outputs) {
        results.entry(*k).or_default().push(r);
    }
    let per_strategy = results
        .iter()
        .map(|(&k, rs)| {
            let trials = k.configure(&cfg.engine, cfg.lats_k).budget.max_trials;
            (k, compute_metrics(rs, trials.max(cfg.engine.budget.max_trials)))
        })
        .collect();
    Ok(SuiteRun {
        report: SuiteReport {
            seed: cfg.seed,
            n_tasks: tasks.len(),
            max_trials: cfg.engine.budget.max_trials,
            injection_p: cfg.injection_p,
            per_strategy,
        },
        results,
    })
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, one row per strategy.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "seed {}  tasks {}  injection_p {:.2}",
            self.seed, self.n_tasks, self.injection_p
        );
        let mut header = format!("{:<20}", "strategy");
        for e in 1..=self.max_trials {
            header.push_str(&format!(" {:>6}", format!("ep{e}")));
        }
        header.push_str(&format!(" {:>9} {:>9} {:>9}", "act_first", "act_last", "revisions"));
        let _ = writeln!(out, "{header}");
        for (k, row) in &self.per_strategy {
            let mut line = format!("{:<20}", k.name());
            for rate in &row.success_rate_by_episode {
                line.push_str(&format!(" {rate:>6.3}"));
            }
            line.push_str(&format!(
                " {:>9.2} {:>9.2} {:>9.2}",
                row.mean_actions_first_trial, row.mean_actions_last_trial, row.mean_plan_revisions
            ));
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Writes `report.json`, `report.txt` and `traces/<strategy>/trace-<task_id>.jsonl`.
pub fn write_outputs(run: &SuiteRun, out_dir: &Path) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.json"), run.report.to_json())?;
    fs::write(out_dir.join("report.txt"), run.report.to_table())?;
    for (kind, results) in &run.results {
        let dir = out_dir.join("traces").join(kind.name());
        fs::create_dir_all(&dir)?;
        for r in results {
            let events: Vec<_> = r.events().cloned().collect();
            let file = fs::File::create(dir.join(format!("trace-{}.jsonl", r.task_id)))?;
            write_jsonl(io::BufWriter::new(file), &events)?;
        }
    }
    Ok(())
}

//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always show in `cargo test` output.

#[path = "../common/mod.rs"]
mod common;
mod chaos;
mod dfs;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use introspect_core::baselines::StrategyKind;
use introspect_core::engine::{run_task, BudgetScope, EngineConfig, Expansion, TaskResult};
use introspect_core::env::{generate_world, Environment, PageRow, SimEnv, SimWorld, WorldProfile};
use introspect_core::harness::{run_suite, write_outputs, SuiteConfig, SuiteRun};
use introspect_core::oracle::{ErrorInjection, Oracle, OracleContext, ScriptedOracle};
use introspect_core::seed::derive_seed;
use introspect_core::trace::{ActionPurpose, Event};
use introspect_core::types::{ActionBudget, FrameOrigin, Plan, TaskSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; this target has a
    // single logical test, so only listing needs special handling.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let suite_started = Instant::now();
    let suite = Lazy::default();
    let criteria: Vec<(u32, &str, Box<dyn Fn(&Lazy) -> Verdict>)> = vec![
        (1, "dfs-equivalence", Box::new(|_| c1_dfs_equivalence())),
        (2, "stack-priority", Box::new(c2_stack_priority)),
        (3, "budget-and-early-stop", Box::new(|_| c3_budget_fuzz())),
        (4, "backtrack-remap", Box::new(|_| c4_remap())),
        (5, "efficiency-direction", Box::new(c5_efficiency)),
        (6, "prompt-fidelity", Box::new(|_| c6_prompts())),
        (7, "determinism", Box::new(c7_determinism)),
        (8, "depth-histogram", Box::new(|_| c8_depth_histogram())),
    ];
    let mut failed = 0;
    for (n, name, check) in &criteria {
        let t = Instant::now();
        let v = check(&suite);
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {n} {} {name}: {} [{:.2}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.2}s",
        criteria.len() - failed,
        criteria.len(),
        suite_started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

/// The 200-task suite shared by criteria 2, 5 and 7, built on first use.
#[derive(Default)]
struct Lazy {
    run: std::cell::OnceCell<(SuiteRun, f64)>,
}

const SUITE_WORLD_SEED: u64 = 1;
const SUITE_SEED: u64 = 7;
const SUITE_P: f64 = 0.3;

fn suite_config() -> SuiteConfig {
    SuiteConfig {
        seed: SUITE_SEED,
        injection_p: SUITE_P,
        ..SuiteConfig::default()
    }
}

fn suite_inputs() -> (Arc<SimWorld>, Vec<TaskSpec>) {
    let (world, tasks) = generate_world(SUITE_WORLD_SEED, &WorldProfile::default()).expect("default profile generates");
    (Arc::new(world), tasks)
}

impl Lazy {
    fn get(&self) -> &(SuiteRun, f64) {
        self.run.get_or_init(|| {
            let (world, tasks) = suite_inputs();
            let t = Instant::now();
            let run = run_suite(world, &tasks, &StrategyKind::ALL, &suite_config(), 8).expect("suite runs");
            (run, t.elapsed().as_secs_f64())
        })
    }
}

// ---- 1 ----

fn dfs_profile() -> WorldProfile {
    WorldProfile {
        tasks: 1,
        max_pages: Some(50),
        branching: [2, 4],
        depth_weights: (4..=9).map(|d| (d, 1.0)).collect(),
        id_permute_on_revisit: true,
        ..WorldProfile::default()
    }
}

fn c1_dfs_equivalence() -> Verdict {
    let started = Instant::now();
    let mut runs = 0;
    let mut mismatches = Vec::new();
    let mut successes = 0;
    let mut backtracks = 0;
    for seed in 0..50u64 {
        let (world, tasks) = generate_world(1000 + seed, &dfs_profile()).expect("dfs world generates");
        if world.pages.len() > 50 {
            mismatches.push(format!("world {seed} has {} pages", world.pages.len()));
            continue;
        }
        let world = Arc::new(world);
        let task = &tasks[0];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The third run withholds the solution from corrupted hops' remedies,
        // so every aligned sibling subtree gets explored to exhaustion.
        for (limit, with_truth) in [(30, true), (rng.gen_range(4..=16), true), (30, false)] {
            runs += 1;
            let inj = ErrorInjection {
                wrong_first_action_prob: 0.5,
                remedy_contains_truth: with_truth,
                rng_seed: derive_seed(seed, &["dfs"]),
            };
            let cfg = EngineConfig {
                remedies: 3,
                budget: ActionBudget {
                    max_actions_per_trial: limit,
                    max_trials: 1,
                },
                enable_visited_pruning: false,
                ..EngineConfig::default()
            };
            let mut oracle = ScriptedOracle::new(world.clone(), inj);
            let mut env = SimEnv::new(world.clone());
            let result = run_task(task, &mut env, &mut oracle, &cfg);
            let observed: Vec<dfs::Visit> = common::executed(&result.trials[0].trace)
                .iter()
                .map(|a| {
                    let purpose = match a.purpose {
                        ActionPurpose::Frame => dfs::Purpose::Frame,
                        ActionPurpose::Backtrack => dfs::Purpose::Backtrack,
                    };
                    (purpose, world.canonical(&a.post_url).unwrap().to_string())
                })
                .collect();
            let predicted = dfs::predict(&world, task, inj, 3, limit);
            let same_multiset = {
                let count = |v: &[dfs::Visit]| {
                    let mut m: BTreeMap<String, usize> = BTreeMap::new();
                    for (_, u) in v {
                        *m.entry(u.clone()).or_default() += 1;
                    }
                    m
                };
                count(&observed) == count(&predicted.visits)
            };
            backtracks += observed.iter().filter(|(p, _)| *p == dfs::Purpose::Backtrack).count();
            if predicted.success {
                successes += 1;
            }
            if !same_multiset
                || observed != predicted.visits
                || result.success != predicted.success
                || result.trials[0].actions_used != predicted.used
            {
                mismatches.push(format!(
                    "world {seed} limit {limit} truth {with_truth}: engine {}/{} actions, dfs {}/{} actions",
                    result.success,
                    result.trials[0].actions_used,
                    predicted.success,
                    predicted.used
                ));
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && elapsed < 5.0;
    verdict(
        pass,
        format!(
            "{}/{runs} runs identical over 50 worlds ({successes} reach the goal within budget, {backtracks} backtrack navigations), {elapsed:.2}s < 5s{}",
            runs - mismatches.len(),
            mismatches.first().map(|m| format!("; first mismatch: {m}")).unwrap_or_default()
        ),
    )
}

// ---- 2 ----

/// Checks that, per expansion, the first attempt runs before any remedy and
/// remedies run in rank order. Returns (expansions checked, violations).
fn stack_priority(results: &[TaskResult]) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for r in results {
        for trial in &r.trials {
            let mut with_remedies: BTreeSet<u64> = BTreeSet::new();
            let mut order: BTreeMap<u64, Vec<FrameOrigin>> = BTreeMap::new();
            for ev in &trial.trace {
                match &ev.event {
                    Event::RemedyPushed(p) => {
                        with_remedies.insert(p.parent);
                    }
                    Event::ActionExecuted(a) => {
                        if let Some(p) = a.parent {
                            let seen = order.entry(p).or_default();
                            if seen.last() != Some(&a.origin) {
                                seen.push(a.origin);
                            }
                        }
                    }
                    Event::FrameFailed(f) => {
                        if let Some(p) = f.parent {
                            let seen = order.entry(p).or_default();
                            if seen.last() != Some(&f.origin) {
                                seen.push(f.origin);
                            }
                        }
                    }
                    _ => {}
                }
            }
            for parent in &with_remedies {
                let Some(seq) = order.get(parent) else { continue };
                checked += 1;
                let ranks: Vec<u32> = seq
                    .iter()
                    .map(|o| match o {
                        FrameOrigin::FirstAttempt => 0,
                        FrameOrigin::Remedy(r) => *r,
                    })
                    .collect();
                let ascending = ranks.windows(2).all(|w| w[0] < w[1]);
                if ranks.first() != Some(&0) || !ascending {
                    bad.push(format!("{} trial {} parent {parent}: {ranks:?}", r.task_id, trial.trial));
                }
            }
        }
    }
    (checked, bad)
}

fn c2_stack_priority(lazy: &Lazy) -> Verdict {
    let (run, _) = lazy.get();
    let mut checked = 0;
    let mut bad = Vec::new();
    for results in run.results.values() {
        let (c, b) = stack_priority(results);
        checked += c;
        bad.extend(b);
    }
    verdict(
        bad.is_empty() && checked >= 1000,
        format!(
            "{checked} expansions with remedies checked (>= 1000), {} out of order{}",
            bad.len(),
            bad.first().map(|b| format!("; e.g. {b}")).unwrap_or_default()
        ),
    )
}

// ---- 3 ----

fn random_config(rng: &mut ChaCha8Rng) -> EngineConfig {
    let max_actions = rng.gen_range(1..=40);
    let max_trials = rng.gen_range(1..=4);
    EngineConfig {
        remedies: rng.gen_range(0..=8),
        budget: ActionBudget {
            max_actions_per_trial: max_actions,
            max_trials,
        },
        budget_scope: if rng.gen_bool(0.3) {
            BudgetScope::PerTask
        } else {
            BudgetScope::PerTrial
        },
        enable_visited_pruning: rng.gen_bool(0.3),
        alignment_gates_expansion: rng.gen_bool(0.8),
        budget_backtracking: rng.gen_bool(0.8),
        expansion: if rng.gen_bool(0.25) {
            Expansion::Sampled {
                k: rng.gen_range(1..=5),
            }
        } else {
            Expansion::Reflective
        },
        summarize_threshold: rng.gen_range(50..=6000),
    }
}

fn budget_violations(cfg: &EngineConfig, r: &TaskResult) -> Vec<String> {
    let mut bad = Vec::new();
    let max = cfg.budget.max_actions_per_trial as usize;
    let mut task_total = 0;
    let mut expected_seq = 0;
    for (ti, trial) in r.trials.iter().enumerate() {
        let mut executed = 0;
        let mut budgeted = 0;
        let mut completed_at = None;
        for (k, ev) in trial.trace.iter().enumerate() {
            if ev.seq != expected_seq {
                bad.push(format!("seq gap at {}", ev.seq));
            }
            expected_seq = ev.seq + 1;
            match &ev.event {
                Event::ActionExecuted(a) => {
                    executed += 1;
                    if a.purpose == ActionPurpose::Frame || cfg.budget_backtracking {
                        budgeted += 1;
                    }
                    if let Some(c) = completed_at {
                        bad.push(format!("action at event {k} after task_completed at {c}"));
                    }
                }
                Event::TaskCompleted(_) => completed_at = Some(k),
                _ => {}
            }
        }
        if cfg.budget_backtracking && executed > max {
            bad.push(format!("trial {ti}: {executed} actions > {max}"));
        }
        if budgeted > max {
            bad.push(format!("trial {ti}: {budgeted} budgeted actions > {max}"));
        }
        if budgeted != trial.actions_used as usize {
            bad.push(format!("trial {ti}: counted {budgeted}, reported {}", trial.actions_used));
        }
        if trial.success && ti + 1 != r.trials.len() {
            bad.push(format!("trial {ti} succeeded but more trials followed"));
        }
        task_total += budgeted;
    }
    if cfg.budget_scope == BudgetScope::PerTask && task_total > max {
        bad.push(format!("task total {task_total} > {max}"));
    }
    if r.trials.len() > cfg.budget.max_trials as usize {
        bad.push(format!("{} trials > {}", r.trials.len(), cfg.budget.max_trials));
    }
    bad
}

fn c3_budget_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    let mut actions = 0usize;
    let mut completions = 0usize;
    for case in 0..500u64 {
        let profile = WorldProfile {
            tasks: 3,
            branching: [rng.gen_range(1..=3), rng.gen_range(3..=5)],
            ..WorldProfile::default()
        };
        let (world, tasks) = generate_world(case, &profile).expect("fuzz world generates");
        let world = Arc::new(world);
        let task = &tasks[rng.gen_range(0..tasks.len())];
        let cfg = random_config(&mut rng);
        let mut env = SimEnv::new(world.clone());
        let result = if case % 2 == 0 {
            let mut oracle = chaos::Chaos {
                rng: ChaCha8Rng::seed_from_u64(case),
                world: world.clone(),
            };
            run_task(task, &mut env, &mut oracle, &cfg)
        } else {
            let inj = ErrorInjection {
                wrong_first_action_prob: rng.gen_range(0.0..=1.0),
                remedy_contains_truth: rng.gen_bool(0.7),
                rng_seed: case,
            };
            let mut oracle = ScriptedOracle::new(world.clone(), inj).with_homogeneity(rng.gen_range(0.0..=1.0));
            run_task(task, &mut env, &mut oracle, &cfg)
        };
        actions += result.events().filter(|e| e.event.kind() == "action_executed").count();
        completions += result.events().filter(|e| e.event.kind() == "task_completed").count();
        for b in budget_violations(&cfg, &result) {
            bad.push(format!("case {case}: {b}"));
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "500 random configurations (chaos and scripted oracles), {actions} actions, {completions} completions, {} violations{}",
            bad.len(),
            bad.first().map(|b| format!("; e.g. {b}")).unwrap_or_default()
        ),
    )
}

// ---- 4 ----

/// Checks every remapped re-execution in a result: the action must hit an
/// element with the recorded label and land where that row of the world
/// leads. Returns (remaps, remaps with a changed id, problems).
fn remap_checks(world: &SimWorld, r: &TaskResult) -> (usize, usize, Vec<String>) {
    let mut remaps = 0;
    let mut moved = 0;
    let mut bad = Vec::new();
    for trial in &r.trials {
        let events = &trial.trace;
        for (k, ev) in events.iter().enumerate() {
            let Event::Backtracked(b) = &ev.event else { continue };
            let (Some(from), Some(to)) = (b.remapped_from, b.remapped_to) else { continue };
            remaps += 1;
            if from != to {
                moved += 1;
            }
            let next = events[k + 1..].iter().find_map(|e| match &e.event {
                Event::ActionExecuted(a) if a.frame == b.frame && a.purpose == ActionPurpose::Frame => Some(a),
                _ => None,
            });
            let Some(a) = next else {
                bad.push(format!("{}: frame {} never re-executed", r.task_id, b.frame));
                continue;
            };
            if a.target_label != b.label {
                bad.push(format!("{}: frame {} hit {:?}, wanted {:?}", r.task_id, b.frame, a.target_label, b.label));
                continue;
            }
            let page = world.page(&a.pre_url).expect("pre page");
            let label = b.label.as_deref().unwrap_or_default();
            let dest = page.rows.iter().find(|row| row.label() == label).and_then(|row| match row {
                PageRow::SearchBox { target, .. } => Some(target.as_str()),
                other => other.click_target(),
            });
            let landed = world.canonical(&a.post_url);
            if dest.and_then(|d| world.canonical(d)) != landed {
                bad.push(format!("{}: frame {} landed on {}", r.task_id, b.frame, a.post_url));
            }
        }
    }
    (remaps, moved, bad)
}

fn three_order_fixture() -> Result<String, String> {
    let (world, task) = common::order_world(true);
    let orders = common::shop_url("orders.html");
    // Find an injection seed that corrupts exactly the order-list hop, and
    // picks order #179 there.
    let inj = (0..10_000u64)
        .map(|s| ErrorInjection {
            wrong_first_action_prob: 0.5,
            remedy_contains_truth: true,
            rng_seed: s,
        })
        .find(|inj| {
            task.ground_truth.hops.iter().enumerate().all(|(i, h)| inj.fires(0, &h.source, i + 1) == (i == 2))
                && inj.wrong_choice(0, &orders, 3, 2) == 0
        })
        .ok_or("no injection seed found")?;

    // The remedies offered against the #179 click are the other two orders.
    let mut env = SimEnv::new(world.clone());
    for label in ["My Account", "My Orders"] {
        let s = env.observe();
        let id = s.elements.iter().find(|e| e.label == label).unwrap().element_id;
        env.execute(&introspect_core::action::AgentAction::Click { element_id: id }).unwrap();
    }
    let s = env.observe();
    let id_of = |label: &str| s.elements.iter().find(|e| e.label == label).unwrap().element_id;
    let first = introspect_core::action::AgentAction::Click { element_id: id_of("View Order #179") };
    let mut oracle = ScriptedOracle::new(world.clone(), inj);
    let plan = oracle
        .gen_plan(
            &OracleContext {
                task: &task,
                plan: &Plan::new(Vec::<String>::new(), 0),
                history: &[],
                notes: &[],
                failed_plans: &[],
            },
            &s,
            0,
        )
        .map_err(|e| e.to_string())?;
    let ctx = OracleContext {
        task: &task,
        plan: &plan,
        history: &[],
        notes: &[],
        failed_plans: &[],
    };
    let remedies = oracle
        .gen_remedies(&ctx, plan.subtask(3).unwrap(), &s, &first, 2)
        .map_err(|e| e.to_string())?;
    let want = vec![
        introspect_core::action::AgentAction::Click { element_id: id_of("View Order #175") },
        introspect_core::action::AgentAction::Click { element_id: id_of("View Order #170") },
    ];
    if remedies != want {
        return Err(format!("remedies {remedies:?}"));
    }

    // The full run: #179 first, dead end, back to the list, #175 remapped.
    let mut oracle = ScriptedOracle::new(world.clone(), inj);
    let mut env = SimEnv::new(world.clone());
    let result = run_task(&task, &mut env, &mut oracle, &EngineConfig::default());
    let labels: Vec<String> = common::executed(&result.trials[0].trace)
        .iter()
        .map(|a| a.target_label.clone().unwrap_or_else(|| a.action.clone()))
        .collect();
    let expected = [
        "My Account",
        "My Orders",
        "View Order #179",
        "go_back",
        "View Order #175",
        "Picture Frame",
    ];
    if labels.len() < expected.len() || labels[..expected.len()] != expected {
        return Err(format!("unexpected action sequence {labels:?}"));
    }
    let (remaps, moved, bad) = remap_checks(&world, &result);
    if remaps == 0 || moved == 0 || !bad.is_empty() {
        return Err(format!("remaps {remaps}, moved {moved}, problems {bad:?}"));
    }
    if !result.success || result.answer() != Some(&format!("###Answer: {}", common::FRAME_ANSWER)) {
        return Err(format!("run ended with success={} answer={:?}", result.success, result.answer()));
    }
    Ok("three-order fixture: #179 first, remedies #175 then #170, #175 re-targeted after the dead end".into())
}

fn c4_remap() -> Verdict {
    let fixture = three_order_fixture();
    let mut scenarios = 0;
    let mut remaps = 0;
    let mut moved = 0;
    let mut bad = Vec::new();
    let profile = WorldProfile {
        tasks: 20,
        id_permute_on_revisit: true,
        ..WorldProfile::default()
    };
    let mut seed = 0;
    while scenarios < 100 && seed < 50 {
        let (world, tasks) = generate_world(500 + seed, &profile).expect("world generates");
        let world = Arc::new(world);
        for task in &tasks {
            let inj = ErrorInjection {
                wrong_first_action_prob: 1.0,
                remedy_contains_truth: true,
                rng_seed: seed,
            };
            let mut oracle = ScriptedOracle::new(world.clone(), inj);
            let mut env = SimEnv::new(world.clone());
            let cfg = EngineConfig {
                remedies: 3,
                ..EngineConfig::default()
            };
            let result = run_task(task, &mut env, &mut oracle, &cfg);
            let (r, m, b) = remap_checks(&world, &result);
            if r > 0 && scenarios < 100 {
                scenarios += 1;
                remaps += r;
                moved += m;
                bad.extend(b);
            }
        }
        seed += 1;
    }
    let pass = scenarios >= 100 && bad.is_empty() && moved > 0 && fixture.is_ok();
    verdict(
        pass,
        format!(
            "{scenarios} forced-backtrack scenarios, {remaps} remapped re-executions ({moved} with a changed id), {} wrong targets; {}",
            bad.len(),
            match &fixture {
                Ok(s) => s.clone(),
                Err(e) => format!("three-order fixture FAILED: {e}"),
            }
        ),
    )
}

// ---- 5 ----

fn c5_efficiency(lazy: &Lazy) -> Verdict {
    let (run, secs) = lazy.get();
    let rows = &run.report.per_strategy;
    let ar = &rows[&StrategyKind::Ar];
    let refl = &rows[&StrategyKind::PlanActReflexion];
    let ep7 = |k: StrategyKind| rows[&k].success_rate_by_episode.get(6).copied().unwrap_or(0.0);
    let ratio_ok = ar.mean_plan_revisions <= 0.7 * refl.mean_plan_revisions;
    let others = [StrategyKind::PlanAct, StrategyKind::PlanActReflexion, StrategyKind::LatsLike];
    let success_ok = others.iter().all(|&k| ep7(StrategyKind::Ar) >= ep7(k));
    verdict(
        ratio_ok && success_ok && *secs < 60.0,
        format!(
            "200 tasks, p={SUITE_P}: revisions ar {:.3} vs plan_act_reflexion {:.3} (bar {:.3}); ep7 success ar {:.3}, plan_act {:.3}, plan_act_reflexion {:.3}, lats_like {:.3}; suite {secs:.2}s < 60s",
            ar.mean_plan_revisions,
            refl.mean_plan_revisions,
            0.7 * refl.mean_plan_revisions,
            ep7(StrategyKind::Ar),
            ep7(StrategyKind::PlanAct),
            ep7(StrategyKind::PlanActReflexion),
            ep7(StrategyKind::LatsLike),
        ),
    )
}

// ---- 6 ----

fn c6_prompts() -> Verdict {
    let bad = common::golden_mismatches();
    verdict(
        bad.is_empty(),
        format!(
            "7 rendered prompts (plan, action, align, completed x2, answer, map) byte-identical to goldens{}",
            if bad.is_empty() { String::new() } else { format!("; differing: {}", bad.join(", ")) }
        ),
    )
}

// ---- 7 ----

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut queue = VecDeque::from([root.to_path_buf()]);
    while let Some(dir) = queue.pop_front() {
        for entry in std::fs::read_dir(&dir).expect("dir readable") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                queue.push_back(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).expect("file readable"));
            }
        }
    }
    out
}

fn c7_determinism(lazy: &Lazy) -> Verdict {
    let (run8, _) = lazy.get();
    let (world, tasks) = suite_inputs();
    let run1 = run_suite(world.clone(), &tasks, &StrategyKind::ALL, &suite_config(), 1).expect("suite runs");
    let run3 = run_suite(world, &tasks, &StrategyKind::ALL, &suite_config(), 3).expect("suite runs");
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    for (run, dir) in [run8, &run1, &run3].into_iter().zip(&dirs) {
        write_outputs(run, dir.path()).expect("outputs written");
    }
    let trees: Vec<_> = dirs.iter().map(|d| files_under(d.path())).collect();
    let identical = trees[0] == trees[1] && trees[1] == trees[2];
    let differing: Vec<&String> = trees[0]
        .iter()
        .filter(|(k, v)| trees[1].get(*k) != Some(v) || trees[2].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    verdict(
        identical && trees[0].len() > 800,
        format!(
            "report.json, report.txt and {} trace files byte-identical at parallelism 1, 3 and 8{}",
            trees[0].len().saturating_sub(2),
            differing.first().map(|d| format!("; first difference: {d}")).unwrap_or_default()
        ),
    )
}

// ---- 8 ----

/// Shortest click distance from the start page, by breadth-first search over
/// every row target.
fn bfs(world: &SimWorld) -> BTreeMap<String, usize> {
    let mut dist = BTreeMap::from([(world.start_url.clone(), 0)]);
    let mut queue = VecDeque::from([world.start_url.clone()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for row in &world.pages[&u].rows {
            for t in row.targets() {
                let c = world.canonical(t).unwrap().to_string();
                if !dist.contains_key(&c) {
                    dist.insert(c.clone(), d + 1);
                    queue.push_back(c);
                }
            }
        }
    }
    dist
}

fn c8_depth_histogram() -> Verdict {
    let profile = WorldProfile {
        tasks: 1000,
        ..WorldProfile::default()
    };
    let (world, tasks) = generate_world(8, &profile).expect("world generates");
    let dist = bfs(&world);
    let wrong_depth = tasks
        .iter()
        .filter(|t| dist.get(&t.ground_truth.goal_url) != Some(&t.ground_truth.depth))
        .count();
    let mut hist: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &tasks {
        *hist.entry(dist[&t.ground_truth.goal_url]).or_default() += 1.0 / tasks.len() as f64;
    }
    let target: BTreeMap<usize, f64> = profile.depth_distribution().into_iter().collect();
    let keys: BTreeSet<usize> = hist.keys().chain(target.keys()).copied().collect();
    let tv = 0.5
        * keys
            .iter()
            .map(|k| (hist.get(k).unwrap_or(&0.0) - target.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>();
    let mid: f64 = (4..=9).map(|d| hist.get(&d).unwrap_or(&0.0)).sum();
    verdict(
        tv <= 0.1 && wrong_depth == 0 && mid > 0.5,
        format!(
            "1000 tasks, total variation {tv:.4} <= 0.1 from the configured distribution; {:.1}% at depth 4-9; {wrong_depth} recorded depths disagree with BFS",
            mid * 100.0
        ),
    )
}

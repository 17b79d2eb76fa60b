//! The introspective control loop: plan, act with anticipatory remedies,
//! check alignment, backtrack through a stack of frames, and revise the plan
//! after a failed trial.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{format_action, AgentAction, Direction};
use crate::env::Environment;
use crate::oracle::{Completion, Objective, Oracle, OracleContext, OracleError};
use crate::trace::{
    ActionExecuted, ActionPurpose, AlignmentChecked, AnswerDelivered, Backtracked,
    BudgetExhausted, Event, FrameFailed, PlanCreated, PlanRevised, RemedyPushed,
    SubtaskCompleted, TaskCompleted, TraceEvent, TraceRecorder,
};
use crate::types::{
    ActionBudget, FrameOrigin, HistoryEntry, Plan, PlanCursor, StackFrame, StateSnapshot,
    TaskSpec,
};

pub const MAX_REMEDIES: usize = 8;

/// Whether the action limit applies to each trial or to the whole task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetScope {
    PerTrial,
    PerTask,
}

/// How children of an expanded frame are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expansion {
    /// One action plus up to R remedies, each asked for in turn.
    Reflective,
    /// `k` independent samples, deduplicated.
    Sampled { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Remedies generated per expansion (R).
    pub remedies: usize,
    pub budget: ActionBudget,
    pub budget_scope: BudgetScope,
    /// Skip expanding a `(url, subtask)` pair already expanded this trial.
    pub enable_visited_pruning: bool,
    /// Expand only frames whose action was judged aligned.
    pub alignment_gates_expansion: bool,
    /// Whether navigation done for backtracking counts against the budget.
    pub budget_backtracking: bool,
    pub expansion: Expansion,
    /// Observations longer than this many characters are summarized before
    /// being described.
    pub summarize_threshold: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            remedies: 2,
            budget: ActionBudget::default(),
            budget_scope: BudgetScope::PerTrial,
            enable_visited_pruning: false,
            alignment_gates_expansion: true,
            budget_backtracking: true,
            expansion: Expansion::Reflective,
            summarize_threshold: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("remedy count {0} exceeds {MAX_REMEDIES}")]
    TooManyRemedies(usize),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("budget counts must be at least 1")]
    ZeroBudget,
}

impl EngineConfig {
    /// The per-task interpretation of the action limit: one pool of
    /// `max_actions` shared by every trial.
    pub fn per_task(max_actions: u32, max_trials: u32) -> EngineConfig {
        EngineConfig {
            budget: ActionBudget {
                max_actions_per_trial: max_actions,
                max_trials,
            },
            budget_scope: BudgetScope::PerTask,
            ..EngineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.remedies > MAX_REMEDIES {
            return Err(ConfigError::TooManyRemedies(self.remedies));
        }
        if matches!(self.expansion, Expansion::Sampled { k: 0 }) {
            return Err(ConfigError::ZeroSamples);
        }
        self.budget.validate().map_err(|_| ConfigError::ZeroBudget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u32,
    pub success: bool,
    /// Budgeted actions spent in this trial.
    pub actions_used: u32,
    pub answer: Option<String>,
    pub trace: Vec<TraceEvent>,
    pub final_history: Vec<HistoryEntry>,
    pub final_url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Success,
    Failure,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub success: bool,
    pub trials: Vec<TrialResult>,
    /// `plans.len() - 1` once at least one plan exists.
    pub plan_revisions: u32,
    pub plans: Vec<Plan>,
    /// Diagnostic of a fatal environment or oracle error.
    pub aborted: Option<String>,
}

impl TaskResult {
    pub fn outcome(&self) -> TaskOutcome {
        if self.success {
            TaskOutcome::Success
        } else if self.aborted.is_some() {
            TaskOutcome::Aborted
        } else {
            TaskOutcome::Failure
        }
    }

    /// Every event of the run in sequence order.
    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.trials.iter().flat_map(|t| t.trace.iter())
    }

    pub fn answer(&self) -> Option<&str> {
        self.trials.last().and_then(|t| t.answer.as_deref())
    }

    pub fn final_url(&self) -> Option<&str> {
        self.trials.last().map(|t| t.final_url.as_str())
    }
}

/// A fatal error that ends the task.
#[derive(Debug, Clone)]
struct Abort(String);

impl From<OracleError> for Abort {
    fn from(e: OracleError) -> Self {
        Abort(e.to_string())
    }
}

/// Runs the task until a trial succeeds or the trial limit is reached,
/// revising the plan after each failed trial.
pub fn run_task(
    task: &TaskSpec,
    env: &mut dyn Environment,
    oracle: &mut dyn Oracle,
    cfg: &EngineConfig,
) -> TaskResult {
    let mut runner = Runner {
        task,
        env,
        oracle,
        cfg,
        trace: TraceRecorder::new(),
        next_frame: 0,
        task_actions: 0,
    };
    runner.run()
}

struct Runner<'a> {
    task: &'a TaskSpec,
    env: &'a mut dyn Environment,
    oracle: &'a mut dyn Oracle,
    cfg: &'a EngineConfig,
    trace: TraceRecorder,
    next_frame: u64,
    task_actions: u32,
}

/// Mutable state of one trial.
struct Trial {
    index: u32,
    plan: Plan,
    history: Vec<HistoryEntry>,
    step: u64,
    used: u32,
    limit: u32,
    current: StateSnapshot,
    expanded: BTreeSet<(String, PlanCursor)>,
    answer: Option<String>,
}

enum Flow {
    Continue,
    Stop { success: bool },
}

impl Runner<'_> {
    fn run(&mut self) -> TaskResult {
        let mut result = TaskResult {
            task_id: self.task.task_id.clone(),
            success: false,
            trials: Vec::new(),
            plan_revisions: 0,
            plans: Vec::new(),
            aborted: None,
        };
        if let Err(e) = self.cfg.validate() {
            result.aborted = Some(e.to_string());
            return result;
        }
        let mut past_history: Vec<HistoryEntry> = Vec::new();
        let mut empty_plan = Plan::new(Vec::<String>::new(), 0);
        for index in 0..self.cfg.budget.max_trials {
            if index > 0 {
                self.env.reset();
            }
            let mark = self.trace.len();
            let outcome = self.trial(index, &past_history, &result.plans, &mut empty_plan);
            match outcome {
                Ok((plan, trial)) => {
                    past_history.extend(trial.final_history.iter().cloned());
                    result.plans.push(plan);
                    let success = trial.success;
                    result.trials.push(trial);
                    if success {
                        result.success = true;
                        break;
                    }
                }
                Err(Abort(msg)) => {
                    result.trials.push(TrialResult {
                        trial: index,
                        success: false,
                        actions_used: 0,
                        answer: None,
                        trace: self.trace.events_since(mark).to_vec(),
                        final_history: Vec::new(),
                        final_url: self.env.observe().url,
                    });
                    result.aborted = Some(msg);
                    break;
                }
            }
            if self.cfg.budget_scope == BudgetScope::PerTask
                && self.task_actions >= self.cfg.budget.max_actions_per_trial
            {
                break;
            }
        }
        result.plan_revisions = result.plans.len().saturating_sub(1) as u32;
        result
    }

    fn trial(
        &mut self,
        index: u32,
        past_history: &[HistoryEntry],
        failed_plans: &[Plan],
        empty_plan: &mut Plan,
    ) -> Result<(Plan, TrialResult), Abort> {
        let mark = self.trace.len();
        let s0 = self.env.observe();
        let plan = {
            let ctx = OracleContext {
                task: self.task,
                plan: empty_plan,
                history: past_history,
                notes: self.env.notes(),
                failed_plans,
            };
            self.oracle.gen_plan(&ctx, &s0, index)?
        };
        if plan.is_empty() {
            return Err(Abort("oracle produced an empty plan".into()));
        }
        if index > 0 {
            self.trace.emit(Event::PlanRevised(PlanRevised {
                trial: index,
                revision: plan.revision,
                failed_plans: failed_plans.len(),
            }));
        }
        self.trace.emit(Event::PlanCreated(PlanCreated {
            trial: index,
            revision: plan.revision,
            subtasks: plan.subtasks.iter().map(|s| s.description.clone()).collect(),
        }));
        let limit = match self.cfg.budget_scope {
            BudgetScope::PerTrial => self.cfg.budget.max_actions_per_trial,
            BudgetScope::PerTask => self
                .cfg
                .budget
                .max_actions_per_trial
                .saturating_sub(self.task_actions),
        };
        let mut t = Trial {
            index,
            plan,
            history: Vec::new(),
            step: 0,
            used: 0,
            limit,
            current: s0,
            expanded: BTreeSet::new(),
            answer: None,
        };
        let success = self.search(&mut t)?;
        self.task_actions += t.used;
        let trial = TrialResult {
            trial: index,
            success,
            actions_used: t.used,
            answer: t.answer,
            trace: self.trace.events_since(mark).to_vec(),
            final_history: t.history,
            final_url: t.current.url.clone(),
        };
        Ok((t.plan, trial))
    }

    fn new_frame_id(&mut self) -> u64 {
        let id = self.next_frame;
        self.next_frame += 1;
        id
    }

    fn budget_left(&self, t: &Trial) -> bool {
        t.used < t.limit
    }

    fn exhausted(&mut self, t: &Trial) -> Flow {
        self.trace.emit(Event::BudgetExhausted(BudgetExhausted {
            trial: t.index,
            actions_used: t.used,
        }));
        Flow::Stop { success: false }
    }

    fn frame_failed(&mut self, t: &Trial, frame: &StackFrame, reason: String) {
        self.trace.emit(Event::FrameFailed(FrameFailed {
            trial: t.index,
            frame: frame.id,
            parent: frame.parent,
            origin: frame.origin,
            reason,
        }));
    }

    fn search(&mut self, t: &mut Trial) -> Result<bool, Abort> {
        let root = StackFrame::sentinel(self.new_frame_id(), Arc::new(t.current.clone()));
        let mut stack = vec![root];
        while let Some(frame) = stack.pop() {
            match self.step_frame(t, frame, &mut stack)? {
                Flow::Continue => {}
                Flow::Stop { success } => return Ok(success),
            }
        }
        Ok(false)
    }

    /// Runs one environment action on behalf of the trial, recording it.
    fn act(
        &mut self,
        t: &mut Trial,
        frame: &StackFrame,
        action: &AgentAction,
        purpose: ActionPurpose,
        budgeted: bool,
    ) -> Result<StateSnapshot, String> {
        let pre = t.current.clone();
        let post = self.env.execute(action).map_err(|e| e.to_string())?;
        t.step += 1;
        if budgeted {
            t.used += 1;
        }
        let target_label = action
            .element_id()
            .and_then(|id| pre.element(id))
            .map(|e| e.label.clone());
        self.trace.emit(Event::ActionExecuted(ActionExecuted {
            trial: t.index,
            step: t.step,
            purpose,
            frame: frame.id,
            parent: frame.parent,
            origin: frame.origin,
            subtask: frame.subtask_cursor.active(),
            action: format_action(action),
            target_label,
            pre_state: pre.state_id.clone(),
            post_state: post.state_id.clone(),
            pre_url: pre.url.clone(),
            post_url: post.url.clone(),
        }));
        t.current = post.clone();
        Ok(post)
    }

    /// Returns the environment to the frame's recorded position and re-targets
    /// its pending action. `Ok(None)` means the frame failed.
    fn backtrack(
        &mut self,
        t: &mut Trial,
        frame: &StackFrame,
    ) -> Result<Result<Option<AgentAction>, Flow>, Abort> {
        let target = frame.state.clone();
        let from_url = t.current.url.clone();
        let mut navigated = false;
        let budgeted = self.cfg.budget_backtracking;
        if !t.current.same_position(&target) {
            if t.current.url != target.url {
                if budgeted && !self.budget_left(t) {
                    return Ok(Err(self.exhausted(t)));
                }
                let goto = AgentAction::Goto {
                    url: target.url.clone(),
                };
                if let Err(reason) = self.act(t, frame, &goto, ActionPurpose::Backtrack, budgeted) {
                    self.frame_failed(t, frame, format!("backtrack failed: {reason}"));
                    return Ok(Ok(None));
                }
                navigated = true;
            }
            while t.current.viewport_top != target.viewport_top {
                if budgeted && !self.budget_left(t) {
                    return Ok(Err(self.exhausted(t)));
                }
                let direction = if t.current.viewport_top < target.viewport_top {
                    Direction::Down
                } else {
                    Direction::Up
                };
                let before = t.current.viewport_top;
                let scroll = AgentAction::Scroll { direction };
                if let Err(reason) = self.act(t, frame, &scroll, ActionPurpose::Backtrack, budgeted) {
                    self.frame_failed(t, frame, format!("backtrack failed: {reason}"));
                    return Ok(Ok(None));
                }
                navigated = true;
                if t.current.viewport_top == before {
                    self.frame_failed(t, frame, "recorded viewport is unreachable".into());
                    return Ok(Ok(None));
                }
            }
        }
        let action = frame
            .pending_action
            .clone()
            .expect("backtrack is only used for action frames");
        let mut remapped = None;
        let mut mapped = action.clone();
        if t.current.state_id != target.state_id && action.element_id().is_some() {
            match self.oracle.map_element(&action, &target, &t.current) {
                Ok(a) => {
                    remapped = Some((action.element_id(), a.element_id()));
                    mapped = a;
                }
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    self.emit_backtracked(t, frame, from_url, navigated, None, &action);
                    self.frame_failed(t, frame, e.to_string());
                    return Ok(Ok(None));
                }
            }
        }
        if navigated || remapped.is_some() {
            self.emit_backtracked(t, frame, from_url, navigated, remapped, &action);
        }
        Ok(Ok(Some(mapped)))
    }

    fn emit_backtracked(
        &mut self,
        t: &Trial,
        frame: &StackFrame,
        from_url: String,
        navigated: bool,
        remapped: Option<(Option<crate::action::ElementId>, Option<crate::action::ElementId>)>,
        action: &AgentAction,
    ) {
        let label = action
            .element_id()
            .and_then(|id| frame.state.element(id))
            .map(|e| e.label.clone());
        let (from, to) = remapped.unwrap_or((None, None));
        self.trace.emit(Event::Backtracked(Backtracked {
            trial: t.index,
            frame: frame.id,
            from_url,
            to_url: t.current.url.clone(),
            navigated,
            remapped_from: from.map(|i| i.0),
            remapped_to: to.map(|i| i.0),
            label,
        }));
    }

    fn describe(&mut self, pre: &StateSnapshot, action: &AgentAction, post: &StateSnapshot) -> Result<String, Abort> {
        let shorten = |oracle: &mut dyn Oracle, s: &StateSnapshot, limit: usize| -> Result<StateSnapshot, OracleError> {
            if s.observation.chars().count() <= limit {
                return Ok(s.clone());
            }
            let mut short = s.clone();
            short.observation = oracle.summarize_state(s, limit)?;
            Ok(short)
        };
        let limit = self.cfg.summarize_threshold;
        let result = shorten(&mut *self.oracle, pre, limit).and_then(|pre| {
            let post = shorten(&mut *self.oracle, post, limit)?;
            self.oracle.describe_action(&pre, action, &post)
        });
        match result {
            Ok(d) => Ok(d),
            Err(e) if e.is_fatal() => Err(e.into()),
            Err(_) => Ok(format!("The action is to {}", format_action(action))),
        }
    }

    fn step_frame(
        &mut self,
        t: &mut Trial,
        frame: StackFrame,
        stack: &mut Vec<StackFrame>,
    ) -> Result<Flow, Abort> {
        let mut cursor = frame.subtask_cursor;
        if frame.is_sentinel() {
            cursor = cursor.next(t.plan.len());
            t.plan.advance_to(cursor, &[]);
        } else {
            let action = match self.backtrack(t, &frame)? {
                Err(flow) => return Ok(flow),
                Ok(None) => return Ok(Flow::Continue),
                Ok(Some(a)) => a,
            };
            if !self.budget_left(t) {
                return Ok(self.exhausted(t));
            }
            let pre = t.current.clone();
            let post = match self.act(t, &frame, &action, ActionPurpose::Frame, true) {
                Ok(post) => post,
                Err(reason) => {
                    self.frame_failed(t, &frame, reason);
                    return Ok(Flow::Continue);
                }
            };
            let description = self.describe(&pre, &action, &post)?;
            let note = match &action {
                AgentAction::NoteDown { text } => Some(text.clone()),
                _ => None,
            };
            t.history.push(HistoryEntry {
                step: t.step,
                action: action.clone(),
                description,
                pre_state: pre.state_id.clone(),
                post_state: post.state_id.clone(),
                note,
            });

            if matches!(action, AgentAction::Answer { .. }) {
                let answer = format_action(&action);
                self.trace.emit(Event::AnswerDelivered(AnswerDelivered {
                    trial: t.index,
                    answer: answer.clone(),
                }));
                t.answer = Some(answer);
                let done = self.completed(t, Objective::Task)?;
                return Ok(Flow::Stop { success: done.is_complete() });
            }

            let Some(subtask) = cursor.active().and_then(|i| t.plan.subtask(i)).cloned() else {
                return Ok(Flow::Continue);
            };
            let aligned = {
                let ctx = OracleContext {
                    task: self.task,
                    plan: &t.plan,
                    history: &t.history,
                    notes: self.env.notes(),
                    failed_plans: &[],
                };
                self.oracle.eval_align(&ctx, &pre, &action, &post, &subtask)
            };
            let aligned = match aligned {
                Ok(a) => a,
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(e) => {
                    self.frame_failed(t, &frame, e.to_string());
                    return Ok(Flow::Continue);
                }
            };
            self.trace.emit(Event::AlignmentChecked(AlignmentChecked {
                trial: t.index,
                frame: frame.id,
                subtask: cursor.active(),
                aligned,
            }));
            if aligned {
                if self.completed(t, Objective::Task)?.is_complete() {
                    return self.finish(t);
                }
                let mut skipped = Vec::new();
                while let Some(i) = cursor.active() {
                    let st = t.plan.subtask(i).cloned().expect("cursor within plan");
                    match self.completed(t, Objective::Subtask(&st))? {
                        Completion::NotDone => break,
                        Completion::Done => {}
                        Completion::SkippedNonEssential => skipped.push(i),
                    }
                    cursor = cursor.next(t.plan.len());
                }
                for index in t.plan.advance_to(cursor, &skipped) {
                    self.trace.emit(Event::SubtaskCompleted(SubtaskCompleted {
                        trial: t.index,
                        index,
                        skipped: skipped.contains(&index),
                    }));
                }
            } else if self.cfg.alignment_gates_expansion {
                return Ok(Flow::Continue);
            }
        }
        self.expand(t, &frame, cursor, stack)?;
        Ok(Flow::Continue)
    }

    fn completed(&mut self, t: &Trial, objective: Objective<'_>) -> Result<Completion, Abort> {
        let ctx = OracleContext {
            task: self.task,
            plan: &t.plan,
            history: &t.history,
            notes: self.env.notes(),
            failed_plans: &[],
        };
        match self.oracle.eval_completed(&ctx, objective, &t.current) {
            Ok(c) => Ok(c),
            Err(e) if e.is_fatal() => Err(e.into()),
            Err(_) => Ok(Completion::NotDone),
        }
    }

    fn finish(&mut self, t: &mut Trial) -> Result<Flow, Abort> {
        self.trace.emit(Event::TaskCompleted(TaskCompleted {
            trial: t.index,
            step: t.step,
            url: t.current.url.clone(),
        }));
        if self.task.is_information_seeking() {
            let ctx = OracleContext {
                task: self.task,
                plan: &t.plan,
                history: &t.history,
                notes: self.env.notes(),
                failed_plans: &[],
            };
            match self.oracle.deliver_answer(&ctx, &t.current) {
                Ok(answer) => {
                    self.trace.emit(Event::AnswerDelivered(AnswerDelivered {
                        trial: t.index,
                        answer: answer.clone(),
                    }));
                    t.answer = Some(answer);
                }
                Err(e) if e.is_fatal() => return Err(e.into()),
                Err(_) => {}
            }
        }
        Ok(Flow::Stop { success: true })
    }

    fn expand(
        &mut self,
        t: &mut Trial,
        frame: &StackFrame,
        cursor: PlanCursor,
        stack: &mut Vec<StackFrame>,
    ) -> Result<(), Abort> {
        let Some(subtask) = cursor.active().and_then(|i| t.plan.subtask(i)).cloned() else {
            return Ok(());
        };
        if self.cfg.enable_visited_pruning
            && !t.expanded.insert((t.current.url.clone(), cursor))
        {
            return Ok(());
        }
        let state = Arc::new(t.current.clone());
        let proposals = {
            let ctx = OracleContext {
                task: self.task,
                plan: &t.plan,
                history: &t.history,
                notes: self.env.notes(),
                failed_plans: &[],
            };
            match self.cfg.expansion {
                Expansion::Reflective => self
                    .oracle
                    .gen_action(&ctx, &subtask, &state)
                    .and_then(|first| {
                        let remedies = if self.cfg.remedies == 0 {
                            Vec::new()
                        } else {
                            match self.oracle.gen_remedies(&ctx, &subtask, &state, &first, self.cfg.remedies) {
                                Ok(r) => r,
                                Err(e) if e.is_fatal() => return Err(e),
                                Err(_) => Vec::new(),
                            }
                        };
                        Ok((first, remedies))
                    }),
                Expansion::Sampled { k } => self
                    .oracle
                    .sample_actions(&ctx, &subtask, &state, k)
                    .and_then(|mut samples| {
                        if samples.is_empty() {
                            return Err(OracleError::Parse("no samples".into()));
                        }
                        let first = samples.remove(0);
                        Ok((first, samples))
                    }),
            }
        };
        let (first, remedies) = match proposals {
            Ok(p) => p,
            Err(e) if e.is_fatal() => return Err(e.into()),
            Err(e) => {
                self.frame_failed(t, frame, format!("expansion failed: {e}"));
                return Ok(());
            }
        };
        let mut distinct: Vec<AgentAction> = Vec::new();
        for r in remedies {
            if r != first && !distinct.contains(&r) {
                distinct.push(r);
            }
        }
        // Lower-ranked remedies go deeper so rank 1 pops right after the first attempt.
        for (rank, action) in distinct.into_iter().enumerate().rev() {
            let id = self.new_frame_id();
            let rank = rank as u32 + 1;
            self.trace.emit(Event::RemedyPushed(RemedyPushed {
                trial: t.index,
                frame: id,
                parent: frame.id,
                rank,
                action: format_action(&action),
                state: state.state_id.clone(),
            }));
            stack.push(StackFrame {
                id,
                parent: Some(frame.id),
                state: state.clone(),
                pending_action: Some(action),
                subtask_cursor: cursor,
                origin: FrameOrigin::Remedy(rank),
            });
        }
        let id = self.new_frame_id();
        stack.push(StackFrame {
            id,
            parent: Some(frame.id),
            state,
            pending_action: Some(first),
            subtask_cursor: cursor,
            origin: FrameOrigin::FirstAttempt,
        });
        Ok(())
    }
}

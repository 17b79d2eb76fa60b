//! The generation and evaluation functions the engine consults, behind one
//! trait, with a ground-truth scripted implementation and a live
//! chat-completion adapter.

mod live;
mod prompts;
mod scripted;

use thiserror::Error;

use crate::action::AgentAction;
use crate::types::{HistoryEntry, Plan, StateSnapshot, Subtask, TaskSpec};

pub use live::{
    render_failed_plans, render_history, render_notes, render_step,
    ChatMessage, ChatTransport, HttpTransport, LiveConfig, LiveOracle, TransportError,
    ENV_API_KEY, ENV_BASE_URL, ENV_MODEL,
};
pub use prompts::{render_template, PromptError, PromptKind, PromptSet};
pub use scripted::{ErrorInjection, ScriptedOracle};

/// What the oracle sees of a run when asked to plan, act or judge.
#[derive(Debug, Clone)]
pub struct OracleContext<'a> {
    pub task: &'a TaskSpec,
    pub plan: &'a Plan,
    pub history: &'a [HistoryEntry],
    pub notes: &'a [String],
    pub failed_plans: &'a [Plan],
}

/// The target of a completion check.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Task,
    Subtask(&'a Subtask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    NotDone,
    Done,
    /// The subtask turned out to be unnecessary from this state.
    SkippedNonEssential,
}

impl Completion {
    pub fn is_complete(self) -> bool {
        self != Completion::NotDone
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unusable oracle output: {0}")]
    Parse(String),
    #[error("element '{0}' not found on revisit")]
    ElementNotFound(String),
    #[error("no answer has been noted down")]
    NoAnswerAvailable,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl OracleError {
    /// Fatal errors abort the task; the rest only fail the current frame.
    pub fn is_fatal(&self) -> bool {
        matches!(self, OracleError::Transport(_) | OracleError::Config(_))
    }
}

pub trait Oracle {
    /// Decomposes the task into sequential subtasks. `revision` is 0 for the
    /// first plan and grows by one per revision.
    fn gen_plan(
        &mut self,
        ctx: &OracleContext<'_>,
        s0: &StateSnapshot,
        revision: u32,
    ) -> Result<Plan, OracleError>;

    fn gen_action(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
    ) -> Result<AgentAction, OracleError>;

    /// Up to `r` alternatives to `first`, each proposed in light of the
    /// previous ones.
    fn gen_remedies(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        first: &AgentAction,
        r: usize,
    ) -> Result<Vec<AgentAction>, OracleError>;

    /// `k` independent action samples, duplicates allowed.
    fn sample_actions(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        k: usize,
    ) -> Result<Vec<AgentAction>, OracleError> {
        (0..k).map(|_| self.gen_action(ctx, subtask, s)).collect()
    }

    fn eval_align(
        &mut self,
        ctx: &OracleContext<'_>,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
        subtask: &Subtask,
    ) -> Result<bool, OracleError>;

    fn eval_completed(
        &mut self,
        ctx: &OracleContext<'_>,
        objective: Objective<'_>,
        s: &StateSnapshot,
    ) -> Result<Completion, OracleError>;

    fn describe_action(
        &mut self,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
    ) -> Result<String, OracleError>;

    /// Shortens an observation to at most `limit` characters.
    fn summarize_state(&mut self, s: &StateSnapshot, limit: usize) -> Result<String, OracleError>;

    /// Re-targets `action`, recorded against `old`, onto the same element in `new`.
    fn map_element(
        &mut self,
        action: &AgentAction,
        old: &StateSnapshot,
        new: &StateSnapshot,
    ) -> Result<AgentAction, OracleError>;

    /// The final `###Answer: ...` text of an information-seeking task.
    fn deliver_answer(
        &mut self,
        ctx: &OracleContext<'_>,
        s: &StateSnapshot,
    ) -> Result<String, OracleError>;
}

/// Element-preserving remap by `(role, label, occurrence)`, shared by the
/// scripted oracle and tests.
pub fn map_by_label(
    action: &AgentAction,
    old: &StateSnapshot,
    new: &StateSnapshot,
) -> Result<AgentAction, OracleError> {
    let Some(id) = action.element_id() else {
        return Ok(action.clone());
    };
    if old.state_id == new.state_id {
        return Ok(action.clone());
    }
    let Some(el) = old.element(id) else {
        return Err(OracleError::ElementNotFound(format!("#{id}")));
    };
    let occurrence = old
        .elements
        .iter()
        .take_while(|e| e.element_id != id)
        .filter(|e| e.role == el.role && e.label == el.label)
        .count();
    new.elements
        .iter()
        .filter(|e| e.role == el.role && e.label == el.label)
        .nth(occurrence)
        .map(|e| action.with_element(e.element_id))
        .ok_or_else(|| OracleError::ElementNotFound(el.label.clone()))
}

//! Domain records shared by the environment, oracles, engine and harness.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{AgentAction, ElementId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionBudget {
    pub max_actions_per_trial: u32,
    pub max_trials: u32,
}

impl Default for ActionBudget {
    fn default() -> Self {
        Self {
            max_actions_per_trial: 30,
            max_trials: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("task goal is empty")]
    EmptyGoal,
    #[error("budget counts must be at least 1")]
    ZeroBudget,
    #[error("ground truth has {hops} hops but records depth {depth}")]
    DepthMismatch { hops: usize, depth: usize },
}

impl ActionBudget {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.max_actions_per_trial == 0 || self.max_trials == 0 {
            return Err(SpecError::ZeroBudget);
        }
        Ok(())
    }
}

/// How one navigation hop of a solution is performed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HopVia {
    /// Follow the link (or button) row with this label.
    Link {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
    },
    /// Type `query` into the search box labelled `label`.
    Search { label: String, query: String },
}

/// One step of a ground-truth solution, in canonical URLs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub source: String,
    pub target: String,
    pub via: HopVia,
}

/// Simulator-only solution record used for scripted oracles and scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Canonical goal URL.
    pub goal_url: String,
    /// Every URL that renders the goal page (canonical first, then aliases).
    pub equivalent_urls: Vec<String>,
    /// Number of navigation hops on the shortest solution.
    pub depth: usize,
    pub hops: Vec<Hop>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub goal: String,
    pub site: String,
    /// Present exactly for information-seeking tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<String>,
    #[serde(default)]
    pub budget: ActionBudget,
    pub ground_truth: GroundTruth,
}

impl TaskSpec {
    pub fn is_information_seeking(&self) -> bool {
        self.answer_key.is_some()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.goal.trim().is_empty() {
            return Err(SpecError::EmptyGoal);
        }
        self.budget.validate()?;
        let gt = &self.ground_truth;
        if gt.hops.len() != gt.depth {
            return Err(SpecError::DepthMismatch {
                hops: gt.hops.len(),
                depth: gt.depth,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "heading")]
    Heading,
    #[serde(rename = "link")]
    Link,
    #[serde(rename = "button")]
    Button,
    #[serde(rename = "textbox")]
    Textbox,
    #[serde(rename = "StaticText")]
    StaticText,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Heading => "heading",
            Role::Link => "link",
            Role::Button => "button",
            Role::Textbox => "textbox",
            Role::StaticText => "StaticText",
        }
    }

    pub fn is_interactive(self) -> bool {
        matches!(self, Role::Link | Role::Button | Role::Textbox)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub element_id: ElementId,
    pub role: Role,
    pub label: String,
}

/// One observation of the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub state_id: String,
    pub url: String,
    pub viewport_top: usize,
    pub observation: String,
    /// Elements inside the viewport, in render order.
    pub elements: Vec<Element>,
    pub trial_step: u64,
}

impl StateSnapshot {
    pub fn element(&self, id: ElementId) -> Option<&Element> {
        self.elements.iter().find(|e| e.element_id == id)
    }

    /// Same page, same scroll position.
    pub fn same_position(&self, other: &StateSnapshot) -> bool {
        self.url == other.url && self.viewport_top == other.viewport_top
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    Pending,
    Active,
    Done,
    SkippedNonessential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    /// 1-based position in the plan.
    pub index: usize,
    pub description: String,
    pub status: SubtaskStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal subtask transition {from:?} -> {to:?}")]
pub struct TransitionError {
    pub from: SubtaskStatus,
    pub to: SubtaskStatus,
}

impl Subtask {
    pub fn transition(&mut self, to: SubtaskStatus) -> Result<(), TransitionError> {
        use SubtaskStatus::*;
        let ok = matches!(
            (self.status, to),
            (Pending, Active) | (Active, Done) | (Active, SkippedNonessential)
        );
        if !ok {
            return Err(TransitionError {
                from: self.status,
                to,
            });
        }
        self.status = to;
        Ok(())
    }
}

/// Position in a plan: before the first subtask, at subtask `i` (1-based),
/// or past the last one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanCursor {
    BeforeStart,
    At(usize),
    Finished,
}

impl PlanCursor {
    pub fn active(self) -> Option<usize> {
        match self {
            PlanCursor::At(i) => Some(i),
            _ => None,
        }
    }

    /// The cursor after the subtask at `self` is finished, for a plan of `n` subtasks.
    pub fn next(self, n: usize) -> PlanCursor {
        let i = match self {
            PlanCursor::BeforeStart => 1,
            PlanCursor::At(i) => i + 1,
            PlanCursor::Finished => return PlanCursor::Finished,
        };
        if i <= n {
            PlanCursor::At(i)
        } else {
            PlanCursor::Finished
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<Subtask>,
    /// Furthest point reached in the current trial; never moves backwards.
    pub cursor: PlanCursor,
    pub revision: u32,
}

impl Plan {
    pub fn new<I, S>(descriptions: I, revision: u32) -> Plan
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let subtasks = descriptions
            .into_iter()
            .enumerate()
            .map(|(i, d)| Subtask {
                index: i + 1,
                description: d.into(),
                status: SubtaskStatus::Pending,
            })
            .collect();
        Plan {
            subtasks,
            cursor: PlanCursor::BeforeStart,
            revision,
        }
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn subtask(&self, index: usize) -> Option<&Subtask> {
        index.checked_sub(1).and_then(|i| self.subtasks.get(i))
    }

    /// Marks every subtask before `reached` as finished (those listed in
    /// `skipped` as non-essential) and activates `reached`. Returns the
    /// indices newly finished, in order; empty when `reached` is not beyond
    /// the current cursor.
    pub fn advance_to(&mut self, reached: PlanCursor, skipped: &[usize]) -> Vec<usize> {
        if reached <= self.cursor {
            return Vec::new();
        }
        let mut finished = Vec::new();
        let upto = match reached {
            PlanCursor::At(i) => i - 1,
            PlanCursor::Finished => self.subtasks.len(),
            PlanCursor::BeforeStart => 0,
        };
        for st in self.subtasks.iter_mut().take(upto) {
            if st.status == SubtaskStatus::Pending {
                let _ = st.transition(SubtaskStatus::Active);
            }
            if st.status == SubtaskStatus::Active {
                let to = if skipped.contains(&st.index) {
                    SubtaskStatus::SkippedNonessential
                } else {
                    SubtaskStatus::Done
                };
                let _ = st.transition(to);
                finished.push(st.index);
            }
        }
        if let PlanCursor::At(i) = reached {
            if let Some(st) = self.subtasks.get_mut(i - 1) {
                if st.status == SubtaskStatus::Pending {
                    let _ = st.transition(SubtaskStatus::Active);
                }
            }
        }
        self.cursor = reached;
        finished
    }

    /// Subtasks as a numbered list, one per line.
    pub fn numbered(&self) -> String {
        self.subtasks
            .iter()
            .map(|s| format!("{}. {}", s.index, s.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: u64,
    pub action: AgentAction,
    pub description: String,
    pub pre_state: String,
    pub post_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameOrigin {
    FirstAttempt,
    Remedy(u32),
}

/// A unit of exploration: the state to stand in, the action to take there,
/// and the subtask cursor that action serves.
#[derive(Debug, Clone)]
pub struct StackFrame {
    pub id: u64,
    /// Frame whose expansion produced this one.
    pub parent: Option<u64>,
    pub state: Arc<StateSnapshot>,
    pub pending_action: Option<AgentAction>,
    pub subtask_cursor: PlanCursor,
    pub origin: FrameOrigin,
}

impl StackFrame {
    pub fn sentinel(id: u64, state: Arc<StateSnapshot>) -> StackFrame {
        StackFrame {
            id,
            parent: None,
            state,
            pending_action: None,
            subtask_cursor: PlanCursor::BeforeStart,
            origin: FrameOrigin::FirstAttempt,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.pending_action.is_none()
    }
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

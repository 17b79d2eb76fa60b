//! Trace events emitted while running a task, serialized one JSON object per
//! line as `{"kind": ..., "seq": ..., "payload": {...}}`.

use std::io::{self, BufRead, Write};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::types::FrameOrigin;

/// Why an action was executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionPurpose {
    /// The pending action of a popped frame.
    Frame,
    /// Navigation performed to return to a frame's recorded state.
    Backtrack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCreated {
    pub trial: u32,
    pub revision: u32,
    pub subtasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionExecuted {
    pub trial: u32,
    pub step: u64,
    pub purpose: ActionPurpose,
    pub frame: u64,
    pub parent: Option<u64>,
    pub origin: FrameOrigin,
    pub subtask: Option<usize>,
    pub action: String,
    /// Label of the targeted element in the pre-state, when the verb targets one.
    pub target_label: Option<String>,
    pub pre_state: String,
    pub post_state: String,
    pub pre_url: String,
    pub post_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemedyPushed {
    pub trial: u32,
    pub frame: u64,
    pub parent: u64,
    pub rank: u32,
    pub action: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backtracked {
    pub trial: u32,
    pub frame: u64,
    pub from_url: String,
    pub to_url: String,
    pub navigated: bool,
    pub remapped_from: Option<u32>,
    pub remapped_to: Option<u32>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentChecked {
    pub trial: u32,
    pub frame: u64,
    pub subtask: Option<usize>,
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskCompleted {
    pub trial: u32,
    pub index: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCompleted {
    pub trial: u32,
    pub step: u64,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRevised {
    pub trial: u32,
    pub revision: u32,
    pub failed_plans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetExhausted {
    pub trial: u32,
    pub actions_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerDelivered {
    pub trial: u32,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFailed {
    pub trial: u32,
    pub frame: u64,
    pub parent: Option<u64>,
    pub origin: FrameOrigin,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    PlanCreated(PlanCreated),
    ActionExecuted(ActionExecuted),
    RemedyPushed(RemedyPushed),
    Backtracked(Backtracked),
    AlignmentChecked(AlignmentChecked),
    SubtaskCompleted(SubtaskCompleted),
    TaskCompleted(TaskCompleted),
    PlanRevised(PlanRevised),
    BudgetExhausted(BudgetExhausted),
    AnswerDelivered(AnswerDelivered),
    FrameFailed(FrameFailed),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::PlanCreated(_) => "plan_created",
            Event::ActionExecuted(_) => "action_executed",
            Event::RemedyPushed(_) => "remedy_pushed",
            Event::Backtracked(_) => "backtracked",
            Event::AlignmentChecked(_) => "alignment_checked",
            Event::SubtaskCompleted(_) => "subtask_completed",
            Event::TaskCompleted(_) => "task_completed",
            Event::PlanRevised(_) => "plan_revised",
            Event::BudgetExhausted(_) => "budget_exhausted",
            Event::AnswerDelivered(_) => "answer_delivered",
            Event::FrameFailed(_) => "frame_failed",
        }
    }

    pub fn trial(&self) -> u32 {
        match self {
            Event::PlanCreated(e) => e.trial,
            Event::ActionExecuted(e) => e.trial,
            Event::RemedyPushed(e) => e.trial,
            Event::Backtracked(e) => e.trial,
            Event::AlignmentChecked(e) => e.trial,
            Event::SubtaskCompleted(e) => e.trial,
            Event::TaskCompleted(e) => e.trial,
            Event::PlanRevised(e) => e.trial,
            Event::BudgetExhausted(e) => e.trial,
            Event::AnswerDelivered(e) => e.trial,
            Event::FrameFailed(e) => e.trial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub seq: u64,
    pub event: Event,
}

#[derive(Serialize)]
struct WireOut {
    kind: &'static str,
    seq: u64,
    payload: serde_json::Value,
}

#[derive(Deserialize)]
struct WireIn {
    kind: String,
    seq: u64,
    payload: serde_json::Value,
}

impl Serialize for TraceEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let tagged = serde_json::to_value(&self.event).map_err(serde::ser::Error::custom)?;
        let payload = tagged
            .get("payload")
            .cloned()
            .unwrap_or(serde_json::Value::Null);
        WireOut {
            kind: self.event.kind(),
            seq: self.seq,
            payload,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TraceEvent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WireIn::deserialize(deserializer)?;
        let tagged = serde_json::json!({ "kind": wire.kind, "payload": wire.payload });
        let event = serde_json::from_value(tagged).map_err(D::Error::custom)?;
        Ok(TraceEvent {
            seq: wire.seq,
            event,
        })
    }
}

/// Assigns gap-free sequence numbers from 0.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    events: Vec<TraceEvent>,
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn emit(&mut self, event: Event) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent { seq, event });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events_since(&self, start: usize) -> &[TraceEvent] {
        &self.events[start..]
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        events.push(ev);
    }
    Ok(events)
}

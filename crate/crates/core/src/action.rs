//! The agent action grammar and its bracketed text form.
//!
//! ```text
//! click [42]
//! type [7] [iPhone 13]
//! scroll [down]
//! goto [http://sim.local/home.html]
//! go_back
//! go_forward
//! note_down [Color configuration: walnut]
//! ###Answer: walnut
//! ```

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of an element inside one rendered snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// One agent action. Each variant carries exactly the fields its verb needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum AgentAction {
    Click { element_id: ElementId },
    Type { element_id: ElementId, text: String },
    Scroll { direction: Direction },
    Goto { url: String },
    GoBack,
    GoForward,
    NoteDown { text: String },
    Answer { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Click,
    Type,
    Scroll,
    Goto,
    GoBack,
    GoForward,
    NoteDown,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no action grammar matched: {0:?}")]
    NoMatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidAction {
    #[error("{0:?} text must be a single line")]
    MultiLine(Verb),
    #[error("goto url must be non-empty and contain no whitespace")]
    BadUrl,
    #[error("answer text must not carry leading or trailing whitespace")]
    UntrimmedAnswer,
}

impl AgentAction {
    pub fn verb(&self) -> Verb {
        match self {
            AgentAction::Click { .. } => Verb::Click,
            AgentAction::Type { .. } => Verb::Type,
            AgentAction::Scroll { .. } => Verb::Scroll,
            AgentAction::Goto { .. } => Verb::Goto,
            AgentAction::GoBack => Verb::GoBack,
            AgentAction::GoForward => Verb::GoForward,
            AgentAction::NoteDown { .. } => Verb::NoteDown,
            AgentAction::Answer { .. } => Verb::Answer,
        }
    }

    /// The element this action targets, if any.
    pub fn element_id(&self) -> Option<ElementId> {
        match self {
            AgentAction::Click { element_id } | AgentAction::Type { element_id, .. } => {
                Some(*element_id)
            }
            _ => None,
        }
    }

    /// Same action aimed at a different element. Identity for element-free verbs.
    pub fn with_element(&self, id: ElementId) -> AgentAction {
        match self {
            AgentAction::Click { .. } => AgentAction::Click { element_id: id },
            AgentAction::Type { text, .. } => AgentAction::Type {
                element_id: id,
                text: text.clone(),
            },
            other => other.clone(),
        }
    }

    /// Checks the constraints the text form relies on for a lossless round trip.
    pub fn validate(&self) -> Result<(), InvalidAction> {
        match self {
            AgentAction::Type { text, .. } | AgentAction::NoteDown { text } => {
                if text.contains(['\n', '\r']) {
                    return Err(InvalidAction::MultiLine(self.verb()));
                }
            }
            AgentAction::Answer { text } => {
                if text.contains(['\n', '\r']) {
                    return Err(InvalidAction::MultiLine(Verb::Answer));
                }
                if text.trim() != text {
                    return Err(InvalidAction::UntrimmedAnswer);
                }
            }
            AgentAction::Goto { url } => {
                if url.is_empty() || url.chars().any(char::is_whitespace) {
                    return Err(InvalidAction::BadUrl);
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentAction::Click { element_id } => write!(f, "click [{element_id}]"),
            AgentAction::Type { element_id, text } => write!(f, "type [{element_id}] [{text}]"),
            AgentAction::Scroll { direction } => write!(f, "scroll [{}]", direction.as_str()),
            AgentAction::Goto { url } => write!(f, "goto [{url}]"),
            AgentAction::GoBack => f.write_str("go_back"),
            AgentAction::GoForward => f.write_str("go_forward"),
            AgentAction::NoteDown { text } => write!(f, "note_down [{text}]"),
            AgentAction::Answer { text } => write!(f, "###Answer: {text}"),
        }
    }
}

/// Renders the bracket form of `action`.
pub fn format_action(action: &AgentAction) -> String {
    action.to_string()
}

static CLICK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?i:click) \[(\d+)\]$").unwrap());
// Greedy tail: the text runs to the final closing bracket of the line.
static TYPE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i:type) \[(\d+)\] \[(.*)\]$").unwrap());
static SCROLL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i:scroll) \[(?i:(up|down))\]$").unwrap());
static GOTO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?i:goto) \[(\S+)\]$").unwrap());
static NOTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i:note_down) \[(.*)\]$").unwrap());
static ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^###\s*(?i:answer):? ?(.*)$").unwrap());

fn parse_line(line: &str) -> Option<AgentAction> {
    let mut line = line.trim();
    if let Some(inner) = line.strip_prefix('`') {
        line = inner.trim_end_matches('`').trim();
    }
    if line.eq_ignore_ascii_case("go_back") {
        return Some(AgentAction::GoBack);
    }
    if line.eq_ignore_ascii_case("go_forward") {
        return Some(AgentAction::GoForward);
    }
    if let Some(c) = CLICK.captures(line) {
        let id = c[1].parse().ok()?;
        return Some(AgentAction::Click { element_id: ElementId(id) });
    }
    if let Some(c) = TYPE.captures(line) {
        let id = c[1].parse().ok()?;
        return Some(AgentAction::Type {
            element_id: ElementId(id),
            text: c[2].to_string(),
        });
    }
    if let Some(c) = SCROLL.captures(line) {
        let direction = if c[1].eq_ignore_ascii_case("up") {
            Direction::Up
        } else {
            Direction::Down
        };
        return Some(AgentAction::Scroll { direction });
    }
    if let Some(c) = GOTO.captures(line) {
        return Some(AgentAction::Goto { url: c[1].to_string() });
    }
    if let Some(c) = NOTE.captures(line) {
        return Some(AgentAction::NoteDown { text: c[1].to_string() });
    }
    if let Some(c) = ANSWER.captures(line) {
        return Some(AgentAction::Answer { text: c[1].trim().to_string() });
    }
    None
}

/// Parses oracle output into an action. Multi-line input yields the first
/// line that matches the grammar.
pub fn parse_action(s: &str) -> Result<AgentAction, ParseError> {
    s.lines()
        .find_map(parse_line)
        .ok_or_else(|| ParseError::NoMatch(s.trim().to_string()))
}

impl std::str::FromStr for AgentAction {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

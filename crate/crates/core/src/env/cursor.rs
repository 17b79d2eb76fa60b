use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{AgentAction, Direction, ElementId};
use crate::types::{normalize_text, StateSnapshot};

use super::render::{render, row_of};
use super::world::{PageRow, SimWorld, SCROLL_STEP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("element {0} is not in the current viewport")]
    UnknownElement(ElementId),
    #[error("url {0} is not a known page")]
    UnknownUrl(String),
    #[error("go_back at the root of the navigation history")]
    NavUnderflow,
    #[error("go_forward with no forward history")]
    ForwardUnderflow,
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

/// The mutable browsing position of one task run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvCursor {
    pub current_url: String,
    pub viewport_top: usize,
    pub back: Vec<String>,
    pub forward: Vec<String>,
    /// Keyed by `"<canonical url>#<row>"`.
    pub typed_state: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub actions_executed: u32,
    /// Arrivals per canonical URL.
    pub visits: BTreeMap<String, u32>,
    /// URLs the agent has been to, the only legal `goto` targets besides the start.
    pub seen_urls: BTreeSet<String>,
}

impl EnvCursor {
    pub fn new(world: &SimWorld) -> EnvCursor {
        let start = world.start_url.clone();
        EnvCursor {
            current_url: start.clone(),
            viewport_top: 0,
            back: Vec::new(),
            forward: Vec::new(),
            typed_state: BTreeMap::new(),
            notes: Vec::new(),
            actions_executed: 0,
            visits: BTreeMap::from([(start.clone(), 1)]),
            seen_urls: BTreeSet::from([start]),
        }
    }

    pub fn visit_count(&self, world: &SimWorld) -> u32 {
        world
            .canonical(&self.current_url)
            .and_then(|c| self.visits.get(c).copied())
            .unwrap_or(1)
    }

    fn arrive(&mut self, world: &SimWorld, url: String) {
        let canonical = world.canonical(&url).expect("arrive at known url").to_string();
        *self.visits.entry(canonical).or_insert(0) += 1;
        self.seen_urls.insert(url.clone());
        self.current_url = url;
        self.viewport_top = 0;
    }

    fn navigate(&mut self, world: &SimWorld, url: String) {
        let from = std::mem::replace(&mut self.current_url, String::new());
        self.back.push(from);
        self.forward.clear();
        self.arrive(world, url);
    }
}

/// Renders the cursor's current viewport.
pub fn observe(cursor: &EnvCursor, world: &SimWorld) -> StateSnapshot {
    render(
        world,
        &cursor.current_url,
        cursor.visit_count(world),
        cursor.viewport_top,
        u64::from(cursor.actions_executed),
    )
}

fn visible_row<'w>(
    cursor: &EnvCursor,
    world: &'w SimWorld,
    id: ElementId,
) -> Result<(usize, &'w PageRow), EnvError> {
    let page = world
        .page(&cursor.current_url)
        .ok_or_else(|| EnvError::UnknownUrl(cursor.current_url.clone()))?;
    let row = row_of(world, &cursor.current_url, cursor.visit_count(world), id)
        .ok_or(EnvError::UnknownElement(id))?;
    let visible = cursor.viewport_top..cursor.viewport_top + super::world::VIEWPORT_HEIGHT;
    if !visible.contains(&row) {
        return Err(EnvError::UnknownElement(id));
    }
    Ok((row, &page.rows[row]))
}

/// Applies `action` and returns the resulting snapshot. Failed actions leave
/// the cursor untouched and do not count as executed.
pub fn execute(
    cursor: &mut EnvCursor,
    world: &SimWorld,
    action: &AgentAction,
) -> Result<StateSnapshot, EnvError> {
    action
        .validate()
        .map_err(|e| EnvError::InvalidAction(e.to_string()))?;
    match action {
        AgentAction::Click { element_id } => {
            let (_, row) = visible_row(cursor, world, *element_id)?;
            if let Some(target) = row.click_target() {
                cursor.navigate(world, target.to_string());
            }
        }
        AgentAction::Type { element_id, text } => {
            let (row_idx, row) = visible_row(cursor, world, *element_id)?;
            let canonical = world.canonical(&cursor.current_url).unwrap_or_default();
            cursor
                .typed_state
                .insert(format!("{canonical}#{row_idx}"), text.clone());
            if let PageRow::SearchBox {
                query,
                target,
                miss_target,
                ..
            } = row
            {
                let dest = if normalize_text(text) == normalize_text(query) {
                    target
                } else {
                    miss_target
                };
                cursor.navigate(world, dest.clone());
            }
        }
        AgentAction::Scroll { direction } => {
            let rows = world
                .page(&cursor.current_url)
                .map(|p| p.rows.len())
                .unwrap_or(0);
            let max_top = rows.saturating_sub(1);
            cursor.viewport_top = match direction {
                Direction::Up => cursor.viewport_top.saturating_sub(SCROLL_STEP),
                Direction::Down => (cursor.viewport_top + SCROLL_STEP).min(max_top),
            };
        }
        AgentAction::Goto { url } => {
            let known = world.canonical(url).is_some()
                && (cursor.seen_urls.contains(url) || *url == world.start_url);
            if !known {
                return Err(EnvError::UnknownUrl(url.clone()));
            }
            cursor.navigate(world, url.clone());
        }
        AgentAction::GoBack => {
            let prev = cursor.back.pop().ok_or(EnvError::NavUnderflow)?;
            let here = std::mem::take(&mut cursor.current_url);
            cursor.forward.push(here);
            cursor.arrive(world, prev);
        }
        AgentAction::GoForward => {
            let next = cursor.forward.pop().ok_or(EnvError::ForwardUnderflow)?;
            let here = std::mem::take(&mut cursor.current_url);
            cursor.back.push(here);
            cursor.arrive(world, next);
        }
        AgentAction::NoteDown { text } => cursor.notes.push(text.clone()),
        AgentAction::Answer { .. } => {}
    }
    cursor.actions_executed += 1;
    Ok(observe(cursor, world))
}

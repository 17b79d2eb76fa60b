//! A deterministic oracle that answers from a task's recorded solution,
//! optionally corrupted by seeded error injection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::{AgentAction, Direction};
use crate::env::{PageRow, SimWorld};
use crate::seed::{derive_seed, unit_draw};
use crate::types::{normalize_text, Hop, HopVia, Plan, StateSnapshot, Subtask, TaskSpec};

use super::{map_by_label, Completion, Objective, Oracle, OracleContext, OracleError};

/// Seeded corruption of first-attempt actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjection {
    /// Chance that a first attempt at a solution hop picks a wrong sibling.
    pub wrong_first_action_prob: f64,
    /// Whether the remedies of a corrupted first attempt include the right action.
    pub remedy_contains_truth: bool,
    pub rng_seed: u64,
}

impl Default for ErrorInjection {
    fn default() -> Self {
        Self {
            wrong_first_action_prob: 0.0,
            remedy_contains_truth: true,
            rng_seed: 0,
        }
    }
}

impl ErrorInjection {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(0.0..=1.0).contains(&self.wrong_first_action_prob) {
            return Err(OracleError::Config(format!(
                "wrong_first_action_prob {} outside [0, 1]",
                self.wrong_first_action_prob
            )));
        }
        Ok(())
    }

    /// Whether the first attempt at `hop` (1-based) from `source` is corrupted
    /// during plan revision `revision`.
    pub fn fires(&self, revision: u32, source: &str, hop: usize) -> bool {
        self.wrong_first_action_prob > 0.0
            && unit_draw(
                self.rng_seed,
                &["inject", &revision.to_string(), source, &hop.to_string()],
            ) < self.wrong_first_action_prob
    }

    /// Index in `0..n` of the wrong sibling chosen when [`Self::fires`] holds.
    pub fn wrong_choice(&self, revision: u32, source: &str, hop: usize, n: usize) -> usize {
        (derive_seed(
            self.rng_seed,
            &["wrong", &revision.to_string(), source, &hop.to_string()],
        ) % n as u64) as usize
    }

    /// Whether LATS-style sample `j` at `hop` duplicates the first sample.
    pub fn duplicates(&self, homogeneity: f64, revision: u32, source: &str, hop: usize, j: usize) -> bool {
        homogeneity > 0.0
            && unit_draw(
                self.rng_seed,
                &["homogeneity", &revision.to_string(), source, &hop.to_string(), &j.to_string()],
            ) < homogeneity
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    world: Arc<SimWorld>,
    injection: ErrorInjection,
    homogeneity: f64,
    revision: u32,
}

/// A clickable or typeable row of a hop's source page.
struct Candidate {
    row: usize,
    action: Option<AgentAction>,
}

impl ScriptedOracle {
    pub fn new(world: Arc<SimWorld>, injection: ErrorInjection) -> ScriptedOracle {
        ScriptedOracle {
            world,
            injection,
            homogeneity: 0.0,
            revision: 0,
        }
    }

    /// Probability that each extra sample in [`Oracle::sample_actions`]
    /// repeats the first one.
    pub fn with_homogeneity(mut self, homogeneity: f64) -> ScriptedOracle {
        self.homogeneity = homogeneity;
        self
    }

    pub fn injection(&self) -> &ErrorInjection {
        &self.injection
    }

    fn canonical(&self, url: &str) -> String {
        self.world.canonical(url).unwrap_or(url).to_string()
    }

    fn hop<'t>(task: &'t TaskSpec, index: usize) -> Option<&'t Hop> {
        index.checked_sub(1).and_then(|i| task.ground_truth.hops.get(i))
    }

    fn is_final_info(task: &TaskSpec, index: usize) -> bool {
        task.is_information_seeking() && index == task.ground_truth.hops.len()
    }

    fn truth_row(&self, hop: &Hop) -> Option<usize> {
        let page = self.world.page(&hop.source)?;
        page.rows.iter().position(|r| match (&hop.via, r) {
            (HopVia::Search { .. }, PageRow::SearchBox { .. }) => true,
            (HopVia::Link { label, .. }, PageRow::Link { label: l, utility: false, .. })
            | (HopVia::Link { label, .. }, PageRow::Button { label: l, .. }) => l == label,
            _ => false,
        })
    }

    /// Candidate rows at the hop's source in preference order: the solution,
    /// its look-alikes, then every other outgoing row.
    fn candidates(&self, hop: &Hop, s: &StateSnapshot) -> Vec<Candidate> {
        let Some(page) = self.world.page(&hop.source) else {
            return Vec::new();
        };
        let Some(truth) = self.truth_row(hop) else {
            return Vec::new();
        };
        let group = page.rows[truth].group();
        let eligible = |r: &PageRow| {
            !r.is_utility() && (r.click_target().is_some() || matches!(r, PageRow::SearchBox { .. }))
        };
        let mut order = vec![truth];
        order.extend((0..page.rows.len()).filter(|&i| {
            i != truth && group.is_some() && page.rows[i].group() == group && eligible(&page.rows[i])
        }));
        let rest: Vec<usize> = (0..page.rows.len())
            .filter(|&i| !order.contains(&i) && eligible(&page.rows[i]))
            .collect();
        order.extend(rest);
        order
            .into_iter()
            .map(|row| Candidate {
                row,
                action: self.action_for_row(&page.rows[row], hop, s),
            })
            .collect()
    }

    fn action_for_row(&self, row: &PageRow, hop: &Hop, s: &StateSnapshot) -> Option<AgentAction> {
        let el = s
            .elements
            .iter()
            .find(|e| e.role == row.role() && e.label == row.label())?;
        Some(match row {
            PageRow::SearchBox { query, .. } => {
                let text = match &hop.via {
                    HopVia::Search { query, .. } => query.clone(),
                    HopVia::Link { .. } => query.clone(),
                };
                AgentAction::Type {
                    element_id: el.element_id,
                    text,
                }
            }
            _ => AgentAction::Click {
                element_id: el.element_id,
            },
        })
    }

    fn scroll_toward(row: usize, s: &StateSnapshot) -> AgentAction {
        let direction = if row < s.viewport_top {
            Direction::Up
        } else {
            Direction::Down
        };
        AgentAction::Scroll { direction }
    }

    /// Canonical URLs that count as progress on hop `index`.
    fn accepted(&self, task: &TaskSpec, index: usize) -> Vec<String> {
        let Some(hop) = Self::hop(task, index) else {
            return Vec::new();
        };
        let page = self.world.page(&hop.source);
        let group = match &hop.via {
            HopVia::Link { group: Some(g), .. } => Some(g.as_str()),
            _ => None,
        };
        match (page, group) {
            (Some(page), Some(g)) => page
                .rows
                .iter()
                .filter(|r| r.group() == Some(g))
                .filter_map(|r| r.click_target())
                .map(|t| self.canonical(t))
                .collect(),
            _ => vec![hop.target.clone()],
        }
    }

    fn answer_noted(task: &TaskSpec, notes: &[String]) -> bool {
        let Some(key) = task.answer_key.as_deref() else {
            return false;
        };
        let key = normalize_text(key);
        notes.iter().any(|n| normalize_text(n).contains(&key))
    }

    fn task_complete(&self, task: &TaskSpec, notes: &[String], s: &StateSnapshot) -> bool {
        if task.is_information_seeking() {
            Self::answer_noted(task, notes)
        } else {
            self.canonical(&s.url) == task.ground_truth.goal_url
        }
    }

    fn visible_payload(&self, s: &StateSnapshot) -> Option<String> {
        let payload = self.world.page(&s.url)?.goal_payload.as_ref()?;
        s.elements
            .iter()
            .any(|e| &e.label == payload)
            .then(|| payload.clone())
    }

    fn step_description(&self, task: &TaskSpec, index: usize, hop: &Hop) -> String {
        let mut text = match &hop.via {
            HopVia::Link { label, group: None } => format!("Click on the '{label}' link"),
            HopVia::Link { group: Some(g), .. } => {
                format!("Click on one of the '{g}' entries and open the one that fits the task")
            }
            HopVia::Search { query, .. } => format!("Use the search bar to search for {query}"),
        };
        if Self::is_final_info(task, index) {
            let attribute = task
                .answer_key
                .as_deref()
                .and_then(|k| k.split(':').next())
                .unwrap_or("answer")
                .to_lowercase();
            text.push_str(&format!(" and note down the {attribute}"));
        }
        text
    }

    fn alternatives(
        &self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        first: &AgentAction,
    ) -> Vec<AgentAction> {
        let Some(hop) = Self::hop(ctx.task, subtask.index) else {
            return Vec::new();
        };
        if self.canonical(&s.url) != hop.source {
            return Vec::new();
        }
        let actions: Vec<AgentAction> = self
            .candidates(hop, s)
            .into_iter()
            .filter_map(|c| c.action)
            .collect();
        let Some(truth) = actions.first().cloned() else {
            return Vec::new();
        };
        if *first == truth {
            return actions[1..].to_vec();
        }
        let others = actions[1..].iter().filter(|a| *a != first).cloned();
        if self.injection.remedy_contains_truth {
            std::iter::once(truth).chain(others).collect()
        } else {
            others.collect()
        }
    }
}

impl Oracle for ScriptedOracle {
    fn gen_plan(
        &mut self,
        ctx: &OracleContext<'_>,
        s0: &StateSnapshot,
        revision: u32,
    ) -> Result<Plan, OracleError> {
        self.revision = revision;
        if self.task_complete(ctx.task, ctx.notes, s0) {
            return Ok(Plan::new(["Verify the current page and answer"], revision));
        }
        let steps: Vec<String> = ctx
            .task
            .ground_truth
            .hops
            .iter()
            .enumerate()
            .map(|(i, hop)| self.step_description(ctx.task, i + 1, hop))
            .collect();
        Ok(Plan::new(steps, revision))
    }

    fn gen_action(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
    ) -> Result<AgentAction, OracleError> {
        let task = ctx.task;
        let here = self.canonical(&s.url);
        if self.task_complete(task, ctx.notes, s) && task.is_information_seeking() {
            let text = ctx.notes.last().cloned().unwrap_or_default();
            return Ok(AgentAction::Answer { text: text.trim().to_string() });
        }
        if let Some(hop) = Self::hop(task, subtask.index).filter(|h| h.source == here) {
            let cands = self.candidates(hop, s);
            let Some(truth) = cands.first() else {
                return Ok(AgentAction::GoBack);
            };
            let Some(truth_action) = truth.action.clone() else {
                return Ok(Self::scroll_toward(truth.row, s));
            };
            let wrong: Vec<&AgentAction> = cands[1..].iter().filter_map(|c| c.action.as_ref()).collect();
            if !wrong.is_empty() && self.injection.fires(self.revision, &here, subtask.index) {
                let pick = self
                    .injection
                    .wrong_choice(self.revision, &here, subtask.index, wrong.len());
                return Ok(wrong[pick].clone());
            }
            return Ok(truth_action);
        }
        if Self::is_final_info(task, subtask.index) && here == task.ground_truth.goal_url {
            if let Some(payload) = self.visible_payload(s) {
                return Ok(AgentAction::NoteDown { text: payload });
            }
            if let Some(row) = self.world.page(&here).and_then(|p| p.payload_row()) {
                return Ok(Self::scroll_toward(row, s));
            }
        }
        Ok(AgentAction::GoBack)
    }

    fn gen_remedies(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        first: &AgentAction,
        r: usize,
    ) -> Result<Vec<AgentAction>, OracleError> {
        let mut alts = self.alternatives(ctx, subtask, s, first);
        alts.truncate(r);
        Ok(alts)
    }

    fn sample_actions(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        k: usize,
    ) -> Result<Vec<AgentAction>, OracleError> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let first = self.gen_action(ctx, subtask, s)?;
        let alts = self.alternatives(ctx, subtask, s, &first);
        let here = self.canonical(&s.url);
        let mut out = vec![first.clone()];
        for j in 1..k {
            let dup = self
                .injection
                .duplicates(self.homogeneity, self.revision, &here, subtask.index, j);
            out.push(match alts.get(j - 1) {
                Some(a) if !dup => a.clone(),
                _ => first.clone(),
            });
        }
        Ok(out)
    }

    fn eval_align(
        &mut self,
        ctx: &OracleContext<'_>,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
        subtask: &Subtask,
    ) -> Result<bool, OracleError> {
        let task = ctx.task;
        let i = subtask.index;
        let here = self.canonical(&pre.url);
        let on_goal = here == task.ground_truth.goal_url;
        Ok(match action {
            AgentAction::NoteDown { text } => {
                Self::is_final_info(task, i)
                    && on_goal
                    && task
                        .answer_key
                        .as_deref()
                        .is_some_and(|k| normalize_text(text).contains(&normalize_text(k)))
            }
            AgentAction::Answer { .. } => false,
            _ if self.canonical(&pre.url) == self.canonical(&post.url)
                && pre.viewport_top == post.viewport_top =>
            {
                false
            }
            AgentAction::Scroll { .. } => {
                let at_source = Self::hop(task, i).is_some_and(|h| h.source == here);
                self.canonical(&post.url) == here
                    && (at_source || (Self::is_final_info(task, i) && on_goal))
            }
            _ => self.accepted(task, i).contains(&self.canonical(&post.url)),
        })
    }

    fn eval_completed(
        &mut self,
        ctx: &OracleContext<'_>,
        objective: Objective<'_>,
        s: &StateSnapshot,
    ) -> Result<Completion, OracleError> {
        let task = ctx.task;
        let done = |b: bool| if b { Completion::Done } else { Completion::NotDone };
        let subtask = match objective {
            Objective::Task => return Ok(done(self.task_complete(task, ctx.notes, s))),
            Objective::Subtask(st) => st,
        };
        let i = subtask.index;
        let hops = &task.ground_truth.hops;
        if i > hops.len() {
            return Ok(done(self.task_complete(task, ctx.notes, s)));
        }
        if Self::is_final_info(task, i) {
            return Ok(done(Self::answer_noted(task, ctx.notes)));
        }
        let here = self.canonical(&s.url);
        if self.accepted(task, i).contains(&here) {
            return Ok(Completion::Done);
        }
        if hops.iter().skip(i + 1).any(|h| h.source == here) {
            return Ok(Completion::SkippedNonEssential);
        }
        Ok(Completion::NotDone)
    }

    fn describe_action(
        &mut self,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let target = action.element_id().and_then(|id| pre.element(id));
        let phrase = match (action, target) {
            (AgentAction::Click { .. }, Some(el)) => {
                format!("click on the {} '{}'", el.role.as_str(), el.label)
            }
            (AgentAction::Click { element_id }, None) => format!("click on element [{element_id}]"),
            (AgentAction::Type { text, .. }, Some(el)) => {
                format!("type '{text}' into the {} '{}'", el.role.as_str(), el.label)
            }
            (AgentAction::Type { element_id, text }, None) => {
                format!("type '{text}' into element [{element_id}]")
            }
            (AgentAction::Scroll { direction }, _) => format!("scroll {}", direction.as_str()),
            (AgentAction::Goto { url }, _) => format!("go to {url}"),
            (AgentAction::GoBack, _) => "go back to the previous page".to_string(),
            (AgentAction::GoForward, _) => "go forward to the next page".to_string(),
            (AgentAction::NoteDown { text }, _) => format!("note down '{text}'"),
            (AgentAction::Answer { text }, _) => format!("answer '{text}'"),
        };
        let learned = self.visible_payload(post).unwrap_or_default();
        Ok(format!("The action is to {phrase}; learned: {learned}"))
    }

    fn summarize_state(&mut self, s: &StateSnapshot, limit: usize) -> Result<String, OracleError> {
        if s.observation.chars().count() <= limit {
            return Ok(s.observation.clone());
        }
        let payload = self.world.page(&s.url).and_then(|p| p.goal_payload.clone());
        let lines: Vec<&str> = s.observation.lines().collect();
        // 0 = payload, 1 = header, 2 = interactive element, otherwise dropped.
        let rank = |idx: usize| -> Option<u8> {
            if idx < 3 {
                return Some(1);
            }
            let el = s.elements.get(idx - 3)?;
            if payload.as_deref() == Some(el.label.as_str()) {
                Some(0)
            } else if el.role.is_interactive() {
                Some(2)
            } else {
                None
            }
        };
        let mut order: Vec<(u8, usize)> = (0..lines.len())
            .filter_map(|i| rank(i).map(|r| (r, i)))
            .collect();
        order.sort();
        let mut keep = vec![false; lines.len()];
        let mut used = 0;
        for (_, i) in order {
            let cost = lines[i].chars().count() + usize::from(used > 0);
            if used + cost <= limit {
                keep[i] = true;
                used += cost;
            }
        }
        Ok(lines
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(l, _)| *l)
            .collect::<Vec<_>>()
            .join("\n"))
    }

    fn map_element(
        &mut self,
        action: &AgentAction,
        old: &StateSnapshot,
        new: &StateSnapshot,
    ) -> Result<AgentAction, OracleError> {
        map_by_label(action, old, new)
    }

    fn deliver_answer(
        &mut self,
        ctx: &OracleContext<'_>,
        _s: &StateSnapshot,
    ) -> Result<String, OracleError> {
        ctx.notes
            .last()
            .map(|n| format!("###Answer: {}", n.trim()))
            .ok_or(OracleError::NoAnswerAvailable)
    }
}

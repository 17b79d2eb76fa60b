//! A recursive depth-first search over the world graph, restricted to the
//! subtree an aligned-only explorer may enter. It predicts every action the
//! engine executes for a task, without using the engine or the oracles.

use introspect_core::env::{PageRow, SimWorld, SCROLL_STEP, VIEWPORT_HEIGHT};
use introspect_core::oracle::ErrorInjection;
use introspect_core::types::{normalize_text, HopVia, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Purpose {
    Frame,
    Backtrack,
}

/// One executed action: why, and the canonical URL it ended on.
pub type Visit = (Purpose, String);

#[derive(Debug, Clone, PartialEq)]
enum Step {
    /// Click or type; identified by the row's role and label.
    Follow { key: (String, String), dest: String },
    GoBack,
    Scroll { down: bool },
    Note,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pos {
    url: String,
    top: usize,
}

enum Stop {
    Success,
    Budget,
}

pub struct Outcome {
    pub success: bool,
    pub used: u32,
    pub visits: Vec<Visit>,
}

struct Model<'a> {
    world: &'a SimWorld,
    task: &'a TaskSpec,
    inj: ErrorInjection,
    remedies: usize,
    limit: u32,
    used: u32,
    pos: Pos,
    back: Vec<String>,
    notes: Vec<String>,
    visits: Vec<Visit>,
}

pub fn predict(world: &SimWorld, task: &TaskSpec, inj: ErrorInjection, remedies: usize, limit: u32) -> Outcome {
    let mut m = Model {
        world,
        task,
        inj,
        remedies,
        limit,
        used: 0,
        pos: Pos {
            url: world.start_url.clone(),
            top: 0,
        },
        back: Vec::new(),
        notes: Vec::new(),
        visits: Vec::new(),
    };
    let start = m.pos.clone();
    let success = matches!(m.expand(&start, 1), Err(Stop::Success));
    Outcome {
        success,
        used: m.used,
        visits: m.visits,
    }
}

impl Model<'_> {
    fn canon(&self, url: &str) -> String {
        self.world.canonical(url).expect("url in world").to_string()
    }

    fn depth(&self) -> usize {
        self.task.ground_truth.hops.len()
    }

    fn final_info(&self, i: usize) -> bool {
        self.task.answer_key.is_some() && i == self.depth()
    }

    fn rows(&self, url: &str) -> &[PageRow] {
        &self.world.page(url).expect("page").rows
    }

    /// Pages that count as having made hop `i` (1-based): the target, or any
    /// member of the target's look-alike group.
    fn accepted(&self, i: usize) -> Vec<String> {
        let hop = &self.task.ground_truth.hops[i - 1];
        match &hop.via {
            HopVia::Link { group: Some(g), .. } => self
                .rows(&hop.source)
                .iter()
                .filter_map(|r| match r {
                    PageRow::Link { target, group: Some(h), .. } if h == g => Some(self.canon(target)),
                    PageRow::Button { target: Some(target), group: Some(h), .. } if h == g => {
                        Some(self.canon(target))
                    }
                    _ => None,
                })
                .collect(),
            _ => vec![hop.target.clone()],
        }
    }

    fn follow_of(row: &PageRow) -> Option<Step> {
        let (role, label, dest) = match row {
            PageRow::Link { label, target, utility: false, .. } => ("link", label, target.clone()),
            PageRow::Button { label, target: Some(t), .. } => ("button", label, t.clone()),
            PageRow::SearchBox { label, target, .. } => ("textbox", label, target.clone()),
            _ => return None,
        };
        Some(Step::Follow {
            key: (role.to_string(), label.clone()),
            dest,
        })
    }

    /// Children of a node in exploration order, before deduplication.
    fn children(&self, at: &Pos, i: usize) -> Vec<Step> {
        let here = self.canon(&at.url);
        let hop = &self.task.ground_truth.hops[i - 1];
        if here == hop.source {
            let rows = self.rows(&here);
            let truth = rows
                .iter()
                .position(|r| match (&hop.via, r) {
                    (HopVia::Search { .. }, PageRow::SearchBox { .. }) => true,
                    (HopVia::Link { label, .. }, PageRow::Link { label: l, utility: false, .. }) => l == label,
                    (HopVia::Link { label, .. }, PageRow::Button { label: l, .. }) => l == label,
                    _ => false,
                })
                .expect("solution row present");
            assert!(truth < VIEWPORT_HEIGHT, "solution rows sit above the fold in these worlds");
            let group = rows[truth].group();
            let mut order = vec![truth];
            for (j, r) in rows.iter().enumerate() {
                if j != truth && group.is_some() && r.group() == group && Self::follow_of(r).is_some() {
                    order.push(j);
                }
            }
            for (j, r) in rows.iter().enumerate() {
                if !order.contains(&j) && Self::follow_of(r).is_some() {
                    order.push(j);
                }
            }
            let steps: Vec<Step> = order.iter().map(|&j| Self::follow_of(&rows[j]).unwrap()).collect();
            let wrong = &steps[1..];
            let first = if !wrong.is_empty() && self.inj.fires(0, &here, i) {
                wrong[self.inj.wrong_choice(0, &here, i, wrong.len())].clone()
            } else {
                steps[0].clone()
            };
            let mut alts: Vec<Step> = if first == steps[0] {
                steps[1..].to_vec()
            } else {
                let others = steps[1..].iter().filter(|s| **s != first).cloned();
                if self.inj.remedy_contains_truth {
                    std::iter::once(steps[0].clone()).chain(others).collect()
                } else {
                    others.collect()
                }
            };
            alts.truncate(self.remedies);
            let mut out = vec![first];
            for a in alts {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
            return out;
        }
        if self.final_info(i) && here == self.task.ground_truth.goal_url {
            let page = self.world.page(&here).unwrap();
            let payload = page.goal_payload.as_ref().unwrap();
            let r = page
                .rows
                .iter()
                .position(|row| matches!(row, PageRow::Text { text } if text == payload))
                .unwrap();
            if at.top <= r && r < at.top + VIEWPORT_HEIGHT {
                return vec![Step::Note];
            }
            return vec![Step::Scroll { down: r >= at.top }];
        }
        vec![Step::GoBack]
    }

    fn spend(&mut self) -> Result<(), Stop> {
        if self.used >= self.limit {
            return Err(Stop::Budget);
        }
        self.used += 1;
        Ok(())
    }

    fn navigate(&mut self, url: String) {
        let here = std::mem::replace(&mut self.pos.url, url);
        self.back.push(here);
        self.pos.top = 0;
    }

    fn record(&mut self, purpose: Purpose) {
        let url = self.canon(&self.pos.url);
        self.visits.push((purpose, url));
    }

    fn expand(&mut self, at: &Pos, i: usize) -> Result<(), Stop> {
        for step in self.children(at, i) {
            self.run(at, i, step)?;
        }
        Ok(())
    }

    fn run(&mut self, at: &Pos, i: usize, step: Step) -> Result<(), Stop> {
        if self.pos != *at {
            if self.pos.url != at.url {
                self.spend()?;
                self.navigate(at.url.clone());
                self.record(Purpose::Backtrack);
            }
            assert_eq!(self.pos.top, at.top, "nodes revisited mid-page do not occur here");
        }
        // A go_back with nowhere to go fails without spending.
        if step == Step::GoBack && self.back.is_empty() {
            return Ok(());
        }
        self.spend()?;
        let pre = self.pos.clone();
        match &step {
            Step::Follow { dest, .. } => self.navigate(dest.clone()),
            Step::GoBack => {
                let prev = self.back.pop().unwrap();
                self.pos = Pos { url: prev, top: 0 };
            }
            Step::Scroll { down } => {
                let max_top = self.rows(&pre.url).len().saturating_sub(1);
                self.pos.top = if *down {
                    (pre.top + SCROLL_STEP).min(max_top)
                } else {
                    pre.top.saturating_sub(SCROLL_STEP)
                };
            }
            Step::Note => {
                let page = self.world.page(&pre.url).unwrap();
                self.notes.push(page.goal_payload.clone().unwrap());
            }
        }
        self.record(Purpose::Frame);

        let here = self.canon(&pre.url);
        let post = self.canon(&self.pos.url);
        let goal = &self.task.ground_truth.goal_url;
        let aligned = match step {
            Step::Note => {
                let key = normalize_text(self.task.answer_key.as_deref().unwrap_or(""));
                self.final_info(i)
                    && here == *goal
                    && self.notes.last().is_some_and(|n| normalize_text(n).contains(&key))
            }
            _ if here == post && pre.top == self.pos.top => false,
            Step::Scroll { .. } => {
                here == post
                    && (self.task.ground_truth.hops[i - 1].source == here || (self.final_info(i) && here == *goal))
            }
            _ => self.accepted(i).contains(&post),
        };
        if !aligned {
            return Ok(());
        }
        let complete = match &self.task.answer_key {
            Some(key) => {
                let key = normalize_text(key);
                self.notes.iter().any(|n| normalize_text(n).contains(&key))
            }
            None => post == *goal,
        };
        if complete {
            return Err(Stop::Success);
        }
        let mut next = i;
        while next <= self.depth() {
            if self.final_info(next) {
                break;
            }
            let later_source = self.task.ground_truth.hops.iter().skip(next + 1).any(|h| h.source == post);
            if !(self.accepted(next).contains(&post) || later_source) {
                break;
            }
            next += 1;
        }
        if next > self.depth() {
            return Ok(());
        }
        let here_now = self.pos.clone();
        self.expand(&here_now, next)
    }
}

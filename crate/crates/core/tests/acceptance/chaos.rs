//! An oracle that answers at random, to shake out engine paths a scripted
//! oracle never takes: failing actions, bogus ids, spurious completions,
//! transient parse errors.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use introspect_core::action::{AgentAction, Direction, ElementId};
use introspect_core::env::SimWorld;
use introspect_core::oracle::{map_by_label, Completion, Objective, Oracle, OracleContext, OracleError};
use introspect_core::types::{Plan, StateSnapshot, Subtask};

pub struct Chaos {
    pub rng: ChaCha8Rng,
    pub world: Arc<SimWorld>,
}

impl Chaos {
    fn hiccup(&mut self, p: f64) -> Result<(), OracleError> {
        if self.rng.gen_bool(p) {
            Err(OracleError::Parse("garbled".into()))
        } else {
            Ok(())
        }
    }

    fn action(&mut self, s: &StateSnapshot) -> AgentAction {
        let roll = self.rng.gen_range(0..100);
        let pick = s.elements.choose(&mut self.rng).map(|e| e.element_id);
        match roll {
            0..=49 => AgentAction::Click {
                element_id: pick.unwrap_or(ElementId(self.rng.gen_range(0..5000))),
            },
            50..=54 => AgentAction::Click {
                element_id: ElementId(self.rng.gen_range(0..5000)),
            },
            55..=59 => AgentAction::Type {
                element_id: pick.unwrap_or(ElementId(1)),
                text: "Search".into(),
            },
            60..=69 => AgentAction::Scroll {
                direction: if self.rng.gen_bool(0.5) { Direction::Up } else { Direction::Down },
            },
            70..=79 => AgentAction::GoBack,
            80..=82 => AgentAction::GoForward,
            83..=90 => {
                let urls: Vec<&String> = self.world.pages.keys().collect();
                let url = if self.rng.gen_bool(0.8) {
                    (*urls.choose(&mut self.rng).unwrap()).clone()
                } else {
                    "http://elsewhere.test/".into()
                };
                AgentAction::Goto { url }
            }
            91..=97 => AgentAction::NoteDown { text: "seen".into() },
            _ => AgentAction::Answer { text: "guess".into() },
        }
    }
}

impl Oracle for Chaos {
    fn gen_plan(&mut self, _: &OracleContext<'_>, _: &StateSnapshot, revision: u32) -> Result<Plan, OracleError> {
        let n = self.rng.gen_range(1..=4);
        Ok(Plan::new((1..=n).map(|i| format!("step {i}")), revision))
    }

    fn gen_action(&mut self, _: &OracleContext<'_>, _: &Subtask, s: &StateSnapshot) -> Result<AgentAction, OracleError> {
        self.hiccup(0.05)?;
        Ok(self.action(s))
    }

    fn gen_remedies(
        &mut self,
        _: &OracleContext<'_>,
        _: &Subtask,
        s: &StateSnapshot,
        _: &AgentAction,
        r: usize,
    ) -> Result<Vec<AgentAction>, OracleError> {
        self.hiccup(0.05)?;
        let n = self.rng.gen_range(0..=r);
        Ok((0..n).map(|_| self.action(s)).collect())
    }

    fn eval_align(
        &mut self,
        _: &OracleContext<'_>,
        _: &StateSnapshot,
        _: &AgentAction,
        _: &StateSnapshot,
        _: &Subtask,
    ) -> Result<bool, OracleError> {
        self.hiccup(0.03)?;
        Ok(self.rng.gen_bool(0.6))
    }

    fn eval_completed(&mut self, _: &OracleContext<'_>, objective: Objective<'_>, _: &StateSnapshot) -> Result<Completion, OracleError> {
        self.hiccup(0.03)?;
        Ok(match objective {
            Objective::Task if self.rng.gen_bool(0.04) => Completion::Done,
            Objective::Task => Completion::NotDone,
            Objective::Subtask(_) => *[Completion::NotDone, Completion::Done, Completion::SkippedNonEssential]
                .choose(&mut self.rng)
                .unwrap(),
        })
    }

    fn describe_action(&mut self, _: &StateSnapshot, _: &AgentAction, _: &StateSnapshot) -> Result<String, OracleError> {
        Ok("The action is to act".into())
    }

    fn summarize_state(&mut self, s: &StateSnapshot, limit: usize) -> Result<String, OracleError> {
        Ok(s.observation.chars().take(limit).collect())
    }

    fn map_element(&mut self, a: &AgentAction, old: &StateSnapshot, new: &StateSnapshot) -> Result<AgentAction, OracleError> {
        if self.rng.gen_bool(0.1) {
            return Err(OracleError::ElementNotFound("lost".into()));
        }
        map_by_label(a, old, new)
    }

    fn deliver_answer(&mut self, _: &OracleContext<'_>, _: &StateSnapshot) -> Result<String, OracleError> {
        Ok("###Answer: guess".into())
    }
}

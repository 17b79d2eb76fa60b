//! The environment contract and SimWeb, a seeded simulated web site.

mod cursor;
mod generate;
mod render;
mod world;

use std::sync::Arc;

pub use cursor::{execute, observe, EnvCursor, EnvError};
pub use generate::{generate_world, GenerationError, WorldProfile, DEFAULT_DEPTH_WEIGHTS};
pub use render::{element_ids, render, row_of, state_id};
pub use world::{Page, PageRow, SimWorld, WorldError, SCROLL_STEP, VIEWPORT_HEIGHT};

use crate::action::AgentAction;
use crate::types::StateSnapshot;

/// Something an agent can observe and act upon.
pub trait Environment {
    fn observe(&self) -> StateSnapshot;
    fn execute(&mut self, action: &AgentAction) -> Result<StateSnapshot, EnvError>;
    /// Returns to the start state for a fresh trial.
    fn reset(&mut self);
    fn actions_executed(&self) -> u32;
    fn notes(&self) -> &[String];
}

/// A [`SimWorld`] plus the cursor of one task run.
#[derive(Debug, Clone)]
pub struct SimEnv {
    world: Arc<SimWorld>,
    cursor: EnvCursor,
}

impl SimEnv {
    pub fn new(world: Arc<SimWorld>) -> SimEnv {
        let cursor = EnvCursor::new(&world);
        SimEnv { world, cursor }
    }

    pub fn world(&self) -> &Arc<SimWorld> {
        &self.world
    }

    pub fn cursor(&self) -> &EnvCursor {
        &self.cursor
    }
}

impl Environment for SimEnv {
    fn observe(&self) -> StateSnapshot {
        observe(&self.cursor, &self.world)
    }

    fn execute(&mut self, action: &AgentAction) -> Result<StateSnapshot, EnvError> {
        execute(&mut self.cursor, &self.world, action)
    }

    fn reset(&mut self) {
        self.cursor = EnvCursor::new(&self.world);
    }

    fn actions_executed(&self) -> u32 {
        self.cursor.actions_executed
    }

    fn notes(&self) -> &[String] {
        &self.cursor.notes
    }
}

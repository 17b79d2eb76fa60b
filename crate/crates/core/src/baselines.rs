//! Comparison strategies expressed over the same engine, environment and
//! oracle contracts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{run_task, EngineConfig, Expansion, TaskResult};
use crate::env::Environment;
use crate::oracle::Oracle;
use crate::types::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Anticipatory reflection: remedies, backtracking and plan revision.
    Ar,
    /// One plan executed step by step, one trial.
    PlanAct,
    /// Step-by-step execution with plan revision between trials.
    PlanActReflexion,
    /// Stack search whose children are independent action samples.
    LatsLike,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Ar,
        StrategyKind::PlanAct,
        StrategyKind::PlanActReflexion,
        StrategyKind::LatsLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Ar => "ar",
            StrategyKind::PlanAct => "plan_act",
            StrategyKind::PlanActReflexion => "plan_act_reflexion",
            StrategyKind::LatsLike => "lats_like",
        }
    }

    /// The engine configuration this strategy runs with, derived from `base`.
    /// `k` overrides the LATS-like sample count, which defaults to R + 1.
    pub fn configure(self, base: &EngineConfig, k: Option<usize>) -> EngineConfig {
        let mut cfg = base.clone();
        match self {
            StrategyKind::Ar => cfg.expansion = Expansion::Reflective,
            StrategyKind::PlanAct => {
                cfg.expansion = Expansion::Reflective;
                cfg.remedies = 0;
                cfg.budget.max_trials = 1;
            }
            StrategyKind::PlanActReflexion => {
                cfg.expansion = Expansion::Reflective;
                cfg.remedies = 0;
            }
            StrategyKind::LatsLike => {
                cfg.expansion = Expansion::Sampled {
                    k: k.unwrap_or(base.remedies + 1),
                };
            }
        }
        cfg
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                format!("unknown strategy '{s}' (expected ar, plan_act, plan_act_reflexion or lats_like)")
            })
    }
}

/// Sequential plan execution without remedies; `with_revision` re-plans
/// after failed trials up to the trial limit.
pub fn run_plan_act(
    task: &TaskSpec,
    env: &mut dyn Environment,
    oracle: &mut dyn Oracle,
    cfg: &EngineConfig,
    with_revision: bool,
) -> TaskResult {
    let kind = if with_revision {
        StrategyKind::PlanActReflexion
    } else {
        StrategyKind::PlanAct
    };
    run_task(task, env, oracle, &kind.configure(cfg, None))
}

/// Stack search over `k` sampled actions per expansion.
pub fn run_lats_like(
    task: &TaskSpec,
    env: &mut dyn Environment,
    oracle: &mut dyn Oracle,
    cfg: &EngineConfig,
    k: usize,
) -> TaskResult {
    run_task(task, env, oracle, &StrategyKind::LatsLike.configure(cfg, Some(k)))
}

pub fn run_strategy(
    kind: StrategyKind,
    task: &TaskSpec,
    env: &mut dyn Environment,
    oracle: &mut dyn Oracle,
    cfg: &EngineConfig,
    k: Option<usize>,
) -> TaskResult {
    run_task(task, env, oracle, &kind.configure(cfg, k))
}

//! Oracle backed by an OpenAI-compatible chat-completion endpoint.

use std::sync::{Arc, LazyLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::action::{format_action, parse_action, AgentAction, ElementId};
use crate::types::{HistoryEntry, Plan, StateSnapshot, Subtask};

use super::prompts::{PromptKind, PromptSet};
use super::{Completion, Objective, Oracle, OracleContext, OracleError};

pub const ENV_API_KEY: &str = "OPENAI_API_KEY";
pub const ENV_BASE_URL: &str = "OPENAI_BASE_URL";
pub const ENV_MODEL: &str = "OPENAI_MODEL";

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
const DEFAULT_MODEL: &str = "gpt-4-0613";
const EMPTY: &str = "N/A";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Http(String),
    #[error("endpoint returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

/// Sends one chat conversation and returns the assistant reply. Shared by
/// concurrent task runs.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    pub api_key: String,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Substituted for `{webarena_root}`.
    pub webarena_root: String,
    pub website_intro: String,
    pub instruction: String,
    /// Observations longer than this many characters are summarized first.
    pub summarize_threshold: usize,
}

impl LiveConfig {
    pub fn new(api_key: impl Into<String>) -> LiveConfig {
        LiveConfig {
            api_key: api_key.into(),
            base_url: DEFAULT_BASE_URL.into(),
            model: DEFAULT_MODEL.into(),
            temperature: 1.0,
            max_tokens: 512,
            timeout_secs: 120,
            webarena_root: "http://sim.local".into(),
            website_intro: "SimWeb, a simulated site with shopping, account and admin pages.".into(),
            instruction: "Use only the listed actions and give exactly one action per step.".into(),
            summarize_threshold: 6000,
        }
    }

    /// Reads the API key (required), base URL and model from the process environment.
    pub fn from_env() -> Result<LiveConfig, OracleError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<LiveConfig, OracleError> {
        let key = get(ENV_API_KEY)
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| OracleError::Config(format!("{ENV_API_KEY} is not set")))?;
        let mut cfg = LiveConfig::new(key);
        if let Some(url) = get(ENV_BASE_URL).filter(|u| !u.trim().is_empty()) {
            cfg.base_url = url.trim_end_matches('/').to_string();
        }
        if let Some(model) = get(ENV_MODEL).filter(|m| !m.trim().is_empty()) {
            cfg.model = model;
        }
        Ok(cfg)
    }
}

/// Blocking HTTP client for `POST {base_url}/chat/completions`.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
}

impl HttpTransport {
    pub fn new(cfg: &LiveConfig) -> HttpTransport {
        HttpTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(cfg.timeout_secs))
                .build(),
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key: cfg.api_key.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        let resp = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let value: serde_json::Value = match resp {
            Ok(r) => r
                .into_json()
                .map_err(|e| TransportError::Decode(e.to_string()))?,
            Err(ureq::Error::Status(code, r)) => {
                return Err(TransportError::Status {
                    code,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(e) => return Err(TransportError::Http(e.to_string())),
        };
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))
    }
}

/// History as a numbered list of actions with their descriptions.
pub fn render_history(history: &[HistoryEntry]) -> String {
    if history.is_empty() {
        return EMPTY.into();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, h)| format!("{}. {}: {}", i + 1, format_action(&h.action), h.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_notes(notes: &[String]) -> String {
    if notes.is_empty() {
        return EMPTY.into();
    }
    notes
        .iter()
        .map(|n| format!("- {n}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_failed_plans(plans: &[Plan]) -> String {
    if plans.is_empty() {
        return EMPTY.into();
    }
    plans
        .iter()
        .map(|p| format!("Failed plan (revision {}):\n{}", p.revision, p.numbered()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_step(subtask: &Subtask) -> String {
    format!("{}. {}", subtask.index, subtask.description)
}

static NUMBERED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\*\*)?(\d+)[.)](?:\*\*)?\s+(.+?)\s*$").unwrap());
static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

fn parse_plan(reply: &str) -> Option<Vec<String>> {
    let steps: Vec<String> = reply
        .lines()
        .filter_map(|l| NUMBERED.captures(l).map(|c| c[2].to_string()))
        .collect();
    (!steps.is_empty()).then_some(steps)
}

/// The last YES or NO in the reply, case-insensitive.
fn parse_yes_no(reply: &str) -> Option<bool> {
    YES_NO
        .find_iter(reply)
        .last()
        .map(|m| m.as_str().eq_ignore_ascii_case("yes"))
}

pub struct LiveOracle {
    transport: Arc<dyn ChatTransport>,
    prompts: PromptSet,
    cfg: LiveConfig,
}

impl LiveOracle {
    pub fn new(transport: Arc<dyn ChatTransport>, cfg: LiveConfig) -> LiveOracle {
        LiveOracle {
            transport,
            prompts: PromptSet::builtin(),
            cfg,
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> LiveOracle {
        self.prompts = prompts;
        self
    }

    fn render(&self, kind: PromptKind, vars: &[(&str, &str)]) -> Result<String, OracleError> {
        self.prompts
            .render(kind, vars)
            .map_err(|e| OracleError::Config(e.to_string()))
    }

    /// Sends `messages`, retrying once when `parse` rejects the reply.
    fn ask<T>(
        &self,
        messages: &[ChatMessage],
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(T, String), OracleError> {
        let mut last = String::new();
        for _ in 0..2 {
            last = self
                .transport
                .complete(messages)
                .map_err(|e| OracleError::Transport(e.to_string()))?;
            if let Some(v) = parse(&last) {
                return Ok((v, last));
            }
        }
        Err(OracleError::Parse(last))
    }

    fn observation(&mut self, s: &StateSnapshot) -> Result<String, OracleError> {
        if s.observation.chars().count() > self.cfg.summarize_threshold {
            let limit = self.cfg.summarize_threshold;
            self.summarize_state(s, limit)
        } else {
            Ok(s.observation.clone())
        }
    }

    pub fn plan_prompt(&mut self, ctx: &OracleContext<'_>, s0: &StateSnapshot) -> Result<String, OracleError> {
        let obs = self.observation(s0)?;
        self.render(
            PromptKind::Plan,
            &[
                ("webarena_root", &self.cfg.webarena_root),
                ("WEBSITE INTRO", &self.cfg.website_intro),
                ("INSTRUCTION", &self.cfg.instruction),
                ("STARTING SCREEN DESCRIPTION", &obs),
                ("TASK", &ctx.task.goal),
                ("FAILED PLAN", &render_failed_plans(ctx.failed_plans)),
                ("HISTORY", &render_history(ctx.history)),
            ],
        )
    }

    pub fn action_prompt(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let obs = self.observation(s)?;
        self.render(
            PromptKind::Action,
            &[
                ("webarena_root", &self.cfg.webarena_root),
                ("TASK", &ctx.task.goal),
                ("PLAN", &ctx.plan.numbered()),
                ("HISTORY", &render_history(ctx.history)),
                ("STEP", &render_step(subtask)),
                ("OBS", &obs),
                ("NOTES", &render_notes(ctx.notes)),
            ],
        )
    }

    pub fn align_prompt(
        &mut self,
        ctx: &OracleContext<'_>,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
        subtask: &Subtask,
    ) -> Result<String, OracleError> {
        let (obs1, obs2) = (self.observation(pre)?, self.observation(post)?);
        self.render(
            PromptKind::Align,
            &[
                ("STEP", &render_step(subtask)),
                ("PLAN", &ctx.plan.numbered()),
                ("ACTION", &format_action(action)),
                ("OBS1", &obs1),
                ("OBS2", &obs2),
            ],
        )
    }

    pub fn completed_prompt(
        &mut self,
        ctx: &OracleContext<'_>,
        objective: Objective<'_>,
        s: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let obs = self.observation(s)?;
        let task = match objective {
            Objective::Task => ctx.task.goal.clone(),
            Objective::Subtask(st) => st.description.clone(),
        };
        self.render(
            PromptKind::Completed,
            &[
                ("TASK", &task),
                ("PLAN", &ctx.plan.numbered()),
                ("HISTORY", &render_history(ctx.history)),
                ("NOTES", &render_notes(ctx.notes)),
                ("OBS", &obs),
            ],
        )
    }

    pub fn answer_prompt(&mut self, ctx: &OracleContext<'_>, s: &StateSnapshot) -> Result<String, OracleError> {
        let obs = self.observation(s)?;
        self.render(
            PromptKind::Answer,
            &[
                ("TASK", &ctx.task.goal),
                ("HISTORY", &render_history(ctx.history)),
                ("NOTES", &render_notes(ctx.notes)),
                ("OBS", &obs),
            ],
        )
    }

    pub fn map_prompt(
        &mut self,
        id: ElementId,
        old: &StateSnapshot,
        new: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let (obs1, obs2) = (self.observation(old)?, self.observation(new)?);
        self.render(
            PromptKind::Map,
            &[("element_id", &id.to_string()), ("OBS1", &obs1), ("OBS2", &obs2)],
        )
    }
}

impl Oracle for LiveOracle {
    fn gen_plan(
        &mut self,
        ctx: &OracleContext<'_>,
        s0: &StateSnapshot,
        revision: u32,
    ) -> Result<Plan, OracleError> {
        let prompt = self.plan_prompt(ctx, s0)?;
        let (steps, _) = self.ask(&[ChatMessage::user(prompt)], parse_plan)?;
        Ok(Plan::new(steps, revision))
    }

    fn gen_action(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
    ) -> Result<AgentAction, OracleError> {
        let prompt = self.action_prompt(ctx, subtask, s)?;
        let (action, _) = self.ask(&[ChatMessage::user(prompt)], |r| parse_action(r).ok())?;
        Ok(action)
    }

    fn gen_remedies(
        &mut self,
        ctx: &OracleContext<'_>,
        subtask: &Subtask,
        s: &StateSnapshot,
        first: &AgentAction,
        r: usize,
    ) -> Result<Vec<AgentAction>, OracleError> {
        if r == 0 {
            return Ok(Vec::new());
        }
        let follow_up = self.render(PromptKind::Remedy, &[])?;
        let mut messages = vec![
            ChatMessage::user(self.action_prompt(ctx, subtask, s)?),
            ChatMessage::assistant(format_action(first)),
        ];
        let mut out = Vec::with_capacity(r);
        for _ in 0..r {
            messages.push(ChatMessage::user(follow_up.clone()));
            let (action, _) = self.ask(&messages, |reply| parse_action(reply).ok())?;
            messages.push(ChatMessage::assistant(format_action(&action)));
            out.push(action);
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
        let prompt = self.align_prompt(ctx, pre, action, post, subtask)?;
        Ok(self.ask(&[ChatMessage::user(prompt)], parse_yes_no)?.0)
    }

    fn eval_completed(
        &mut self,
        ctx: &OracleContext<'_>,
        objective: Objective<'_>,
        s: &StateSnapshot,
    ) -> Result<Completion, OracleError> {
        let prompt = self.completed_prompt(ctx, objective, s)?;
        let (yes, _) = self.ask(&[ChatMessage::user(prompt)], parse_yes_no)?;
        Ok(if yes { Completion::Done } else { Completion::NotDone })
    }

    fn describe_action(
        &mut self,
        pre: &StateSnapshot,
        action: &AgentAction,
        post: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let (obs1, obs2) = (self.observation(pre)?, self.observation(post)?);
        let prompt = self.render(
            PromptKind::Describe,
            &[("ACTION", &format_action(action)), ("OBS1", &obs1), ("OBS2", &obs2)],
        )?;
        let (text, _) = self.ask(&[ChatMessage::user(prompt)], |r| {
            let joined = r.split_whitespace().collect::<Vec<_>>().join(" ");
            (!joined.is_empty()).then_some(joined)
        })?;
        Ok(text)
    }

    fn summarize_state(&mut self, s: &StateSnapshot, limit: usize) -> Result<String, OracleError> {
        if s.observation.chars().count() <= limit {
            return Ok(s.observation.clone());
        }
        let limit_text = limit.to_string();
        let prompt = self.render(
            PromptKind::Summarize,
            &[("OBS", &s.observation), ("LIMIT", &limit_text)],
        )?;
        let (text, _) = self.ask(&[ChatMessage::user(prompt)], |r| {
            let t = r.trim();
            (!t.is_empty()).then(|| t.chars().take(limit).collect::<String>())
        })?;
        Ok(text)
    }

    fn map_element(
        &mut self,
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
        let prompt = self.map_prompt(id, old, new)?;
        let (new_id, reply) = self.ask(&[ChatMessage::user(prompt)], |r| {
            INTEGER.find(r).and_then(|m| m.as_str().parse::<u32>().ok())
        })?;
        let new_id = ElementId(new_id);
        if new.element(new_id).is_none() {
            return Err(OracleError::ElementNotFound(reply.trim().to_string()));
        }
        Ok(action.with_element(new_id))
    }

    fn deliver_answer(
        &mut self,
        ctx: &OracleContext<'_>,
        s: &StateSnapshot,
    ) -> Result<String, OracleError> {
        let prompt = self.answer_prompt(ctx, s)?;
        let (answer, _) = self.ask(&[ChatMessage::user(prompt)], |r| {
            if let Some(pos) = r.find("###Answer") {
                return r[pos..].lines().next().map(|l| l.trim().to_string());
            }
            let first = r.lines().map(str::trim).find(|l| !l.is_empty())?;
            Some(format!("###Answer: {first}"))
        })?;
        Ok(answer)
    }
}

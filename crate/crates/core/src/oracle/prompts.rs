//! Prompt templates with single-pass `{NAME}` substitution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PromptKind {
    Plan,
    Action,
    Align,
    Completed,
    Answer,
    Map,
    /// Follow-up turn asking for an alternative action.
    Remedy,
    Describe,
    Summarize,
}

impl PromptKind {
    pub const ALL: [PromptKind; 9] = [
        PromptKind::Plan,
        PromptKind::Action,
        PromptKind::Align,
        PromptKind::Completed,
        PromptKind::Answer,
        PromptKind::Map,
        PromptKind::Remedy,
        PromptKind::Describe,
        PromptKind::Summarize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Plan => "plan",
            PromptKind::Action => "action",
            PromptKind::Align => "align",
            PromptKind::Completed => "completed",
            PromptKind::Answer => "answer",
            PromptKind::Map => "map",
            PromptKind::Remedy => "remedy",
            PromptKind::Describe => "describe",
            PromptKind::Summarize => "summarize",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }

    /// Placeholders the template must contain, and the only ones it may.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            PromptKind::Plan => &[
                "webarena_root",
                "WEBSITE INTRO",
                "INSTRUCTION",
                "STARTING SCREEN DESCRIPTION",
                "TASK",
                "FAILED PLAN",
                "HISTORY",
            ],
            PromptKind::Action => &[
                "webarena_root",
                "TASK",
                "PLAN",
                "HISTORY",
                "STEP",
                "OBS",
                "NOTES",
            ],
            PromptKind::Align => &["STEP", "PLAN", "ACTION", "OBS1", "OBS2"],
            PromptKind::Completed => &["TASK", "PLAN", "HISTORY", "NOTES", "OBS"],
            PromptKind::Answer => &["TASK", "HISTORY", "NOTES", "OBS"],
            PromptKind::Map => &["element_id", "OBS1", "OBS2"],
            PromptKind::Remedy => &[],
            PromptKind::Describe => &["ACTION", "OBS1", "OBS2"],
            PromptKind::Summarize => &["OBS", "LIMIT"],
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            PromptKind::Plan => include_str!("../../templates/plan.txt"),
            PromptKind::Action => include_str!("../../templates/action.txt"),
            PromptKind::Align => include_str!("../../templates/align.txt"),
            PromptKind::Completed => include_str!("../../templates/completed.txt"),
            PromptKind::Answer => include_str!("../../templates/answer.txt"),
            PromptKind::Map => include_str!("../../templates/map.txt"),
            PromptKind::Remedy => include_str!("../../templates/remedy.txt"),
            PromptKind::Describe => include_str!("../../templates/describe.txt"),
            PromptKind::Summarize => include_str!("../../templates/summarize.txt"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template {file} lacks placeholder {{{name}}}")]
    MissingPlaceholder { file: String, name: String },
    #[error("template {file} has unknown placeholder {{{name}}}")]
    UnknownPlaceholder { file: String, name: String },
    #[error("no value supplied for {{{0}}}")]
    MissingValue(String),
}

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_ ]*)\}").unwrap());

/// Replaces each `{NAME}` whose name is in `allowed` with its value from
/// `vars`, in one left-to-right pass; substituted text is never rescanned.
pub fn render_template(
    template: &str,
    allowed: &[&str],
    vars: &[(&str, &str)],
) -> Result<String, PromptError> {
    if let Some(name) = allowed.iter().find(|n| !vars.iter().any(|(k, _)| k == *n)) {
        return Err(PromptError::MissingValue(name.to_string()));
    }
    Ok(PLACEHOLDER
        .replace_all(template, |c: &Captures<'_>| {
            let name = &c[1];
            match vars.iter().find(|(k, _)| *k == name && allowed.contains(k)) {
                Some((_, v)) => v.to_string(),
                None => c[0].to_string(),
            }
        })
        .into_owned())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<PromptKind, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    /// The templates compiled into the crate.
    pub fn builtin() -> PromptSet {
        PromptSet {
            templates: PromptKind::ALL
                .iter()
                .map(|&k| (k, k.builtin().to_string()))
                .collect(),
        }
    }

    /// Loads `<dir>/<name>.txt` for every kind and validates each.
    pub fn load_dir(dir: &Path) -> Result<PromptSet, PromptError> {
        let mut templates = BTreeMap::new();
        for kind in PromptKind::ALL {
            let file = kind.file_name();
            let text = fs::read_to_string(dir.join(&file))
                .map_err(|source| PromptError::Io { file: file.clone(), source })?;
            templates.insert(kind, text);
        }
        let set = PromptSet { templates };
        set.validate()?;
        Ok(set)
    }

    pub fn template(&self, kind: PromptKind) -> &str {
        &self.templates[&kind]
    }

    /// Checks that every template holds exactly its declared placeholders.
    pub fn validate(&self) -> Result<(), PromptError> {
        for (&kind, text) in &self.templates {
            let file = kind.file_name();
            let found: Vec<&str> = PLACEHOLDER
                .captures_iter(text)
                .map(|c| c.get(1).unwrap().as_str())
                .collect();
            if let Some(name) = found.iter().find(|n| !kind.placeholders().contains(n)) {
                return Err(PromptError::UnknownPlaceholder {
                    file,
                    name: name.to_string(),
                });
            }
            if let Some(name) = kind.placeholders().iter().find(|n| !found.contains(n)) {
                return Err(PromptError::MissingPlaceholder {
                    file,
                    name: name.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn render(&self, kind: PromptKind, vars: &[(&str, &str)]) -> Result<String, PromptError> {
        render_template(self.template(kind), kind.placeholders(), vars)
    }
}

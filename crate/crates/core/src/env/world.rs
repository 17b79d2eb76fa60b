use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Role;

/// Rows visible at once; the text stand-in for a 1280x720 screen.
pub const VIEWPORT_HEIGHT: usize = 24;
/// Rows moved by one scroll action.
pub const SCROLL_STEP: usize = 24;

fn is_false(b: &bool) -> bool {
    !*b
}

/// One line of a page's accessibility tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PageRow {
    Heading {
        text: String,
    },
    Text {
        text: String,
    },
    Link {
        label: String,
        target: String,
        /// Links sharing a group look interchangeable to a reader.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
        /// Site chrome such as "Home", never part of a task's candidate set.
        #[serde(default, skip_serializing_if = "is_false")]
        utility: bool,
    },
    Button {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
    },
    /// Typing `query` (case/space-insensitive) submits to `target`; any other
    /// text lands on `miss_target`.
    SearchBox {
        label: String,
        query: String,
        target: String,
        miss_target: String,
    },
}

impl PageRow {
    pub fn role(&self) -> Role {
        match self {
            PageRow::Heading { .. } => Role::Heading,
            PageRow::Text { .. } => Role::StaticText,
            PageRow::Link { .. } => Role::Link,
            PageRow::Button { .. } => Role::Button,
            PageRow::SearchBox { .. } => Role::Textbox,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            PageRow::Heading { text } | PageRow::Text { text } => text,
            PageRow::Link { label, .. }
            | PageRow::Button { label, .. }
            | PageRow::SearchBox { label, .. } => label,
        }
    }

    /// Where a click on this row leads.
    pub fn click_target(&self) -> Option<&str> {
        match self {
            PageRow::Link { target, .. } => Some(target),
            PageRow::Button { target, .. } => target.as_deref(),
            _ => None,
        }
    }

    pub fn group(&self) -> Option<&str> {
        match self {
            PageRow::Link { group, .. } | PageRow::Button { group, .. } => group.as_deref(),
            _ => None,
        }
    }

    pub fn is_utility(&self) -> bool {
        matches!(self, PageRow::Link { utility: true, .. })
    }

    /// Every URL reachable from this row by click or type.
    pub fn targets(&self) -> Vec<&str> {
        match self {
            PageRow::Link { target, .. } => vec![target],
            PageRow::Button {
                target: Some(t), ..
            } => vec![t],
            PageRow::SearchBox {
                target,
                miss_target,
                ..
            } => vec![target, miss_target],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub url: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    pub rows: Vec<PageRow>,
    /// The fact an information-seeking task must find on this page.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_payload: Option<String>,
}

impl Page {
    /// Row index holding the goal payload text.
    pub fn payload_row(&self) -> Option<usize> {
        let payload = self.goal_payload.as_deref()?;
        self.rows
            .iter()
            .position(|r| matches!(r, PageRow::Text { text } if text == payload))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("start url {0} is not a page")]
    MissingStart(String),
    #[error("page {page} links to unknown url {target}")]
    DanglingLink { page: String, target: String },
    #[error("url {0} is declared twice")]
    DuplicateUrl(String),
    #[error("page {0} is unreachable from the start url")]
    Unreachable(String),
    #[error("page key {key} does not match its url {url}")]
    KeyMismatch { key: String, url: String },
}

#[derive(Deserialize)]
struct WorldRepr {
    seed: u64,
    start_url: String,
    #[serde(default = "default_true")]
    id_permute_on_revisit: bool,
    pages: BTreeMap<String, Page>,
}

fn default_true() -> bool {
    true
}

/// A deterministic simulated web site. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WorldRepr")]
pub struct SimWorld {
    pub seed: u64,
    pub start_url: String,
    pub id_permute_on_revisit: bool,
    pub pages: BTreeMap<String, Page>,
    #[serde(skip)]
    aliases: BTreeMap<String, String>,
}

impl TryFrom<WorldRepr> for SimWorld {
    type Error = WorldError;

    fn try_from(r: WorldRepr) -> Result<Self, Self::Error> {
        for (key, page) in &r.pages {
            if key != &page.url {
                return Err(WorldError::KeyMismatch {
                    key: key.clone(),
                    url: page.url.clone(),
                });
            }
        }
        SimWorld::new(
            r.seed,
            r.start_url,
            r.pages.into_values().collect(),
            r.id_permute_on_revisit,
        )
    }
}

impl SimWorld {
    pub fn new(
        seed: u64,
        start_url: impl Into<String>,
        pages: Vec<Page>,
        id_permute_on_revisit: bool,
    ) -> Result<SimWorld, WorldError> {
        let mut map = BTreeMap::new();
        let mut aliases = BTreeMap::new();
        for page in pages {
            for alias in &page.aliases {
                if aliases.insert(alias.clone(), page.url.clone()).is_some() {
                    return Err(WorldError::DuplicateUrl(alias.clone()));
                }
            }
            let url = page.url.clone();
            if map.insert(url.clone(), page).is_some() {
                return Err(WorldError::DuplicateUrl(url));
            }
        }
        if let Some(alias) = aliases.keys().find(|a| map.contains_key(*a)) {
            return Err(WorldError::DuplicateUrl(alias.clone()));
        }
        let world = SimWorld {
            seed,
            start_url: start_url.into(),
            id_permute_on_revisit,
            pages: map,
            aliases,
        };
        world.validate()?;
        Ok(world)
    }

    /// Canonical URL for `url`, resolving aliases.
    pub fn canonical<'a>(&'a self, url: &'a str) -> Option<&'a str> {
        if self.pages.contains_key(url) {
            Some(url)
        } else {
            self.aliases.get(url).map(String::as_str)
        }
    }

    pub fn page(&self, url: &str) -> Option<&Page> {
        self.canonical(url).and_then(|c| self.pages.get(c))
    }

    /// Every URL that renders the same page as `url`, canonical first.
    pub fn equivalent_urls(&self, url: &str) -> Vec<String> {
        match self.page(url) {
            Some(p) => std::iter::once(p.url.clone())
                .chain(p.aliases.iter().cloned())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Canonical URLs directly reachable from `url` by click or type.
    pub fn successors(&self, url: &str) -> Vec<String> {
        let Some(page) = self.page(url) else {
            return Vec::new();
        };
        page.rows
            .iter()
            .flat_map(|r| r.targets())
            .filter_map(|t| self.canonical(t).map(str::to_string))
            .collect()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !self.pages.contains_key(&self.start_url) {
            return Err(WorldError::MissingStart(self.start_url.clone()));
        }
        for page in self.pages.values() {
            for row in &page.rows {
                for t in row.targets() {
                    if self.canonical(t).is_none() {
                        return Err(WorldError::DanglingLink {
                            page: page.url.clone(),
                            target: t.to_string(),
                        });
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.start_url.clone()]);
        seen.insert(self.start_url.clone());
        while let Some(u) = queue.pop_front() {
            for next in self.successors(&u) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        if let Some(lost) = self.pages.keys().find(|u| !seen.contains(*u)) {
            return Err(WorldError::Unreachable(lost.clone()));
        }
        Ok(())
    }

    /// Hop distance from the start page to every reachable page.
    pub fn bfs_depths(&self) -> BTreeMap<String, usize> {
        let mut depth = BTreeMap::new();
        depth.insert(self.start_url.clone(), 0);
        let mut queue = VecDeque::from([self.start_url.clone()]);
        while let Some(u) = queue.pop_front() {
            let d = depth[&u];
            for next in self.successors(&u) {
                if !depth.contains_key(&next) {
                    depth.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
        depth
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json(s: &str) -> Result<SimWorld, serde_json::Error> {
        serde_json::from_str(s)
    }
}

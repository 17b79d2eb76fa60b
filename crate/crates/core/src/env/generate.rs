//! Seeded generation of SimWeb worlds together with their task suites.
//!
//! Tasks are carved into a growing page tree: each task samples a solution
//! depth, walks down from the home page reusing or creating children, and
//! ends on its goal page. Tree links plus "Home" links keep the shortest
//! solution equal to the carved depth.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::keyed_rng;
use crate::types::{ActionBudget, GroundTruth, Hop, HopVia, TaskSpec};

use super::world::{Page, PageRow, SimWorld, VIEWPORT_HEIGHT};

/// Solution-depth weights: most tasks need 4-9 hops, with a thin tail out to 20.
pub const DEFAULT_DEPTH_WEIGHTS: [(usize, f64); 20] = [
    (1, 1.0),
    (2, 2.5),
    (3, 5.0),
    (4, 9.0),
    (5, 11.0),
    (6, 12.0),
    (7, 11.0),
    (8, 9.5),
    (9, 8.0),
    (10, 6.5),
    (11, 5.0),
    (12, 4.0),
    (13, 3.0),
    (14, 2.5),
    (15, 2.0),
    (16, 1.6),
    (17, 1.3),
    (18, 1.1),
    (19, 0.9),
    (20, 0.7),
];

const MAX_ATTEMPTS: u32 = 500;
const MAX_BRANCHING: u32 = 12;
const SITE: &str = "simweb";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldProfile {
    pub tasks: usize,
    /// Upper bound on generated pages; generation retries until it holds.
    pub max_pages: Option<usize>,
    /// Inclusive range of children per internal page, decoys included.
    pub branching: [u32; 2],
    /// `(depth, weight)` pairs the task depths are drawn from.
    pub depth_weights: Vec<(usize, f64)>,
    /// Share of information-seeking tasks.
    pub info_share: f64,
    /// Chance that a newly created solution link gets look-alike siblings.
    pub decoy_prob: f64,
    pub max_decoys: u32,
    /// Chance that a new hop is reached through a search box instead of a link.
    pub search_prob: f64,
    pub alias_prob: f64,
    /// Chance that an answer page pushes its payload below the first viewport.
    pub long_page_prob: f64,
    /// Chance of walking into an existing child rather than creating one.
    pub reuse_prob: f64,
    pub id_permute_on_revisit: bool,
    pub budget: ActionBudget,
    pub host: String,
}

impl Default for WorldProfile {
    fn default() -> Self {
        Self {
            tasks: 200,
            max_pages: None,
            branching: [2, 4],
            depth_weights: DEFAULT_DEPTH_WEIGHTS.to_vec(),
            info_share: 0.5,
            decoy_prob: 0.35,
            max_decoys: 2,
            search_prob: 0.1,
            alias_prob: 0.2,
            long_page_prob: 0.3,
            reuse_prob: 0.6,
            id_permute_on_revisit: true,
            budget: ActionBudget::default(),
            host: "http://sim.local".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no world within {max_pages} pages after {attempts} attempts")]
    Unsatisfiable { max_pages: usize, attempts: u32 },
}

impl WorldProfile {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::InvalidProfile(m.to_string()));
        let [lo, hi] = self.branching;
        if lo == 0 || lo > hi || hi > MAX_BRANCHING {
            return bad("branching must satisfy 1 <= min <= max <= 12");
        }
        if self.tasks == 0 {
            return bad("tasks must be at least 1");
        }
        if self.depth_weights.is_empty()
            || self
                .depth_weights
                .iter()
                .any(|&(d, w)| d == 0 || !(w >= 0.0 && w.is_finite()))
            || self.depth_weights.iter().map(|&(_, w)| w).sum::<f64>() <= 0.0
        {
            return bad("depth_weights needs positive depths and non-negative weights with a positive sum");
        }
        for (name, p) in [
            ("info_share", self.info_share),
            ("decoy_prob", self.decoy_prob),
            ("search_prob", self.search_prob),
            ("alias_prob", self.alias_prob),
            ("long_page_prob", self.long_page_prob),
            ("reuse_prob", self.reuse_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.host.is_empty() || self.host.chars().any(char::is_whitespace) {
            return bad("host must be a non-empty url prefix");
        }
        self.budget
            .validate()
            .map_err(|e| GenerationError::InvalidProfile(e.to_string()))
    }

    /// The depth distribution as normalized probabilities, sorted by depth.
    pub fn depth_distribution(&self) -> Vec<(usize, f64)> {
        let total: f64 = self.depth_weights.iter().map(|&(_, w)| w).sum();
        let mut dist: Vec<(usize, f64)> = self
            .depth_weights
            .iter()
            .map(|&(d, w)| (d, w / total))
            .collect();
        dist.sort_by_key(|&(d, _)| d);
        dist
    }
}

const STEMS: &[&str] = &[
    "My Account", "Order History", "Electronics", "Headphones", "Garden Tools", "Home Decor",
    "Picture Frames", "Kitchen", "Sports", "Outdoor Gear", "Books", "Toys", "Beauty",
    "Health", "Grocery", "Office Supplies", "Pet Supplies", "Clothing", "Shoes", "Jewelry",
    "Reviews", "Wish List", "Address Book", "Payment Methods", "Newsletter", "Returns",
    "Shipping Info", "Gift Cards", "Deals", "New Arrivals", "Best Sellers", "Clearance",
    "Forums", "Subscriptions", "Notifications", "Settings", "Projects", "Issues",
    "Merge Requests", "Milestones", "Members", "Repository", "Wiki", "Snippets", "Pipelines",
    "Reports", "Catalog", "Customers", "Marketing", "Content", "Stores", "Invoices",
    "Shipments", "Credit Memos", "Transactions", "Coupons", "Search Terms", "Tax Rules",
    "Cameras", "Laptops", "Tablets", "Monitors", "Printers", "Storage", "Audio",
    "Furniture", "Lighting", "Bedding", "Bath", "Cookware", "Appliances", "Tools",
    "View Order", "Product Details", "Comments", "Submissions", "Messages", "Saved Items",
];

const ATTRIBUTES: &[&str] = &[
    "Color configuration",
    "Order total",
    "Shipping status",
    "Tracking number",
    "Warranty period",
    "Seller rating",
    "Release date",
    "Model number",
];

const COLORS: &[&str] = &[
    "walnut brown", "matte black", "brushed silver", "ivory white", "navy blue",
    "forest green", "burgundy", "natural oak", "charcoal grey", "sunset orange",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Normal,
    Decoy,
    NoResults,
}

#[derive(Debug, Clone)]
enum Via {
    Root,
    Link {
        label: String,
        group: Option<String>,
        use_alias: bool,
    },
    Search {
        query: String,
    },
}

#[derive(Debug, Clone)]
struct Node {
    url: String,
    title: String,
    stem: String,
    kind: NodeKind,
    capacity: usize,
    children: Vec<usize>,
    via: Via,
    alias: Option<String>,
    /// `(attribute, full payload text, long page)`.
    payload: Option<(String, String, bool)>,
    search_miss: Option<usize>,
}

impl Node {
    fn used(&self, nodes: &[Node]) -> usize {
        self.children
            .iter()
            .filter(|&&c| nodes[c].kind != NodeKind::NoResults)
            .count()
    }
}

struct Builder<'p> {
    profile: &'p WorldProfile,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn new_node(&mut self, title: String, stem: String, kind: NodeKind, via: Via) -> usize {
        let id = self.nodes.len();
        let slug: String = title
            .to_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect::<String>()
            .split('-')
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("-");
        let host = &self.profile.host;
        let url = if id == 0 {
            format!("{host}/index.html")
        } else {
            format!("{host}/{slug}-{id}.html")
        };
        let [lo, hi] = self.profile.branching;
        let capacity = if kind == NodeKind::Normal {
            self.rng.gen_range(lo..=hi) as usize
        } else {
            0
        };
        let alias = (kind == NodeKind::Normal && id != 0 && self.rng.gen_bool(self.profile.alias_prob))
            .then(|| format!("{host}/index.php?page={id}"));
        self.nodes.push(Node {
            url,
            title,
            stem,
            kind,
            capacity,
            children: Vec::new(),
            via,
            alias,
            payload: None,
            search_miss: None,
        });
        id
    }

    fn fresh_stem(&mut self, parent: usize) -> String {
        let taken: Vec<&str> = self.nodes[parent]
            .children
            .iter()
            .map(|&c| self.nodes[c].stem.as_str())
            .collect();
        let free: Vec<&str> = STEMS.iter().copied().filter(|s| !taken.contains(s)).collect();
        free.choose(&mut self.rng).expect("stem vocabulary exhausted").to_string()
    }

    /// Adds a real child to `parent`, possibly with look-alike decoys.
    fn create_child(&mut self, parent: usize) -> usize {
        let stem = self.fresh_stem(parent);
        let free = self.nodes[parent].capacity - self.nodes[parent].used(&self.nodes);
        let has_search = self.nodes[parent].search_miss.is_some();
        if !has_search && self.rng.gen_bool(self.profile.search_prob) {
            let child = self.new_node(
                stem.clone(),
                stem.clone(),
                NodeKind::Normal,
                Via::Search { query: stem.clone() },
            );
            let miss = self.new_node("No results".into(), String::new(), NodeKind::NoResults, Via::Root);
            self.nodes[parent].children.push(child);
            self.nodes[parent].children.push(miss);
            self.nodes[parent].search_miss = Some(miss);
            return child;
        }
        let decoys = if free > 1 && self.rng.gen_bool(self.profile.decoy_prob) {
            let cap = (free - 1).min(self.profile.max_decoys as usize);
            if cap == 0 { 0 } else { self.rng.gen_range(1..=cap) }
        } else {
            0
        };
        let use_alias = self.rng.gen_bool(0.5);
        if decoys == 0 {
            let child = self.new_node(
                stem.clone(),
                stem.clone(),
                NodeKind::Normal,
                Via::Link {
                    label: stem.clone(),
                    group: None,
                    use_alias,
                },
            );
            self.nodes[parent].children.push(child);
            return child;
        }
        let mut numbers: Vec<u32> = (100..1000).collect();
        numbers.shuffle(&mut self.rng);
        let truth_pos = self.rng.gen_range(0..=decoys);
        let mut truth = None;
        for (i, n) in numbers.into_iter().take(decoys + 1).enumerate() {
            let label = format!("{stem} #{n}");
            let kind = if i == truth_pos { NodeKind::Normal } else { NodeKind::Decoy };
            let via = Via::Link {
                label: label.clone(),
                group: Some(stem.clone()),
                use_alias: kind == NodeKind::Normal && use_alias,
            };
            let child = self.new_node(label, stem.clone(), kind, via);
            self.nodes[parent].children.push(child);
            if i == truth_pos {
                truth = Some(child);
            }
        }
        truth.expect("truth child created")
    }

    fn carve(&mut self, depth: usize) -> Vec<usize> {
        let mut path = vec![0];
        let mut cur = 0;
        for _ in 0..depth {
            let carvable: Vec<usize> = self.nodes[cur]
                .children
                .iter()
                .copied()
                .filter(|&c| self.nodes[c].kind == NodeKind::Normal)
                .collect();
            let can_create = self.nodes[cur].used(&self.nodes) < self.nodes[cur].capacity;
            let create = can_create
                && (carvable.is_empty() || !self.rng.gen_bool(self.profile.reuse_prob));
            cur = if create {
                self.create_child(cur)
            } else {
                *carvable.choose(&mut self.rng).expect("a full page has a real child")
            };
            path.push(cur);
        }
        path
    }

    fn fill(&mut self) {
        let internal: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Normal && !self.nodes[i].children.is_empty())
            .collect();
        for i in internal {
            while self.nodes[i].used(&self.nodes) < self.nodes[i].capacity {
                let stem = self.fresh_stem(i);
                let child = self.new_node(
                    stem.clone(),
                    stem.clone(),
                    NodeKind::Normal,
                    Via::Link {
                        label: stem,
                        group: None,
                        use_alias: false,
                    },
                );
                self.nodes[i].children.push(child);
            }
        }
    }

    fn payload_for(&mut self, node: usize) -> (String, String) {
        if let Some((attr, text, _)) = &self.nodes[node].payload {
            return (attr.clone(), text.clone());
        }
        let attr = ATTRIBUTES.choose(&mut self.rng).unwrap().to_string();
        let value = match attr.as_str() {
            "Color configuration" => COLORS.choose(&mut self.rng).unwrap().to_string(),
            "Order total" => format!("${}.{:02}", self.rng.gen_range(5..900), self.rng.gen_range(0..100)),
            "Shipping status" => ["delivered", "in transit", "processing", "returned"]
                .choose(&mut self.rng)
                .unwrap()
                .to_string(),
            "Warranty period" => format!("{} months", self.rng.gen_range(3..61)),
            "Seller rating" => format!("{}.{} out of 5", self.rng.gen_range(1..5), self.rng.gen_range(0..10)),
            "Release date" => format!(
                "{}-{:02}-{:02}",
                self.rng.gen_range(2015..2024),
                self.rng.gen_range(1..13),
                self.rng.gen_range(1..29)
            ),
            _ => format!("{}-{:05}", ["AX", "BT", "QZ", "LM"].choose(&mut self.rng).unwrap(), self.rng.gen_range(0..100000)),
        };
        let text = format!("{attr}: {value} (ref {node})");
        let long = self.rng.gen_bool(self.profile.long_page_prob);
        self.nodes[node].payload = Some((attr.clone(), text.clone(), long));
        (attr, text)
    }

    fn link_target(&self, child: usize) -> String {
        let n = &self.nodes[child];
        match (&n.via, &n.alias) {
            (Via::Link { use_alias: true, .. }, Some(alias)) => alias.clone(),
            _ => n.url.clone(),
        }
    }

    fn rows(&mut self, i: usize) -> Vec<PageRow> {
        let root_url = self.nodes[0].url.clone();
        let node = self.nodes[i].clone();
        let mut rows = vec![PageRow::Heading { text: node.title.clone() }];
        if i != 0 {
            rows.push(PageRow::Link {
                label: "Home".into(),
                target: root_url,
                group: None,
                utility: true,
            });
        }
        if node.kind == NodeKind::NoResults {
            rows.push(PageRow::Text {
                text: "Your search returned no results.".into(),
            });
            return rows;
        }
        for &c in &node.children {
            let child = &self.nodes[c];
            match &child.via {
                Via::Link { label, group: Some(g), .. } => rows.push(PageRow::Button {
                    label: label.clone(),
                    target: Some(self.link_target(c)),
                    group: Some(g.clone()),
                }),
                Via::Link { label, group: None, .. } => rows.push(PageRow::Link {
                    label: label.clone(),
                    target: self.link_target(c),
                    group: None,
                    utility: false,
                }),
                Via::Search { query } => rows.push(PageRow::SearchBox {
                    label: "Search".into(),
                    query: query.clone(),
                    target: child.url.clone(),
                    miss_target: self.nodes[node.search_miss.expect("search box has a miss page")].url.clone(),
                }),
                Via::Root => {}
            }
        }
        let filler = |k: usize| PageRow::Text {
            text: format!("{} details, line {k}", node.title),
        };
        match &node.payload {
            Some((_, text, long)) => {
                let before = if *long {
                    let min = VIEWPORT_HEIGHT.saturating_sub(rows.len()) + 1;
                    self.rng.gen_range(min..min + 2 * VIEWPORT_HEIGHT)
                } else {
                    self.rng.gen_range(1..4)
                };
                rows.extend((1..=before).map(filler));
                rows.push(PageRow::Text { text: text.clone() });
                let after = self.rng.gen_range(0..4);
                rows.extend((before + 1..=before + after).map(filler));
            }
            None => {
                let n = self.rng.gen_range(1..4);
                rows.extend((1..=n).map(filler));
            }
        }
        rows
    }
}

fn hop_between(nodes: &[Node], parent: usize, child: usize) -> Hop {
    let via = match &nodes[child].via {
        Via::Link { label, group, .. } => HopVia::Link {
            label: label.clone(),
            group: group.clone(),
        },
        Via::Search { query } => HopVia::Search {
            label: "Search".into(),
            query: query.clone(),
        },
        Via::Root => unreachable!("the root is never a hop target"),
    };
    Hop {
        source: nodes[parent].url.clone(),
        target: nodes[child].url.clone(),
        via,
    }
}

struct Draft {
    path: Vec<usize>,
    info: Option<(String, String)>,
}

fn attempt(profile: &WorldProfile, seed: u64, attempt: u32) -> (SimWorld, Vec<TaskSpec>) {
    let mut b = Builder {
        profile,
        rng: keyed_rng(seed, &["world", &attempt.to_string()]),
        nodes: Vec::new(),
    };
    b.new_node("Home".into(), String::new(), NodeKind::Normal, Via::Root);

    let dist = profile.depth_distribution();
    let weights = WeightedIndex::new(dist.iter().map(|&(_, w)| w)).expect("validated weights");
    let mut drafts = Vec::with_capacity(profile.tasks);
    for _ in 0..profile.tasks {
        let depth = dist[weights.sample(&mut b.rng)].0;
        let info = b.rng.gen_bool(profile.info_share);
        let path = b.carve(depth);
        let info = info.then(|| b.payload_for(*path.last().unwrap()));
        drafts.push(Draft { path, info });
    }
    b.fill();

    let mut pages = Vec::with_capacity(b.nodes.len());
    for i in 0..b.nodes.len() {
        let rows = b.rows(i);
        let n = &b.nodes[i];
        pages.push(Page {
            url: n.url.clone(),
            title: n.title.clone(),
            aliases: n.alias.iter().cloned().collect(),
            rows,
            goal_payload: n.payload.as_ref().map(|(_, t, _)| t.clone()),
        });
    }
    let world = SimWorld::new(seed, b.nodes[0].url.clone(), pages, profile.id_permute_on_revisit)
        .expect("generated world is well formed");

    let tasks = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let goal = *d.path.last().unwrap();
            let hops: Vec<Hop> = d.path.windows(2).map(|w| hop_between(&b.nodes, w[0], w[1])).collect();
            let title = &b.nodes[goal].title;
            let (goal_text, answer_key) = match d.info {
                Some((attr, text)) => (
                    format!("What is the {} shown on the '{title}' page?", attr.to_lowercase()),
                    Some(text),
                ),
                None => (format!("Navigate to the '{title}' page."), None),
            };
            TaskSpec {
                task_id: format!("task-{i:04}"),
                goal: goal_text,
                site: SITE.into(),
                answer_key,
                budget: profile.budget,
                ground_truth: GroundTruth {
                    goal_url: b.nodes[goal].url.clone(),
                    equivalent_urls: world.equivalent_urls(&b.nodes[goal].url),
                    depth: hops.len(),
                    hops,
                },
            }
        })
        .collect();
    (world, tasks)
}

/// Generates a world and its tasks. Identical `(seed, profile)` always yields
/// identical output.
pub fn generate_world(
    seed: u64,
    profile: &WorldProfile,
) -> Result<(SimWorld, Vec<TaskSpec>), GenerationError> {
    profile.validate()?;
    for a in 0..MAX_ATTEMPTS {
        let (world, tasks) = attempt(profile, seed, a);
        match profile.max_pages {
            Some(max) if world.pages.len() > max => continue,
            _ => return Ok((world, tasks)),
        }
    }
    Err(GenerationError::Unsatisfiable {
        max_pages: profile.max_pages.unwrap_or(usize::MAX),
        attempts: MAX_ATTEMPTS,
    })
}

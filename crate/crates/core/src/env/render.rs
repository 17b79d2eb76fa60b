//! Viewport rendering and per-visit element id assignment.

use rand::seq::index::sample;

use crate::action::ElementId;
use crate::seed::{derive_seed, keyed_rng};
use crate::types::{Element, StateSnapshot};

use super::world::{SimWorld, VIEWPORT_HEIGHT};

const ID_BASE: u32 = 100;
const ID_SPACE: usize = 9900;

/// Ids for every row of a page on a given visit: distinct, drawn from
/// `100..10000` by a stream keyed on `(seed, url, visit)`.
pub fn element_ids(seed: u64, canonical_url: &str, visit: u32, rows: usize) -> Vec<ElementId> {
    assert!(rows <= ID_SPACE, "page has more rows than the id space");
    let mut rng = keyed_rng(seed, &["element-ids", canonical_url, &visit.to_string()]);
    sample(&mut rng, ID_SPACE, rows)
        .into_iter()
        .map(|i| ElementId(ID_BASE + i as u32))
        .collect()
}

/// The visit number that keys id assignment. Without permutation every
/// visit renders like the first.
pub fn effective_visit(world: &SimWorld, visit: u32) -> u32 {
    if world.id_permute_on_revisit {
        visit
    } else {
        1
    }
}

pub fn state_id(seed: u64, canonical_url: &str, visit: u32, viewport_top: usize) -> String {
    let h = derive_seed(
        seed,
        &[
            "state",
            canonical_url,
            &visit.to_string(),
            &viewport_top.to_string(),
        ],
    );
    format!("s-{h:016x}")
}

/// Renders rows `[top, top + VIEWPORT_HEIGHT)` of the page at `url`.
///
/// # Panics
///
/// When `url` is not a page of `world`.
pub fn render(world: &SimWorld, url: &str, visit: u32, viewport_top: usize, step: u64) -> StateSnapshot {
    let page = world
        .page(url)
        .unwrap_or_else(|| panic!("render of unknown url {url}"));
    let visit = effective_visit(world, visit);
    let ids = element_ids(world.seed, &page.url, visit, page.rows.len());
    let end = (viewport_top + VIEWPORT_HEIGHT).min(page.rows.len());
    let start = viewport_top.min(end);

    let mut observation = format!(
        "URL: {url}\nTitle: {}\nRows {}-{} of {}\n",
        page.title,
        if end > start { start + 1 } else { start },
        end,
        page.rows.len()
    );
    let mut elements = Vec::with_capacity(end - start);
    for (row, id) in page.rows[start..end].iter().zip(&ids[start..end]) {
        let role = row.role();
        observation.push_str(&format!("[{id}] {} '{}'\n", role.as_str(), row.label()));
        elements.push(Element {
            element_id: *id,
            role,
            label: row.label().to_string(),
        });
    }
    StateSnapshot {
        state_id: state_id(world.seed, &page.url, visit, viewport_top),
        url: url.to_string(),
        viewport_top,
        observation,
        elements,
        trial_step: step,
    }
}

/// Row index of `id` on the page at `url` for the given visit.
pub fn row_of(world: &SimWorld, url: &str, visit: u32, id: ElementId) -> Option<usize> {
    let page = world.page(url)?;
    let visit = effective_visit(world, visit);
    element_ids(world.seed, &page.url, visit, page.rows.len())
        .iter()
        .position(|&x| x == id)
}

//! Depth-limited causal context retrieval.
//!
//! Ancestor and descendant queries are level-by-level BFS from a target bead
//! with a visited set, so each reachable bead is expanded once and each edge
//! out of an expanded bead is examined once. Clearance filtering runs after
//! traversal: a withheld bead still connects the beads around it.
//!
//! # Context document
//!
//! [`serialize_context`] renders a result as UTF-8 text:
//!
//! ```text
//! # context target=<id> depth=<n|all>
//!
//! @ <timestamp> <type> <id>
//! parents: <id> <id> ...        ("parents: -" when empty)
//! content: <canonical JSON>
//! ```
//!
//! One block per bead, oldest first, blocks separated by a blank line, every
//! line terminated by `\n`. An empty result is the header line alone.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bead::{canonical, Bead, BeadId, Role};
use crate::index::Edge;

#[derive(Debug, thiserror::Error)]
pub enum TraversalError {
    #[error("bead {0} not found")]
    NotFound(BeadId),
    #[error("depth {depth} outside 1..={max}")]
    DepthOutOfRange { depth: u32, max: u32 },
    #[error("index lookup failed: {0}")]
    Index(#[from] crate::index::IndexError),
    #[error("object load failed: {0}")]
    Store(#[from] crate::store::StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Follow parent links: why did this happen.
    Ancestors,
    /// Follow child links: what happened after.
    Descendants,
}

/// Neighbour lookup and bead loading for traversal.
pub trait CausalGraph {
    fn parents_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError>;
    fn children_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError>;
    fn load(&self, id: &BeadId) -> Result<Bead, TraversalError>;

    fn neighbors(&self, id: &BeadId, direction: Direction) -> Result<Vec<BeadId>, TraversalError> {
        match direction {
            Direction::Ancestors => self.parents_of(id),
            Direction::Descendants => self.children_of(id),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextResult {
    pub target: BeadId,
    pub direction: Direction,
    /// Requested hop limit; `None` means unbounded.
    pub depth_limit: Option<u32>,
    /// Deepest level at which a bead was found.
    pub depth_used: u32,
    /// A bead at the depth limit still had unvisited neighbours.
    pub truncated: bool,
    /// Sorted by (timestamp, id); never contains `target`.
    pub beads: Vec<Bead>,
    /// Parent links among `beads` and `target`, sorted by (child, parent).
    pub edges: Vec<Edge>,
}

impl ContextResult {
    /// Applies [`clearance_filter`] and drops edges touching withheld beads.
    pub fn filtered(mut self, role: Option<Role>) -> ContextResult {
        if let Some(role) = role {
            self.beads = clearance_filter(self.beads, role);
            let kept: HashSet<&BeadId> = self
                .beads
                .iter()
                .map(|b| &b.id)
                .chain(std::iter::once(&self.target))
                .collect();
            self.edges
                .retain(|e| kept.contains(&e.child) && kept.contains(&e.parent));
        }
        self
    }

    pub fn ids(&self) -> Vec<BeadId> {
        self.beads.iter().map(|b| b.id.clone()).collect()
    }
}

/// Work counters for one traversal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TraversalStats {
    /// Beads dequeued, target included.
    pub nodes_visited: usize,
    /// Edges followed out of expanded beads.
    pub edges_examined: usize,
    /// Neighbour-existence checks on beads at the depth limit.
    pub frontier_probes: usize,
}

/// Breadth-first traversal without role filtering.
pub fn traverse<G: CausalGraph + ?Sized>(
    graph: &G,
    target: &BeadId,
    direction: Direction,
    limit: Option<u32>,
) -> Result<(ContextResult, TraversalStats), TraversalError> {
    let target_bead = graph.load(target)?;
    let mut stats = TraversalStats::default();
    let mut visited: HashSet<BeadId> = HashSet::from([target.clone()]);
    let mut found: Vec<BeadId> = Vec::new();
    let mut queue: VecDeque<(BeadId, u32)> = VecDeque::from([(target.clone(), 0)]);
    let mut depth_used = 0;
    let mut truncated = false;

    while let Some((id, level)) = queue.pop_front() {
        stats.nodes_visited += 1;
        if limit == Some(level) {
            if !truncated {
                stats.frontier_probes += 1;
                truncated = graph
                    .neighbors(&id, direction)?
                    .iter()
                    .any(|n| !visited.contains(n));
            }
            continue;
        }
        for next in graph.neighbors(&id, direction)? {
            stats.edges_examined += 1;
            if visited.insert(next.clone()) {
                depth_used = depth_used.max(level + 1);
                found.push(next.clone());
                queue.push_back((next, level + 1));
            }
        }
    }

    let mut beads = found
        .iter()
        .map(|id| graph.load(id))
        .collect::<Result<Vec<_>, _>>()?;
    sort_chronologically(&mut beads);
    let edges = induced_edges(beads.iter().chain(std::iter::once(&target_bead)));

    Ok((
        ContextResult {
            target: target.clone(),
            direction,
            depth_limit: limit,
            depth_used,
            truncated,
            beads,
            edges,
        },
        stats,
    ))
}

fn check_depth(depth: u32, max_depth: u32) -> Result<(), TraversalError> {
    if depth == 0 || depth > max_depth {
        return Err(TraversalError::DepthOutOfRange {
            depth,
            max: max_depth,
        });
    }
    Ok(())
}

/// Ancestors of `target` within `depth` hops, clearance-filtered for `role`.
pub fn get_context<G: CausalGraph + ?Sized>(
    graph: &G,
    target: &BeadId,
    depth: u32,
    role: Option<Role>,
    max_depth: u32,
) -> Result<ContextResult, TraversalError> {
    check_depth(depth, max_depth)?;
    let (result, _) = traverse(graph, target, Direction::Ancestors, Some(depth))?;
    Ok(result.filtered(role))
}

/// Descendants of `root` within `depth` hops, clearance-filtered for `role`.
pub fn get_descendants<G: CausalGraph + ?Sized>(
    graph: &G,
    root: &BeadId,
    depth: u32,
    role: Option<Role>,
    max_depth: u32,
) -> Result<ContextResult, TraversalError> {
    check_depth(depth, max_depth)?;
    let (result, _) = traverse(graph, root, Direction::Descendants, Some(depth))?;
    Ok(result.filtered(role))
}

/// Keeps beads that do not deny `role`, preserving order.
pub fn clearance_filter(beads: Vec<Bead>, role: Role) -> Vec<Bead> {
    beads
        .into_iter()
        .filter(|b| b.draft.visible_to(role))
        .collect()
}

pub fn sort_chronologically(beads: &mut [Bead]) {
    beads.sort_by_cached_key(Bead::sort_key);
}

/// Parent links whose endpoints are both in `beads`.
pub fn induced_edges<'a>(beads: impl IntoIterator<Item = &'a Bead>) -> Vec<Edge> {
    let beads: Vec<&Bead> = beads.into_iter().collect();
    let members: HashMap<&BeadId, ()> = beads.iter().map(|b| (&b.id, ())).collect();
    let mut edges: Vec<Edge> = beads
        .iter()
        .flat_map(|b| {
            b.draft
                .parents
                .iter()
                .filter(|p| members.contains_key(p))
                .map(|p| Edge {
                    child: b.id.clone(),
                    parent: p.clone(),
                })
        })
        .collect();
    edges.sort_by(|a, b| (&a.child, &a.parent).cmp(&(&b.child, &b.parent)));
    edges.dedup();
    edges
}

/// Deterministic text rendering of a context result.
pub fn serialize_context(result: &ContextResult) -> String {
    let mut out = String::new();
    let depth = match result.depth_limit {
        Some(d) => d.to_string(),
        None => "all".to_owned(),
    };
    writeln!(out, "# context target={} depth={}", result.target, depth).unwrap();
    for bead in &result.beads {
        out.push('\n');
        writeln!(out, "@ {} {} {}", bead.draft.timestamp, bead.draft.kind, bead.id).unwrap();
        if bead.draft.parents.is_empty() {
            out.push_str("parents: -\n");
        } else {
            let parents: Vec<&str> = bead.draft.parents.iter().map(BeadId::as_str).collect();
            writeln!(out, "parents: {}", parents.join(" ")).unwrap();
        }
        let content = canonical::to_canonical_string(&bead.draft.content)
            .expect("stored content is canonicalizable");
        writeln!(out, "content: {content}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bead::{Clearance, Draft};
    use serde_json::json;
    use std::collections::BTreeMap;

    /// Minimal in-memory graph.
    #[derive(Default)]
    struct Mem {
        beads: BTreeMap<BeadId, Bead>,
    }

    impl Mem {
        fn add(&mut self, ts: &str, parents: &[&BeadId], tag: &str) -> BeadId {
            let d = Draft::new("event", ts, "did:test")
                .with_parents(parents.iter().map(|p| (*p).clone()))
                .with_content(json!({ "tag": tag }));
            let b = Bead::seal(d, None).unwrap();
            let id = b.id.clone();
            self.beads.insert(id.clone(), b);
            id
        }
    }

    impl CausalGraph for Mem {
        fn parents_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError> {
            Ok(self.load(id)?.draft.parents)
        }
        fn children_of(&self, id: &BeadId) -> Result<Vec<BeadId>, TraversalError> {
            Ok(self
                .beads
                .values()
                .filter(|b| b.draft.parents.contains(id))
                .map(|b| b.id.clone())
                .collect())
        }
        fn load(&self, id: &BeadId) -> Result<Bead, TraversalError> {
            self.beads
                .get(id)
                .cloned()
                .ok_or_else(|| TraversalError::NotFound(id.clone()))
        }
    }

    fn chain() -> (Mem, BeadId, BeadId, BeadId) {
        let mut g = Mem::default();
        let a = g.add("2026-01-01T00:00:00Z", &[], "a");
        let b = g.add("2026-01-02T00:00:00Z", &[&a], "b");
        let c = g.add("2026-01-03T00:00:00Z", &[&b], "c");
        (g, a, b, c)
    }

    #[test]
    fn direct_parent_at_depth_one() {
        let (g, _a, b, c) = chain();
        let r = get_context(&g, &c, 1, None, 100).unwrap();
        assert_eq!(r.ids(), vec![b.clone()]);
        assert!(r.truncated);
        assert_eq!(r.depth_used, 1);
        assert_eq!(r.edges, vec![Edge { child: c, parent: b }]);
    }

    #[test]
    fn two_hops_in_timestamp_order() {
        let (g, a, b, c) = chain();
        let r = get_context(&g, &c, 2, None, 100).unwrap();
        assert_eq!(r.ids(), vec![a, b]);
        assert!(!r.truncated);
        assert_eq!(r.edges.len(), 2);
    }

    #[test]
    fn leaf_has_no_descendants() {
        let (g, _a, _b, c) = chain();
        let r = get_descendants(&g, &c, 3, None, 100).unwrap();
        assert!(r.beads.is_empty());
        assert!(!r.truncated);
    }

    #[test]
    fn diamond_dedups() {
        let mut g = Mem::default();
        let a = g.add("2026-01-01T00:00:00Z", &[], "a");
        let b = g.add("2026-01-02T00:00:00Z", &[&a], "b");
        let c = g.add("2026-01-02T00:00:00Z", &[&a], "c");
        let d = g.add("2026-01-03T00:00:00Z", &[&b, &c], "d");
        let (r, stats) = traverse(&g, &a, Direction::Descendants, Some(2)).unwrap();
        let ids: HashSet<_> = r.ids().into_iter().collect();
        assert_eq!(ids, HashSet::from([b, c, d.clone()]));
        assert_eq!(r.beads.len(), 3);
        assert_eq!(r.beads.last().unwrap().id, d);
        assert_eq!(r.edges.len(), 4);
        assert_eq!(stats.nodes_visited, 4);
        assert_eq!(stats.edges_examined, 4);
    }

    #[test]
    fn depth_bounds() {
        let (g, _a, _b, c) = chain();
        assert!(matches!(
            get_context(&g, &c, 0, None, 100),
            Err(TraversalError::DepthOutOfRange { depth: 0, .. })
        ));
        assert!(matches!(
            get_context(&g, &c, 101, None, 100),
            Err(TraversalError::DepthOutOfRange { .. })
        ));
        let ghost = BeadId::digest_of(b"ghost");
        assert!(matches!(
            get_context(&g, &ghost, 1, None, 100),
            Err(TraversalError::NotFound(_))
        ));
    }

    #[test]
    fn filter_keeps_connectivity_but_withholds_denied() {
        let mut g = Mem::default();
        let a = g.add("2026-01-01T00:00:00Z", &[], "a");
        let denied = Draft::new("medical_note", "2026-01-02T00:00:00Z", "did:test")
            .with_parents([a.clone()])
            .with_clearance(Clearance {
                denied_roles: vec![Role::Family, Role::Insurance],
                reason: None,
            });
        let denied = Bead::seal(denied, None).unwrap();
        let n = denied.id.clone();
        g.beads.insert(n.clone(), denied);
        let c = g.add("2026-01-03T00:00:00Z", &[&n], "c");

        let all = get_context(&g, &c, 2, None, 100).unwrap();
        assert_eq!(all.ids(), vec![a.clone(), n.clone()]);
        let ins = get_context(&g, &c, 2, Some(Role::Insurance), 100).unwrap();
        assert_eq!(ins.ids(), vec![a]);
        assert!(ins.edges.is_empty());
        let specialist = get_context(&g, &c, 2, Some(Role::Specialist), 100).unwrap();
        assert_eq!(specialist, all);
    }

    #[test]
    fn serialization_is_ordered_and_stable() {
        let (g, a, b, c) = chain();
        let r = get_context(&g, &c, 5, None, 100).unwrap();
        let text = serialize_context(&r);
        assert_eq!(text, serialize_context(&r));
        let expected = format!(
            "# context target={c} depth=5\n\n\
             @ 2026-01-01T00:00:00Z event {a}\nparents: -\ncontent: {{\"tag\":\"a\"}}\n\n\
             @ 2026-01-02T00:00:00Z event {b}\nparents: {a}\ncontent: {{\"tag\":\"b\"}}\n"
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn empty_result_is_header_only() {
        let (g, a, _b, _c) = chain();
        let r = get_context(&g, &a, 3, None, 100).unwrap();
        assert_eq!(serialize_context(&r), format!("# context target={a} depth=3\n"));
    }
}

//! Taxonomies as pseudo-augmented directed acyclic graphs.
//!
//! Every concept is stored at a dense index. Index 0 is the pseudo-root and
//! index 1 the pseudo-leaf; natural concepts follow in load order. After
//! augmentation every natural concept without a parent hangs below the
//! pseudo-root and every natural concept without a child sits above the
//! pseudo-leaf, so each concept takes part in at least one triplet.

mod ancestry;
mod io;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ancestry::Ancestry;
pub use io::{load_taxonomy, read_json, read_tsv, write_json, TaxonomyFormat};

/// Identifier of the synthetic concept above all natural roots.
pub const PSEUDO_ROOT_ID: &str = "<pseudo-root>";
/// Identifier of the synthetic concept below all natural leaves.
pub const PSEUDO_LEAF_ID: &str = "<pseudo-leaf>";

pub(crate) const ROOT: usize = 0;
pub(crate) const LEAF: usize = 1;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("directed cycle through {}", path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("concept `{id}` is unreachable from the pseudo-root")]
    Orphan { id: String },
    #[error("duplicate concept id `{id}`")]
    DuplicateId { id: String },
    #[error("unknown concept `{id}`")]
    UnknownConcept { id: String },
    #[error("the pseudo-leaf has no semantics and cannot be compared")]
    PseudoLeaf,
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_pseudo: bool,
}

impl Concept {
    pub fn new(id: impl Into<String>, name: impl Into<String>, description: impl Into<String>) -> Self {
        Concept {
            id: id.into(),
            name: name.into(),
            description: description.into(),
            is_pseudo: false,
        }
    }

    fn pseudo(id: &str) -> Self {
        Concept {
            id: id.to_string(),
            name: id.to_string(),
            description: String::new(),
            is_pseudo: true,
        }
    }

    /// Text used to embed the concept: its description, or its name when the
    /// description is empty.
    pub fn representation(&self) -> &str {
        if self.description.trim().is_empty() {
            &self.name
        } else {
            &self.description
        }
    }
}

/// A `(parent, query, child)` placement of a query concept.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub parent_id: String,
    pub query_id: String,
    pub child_id: String,
}

/// A directed path starting at the pseudo-root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootPath {
    pub node_ids: Vec<String>,
}

impl RootPath {
    /// Node count along the path.
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

/// Summary statistics over natural concepts and edges only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxonomyStats {
    pub concepts: usize,
    pub edges: usize,
    /// Longest shortest-path depth in nodes, counted from a natural root.
    pub depth: usize,
    pub leaves: usize,
    pub leaf_ratio: f64,
    /// Mean number of natural children per non-leaf concept.
    pub branching: f64,
    pub duplicate_edges: usize,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    concepts: Vec<Concept>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    duplicate_edges: usize,
    ancestry: OnceLock<Arc<Ancestry>>,
}

impl Taxonomy {
    /// Builds, augments and validates a taxonomy from concepts and
    /// `(parent_id, child_id)` edges.
    ///
    /// Pseudo concepts and edges touching them are ignored on input and
    /// recomputed, so rebuilding from [`Taxonomy::concepts`] and
    /// [`Taxonomy::edges`] of an augmented taxonomy yields the same graph.
    /// Duplicate edges are dropped and counted in [`TaxonomyStats`].
    pub fn from_edges<I, P, C>(concepts: Vec<Concept>, edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (P, C)>,
        P: AsRef<str>,
        C: AsRef<str>,
    {
        let mut all = vec![Concept::pseudo(PSEUDO_ROOT_ID), Concept::pseudo(PSEUDO_LEAF_ID)];
        let mut index = HashMap::with_capacity(concepts.len() + 2);
        index.insert(PSEUDO_ROOT_ID.to_string(), ROOT);
        index.insert(PSEUDO_LEAF_ID.to_string(), LEAF);
        for mut concept in concepts {
            if concept.id == PSEUDO_ROOT_ID || concept.id == PSEUDO_LEAF_ID {
                continue;
            }
            concept.is_pseudo = false;
            if index.insert(concept.id.clone(), all.len()).is_some() {
                return Err(TaxonomyError::DuplicateId { id: concept.id });
            }
            all.push(concept);
        }

        let n = all.len();
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut duplicate_edges = 0;
        let mut seen = std::collections::HashSet::new();
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            let pi = *index
                .get(p)
                .ok_or_else(|| TaxonomyError::UnknownConcept { id: p.to_string() })?;
            let ci = *index
                .get(c)
                .ok_or_else(|| TaxonomyError::UnknownConcept { id: c.to_string() })?;
            if pi < 2 || ci < 2 {
                continue;
            }
            if pi == ci {
                return Err(TaxonomyError::Cycle {
                    path: vec![p.to_string(), p.to_string()],
                });
            }
            if !seen.insert((pi, ci)) {
                duplicate_edges += 1;
                continue;
            }
            parents[ci].push(pi);
            children[pi].push(ci);
        }

        let mut taxonomy = Taxonomy {
            concepts: all,
            index,
            parents,
            children,
            duplicate_edges,
            ancestry: OnceLock::new(),
        };
        taxonomy.augment();
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    fn augment(&mut self) {
        let n = self.concepts.len();
        self.children[ROOT].clear();
        self.parents[LEAF].clear();
        for v in 2..n {
            if self.parents[v].is_empty() {
                self.parents[v].push(ROOT);
                self.children[ROOT].push(v);
            }
            if self.children[v].is_empty() {
                self.children[v].push(LEAF);
                self.parents[LEAF].push(v);
            }
        }
        for list in self.parents.iter_mut().chain(self.children.iter_mut()) {
            list.sort_unstable();
        }
    }

    /// Checks acyclicity, reachability from the pseudo-root and the pseudo-node
    /// invariants.
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let n = self.concepts.len();
        let order = self.topological_order();
        if order.len() < n {
            return Err(TaxonomyError::Cycle {
                path: self.find_cycle(&order),
            });
        }
        let mut reached = vec![false; n];
        let mut queue = VecDeque::from([ROOT]);
        reached[ROOT] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &self.children[v] {
                if !reached[c] {
                    reached[c] = true;
                    queue.push_back(c);
                }
            }
        }
        if let Some(v) = (2..n).find(|&v| !reached[v]) {
            return Err(TaxonomyError::Orphan {
                id: self.concepts[v].id.clone(),
            });
        }
        for v in 2..n {
            debug_assert!(!self.parents[v].is_empty() && !self.children[v].is_empty());
            if self.parents[v].contains(&ROOT) && self.parents[v].len() > 1 {
                return Err(TaxonomyError::Orphan {
                    id: self.concepts[v].id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Kahn's algorithm from every zero in-degree node.
    pub(crate) fn topological_order(&self) -> Vec<usize> {
        let n = self.concepts.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    fn find_cycle(&self, partial_order: &[usize]) -> Vec<String> {
        let n = self.concepts.len();
        let mut done = vec![false; n];
        for &v in partial_order {
            done[v] = true;
        }
        // Every remaining node lies on or below a cycle; walking parents among
        // remaining nodes must revisit one.
        let Some(start) = (0..n).find(|&v| !done[v]) else {
            return Vec::new();
        };
        let mut position = HashMap::new();
        let mut walk = Vec::new();
        let mut v = start;
        while !position.contains_key(&v) {
            position.insert(v, walk.len());
            walk.push(v);
            v = *self.parents[v]
                .iter()
                .find(|&&p| !done[p])
                .expect("unfinished node has an unfinished parent");
        }
        let mut cycle: Vec<String> = walk[position[&v]..]
            .iter()
            .rev()
            .map(|&i| self.concepts[i].id.clone())
            .collect();
        cycle.push(cycle[0].clone());
        cycle
    }

    /// Total node count including both pseudo concepts.
    pub(crate) fn node_count(&self) -> usize {
        self.concepts.len()
    }

    /// Number of natural (non-pseudo) concepts.
    pub fn len(&self) -> usize {
        self.concepts.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Natural concepts in load order.
    pub fn concepts(&self) -> &[Concept] {
        &self.concepts[2..]
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.index.get(id).map(|&i| &self.concepts[i])
    }

    pub fn pseudo_root(&self) -> &Concept {
        &self.concepts[ROOT]
    }

    pub fn pseudo_leaf(&self) -> &Concept {
        &self.concepts[LEAF]
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub(crate) fn index_of(&self, id: &str) -> Result<usize, TaxonomyError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownConcept { id: id.to_string() })
    }

    pub(crate) fn node(&self, ix: usize) -> &Concept {
        &self.concepts[ix]
    }

    pub(crate) fn parents_ix(&self, ix: usize) -> &[usize] {
        &self.parents[ix]
    }

    pub(crate) fn children_ix(&self, ix: usize) -> &[usize] {
        &self.children[ix]
    }

    pub(crate) fn natural_parents_ix(&self, ix: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[ix].iter().copied().filter(|&p| p != ROOT)
    }

    pub(crate) fn natural_children_ix(&self, ix: usize) -> impl Iterator<Item = usize> + '_ {
        self.children[ix].iter().copied().filter(|&c| c != LEAF)
    }

    pub(crate) fn is_leaf_ix(&self, ix: usize) -> bool {
        self.children[ix] == [LEAF]
    }

    /// Parent ids of `id`, including the pseudo-root for natural roots.
    pub fn parents(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        let ix = self.index_of(id)?;
        Ok(self.parents[ix].iter().map(|&p| self.concepts[p].id.as_str()).collect())
    }

    /// Child ids of `id`, including the pseudo-leaf for natural leaves.
    pub fn children(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        let ix = self.index_of(id)?;
        Ok(self.children[ix]
            .iter()
            .map(|&c| self.concepts[c].id.as_str())
            .collect())
    }

    /// Whether `id` is a natural concept without natural children.
    pub fn is_leaf(&self, id: &str) -> Result<bool, TaxonomyError> {
        let ix = self.index_of(id)?;
        Ok(ix >= 2 && self.is_leaf_ix(ix))
    }

    /// All augmented edges as `(parent_id, child_id)`, sorted by index.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.edge_indices(true)
            .map(|(p, c)| (self.concepts[p].id.as_str(), self.concepts[c].id.as_str()))
            .collect()
    }

    /// Edges between natural concepts only.
    pub fn natural_edges(&self) -> Vec<(&str, &str)> {
        self.edge_indices(false)
            .map(|(p, c)| (self.concepts[p].id.as_str(), self.concepts[c].id.as_str()))
            .collect()
    }

    pub(crate) fn edge_indices(&self, with_pseudo: bool) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children.iter().enumerate().flat_map(move |(p, cs)| {
            cs.iter()
                .copied()
                .filter(move |&c| with_pseudo || (p >= 2 && c >= 2))
                .map(move |c| (p, c))
        })
    }

    /// Number of edges between natural concepts.
    pub fn edge_count(&self) -> usize {
        self.edge_indices(false).count()
    }

    pub fn stats(&self) -> TaxonomyStats {
        let ancestry = self.ancestry();
        let natural = 2..self.node_count();
        let leaves = natural.clone().filter(|&v| self.is_leaf_ix(v)).count();
        let depth = natural
            .clone()
            .map(|v| ancestry.depth_ix(v) as usize - 1)
            .max()
            .unwrap_or(0);
        let edges = self.edge_count();
        let concepts = self.len();
        let inner = concepts - leaves;
        TaxonomyStats {
            concepts,
            edges,
            depth,
            leaves,
            leaf_ratio: if concepts == 0 {
                0.0
            } else {
                leaves as f64 / concepts as f64
            },
            branching: if inner == 0 { 0.0 } else { edges as f64 / inner as f64 },
            duplicate_edges: self.duplicate_edges,
        }
    }

    /// Depth and ancestor tables, computed on first use.
    pub fn ancestry(&self) -> &Ancestry {
        self.ancestry.get_or_init(|| Arc::new(Ancestry::new(self)))
    }

    /// All simple directed paths from the pseudo-root to `id`.
    pub fn root_paths(&self, id: &str) -> Result<Vec<RootPath>, TaxonomyError> {
        let target = self.index_of(id)?;
        Ok(self
            .root_paths_ix(target)
            .into_iter()
            .map(|path| RootPath {
                node_ids: path.into_iter().map(|v| self.concepts[v].id.clone()).collect(),
            })
            .collect())
    }

    pub(crate) fn root_paths_ix(&self, target: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![target];
        self.collect_paths(target, &mut stack, &mut out);
        out
    }

    fn collect_paths(&self, v: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if v == ROOT {
            out.push(stack.iter().rev().copied().collect());
            return;
        }
        for &p in &self.parents[v] {
            stack.push(p);
            self.collect_paths(p, stack, out);
            stack.pop();
        }
    }

    /// Node count of the shortest root path to `id`; the pseudo-root has depth 1.
    pub fn depth(&self, id: &str) -> Result<usize, TaxonomyError> {
        let ix = self.index_of(id)?;
        Ok(self.ancestry().depth_ix(ix) as usize)
    }

    /// Wu-Palmer similarity `2 * lca_depth / (depth(a) + depth(b))`.
    pub fn wu_palmer(&self, a: &str, b: &str) -> Result<f64, TaxonomyError> {
        let a = self.index_of(a)?;
        let b = self.index_of(b)?;
        if a == LEAF || b == LEAF {
            return Err(TaxonomyError::PseudoLeaf);
        }
        Ok(self.ancestry().wu_palmer_ix(a, b))
    }

    pub(crate) fn triplet_indices(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for q in 2..self.node_count() {
            for &p in &self.parents[q] {
                for &c in &self.children[q] {
                    out.insert((p, q, c));
                }
            }
        }
        out
    }

    /// One triplet per (parent, child) combination of every natural concept.
    pub fn triplets(&self) -> BTreeSet<Triplet> {
        self.triplet_indices()
            .into_iter()
            .map(|(p, q, c)| Triplet {
                parent_id: self.concepts[p].id.clone(),
                query_id: self.concepts[q].id.clone(),
                child_id: self.concepts[c].id.clone(),
            })
            .collect()
    }

    /// Stable hash over concept ids and natural edges.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut ids: Vec<&str> = self.concepts().iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        for id in ids {
            hasher.update(id.as_bytes());
            hasher.update([0]);
        }
        let mut edges = self.natural_edges();
        edges.sort_unstable();
        for (p, c) in edges {
            hasher.update(p.as_bytes());
            hasher.update([1]);
            hasher.update(c.as_bytes());
            hasher.update([2]);
        }
        hex::encode(&hasher.finalize()[..16])
    }

    /// Replaces all parents of `mover` with `new_parent` and repairs the
    /// pseudo edges. Returns the previous natural parents.
    ///
    /// The caller guarantees that the two concepts are natural and unrelated.
    pub(crate) fn reparent_ix(&mut self, mover: usize, new_parent: usize) -> Vec<usize> {
        let old = std::mem::replace(&mut self.parents[mover], vec![new_parent]);
        for &p in &old {
            remove_sorted(&mut self.children[p], mover);
            if p != ROOT && self.children[p].is_empty() {
                self.children[p].push(LEAF);
                insert_sorted(&mut self.parents[LEAF], p);
            }
        }
        if self.children[new_parent] == [LEAF] {
            self.children[new_parent].clear();
            remove_sorted(&mut self.parents[LEAF], new_parent);
        }
        insert_sorted(&mut self.children[new_parent], mover);
        self.ancestry = OnceLock::new();
        old.into_iter().filter(|&p| p != ROOT).collect()
    }

    /// Whether `ancestor` is reachable upward from `v` (including `v` itself).
    pub(crate) fn is_ancestor_ix(&self, ancestor: usize, v: usize) -> bool {
        if ancestor == v {
            return true;
        }
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for &p in &self.parents[x] {
                if p == ancestor {
                    return true;
                }
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.concepts == other.concepts && self.parents == other.parents && self.children == other.children
    }
}

fn insert_sorted(list: &mut Vec<usize>, v: usize) {
    if let Err(pos) = list.binary_search(&v) {
        list.insert(pos, v);
    }
}

fn remove_sorted(list: &mut Vec<usize>, v: usize) {
    if let Ok(pos) = list.binary_search(&v) {
        list.remove(pos);
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn build(ids: &[&str], edges: &[(&str, &str)]) -> Taxonomy {
        let concepts = ids.iter().map(|id| Concept::new(*id, *id, "")).collect();
        Taxonomy::from_edges(concepts, edges.iter().copied()).unwrap()
    }

    #[test]
    fn single_concept_is_wrapped_by_pseudo_nodes() {
        let t = build(&["c"], &[]);
        assert_eq!(t.edges(), vec![(PSEUDO_ROOT_ID, "c"), ("c", PSEUDO_LEAF_ID)]);
        assert_eq!(t.len(), 1);
        assert_eq!(t.edge_count(), 0);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let concepts = vec![Concept::new("a", "a", ""), Concept::new("b", "b", "")];
        let err = Taxonomy::from_edges(concepts, [("a", "b"), ("b", "a")]).unwrap_err();
        match err {
            TaxonomyError::Cycle { path } => {
                assert_eq!(path.len(), 3);
                assert_eq!(path.first(), path.last());
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn self_edge_is_a_cycle() {
        let concepts = vec![Concept::new("a", "a", "")];
        assert!(matches!(
            Taxonomy::from_edges(concepts, [("a", "a")]),
            Err(TaxonomyError::Cycle { .. })
        ));
    }

    #[test]
    fn duplicate_ids_and_unknown_edges_are_errors() {
        let concepts = vec![Concept::new("a", "a", ""), Concept::new("a", "b", "")];
        assert!(matches!(
            Taxonomy::from_edges(concepts, Vec::<(&str, &str)>::new()),
            Err(TaxonomyError::DuplicateId { .. })
        ));
        let concepts = vec![Concept::new("a", "a", "")];
        assert!(matches!(
            Taxonomy::from_edges(concepts, [("a", "zzz")]),
            Err(TaxonomyError::UnknownConcept { .. })
        ));
    }

    #[test]
    fn duplicate_edges_are_counted_and_dropped() {
        let concepts = vec![Concept::new("a", "a", ""), Concept::new("b", "b", "")];
        let t = Taxonomy::from_edges(concepts, [("a", "b"), ("a", "b"), ("a", "b")]).unwrap();
        assert_eq!(t.edge_count(), 1);
        assert_eq!(t.stats().duplicate_edges, 2);
    }

    #[test]
    fn augmentation_is_idempotent() {
        let t = build(&["r", "a", "b", "x"], &[("r", "a"), ("r", "b"), ("a", "x"), ("b", "x")]);
        let again = Taxonomy::from_edges(t.concepts().to_vec(), t.edges()).unwrap();
        assert_eq!(t, again);
        assert_eq!(t.edges(), again.edges());
    }

    #[test]
    fn chain_paths_and_depths() {
        let t = build(&["R", "A", "A1"], &[("R", "A"), ("A", "A1")]);
        let paths = t.root_paths("A1").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].node_ids, vec![PSEUDO_ROOT_ID, "R", "A", "A1"]);
        assert_eq!(t.depth(PSEUDO_ROOT_ID).unwrap(), 1);
        assert_eq!(t.root_paths(PSEUDO_ROOT_ID).unwrap()[0].len(), 1);
        assert_eq!(t.depth("A1").unwrap(), 4);
        assert!(matches!(t.depth("nope"), Err(TaxonomyError::UnknownConcept { .. })));
    }

    #[test]
    fn diamond_has_two_paths_and_shortest_depth() {
        // pseudo-root -> R -> {A, B} -> X, plus a longer route R -> B -> C -> X.
        let t = build(
            &["R", "A", "B", "C", "X"],
            &[("R", "A"), ("R", "B"), ("A", "X"), ("B", "C"), ("C", "X")],
        );
        let mut lens: Vec<usize> = t.root_paths("X").unwrap().iter().map(RootPath::len).collect();
        lens.sort_unstable();
        assert_eq!(lens, vec![4, 5]);
        assert_eq!(t.depth("X").unwrap(), 4);
    }

    #[test]
    fn forest_roots_hang_below_pseudo_root() {
        let t = build(&["A", "B"], &[]);
        assert_eq!(t.parents("A").unwrap(), vec![PSEUDO_ROOT_ID]);
        assert_eq!(t.parents("B").unwrap(), vec![PSEUDO_ROOT_ID]);
        // depth counts the pseudo-root
        assert_eq!(t.depth("A").unwrap(), 2);
    }

    #[test]
    fn wu_palmer_on_small_tree() {
        // root-level concepts A, B under the pseudo-root; A -> {A1, A2}.
        let t = build(&["A", "B", "A1", "A2"], &[("A", "A1"), ("A", "A2")]);
        assert!((t.wu_palmer("A1", "A2").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.wu_palmer("A", "B").unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(t.wu_palmer("A1", "A1").unwrap(), 1.0);
        assert!(matches!(
            t.wu_palmer("A1", PSEUDO_LEAF_ID),
            Err(TaxonomyError::PseudoLeaf)
        ));
    }

    #[test]
    fn wu_palmer_stays_at_most_one_with_shortcut_edges() {
        // x is an ancestor of a but sits deeper than a's shortest path.
        let t = build(&["r", "y", "x", "a"], &[("r", "y"), ("y", "x"), ("x", "a"), ("r", "a")]);
        let w = t.wu_palmer("a", "x").unwrap();
        assert!(w > 0.0 && w <= 1.0, "{w}");
    }

    #[test]
    fn chain_triplets() {
        let t = build(&["R", "A", "A1"], &[("R", "A"), ("A", "A1")]);
        let got: Vec<(String, String, String)> = t
            .triplets()
            .into_iter()
            .map(|t| (t.parent_id, t.query_id, t.child_id))
            .collect();
        let want = [
            (PSEUDO_ROOT_ID, "R", "A"),
            ("A", "A1", PSEUDO_LEAF_ID),
            ("R", "A", "A1"),
        ];
        let mut want: Vec<(String, String, String)> = want
            .iter()
            .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
            .collect();
        want.sort();
        let mut got = got;
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn cross_product_triplets() {
        let t = build(
            &["p1", "p2", "q", "c1", "c2", "c3"],
            &[("p1", "q"), ("p2", "q"), ("q", "c1"), ("q", "c2"), ("q", "c3")],
        );
        let for_q = t.triplets().into_iter().filter(|t| t.query_id == "q").count();
        assert_eq!(for_q, 6);
    }

    #[test]
    fn reparent_repairs_pseudo_edges() {
        let mut t = build(&["R", "a", "b"], &[("R", "a"), ("R", "b")]);
        let a = t.index_of("a").unwrap();
        let b = t.index_of("b").unwrap();
        let old = t.reparent_ix(a, b);
        assert_eq!(old, vec![t.index_of("R").unwrap()]);
        t.validate().unwrap();
        assert_eq!(t.children("b").unwrap(), vec!["a"]);
        assert_eq!(t.children("R").unwrap(), vec!["b"]);
        let rebuilt = Taxonomy::from_edges(t.concepts().to_vec(), t.edges()).unwrap();
        assert_eq!(rebuilt, t);
    }
}

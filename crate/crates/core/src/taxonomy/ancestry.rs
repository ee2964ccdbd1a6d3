use std::collections::VecDeque;

use super::{Taxonomy, LEAF, ROOT};

/// Per-concept depth and ancestor sets.
///
/// Depth is the node count of the shortest root path. The least common
/// ancestor of two concepts is the common ancestor of greatest depth; its
/// depth is capped at the smaller of the two concept depths so that a
/// shortcut edge cannot push similarity above one.
#[derive(Debug)]
pub struct Ancestry {
    depth: Vec<u32>,
    // ancestors including self, deepest first
    by_depth: Vec<Vec<u32>>,
    // the same sets sorted by index, for membership tests
    sorted: Vec<Vec<u32>>,
}

impl Ancestry {
    pub(crate) fn new(t: &Taxonomy) -> Self {
        let n = t.node_count();
        let mut depth = vec![u32::MAX; n];
        depth[ROOT] = 1;
        let mut queue = VecDeque::from([ROOT]);
        while let Some(v) = queue.pop_front() {
            for &c in t.children_ix(v) {
                if depth[c] == u32::MAX {
                    depth[c] = depth[v] + 1;
                    queue.push_back(c);
                }
            }
        }

        let mut sorted: Vec<Vec<u32>> = vec![Vec::new(); n];
        for v in t.topological_order() {
            if v == LEAF {
                continue;
            }
            let mut set = vec![v as u32];
            for &p in t.parents_ix(v) {
                set.extend_from_slice(&sorted[p]);
            }
            set.sort_unstable();
            set.dedup();
            sorted[v] = set;
        }
        let by_depth = sorted
            .iter()
            .map(|set| {
                let mut s = set.clone();
                s.sort_by(|&a, &b| depth[b as usize].cmp(&depth[a as usize]).then(a.cmp(&b)));
                s
            })
            .collect();
        Ancestry {
            depth,
            by_depth,
            sorted,
        }
    }

    pub(crate) fn depth_ix(&self, v: usize) -> u32 {
        self.depth[v]
    }

    /// Depth of the deepest common ancestor, capped at the shallower concept.
    pub(crate) fn lca_depth_ix(&self, a: usize, b: usize) -> u32 {
        let other = &self.sorted[b];
        let deepest = self.by_depth[a]
            .iter()
            .find(|x| other.binary_search(x).is_ok())
            .map(|&x| self.depth[x as usize])
            .unwrap_or(1);
        deepest.min(self.depth[a]).min(self.depth[b])
    }

    pub(crate) fn wu_palmer_ix(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        let lca = self.lca_depth_ix(a, b) as f64;
        2.0 * lca / (self.depth[a] as f64 + self.depth[b] as f64)
    }

    /// Whether `ancestor` is an ancestor of `v` or `v` itself.
    pub(crate) fn is_ancestor_ix(&self, ancestor: usize, v: usize) -> bool {
        self.sorted[v].binary_search(&(ancestor as u32)).is_ok()
    }
}

use rayon::prelude::*;
use serde::Serialize;

use super::{representations, RobustnessError};
use crate::gateway::{SimilarityMatrix, SimilarityProvider};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemanticProximity {
    pub ratio: f64,
    pub groups: usize,
}

/// Leaf-sibling groups of size two or more, as positions into
/// [`Taxonomy::concepts`]. Leaves are grouped by natural parent, so a leaf
/// with several parents belongs to several groups. Natural roots share no
/// parent and form no group.
pub fn sibling_groups(t: &Taxonomy) -> Vec<Vec<usize>> {
    (2..t.node_count())
        .filter_map(|p| {
            let group: Vec<usize> = t
                .natural_children_ix(p)
                .filter(|&c| t.is_leaf_ix(c))
                .map(|c| c - 2)
                .collect();
            (group.len() >= 2).then_some(group)
        })
        .collect()
}

/// Share of leaf-sibling groups without an intruder: a group passes when its
/// least similar member pair is still more similar than the least similar
/// pair linking a member to a concept outside the group.
pub fn semantic_proximity(t: &Taxonomy, sim: &dyn SimilarityProvider) -> Result<SemanticProximity, RobustnessError> {
    if sibling_groups(t).is_empty() {
        return Err(RobustnessError::NoSiblingGroups);
    }
    let matrix = sim.similarity_matrix(&representations(t))?;
    semantic_proximity_with_matrix(t, &matrix)
}

pub fn semantic_proximity_with_matrix(
    t: &Taxonomy,
    matrix: &SimilarityMatrix,
) -> Result<SemanticProximity, RobustnessError> {
    assert_eq!(matrix.len(), t.len(), "similarity matrix does not match the taxonomy");
    let groups = sibling_groups(t);
    if groups.is_empty() {
        return Err(RobustnessError::NoSiblingGroups);
    }
    let n = t.len();
    let passed: usize = groups
        .par_iter()
        .map(|group| {
            let mut inside = vec![false; n];
            for &g in group {
                inside[g] = true;
            }
            let mut intra = f64::INFINITY;
            for (a, &i) in group.iter().enumerate() {
                for &j in &group[a + 1..] {
                    intra = intra.min(matrix.get(i, j));
                }
            }
            let mut external = f64::INFINITY;
            for &i in group {
                for k in (0..n).filter(|&k| !inside[k]) {
                    external = external.min(matrix.get(i, k));
                }
            }
            // A group spanning every concept has no possible intruder.
            usize::from(external == f64::INFINITY || intra > external)
        })
        .sum();
    Ok(SemanticProximity {
        ratio: passed as f64 / groups.len() as f64,
        groups: groups.len(),
    })
}

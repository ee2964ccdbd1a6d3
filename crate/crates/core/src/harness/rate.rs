use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::HarnessError;
use crate::adequacy::lemma;
use crate::gateway::{FillMaskProvider, MASK_TOKEN};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub score: f64,
    pub edges: usize,
    pub hits: usize,
    pub prompts: usize,
}

pub fn rate_prompt(child_name: &str) -> String {
    format!("{} is a kind of {MASK_TOKEN}.", lemma(child_name))
}

/// RaTE: share of natural edges whose parent lemma appears among the top-`k`
/// fill-mask candidates for the child's prompt.
///
/// The provider is asked once per child, so a tree costs one request per edge.
pub fn rate_score(t: &Taxonomy, mlm: &dyn FillMaskProvider, k: usize) -> Result<RateResult, HarnessError> {
    let edges: Vec<(usize, usize)> = t.edge_indices(false).collect();
    if edges.is_empty() {
        return Err(HarnessError::NoEdges);
    }
    let mut children: Vec<usize> = edges.iter().map(|&(_, c)| c).collect();
    children.sort_unstable();
    children.dedup();
    let answers: Vec<(usize, Vec<String>)> = children
        .par_iter()
        .map(|&c| {
            let candidates = mlm.fill_mask(&rate_prompt(&t.node(c).name), k)?;
            Ok((c, candidates.into_iter().map(|cand| lemma(&cand.token)).collect()))
        })
        .collect::<Result<_, HarnessError>>()?;
    let answers: HashMap<usize, Vec<String>> = answers.into_iter().collect();
    let hits = edges
        .iter()
        .filter(|&&(p, c)| answers[&c].contains(&lemma(&t.node(p).name)))
        .count();
    Ok(RateResult {
        score: hits as f64 / edges.len() as f64,
        edges: edges.len(),
        hits,
        prompts: children.len(),
    })
}

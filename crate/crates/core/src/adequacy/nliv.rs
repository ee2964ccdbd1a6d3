use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::cache::EdgeKey;
use super::{relation_probability, relation_prompt, AdequacyError, EdgeCache, Mode};
use crate::gateway::{GatewayError, NliProvider, RelationJudgment};
use crate::taxonomy::Taxonomy;

/// Pairs sent to the NLI provider per request.
const BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlivResult {
    pub score: f64,
    pub scored_concepts: usize,
    pub scored_edges: usize,
    pub cache_hits: usize,
}

/// NLIV with a fresh in-memory edge cache.
pub fn nliv(t: &Taxonomy, nli: &dyn NliProvider, mode: Mode) -> Result<NlivResult, AdequacyError> {
    nliv_cached(t, nli, mode, &EdgeCache::in_memory())
}

/// Judgments for every natural edge `(parent_id, child_id)`, in edge order.
///
/// Each edge is judged at most once per provider fingerprint across all calls
/// sharing `cache`. The second value counts edges answered from the cache.
pub fn edge_judgments(
    t: &Taxonomy,
    nli: &dyn NliProvider,
    cache: &EdgeCache,
) -> Result<(Vec<((String, String), RelationJudgment)>, usize), AdequacyError> {
    let (edges, judgments, hits) = judge_edges(t, nli, cache)?;
    let named = edges
        .into_iter()
        .zip(judgments)
        .map(|((p, c), j)| ((t.node(p).id.clone(), t.node(c).id.clone()), j))
        .collect();
    Ok((named, hits))
}

#[allow(clippy::type_complexity)]
fn judge_edges(
    t: &Taxonomy,
    nli: &dyn NliProvider,
    cache: &EdgeCache,
) -> Result<(Vec<(usize, usize)>, Vec<RelationJudgment>, usize), AdequacyError> {
    let fingerprint = nli.fingerprint();
    let edges: Vec<(usize, usize)> = t.edge_indices(false).collect();
    let keys: Vec<EdgeKey> = edges
        .iter()
        .map(|&(p, c)| (t.node(p).id.clone(), t.node(c).id.clone(), fingerprint.clone()))
        .collect();
    let mut fetched = 0;
    let judgments = cache.entries.get_or_fetch(&keys, |missing| {
        fetched += missing.len();
        let prompts = missing
            .iter()
            .map(|(p, c, _)| relation_prompt(t.concept(p).expect("edge parent"), t.concept(c).expect("edge child")))
            .collect::<Result<Vec<_>, _>>()?;
        let batches = prompts
            .par_chunks(BATCH)
            .map(|chunk| {
                let pairs: Vec<_> = chunk.iter().map(|p| p.pair()).collect();
                let edge_error = |i: usize, source| AdequacyError::Edge {
                    parent: chunk[i].parent_id.clone(),
                    child: chunk[i].child_id.clone(),
                    source,
                };
                let judged = nli.judge(&pairs).map_err(|e| edge_error(0, e))?;
                if judged.len() != pairs.len() {
                    let message = format!("{} judgments for {} pairs", judged.len(), pairs.len());
                    return Err(edge_error(0, GatewayError::MalformedResponse(message)));
                }
                if let Some(i) = judged.iter().position(|j| !j.is_valid()) {
                    let j = judged[i];
                    return Err(edge_error(
                        i,
                        GatewayError::InvalidJudgment {
                            contradicts: j.contradicts,
                            neutral: j.neutral,
                            entails: j.entails,
                        },
                    ));
                }
                Ok(judged)
            })
            .collect::<Result<Vec<_>, AdequacyError>>()?;
        let flat: Vec<RelationJudgment> = batches.into_iter().flatten().collect();
        cache.persist(missing, &flat)?;
        Ok::<_, AdequacyError>(flat)
    })?;
    Ok((edges, judgments, keys.len() - fetched))
}

/// NLIV: mean over concepts below a natural root of the length-normalized
/// adequacy of their root classifications.
///
/// A classification runs from a natural root to the concept. Concepts with
/// several root paths average the normalized probability over all paths.
/// The per-path geometric mean is a product of per-edge `k`-th roots for a
/// path of `k` edges, so the average is computed per path length by dynamic
/// programming instead of enumerating paths.
pub fn nliv_cached(
    t: &Taxonomy,
    nli: &dyn NliProvider,
    mode: Mode,
    cache: &EdgeCache,
) -> Result<NlivResult, AdequacyError> {
    let (edges, judgments, cache_hits) = judge_edges(t, nli, cache)?;
    let probs: HashMap<(usize, usize), f64> = edges
        .iter()
        .zip(&judgments)
        .map(|(&e, j)| (e, relation_probability(j, mode)))
        .collect();
    let per_concept = normalized_path_means(t, &edges, &probs);
    let scored: Vec<f64> = per_concept.into_iter().flatten().collect();
    if scored.is_empty() {
        return Err(AdequacyError::NothingToScore);
    }
    Ok(NlivResult {
        score: scored.iter().sum::<f64>() / scored.len() as f64,
        scored_concepts: scored.len(),
        scored_edges: edges.len(),
        cache_hits,
    })
}

/// Mean normalized path probability per node index; `None` for pseudo
/// concepts and natural roots.
pub(crate) fn normalized_path_means(
    t: &Taxonomy,
    edges: &[(usize, usize)],
    probs: &HashMap<(usize, usize), f64>,
) -> Vec<Option<f64>> {
    let n = t.node_count();
    let order: Vec<usize> = t.topological_order().into_iter().filter(|&v| v >= 2).collect();
    let is_root = |v: usize| t.natural_parents_ix(v).next().is_none();

    let mut longest = vec![0usize; n];
    let mut paths = vec![0f64; n];
    for &v in &order {
        if is_root(v) {
            paths[v] = 1.0;
        } else {
            for p in t.natural_parents_ix(v) {
                longest[v] = longest[v].max(longest[p] + 1);
                paths[v] += paths[p];
            }
        }
    }
    let max_len = longest.iter().copied().max().unwrap_or(0);

    // For each path length k, sum over k-edge paths of the product of k-th roots.
    let sums: Vec<Vec<f64>> = (1..=max_len)
        .into_par_iter()
        .map(|k| {
            let root = 1.0 / k as f64;
            let weights: Vec<f64> = edges
                .iter()
                .map(|e| {
                    let p = probs[e];
                    if p == 0.0 {
                        0.0
                    } else {
                        p.powf(root)
                    }
                })
                .collect();
            let mut layer = vec![0f64; n];
            for &v in &order {
                if is_root(v) {
                    layer[v] = 1.0;
                }
            }
            for _ in 0..k {
                let mut next = vec![0f64; n];
                for (&(p, c), w) in edges.iter().zip(&weights) {
                    next[c] += layer[p] * w;
                }
                layer = next;
            }
            layer
        })
        .collect();

    (0..n)
        .map(|v| {
            if v < 2 || is_root(v) {
                return None;
            }
            let total: f64 = sums.iter().map(|s| s[v]).sum();
            Some(total / paths[v])
        })
        .collect()
}

//! Gold-standard comparison over triplets.
//!
//! A triplet is correct only when both the parent and the child of its query
//! concept match the gold taxonomy, so a right parent with a wrong child is
//! one false positive and one false negative.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("taxonomies cover different concepts ({} differ, e.g. `{}`)", .differing.len(), .differing.first().map(String::as_str).unwrap_or(""))]
    ConceptSetMismatch { differing: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Triplet precision, recall and F1 of `predicted` against `gold`.
pub fn triplet_prf(predicted: &Taxonomy, gold: &Taxonomy) -> Result<Prf, ReferenceError> {
    // Map predicted indices onto gold indices through concept ids.
    let n = predicted.node_count();
    let mut to_gold = vec![usize::MAX; n];
    let mut differing = Vec::new();
    for (v, slot) in to_gold.iter_mut().enumerate() {
        let id = &predicted.node(v).id;
        match gold.index_of(id) {
            Ok(g) => *slot = g,
            Err(_) => differing.push(id.clone()),
        }
    }
    for c in gold.concepts() {
        if !predicted.contains(&c.id) {
            differing.push(c.id.clone());
        }
    }
    if !differing.is_empty() {
        differing.sort();
        return Err(ReferenceError::ConceptSetMismatch { differing });
    }

    let gold_set = gold.triplet_indices();
    let predicted_set: BTreeSet<(usize, usize, usize)> = predicted
        .triplet_indices()
        .into_iter()
        .map(|(p, q, c)| (to_gold[p], to_gold[q], to_gold[c]))
        .collect();
    let tp = predicted_set.intersection(&gold_set).count();
    Ok(Prf::from_counts(tp, predicted_set.len() - tp, gold_set.len() - tp))
}

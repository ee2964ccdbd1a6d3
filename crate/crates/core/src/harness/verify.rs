//! Checks how well NLI judgments separate true edges from unrelated pairs,
//! bucketed by the pairs' Wu-Palmer similarity.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::HarnessError;
use crate::adequacy::{relation_probability, relation_prompt, Mode};
use crate::gateway::NliProvider;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub mode: Mode,
    pub window: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            mode: Mode::Strong,
            window: 0.1,
            threshold: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowPrf {
    pub lo: f64,
    pub hi: f64,
    pub positives: usize,
    pub negatives: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub options: VerifyOptions,
    pub positives: usize,
    pub negatives: usize,
    /// Windows are disjoint; one negative sample serves all of them.
    pub windows: Vec<WindowPrf>,
}

/// Up to `count` distinct ordered pairs `(parent, child)` of natural concepts
/// where neither is an ancestor of the other.
fn sample_negatives(t: &Taxonomy, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = t.node_count();
    let ancestry = t.ancestry();
    let unrelated = |a: usize, b: usize| a != b && !ancestry.is_ancestor_ix(a, b) && !ancestry.is_ancestor_ix(b, a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    if n < 4 {
        return out;
    }
    for _ in 0..20 * count.max(1) {
        if out.len() == count {
            return out;
        }
        let pair = (rng.random_range(2..n), rng.random_range(2..n));
        if unrelated(pair.0, pair.1) && seen.insert(pair) {
            out.push(pair);
        }
    }
    // Dense regime: fall back to a seeded shuffle of every eligible pair.
    let mut all: Vec<(usize, usize)> = (2..n)
        .flat_map(|a| (2..n).map(move |b| (a, b)))
        .filter(|&(a, b)| unrelated(a, b))
        .collect();
    for i in (1..all.len()).rev() {
        let j = rng.random_range(0..=i);
        all.swap(i, j);
    }
    all.truncate(count);
    all.sort_unstable();
    all
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-window precision, recall and F1 of the rule "adequate iff the relation
/// probability reaches the threshold", with true edges as positives and as
/// many sampled unrelated pairs as negatives.
pub fn nli_verification(
    t: &Taxonomy,
    nli: &dyn NliProvider,
    opts: VerifyOptions,
) -> Result<VerificationReport, HarnessError> {
    if !(opts.window > 0.0 && opts.window <= 1.0) {
        return Err(HarnessError::InvalidArgument(format!(
            "window width {} not in (0, 1]",
            opts.window
        )));
    }
    let positives: Vec<(usize, usize)> = t.edge_indices(false).collect();
    let negatives = sample_negatives(t, positives.len(), opts.seed);
    let labelled: Vec<((usize, usize), bool)> = positives
        .iter()
        .map(|&e| (e, true))
        .chain(negatives.iter().map(|&e| (e, false)))
        .collect();

    let prompts = labelled
        .iter()
        .map(|&((p, c), _)| relation_prompt(t.node(p), t.node(c)).map(|r| r.pair()))
        .collect::<Result<Vec<_>, _>>()?;
    let judged: Vec<_> = prompts
        .par_chunks(32)
        .map(|chunk| nli.judge(chunk))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let count = (1.0 / opts.window).ceil() as usize;
    let mut windows: Vec<WindowPrf> = (0..count)
        .map(|i| WindowPrf {
            lo: i as f64 * opts.window,
            hi: ((i + 1) as f64 * opts.window).min(1.0),
            positives: 0,
            negatives: 0,
            tp: 0,
            fp: 0,
            fn_: 0,
            precision: None,
            recall: None,
            f1: None,
        })
        .collect();
    let ancestry = t.ancestry();
    for (&((p, c), positive), j) in labelled.iter().zip(&judged) {
        let wps = ancestry.wu_palmer_ix(p, c);
        let w = &mut windows[((wps / opts.window) as usize).min(count - 1)];
        let predicted = relation_probability(j, opts.mode) >= opts.threshold;
        match (positive, predicted) {
            (true, true) => w.tp += 1,
            (true, false) => w.fn_ += 1,
            (false, true) => w.fp += 1,
            (false, false) => {}
        }
        if positive {
            w.positives += 1;
        } else {
            w.negatives += 1;
        }
    }
    for w in &mut windows {
        w.precision = ratio(w.tp, w.tp + w.fp);
        w.recall = ratio(w.tp, w.tp + w.fn_);
        w.f1 = match (w.precision, w.recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
    }
    Ok(VerificationReport {
        options: opts,
        positives: positives.len(),
        negatives: negatives.len(),
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockNli;
    use crate::gateway::RelationJudgment;
    use crate::taxonomy::tests::build;

    fn sample() -> Taxonomy {
        build(
            &["r", "a", "b", "c", "d", "e", "f", "g"],
            &[
                ("r", "a"),
                ("r", "b"),
                ("a", "c"),
                ("a", "d"),
                ("b", "e"),
                ("b", "f"),
                ("e", "g"),
            ],
        )
    }

    #[test]
    fn negatives_are_distinct_unrelated_non_edges() {
        let t = sample();
        let negs = sample_negatives(&t, t.edge_count(), 3);
        assert_eq!(negs.len(), t.edge_count());
        let set: HashSet<_> = negs.iter().collect();
        assert_eq!(set.len(), negs.len());
        for &(a, b) in &negs {
            assert!(!t.is_ancestor_ix(a, b) && !t.is_ancestor_ix(b, a));
        }
        assert_eq!(negs, sample_negatives(&t, t.edge_count(), 3));
    }

    #[test]
    fn zero_threshold_recalls_everything() {
        let t = sample();
        let opts = VerifyOptions {
            threshold: 0.0,
            ..Default::default()
        };
        let r = nli_verification(&t, &MockNli::lexical(1), opts).unwrap();
        for w in r.windows.iter().filter(|w| w.positives > 0) {
            assert_eq!(w.recall, Some(1.0));
        }
        let opts = VerifyOptions {
            threshold: 1.0 + 1e-9,
            ..Default::default()
        };
        let r = nli_verification(&t, &MockNli::lexical(1), opts).unwrap();
        for w in r.windows.iter().filter(|w| w.positives > 0) {
            assert_eq!(w.recall, Some(0.0));
            assert_eq!(w.precision, None);
        }
    }

    #[test]
    fn perfect_oracle_is_perfect() {
        let t = sample();
        let mut nli = MockNli::uniform(RelationJudgment::new(1.0, 0.0, 0.0).unwrap());
        for (p, c) in t.natural_edges() {
            let prompt = relation_prompt(t.concept(p).unwrap(), t.concept(c).unwrap()).unwrap();
            nli = nli.script(
                &prompt.premise,
                &prompt.hypothesis,
                RelationJudgment::new(0.0, 0.0, 1.0).unwrap(),
            );
        }
        let r = nli_verification(&t, &nli, VerifyOptions::default()).unwrap();
        assert_eq!(r.positives, 7);
        assert_eq!(r.negatives, 7);
        for w in &r.windows {
            if w.positives > 0 {
                assert_eq!((w.precision, w.recall, w.f1), (Some(1.0), Some(1.0), Some(1.0)));
            }
            assert_eq!(w.fp, 0);
        }
        let covered: usize = r.windows.iter().map(|w| w.positives + w.negatives).sum();
        assert_eq!(covered, 14);
    }
}

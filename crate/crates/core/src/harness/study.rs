use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{rate_score, HarnessError, RecordSink, StudyConfig, StudyRecord};
use crate::adequacy::{lemma, nliv_cached, EdgeCache, Mode};
use crate::gateway::{Providers, SimilarityMatrix};
use crate::mutation::{degrade_with, MutationError, MutationKind};
use crate::reference::triplet_prf;
use crate::robustness::{csc_with_matrix, representations, semantic_proximity_with_matrix, PairPolicy, PairSample};
use crate::taxonomy::Taxonomy;

/// Knobs that do not change results.
#[derive(Clone, Default)]
pub struct RunOptions {
    /// Shared edge cache; a fresh in-memory cache when absent.
    pub edge_cache: Option<Arc<EdgeCache>>,
    /// Stop after writing this many new records, as if interrupted.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StudySummary {
    pub written: usize,
    pub skipped: usize,
    pub truncated_degradations: usize,
    pub interrupted: bool,
}

/// Everything needed to score one degraded version of a dataset.
pub struct ScoringContext<'a> {
    pub gold: &'a Taxonomy,
    pub providers: &'a Providers,
    pub matrix: Option<&'a SimilarityMatrix>,
    pub pairs: &'a PairSample,
    pub edge_cache: &'a EdgeCache,
    pub rate_top_k: usize,
}

fn na<T, E: std::fmt::Display>(what: &str, r: Result<T, E>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            tracing::debug!(metric = what, error = %e, "score undefined");
            None
        }
    }
}

impl ScoringContext<'_> {
    /// Scores `t`; metrics that fail or are undefined become NA.
    pub fn score(&self, dataset: &str, kind: MutationKind, seed: u64, mutations: usize, t: &Taxonomy) -> StudyRecord {
        let f1 = na("f1", triplet_prf(t, self.gold)).map(|p| p.f1);
        let csc = self.matrix.and_then(|m| na("csc", csc_with_matrix(t, m, self.pairs)));
        let sp = self
            .matrix
            .and_then(|m| na("sp", semantic_proximity_with_matrix(t, m)))
            .map(|s| s.ratio);
        let nli = self.providers.nli.as_ref();
        let nliv_s = na("nliv_s", nliv_cached(t, nli, Mode::Strong, self.edge_cache)).map(|r| r.score);
        let nliv_w = na("nliv_w", nliv_cached(t, nli, Mode::Weak, self.edge_cache)).map(|r| r.score);
        let rate = self
            .providers
            .fill_mask
            .as_ref()
            .and_then(|mlm| na("rate", rate_score(t, mlm.as_ref(), self.rate_top_k)))
            .map(|r| r.score);
        StudyRecord {
            dataset: dataset.to_string(),
            seed,
            kind,
            mutations,
            f1,
            csc: csc.as_ref().map(|c| c.tau),
            csc_p: csc.as_ref().map(|c| c.p_value),
            nliv_s,
            nliv_w,
            sp,
            rate,
        }
    }
}

/// Lemmas of every concept name across the study's datasets, the vocabulary
/// offered by the mock fill-mask backend.
pub fn study_vocabulary(taxonomies: &[Taxonomy]) -> Vec<String> {
    let mut out: Vec<String> = taxonomies
        .iter()
        .flat_map(|t| t.concepts().iter().map(|c| lemma(&c.name)))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Runs (or resumes) a degradation study, appending records to
/// `cfg.records`.
///
/// Degradations of a dataset run in parallel batches; records are written in
/// a fixed order (dataset, kind, seed, mutation count), so the file is
/// byte-identical across runs and across interrupted-then-resumed runs.
pub fn run_study(cfg: &StudyConfig, providers: &Providers, opts: &RunOptions) -> Result<StudySummary, HarnessError> {
    cfg.validate().map_err(|message| HarnessError::Config {
        path: cfg.records.display().to_string(),
        message,
    })?;
    let owned_cache;
    let edge_cache: &EdgeCache = match &opts.edge_cache {
        Some(c) => c,
        None => {
            owned_cache = EdgeCache::in_memory();
            &owned_cache
        }
    };
    let mut sink = RecordSink::open(&cfg.records)?;
    let mut summary = StudySummary {
        written: 0,
        skipped: 0,
        truncated_degradations: 0,
        interrupted: false,
    };
    let batch = rayon::current_num_threads().max(1);

    for dataset in &cfg.datasets {
        let gold = dataset.load()?;
        let seeds = dataset.seeds(gold.len());
        let mut tasks: Vec<(MutationKind, u64)> = Vec::new();
        for &kind in &cfg.kinds {
            for &seed in &seeds {
                let done = cfg
                    .schedule
                    .iter()
                    .all(|&m| sink.contains(&(dataset.id.clone(), kind, seed, m)));
                if done {
                    summary.skipped += cfg.schedule.len();
                } else {
                    tasks.push((kind, seed));
                }
            }
        }
        if tasks.is_empty() {
            continue;
        }
        tracing::info!(dataset = %dataset.id, concepts = gold.len(), tasks = tasks.len(), "scoring degradations");

        let matrix = na(
            "similarity",
            providers.similarity.similarity_matrix(&representations(&gold)),
        );
        let pairs = PairSample::draw(&gold, PairPolicy::auto(gold.len(), cfg.pair_seed));
        let ctx = ScoringContext {
            gold: &gold,
            providers,
            matrix: matrix.as_ref(),
            pairs: &pairs,
            edge_cache,
            rate_top_k: cfg.rate_top_k,
        };

        for chunk in tasks.chunks(batch) {
            let results: Vec<(Vec<StudyRecord>, bool)> = chunk
                .par_iter()
                .map(|&(kind, seed)| {
                    let mut records = Vec::new();
                    let trace = degrade_with(&gold, &cfg.schedule, kind, seed, |count, t| {
                        if !sink.contains(&(dataset.id.clone(), kind, seed, count)) {
                            records.push(ctx.score(&dataset.id, kind, seed, count, t));
                        }
                        Ok::<_, MutationError>(())
                    })?;
                    Ok((records, trace.truncated))
                })
                .collect::<Result<_, HarnessError>>()?;
            for (records, truncated) in results {
                summary.truncated_degradations += usize::from(truncated);
                for r in records {
                    if let Some(limit) = opts.stop_after {
                        if summary.written >= limit {
                            summary.interrupted = true;
                            return Ok(summary);
                        }
                    }
                    summary.written += sink.append(std::slice::from_ref(&r))?;
                }
            }
        }
    }
    Ok(summary)
}

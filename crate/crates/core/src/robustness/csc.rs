use rayon::prelude::*;

use super::{kendall_tau_b, CorrelationResult, PairSample, RobustnessError};
use crate::gateway::{SimilarityMatrix, SimilarityProvider};
use crate::taxonomy::Taxonomy;

/// Embedding input for every natural concept: its description, or its name
/// when the description is empty.
pub fn representations(t: &Taxonomy) -> Vec<String> {
    t.concepts().iter().map(|c| c.representation().to_string()).collect()
}

/// Concept-similarity correlation: tau-b between Wu-Palmer similarity and
/// embedding cosine over the sampled pairs.
pub fn csc(
    t: &Taxonomy,
    sim: &dyn SimilarityProvider,
    sample: &PairSample,
) -> Result<CorrelationResult, RobustnessError> {
    let matrix = sim.similarity_matrix(&representations(t))?;
    csc_with_matrix(t, &matrix, sample)
}

/// [`csc`] against a precomputed matrix indexed like [`Taxonomy::concepts`].
///
/// Mutations never change the concept set, so one matrix serves every
/// degraded version of a taxonomy.
pub fn csc_with_matrix(
    t: &Taxonomy,
    matrix: &SimilarityMatrix,
    sample: &PairSample,
) -> Result<CorrelationResult, RobustnessError> {
    assert_eq!(matrix.len(), t.len(), "similarity matrix does not match the taxonomy");
    let ancestry = t.ancestry();
    let (wps, cos): (Vec<f64>, Vec<f64>) = sample
        .positions()
        .par_iter()
        .map(|&(i, j)| {
            let (i, j) = (i as usize, j as usize);
            (ancestry.wu_palmer_ix(i + 2, j + 2), matrix.get(i, j))
        })
        .unzip();
    kendall_tau_b(&wps, &cos)
}

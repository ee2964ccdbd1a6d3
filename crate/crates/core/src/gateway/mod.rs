//! Access to semantic models.
//!
//! Three interchangeable backends implement the provider traits: a
//! deterministic [`mock`] backend, precomputed score [`files`], and an
//! [`http`] client for the inference sidecar. [`cache`] wraps any of them with
//! an in-memory cache that also collapses concurrent requests for one key.

pub mod cache;
pub mod files;
pub mod http;
pub mod mock;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CachedFillMask, CachedNli, CachedSimilarity, DedupCache};

/// Placeholder the fill-mask prompts carry for the predicted token.
pub const MASK_TOKEN: &str = "[MASK]";

/// Above this many texts a [`SimilarityMatrix`] keeps embeddings instead of a
/// dense table.
pub const DENSE_LIMIT: usize = 2048;

pub type Embedding = Vec<f32>;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no embedding stored for text {text:?}")]
    MissingEmbedding { text: String },
    #[error("no judgment stored for {input:?}")]
    MissingJudgment { input: String },
    #[error("no candidates stored for prompt {prompt:?}")]
    MissingCandidates { prompt: String },
    #[error("prompt must contain exactly one {MASK_TOKEN}, found {found}: {prompt:?}")]
    NoMask { prompt: String, found: usize },
    #[error("invalid judgment ({contradicts}, {neutral}, {entails})")]
    InvalidJudgment {
        contradicts: f64,
        neutral: f64,
        entails: f64,
    },
    #[error("{path}:{line}: {message}")]
    Store { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An NLI probability distribution over contradiction, neutrality and
/// entailment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationJudgment {
    pub contradicts: f64,
    pub neutral: f64,
    pub entails: f64,
}

impl RelationJudgment {
    pub const TOLERANCE: f64 = 1e-4;

    pub fn new(contradicts: f64, neutral: f64, entails: f64) -> Result<Self, GatewayError> {
        let judgment = RelationJudgment {
            contradicts,
            neutral,
            entails,
        };
        if judgment.is_valid() {
            Ok(judgment)
        } else {
            Err(GatewayError::InvalidJudgment {
                contradicts,
                neutral,
                entails,
            })
        }
    }

    pub fn uniform() -> Self {
        RelationJudgment {
            contradicts: 1.0 / 3.0,
            neutral: 1.0 / 3.0,
            entails: 1.0 / 3.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        let parts = [self.contradicts, self.neutral, self.entails];
        parts.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
            && (parts.iter().sum::<f64>() - 1.0).abs() <= Self::TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
}

impl NliPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        NliPair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }

    /// Premise and hypothesis as one input separated by a dot.
    pub fn joined(&self) -> String {
        let premise = self.premise.trim_end().trim_end_matches('.');
        format!("{premise}. {}", self.hypothesis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub score: f64,
}

pub trait SimilarityProvider: Send + Sync {
    /// Stable identity of backend and model; cache keys include it.
    fn fingerprint(&self) -> String;

    /// One unit-norm vector per text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError>;

    /// Scripted adjustments applied on top of embedding cosines.
    fn apply_overrides(&self, _texts: &[String], _matrix: &mut SimilarityMatrix) {}

    /// Pairwise cosine similarities over `texts`.
    fn similarity_matrix(&self, texts: &[String]) -> Result<SimilarityMatrix, GatewayError> {
        let mut matrix = SimilarityMatrix::from_embeddings(self.embed(texts)?);
        self.apply_overrides(texts, &mut matrix);
        Ok(matrix)
    }
}

pub trait NliProvider: Send + Sync {
    fn fingerprint(&self) -> String;

    /// One judgment per pair, in input order.
    fn judge(&self, pairs: &[NliPair]) -> Result<Vec<RelationJudgment>, GatewayError>;
}

pub trait FillMaskProvider: Send + Sync {
    fn fingerprint(&self) -> String;

    /// Up to `k` candidates for the single mask slot, best first.
    fn fill_mask(&self, prompt: &str, k: usize) -> Result<Vec<Candidate>, GatewayError>;
}

/// Fails unless `prompt` holds exactly one mask token.
pub fn check_mask(prompt: &str) -> Result<(), GatewayError> {
    let found = prompt.matches(MASK_TOKEN).count();
    if found == 1 {
        Ok(())
    } else {
        Err(GatewayError::NoMask {
            prompt: prompt.to_string(),
            found,
        })
    }
}

/// Sorts by descending score, drops case-insensitive duplicates and keeps `k`.
pub fn top_k(mut candidates: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.token.cmp(&b.token)));
    let mut seen = std::collections::HashSet::new();
    candidates
        .into_iter()
        .filter(|c| seen.insert(c.token.to_lowercase()))
        .take(k)
        .collect()
}

pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 && (norm - 1.0).abs() > 1e-6 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub(crate) fn short_hash(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Symmetric pairwise similarities with a unit diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    n: usize,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(Vec<f64>),
    Vectors(Vec<Embedding>),
}

impl SimilarityMatrix {
    pub fn from_embeddings(vectors: Vec<Embedding>) -> Self {
        let n = vectors.len();
        if n <= DENSE_LIMIT {
            SimilarityMatrix::from_fn(n, |i, j| cosine(&vectors[i], &vectors[j]))
        } else {
            SimilarityMatrix {
                n,
                repr: Repr::Vectors(vectors),
            }
        }
    }

    /// Dense matrix filled from `f(i, j)` for `i < j`.
    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => f(i, j),
                    std::cmp::Ordering::Greater => f(j, i),
                };
            }
        });
        SimilarityMatrix {
            n,
            repr: Repr::Dense(values),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Dense(values) => values[i * self.n + j],
            Repr::Vectors(vectors) => {
                if i == j {
                    1.0
                } else {
                    cosine(&vectors[i], &vectors[j])
                }
            }
        }
    }

    /// Overrides one symmetric entry, densifying first if needed.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if let Repr::Vectors(vectors) = &self.repr {
            let vectors = vectors.clone();
            *self = SimilarityMatrix::from_fn(self.n, |a, b| cosine(&vectors[a], &vectors[b]));
        }
        if let Repr::Dense(values) = &mut self.repr {
            values[i * self.n + j] = value;
            values[j * self.n + i] = value;
        }
    }

    /// Applies a strictly increasing transform to every off-diagonal entry.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        SimilarityMatrix::from_fn(self.n, |i, j| f(self.get(i, j)))
    }
}

/// Backend selection as written in study configs and on the command line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Mock {
        #[serde(default)]
        seed: u64,
    },
    Files {
        embeddings: PathBuf,
        nli: PathBuf,
        #[serde(default)]
        fill_mask: Option<PathBuf>,
    },
    Http {
        #[serde(default)]
        url: Option<String>,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Mock { seed: 0 }
    }
}

/// The three model services a study needs.
#[derive(Clone)]
pub struct Providers {
    pub similarity: Arc<dyn SimilarityProvider>,
    pub nli: Arc<dyn NliProvider>,
    pub fill_mask: Option<Arc<dyn FillMaskProvider>>,
}

impl Providers {
    /// Builds cached providers. The mock fill-mask backend draws candidates
    /// from the lemmas of `vocabulary`.
    pub fn from_config(config: &ProviderConfig, vocabulary: &[String]) -> Result<Self, GatewayError> {
        let (similarity, nli, fill_mask): (
            Arc<dyn SimilarityProvider>,
            Arc<dyn NliProvider>,
            Option<Arc<dyn FillMaskProvider>>,
        ) = match config {
            ProviderConfig::Mock { seed } => (
                Arc::new(mock::MockSimilarity::new(*seed)),
                Arc::new(mock::MockNli::lexical(*seed)),
                Some(Arc::new(mock::MockFillMask::hashed(*seed, vocabulary.to_vec()))),
            ),
            ProviderConfig::Files {
                embeddings,
                nli,
                fill_mask,
            } => (
                Arc::new(files::FileSimilarity::open(embeddings)?),
                Arc::new(files::FileNli::open(nli)?),
                match fill_mask {
                    Some(path) => Some(Arc::new(files::FileFillMask::open(path)?)),
                    None => None,
                },
            ),
            ProviderConfig::Http { url } => {
                let client = match url {
                    Some(url) => http::SidecarClient::new(url.clone()),
                    None => http::SidecarClient::from_env(),
                };
                let client = Arc::new(client);
                (client.clone(), client.clone(), Some(client))
            }
        };
        Ok(Providers {
            similarity: Arc::new(CachedSimilarity::new(similarity)),
            nli: Arc::new(CachedNli::new(nli)),
            fill_mask: fill_mask.map(|f| Arc::new(CachedFillMask::new(f)) as Arc<dyn FillMaskProvider>),
        })
    }
}

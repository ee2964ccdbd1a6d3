//! Deterministic model stand-ins.
//!
//! Everything here is a pure function of a seed and the input text, so test
//! expectations and study records are reproducible without model weights.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::{
    check_mask, normalize, top_k, Candidate, Embedding, FillMaskProvider, GatewayError, NliPair, NliProvider,
    RelationJudgment, SimilarityMatrix, SimilarityProvider,
};

const STOP_WORDS: &[&str] = &[
    "a", "an", "and", "any", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is", "it", "its", "kind",
    "of", "on", "or", "that", "the", "to", "type", "usually", "which", "with",
];

/// Lowercased alphanumeric tokens without stop words.
pub fn content_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect()
}

fn hash64(seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn unit_interval(seed: u64, parts: &[&str]) -> f64 {
    (hash64(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EmbedMode {
    BagOfWords,
    Constant,
}

/// Hashed bag-of-words embeddings.
///
/// Each content token lands in a seeded bucket, so texts without shared
/// tokens have cosine exactly zero (barring bucket collisions) and a text
/// always has cosine one with itself. Pair overrides replace single entries of
/// the similarity matrix, keyed by the two texts.
pub struct MockSimilarity {
    seed: u64,
    dim: usize,
    mode: EmbedMode,
    overrides: HashMap<(String, String), f64>,
    calls: AtomicUsize,
}

impl MockSimilarity {
    pub const DEFAULT_DIM: usize = 1024;

    pub fn new(seed: u64) -> Self {
        MockSimilarity {
            seed,
            dim: Self::DEFAULT_DIM,
            mode: EmbedMode::BagOfWords,
            overrides: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    /// Every text gets the same vector.
    pub fn constant() -> Self {
        MockSimilarity {
            mode: EmbedMode::Constant,
            ..MockSimilarity::new(0)
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    /// Scripts `sim(a, b)`; the pair is unordered.
    pub fn with_override(mut self, a: &str, b: &str, value: f64) -> Self {
        self.overrides.insert(ordered(a, b), value);
        self
    }

    pub fn with_overrides<I>(mut self, entries: I) -> Self
    where
        I: IntoIterator<Item = ((String, String), f64)>,
    {
        for ((a, b), v) in entries {
            self.overrides.insert(ordered(&a, &b), v);
        }
        self
    }

    /// Texts embedded so far, counting repeats.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn embed_one(&self, text: &str) -> Embedding {
        let mut v = vec![0.0f32; self.dim];
        match self.mode {
            EmbedMode::Constant => v[0] = 1.0,
            EmbedMode::BagOfWords => {
                let tokens = content_tokens(text);
                if tokens.is_empty() {
                    v[(hash64(self.seed, &[text]) % self.dim as u64) as usize] = 1.0;
                }
                for token in &tokens {
                    v[(hash64(self.seed, &[token]) % self.dim as u64) as usize] += 1.0;
                }
                normalize(&mut v);
            }
        }
        v
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SimilarityProvider for MockSimilarity {
    fn fingerprint(&self) -> String {
        match self.mode {
            EmbedMode::Constant => "mock:constant".to_string(),
            EmbedMode::BagOfWords => {
                let mut scripted: Vec<_> = self.overrides.iter().collect();
                scripted.sort_by(|a, b| a.0.cmp(b.0));
                let digest = super::short_hash(&[format!("{scripted:?}").as_bytes()]);
                format!("mock:bow:{}:{}:{digest}", self.seed, self.dim)
            }
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        self.calls.fetch_add(texts.len(), Ordering::Relaxed);
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn apply_overrides(&self, texts: &[String], matrix: &mut SimilarityMatrix) {
        if self.overrides.is_empty() {
            return;
        }
        let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, t) in texts.iter().enumerate() {
            positions.entry(t.as_str()).or_default().push(i);
        }
        for ((a, b), &value) in &self.overrides {
            let (Some(pa), Some(pb)) = (positions.get(a.as_str()), positions.get(b.as_str())) else {
                continue;
            };
            for &i in pa {
                for &j in pb {
                    if i != j {
                        matrix.set(i, j, value);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NliMode {
    Fixed(RelationJudgment),
    Lexical,
}

/// Scripted NLI with a configurable fallback.
///
/// Lookups go by exact `(premise, hypothesis)` first, then by hypothesis alone.
/// Unscripted pairs get the fallback: a fixed judgment (uniform by default),
/// or in lexical mode a judgment driven by how many content tokens of the
/// hypothesis' parent term occur in the premise.
pub struct MockNli {
    seed: u64,
    mode: NliMode,
    pairs: HashMap<NliPair, RelationJudgment>,
    hypotheses: HashMap<String, RelationJudgment>,
    calls: AtomicUsize,
}

impl Default for MockNli {
    fn default() -> Self {
        MockNli::uniform(RelationJudgment::uniform())
    }
}

impl MockNli {
    pub fn uniform(judgment: RelationJudgment) -> Self {
        MockNli {
            seed: 0,
            mode: NliMode::Fixed(judgment),
            pairs: HashMap::new(),
            hypotheses: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn lexical(seed: u64) -> Self {
        MockNli {
            seed,
            mode: NliMode::Lexical,
            ..MockNli::default()
        }
    }

    pub fn script(mut self, premise: &str, hypothesis: &str, judgment: RelationJudgment) -> Self {
        self.pairs.insert(NliPair::new(premise, hypothesis), judgment);
        self
    }

    pub fn script_hypothesis(mut self, hypothesis: &str, judgment: RelationJudgment) -> Self {
        self.hypotheses.insert(hypothesis.to_string(), judgment);
        self
    }

    /// Pairs judged by this backend so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn judge_one(&self, pair: &NliPair) -> RelationJudgment {
        if let Some(j) = self.pairs.get(pair) {
            return *j;
        }
        if let Some(j) = self.hypotheses.get(&pair.hypothesis) {
            return *j;
        }
        match self.mode {
            NliMode::Fixed(j) => j,
            NliMode::Lexical => self.lexical_judgment(pair),
        }
    }

    fn lexical_judgment(&self, pair: &NliPair) -> RelationJudgment {
        let parent_part = pair
            .hypothesis
            .rsplit_once(" is a kind of ")
            .map(|(_, parent)| parent)
            .unwrap_or(&pair.hypothesis);
        let wanted: HashSet<String> = content_tokens(parent_part).into_iter().collect();
        let premise: HashSet<String> = content_tokens(&pair.premise).into_iter().collect();
        let overlap = if wanted.is_empty() {
            0.0
        } else {
            wanted.iter().filter(|t| premise.contains(*t)).count() as f64 / wanted.len() as f64
        };
        let jitter = unit_interval(self.seed, &[&pair.premise, &pair.hypothesis]);
        let entails = 0.05 + 0.8 * overlap + 0.1 * jitter;
        let contradicts = (1.0 - overlap) * 0.5 * (0.5 + jitter);
        RelationJudgment {
            contradicts,
            neutral: 1.0 - entails - contradicts,
            entails,
        }
    }
}

impl NliProvider for MockNli {
    fn fingerprint(&self) -> String {
        let mode = match self.mode {
            NliMode::Fixed(j) => format!("fixed({},{},{})", j.contradicts, j.neutral, j.entails),
            NliMode::Lexical => format!("lexical({})", self.seed),
        };
        let mut scripted: Vec<String> = self
            .pairs
            .iter()
            .map(|(p, j)| format!("{}|{}|{:?}", p.premise, p.hypothesis, j))
            .chain(self.hypotheses.iter().map(|(h, j)| format!("|{h}|{j:?}")))
            .collect();
        scripted.sort();
        format!(
            "mock:nli:{mode}:{}",
            super::short_hash(&[scripted.join("\n").as_bytes()])
        )
    }

    fn judge(&self, pairs: &[NliPair]) -> Result<Vec<RelationJudgment>, GatewayError> {
        self.calls.fetch_add(pairs.len(), Ordering::Relaxed);
        Ok(pairs.iter().map(|p| self.judge_one(p)).collect())
    }
}

#[derive(Debug, Clone)]
enum FillMode {
    Fixed(Vec<Candidate>),
    Hashed(Vec<String>),
}

/// Fill-mask stand-in: scripted prompts, then either a fixed scored
/// vocabulary or a vocabulary ranked by a seeded hash of prompt and token.
pub struct MockFillMask {
    seed: u64,
    mode: FillMode,
    prompts: HashMap<String, Vec<Candidate>>,
    calls: AtomicUsize,
}

impl MockFillMask {
    pub fn fixed<I, S>(vocabulary: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        MockFillMask {
            seed: 0,
            mode: FillMode::Fixed(
                vocabulary
                    .into_iter()
                    .map(|(token, score)| Candidate {
                        token: token.into(),
                        score,
                    })
                    .collect(),
            ),
            prompts: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn hashed(seed: u64, vocabulary: Vec<String>) -> Self {
        MockFillMask {
            seed,
            mode: FillMode::Hashed(vocabulary),
            prompts: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn script(mut self, prompt: &str, candidates: Vec<Candidate>) -> Self {
        self.prompts.insert(prompt.to_string(), candidates);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl FillMaskProvider for MockFillMask {
    fn fingerprint(&self) -> String {
        let mode = match &self.mode {
            FillMode::Fixed(v) => format!("fixed:{}", super::short_hash(&[format!("{v:?}").as_bytes()])),
            FillMode::Hashed(v) => format!("hashed:{}:{}", self.seed, super::short_hash(&[v.join("\n").as_bytes()])),
        };
        let mut scripted: Vec<String> = self.prompts.iter().map(|(p, c)| format!("{p}{c:?}")).collect();
        scripted.sort();
        format!(
            "mock:fill:{mode}:{}",
            super::short_hash(&[scripted.join("\n").as_bytes()])
        )
    }

    fn fill_mask(&self, prompt: &str, k: usize) -> Result<Vec<Candidate>, GatewayError> {
        check_mask(prompt)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let candidates = match (self.prompts.get(prompt), &self.mode) {
            (Some(scripted), _) => scripted.clone(),
            (None, FillMode::Fixed(v)) => v.clone(),
            (None, FillMode::Hashed(vocab)) => vocab
                .iter()
                .map(|token| Candidate {
                    token: token.clone(),
                    score: unit_interval(self.seed, &[prompt, token]),
                })
                .collect(),
        };
        Ok(top_k(candidates, k))
    }
}

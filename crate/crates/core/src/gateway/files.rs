//! Precomputed model outputs stored as line-delimited JSON.
//!
//! * embeddings: `{"text_hash", "text", "vector": [..]}`
//! * NLI scores: `{"input", "contradicts", "neutral", "entails"}` where
//!   `input` is premise and hypothesis joined by a dot (see [`NliPair::joined`])
//! * fill-mask: `{"prompt", "candidates": [{"token", "score"}]}`

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_mask, normalize, short_hash, top_k, Candidate, Embedding, FillMaskProvider, GatewayError, NliPair,
    NliProvider, RelationJudgment, SimilarityProvider,
};

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub text_hash: String,
    pub text: String,
    pub vector: Embedding,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NliRecord {
    pub input: String,
    pub contradicts: f64,
    pub neutral: f64,
    pub entails: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FillMaskRecord {
    pub prompt: String,
    pub candidates: Vec<Candidate>,
}

pub fn text_hash(text: &str) -> String {
    short_hash(&[text.as_bytes()])
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, String), GatewayError> {
    let bytes = fs::read(path)?;
    let fingerprint = short_hash(&[&bytes]);
    let text = String::from_utf8_lossy(&bytes);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| GatewayError::Store {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok((out, fingerprint))
}

/// Writes an embedding store that [`FileSimilarity`] reads back bit-for-bit.
pub fn write_embedding_store(path: &Path, texts: &[String], vectors: &[Embedding]) -> Result<(), GatewayError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (text, vector) in texts.iter().zip(vectors) {
        let record = EmbeddingRecord {
            text_hash: text_hash(text),
            text: text.clone(),
            vector: vector.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_nli_scores(path: &Path, pairs: &[NliPair], judgments: &[RelationJudgment]) -> Result<(), GatewayError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (pair, j) in pairs.iter().zip(judgments) {
        let record = NliRecord {
            input: pair.joined(),
            contradicts: j.contradicts,
            neutral: j.neutral,
            entails: j.entails,
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub struct FileSimilarity {
    vectors: HashMap<String, Embedding>,
    fingerprint: String,
}

impl FileSimilarity {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let (records, digest): (Vec<EmbeddingRecord>, _) = read_jsonl(path)?;
        let vectors = records
            .into_iter()
            .map(|mut r| {
                normalize(&mut r.vector);
                (r.text, r.vector)
            })
            .collect();
        Ok(FileSimilarity {
            vectors,
            fingerprint: format!("files:embed:{digest}"),
        })
    }
}

impl SimilarityProvider for FileSimilarity {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .cloned()
                    .ok_or_else(|| GatewayError::MissingEmbedding { text: t.clone() })
            })
            .collect()
    }
}

pub struct FileNli {
    judgments: HashMap<String, RelationJudgment>,
    fingerprint: String,
}

impl FileNli {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let (records, digest): (Vec<NliRecord>, _) = read_jsonl(path)?;
        let mut judgments = HashMap::with_capacity(records.len());
        for r in records {
            let j = RelationJudgment::new(r.contradicts, r.neutral, r.entails)?;
            judgments.insert(r.input, j);
        }
        Ok(FileNli {
            judgments,
            fingerprint: format!("files:nli:{digest}"),
        })
    }
}

impl NliProvider for FileNli {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn judge(&self, pairs: &[NliPair]) -> Result<Vec<RelationJudgment>, GatewayError> {
        pairs
            .iter()
            .map(|p| {
                let input = p.joined();
                self.judgments
                    .get(&input)
                    .copied()
                    .ok_or(GatewayError::MissingJudgment { input })
            })
            .collect()
    }
}

pub struct FileFillMask {
    prompts: HashMap<String, Vec<Candidate>>,
    fingerprint: String,
}

impl FileFillMask {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let (records, digest): (Vec<FillMaskRecord>, _) = read_jsonl(path)?;
        Ok(FileFillMask {
            prompts: records.into_iter().map(|r| (r.prompt, r.candidates)).collect(),
            fingerprint: format!("files:fill:{digest}"),
        })
    }
}

impl FillMaskProvider for FileFillMask {
    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn fill_mask(&self, prompt: &str, k: usize) -> Result<Vec<Candidate>, GatewayError> {
        check_mask(prompt)?;
        let candidates = self
            .prompts
            .get(prompt)
            .cloned()
            .ok_or_else(|| GatewayError::MissingCandidates {
                prompt: prompt.to_string(),
            })?;
        Ok(top_k(candidates, k))
    }
}

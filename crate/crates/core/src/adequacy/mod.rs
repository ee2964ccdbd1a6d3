//! Logical adequacy: NLI-scored parent-child relations combined along root
//! paths into the NLIV score.

mod cache;
mod nliv;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, NliPair, RelationJudgment};
use crate::taxonomy::Concept;

pub use cache::{EdgeCache, EdgeRecord, CACHE_DIR_ENV, CACHE_FILE};
pub use nliv::{edge_judgments, nliv, nliv_cached, NlivResult};

#[derive(Debug, Error)]
pub enum AdequacyError {
    #[error("`{id}` is a pseudo concept and has no relation prompt")]
    PseudoConcept { id: String },
    #[error("a classification needs at least one edge")]
    EmptyClassification,
    #[error("zero probability makes the perplexity infinite")]
    ZeroProbability,
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("no concept below a natural root to score")]
    NothingToScore,
    #[error("scoring edge {parent} -> {child}: {source}")]
    Edge {
        parent: String,
        child: String,
        #[source]
        source: GatewayError,
    },
    #[error("edge cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which NLI class counts as evidence for a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Probability of entailment.
    Strong,
    /// Probability of not contradicting.
    Weak,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strong => "strong",
            Mode::Weak => "weak",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "strong" | "nliv-s" => Ok(Mode::Strong),
            "w" | "weak" | "nliv-w" => Ok(Mode::Weak),
            other => Err(format!("unknown mode `{other}` (expected s or w)")),
        }
    }
}

/// Normalized surface form of a concept name: lowercased, underscores and
/// hyphens read as spaces, trailing parenthetical qualifiers dropped.
pub fn lemma(name: &str) -> String {
    let mut s = name.trim().to_lowercase().replace(['_', '-'], " ");
    loop {
        let trimmed = s.trim_end();
        if trimmed.ends_with(')') {
            if let Some(open) = trimmed.rfind('(') {
                if open > 0 {
                    s = trimmed[..open].to_string();
                    continue;
                }
            }
        }
        break;
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn indefinite(noun: &str) -> &'static str {
    match noun.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationPrompt {
    pub premise: String,
    pub hypothesis: String,
    pub parent_id: String,
    pub child_id: String,
}

impl RelationPrompt {
    pub fn pair(&self) -> NliPair {
        NliPair::new(self.premise.clone(), self.hypothesis.clone())
    }
}

/// NLI input for the relation `parent -> child`.
///
/// The premise states the child's gloss ("antipasto is a course of
/// appetizers"); without a gloss it falls back to "antipasto is an
/// antipasto". The hypothesis reads "antipasto is a kind of appetizer".
pub fn relation_prompt(parent: &Concept, child: &Concept) -> Result<RelationPrompt, AdequacyError> {
    for c in [parent, child] {
        if c.is_pseudo {
            return Err(AdequacyError::PseudoConcept { id: c.id.clone() });
        }
    }
    let child_lemma = lemma(&child.name);
    let gloss = child.description.trim().trim_end_matches('.').trim_end();
    let premise = if gloss.is_empty() {
        format!("{child_lemma} is {} {child_lemma}", indefinite(&child_lemma))
    } else if gloss.to_lowercase().starts_with(&format!("{child_lemma} ")) {
        gloss.to_string()
    } else {
        format!("{child_lemma} is {gloss}")
    };
    Ok(RelationPrompt {
        premise,
        hypothesis: format!("{child_lemma} is a kind of {}", lemma(&parent.name)),
        parent_id: parent.id.clone(),
        child_id: child.id.clone(),
    })
}

/// Adequacy probability of one relation under `mode`.
pub fn relation_probability(j: &RelationJudgment, mode: Mode) -> f64 {
    match mode {
        Mode::Strong => j.entails,
        Mode::Weak => 1.0 - j.contradicts,
    }
    .clamp(0.0, 1.0)
}

/// Joint probability of a classification and its length-normalized form,
/// the geometric mean of the edge probabilities.
pub fn classification_probability(probs: &[f64]) -> Result<(f64, f64), AdequacyError> {
    if probs.is_empty() {
        return Err(AdequacyError::EmptyClassification);
    }
    if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(AdequacyError::OutOfRange(p));
    }
    if probs.contains(&0.0) {
        return Ok((0.0, 0.0));
    }
    let log: f64 = probs.iter().map(|p| p.ln()).sum();
    Ok((log.exp(), (log / probs.len() as f64).exp()))
}

/// Reciprocal geometric mean of `probs`.
pub fn perplexity(probs: &[f64]) -> Result<f64, AdequacyError> {
    let (_, normalized) = classification_probability(probs)?;
    if normalized == 0.0 {
        return Err(AdequacyError::ZeroProbability);
    }
    let log: f64 = probs.iter().map(|p| p.ln()).sum();
    Ok((-log / probs.len() as f64).exp())
}

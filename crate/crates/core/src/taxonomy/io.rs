//! Taxonomy file formats.
//!
//! * JSON: `{"concepts": [{"id", "name", "description", "parents": [..]}]}`.
//! * TSV edges: one `child<TAB>parent` edge per line, with an optional
//!   companion `id<TAB>name<TAB>description` gloss file. A line holding a
//!   single id declares a concept without parents.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Concept, Taxonomy, TaxonomyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaxonomyFormat {
    Json,
    TsvEdges,
}

impl TaxonomyFormat {
    /// `.json` files are JSON, everything else is read as TSV edges.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TaxonomyFormat::Json,
            _ => TaxonomyFormat::TsvEdges,
        }
    }
}

impl std::str::FromStr for TaxonomyFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(TaxonomyFormat::Json),
            "tsv" | "tsv-edges" => Ok(TaxonomyFormat::TsvEdges),
            other => Err(format!("unknown taxonomy format `{other}`")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDocument {
    concepts: Vec<JsonConcept>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonConcept {
    id: String,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    parents: Vec<String>,
}

/// Loads and validates a taxonomy. `glosses` is only consulted for TSV input.
pub fn load_taxonomy(path: &Path, format: TaxonomyFormat, glosses: Option<&Path>) -> Result<Taxonomy, TaxonomyError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    match format {
        TaxonomyFormat::Json => read_json(&text, &name),
        TaxonomyFormat::TsvEdges => {
            let glosses = match glosses {
                Some(g) => Some((fs::read_to_string(g)?, g.display().to_string())),
                None => None,
            };
            read_tsv(
                &text,
                &name,
                glosses.as_ref().map(|(text, name)| (text.as_str(), name.as_str())),
            )
        }
    }
}

pub fn read_json(text: &str, source_name: &str) -> Result<Taxonomy, TaxonomyError> {
    let doc: JsonDocument = serde_json::from_str(text).map_err(|e| TaxonomyError::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut edges = Vec::new();
    let mut concepts = Vec::with_capacity(doc.concepts.len());
    for c in doc.concepts {
        for p in &c.parents {
            edges.push((p.clone(), c.id.clone()));
        }
        concepts.push(Concept::new(c.id, c.name, c.description));
    }
    Taxonomy::from_edges(concepts, edges)
}

pub fn read_tsv(edges_text: &str, source_name: &str, glosses: Option<(&str, &str)>) -> Result<Taxonomy, TaxonomyError> {
    let mut order: Vec<String> = Vec::new();
    let mut known: HashMap<String, usize> = HashMap::new();
    let mut touch = |id: &str, order: &mut Vec<String>| {
        if !known.contains_key(id) {
            known.insert(id.to_string(), order.len());
            order.push(id.to_string());
        }
    };

    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            [child] if !child.is_empty() => touch(child, &mut order),
            [child, parent] if !child.is_empty() && !parent.is_empty() => {
                touch(parent, &mut order);
                touch(child, &mut order);
                edges.push((parent.to_string(), child.to_string()));
            }
            _ => {
                return Err(TaxonomyError::Parse {
                    source_name: source_name.to_string(),
                    line: lineno + 1,
                    message: format!("expected `child<TAB>parent`, got {} fields", fields.len()),
                })
            }
        }
    }

    let mut names: HashMap<String, (String, String)> = HashMap::new();
    if let Some((text, gloss_name)) = glosses {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let id = fields.next().unwrap_or_default().trim();
            let Some(name) = fields.next() else {
                return Err(TaxonomyError::Parse {
                    source_name: gloss_name.to_string(),
                    line: lineno + 1,
                    message: "expected `id<TAB>name<TAB>description`".to_string(),
                });
            };
            let description = fields.next().unwrap_or_default();
            touch(id, &mut order);
            names.insert(
                id.to_string(),
                (name.trim().to_string(), description.trim().to_string()),
            );
        }
    }

    let concepts = order
        .into_iter()
        .map(|id| match names.remove(&id) {
            Some((name, description)) => Concept::new(id, name, description),
            None => Concept::new(id.clone(), id, ""),
        })
        .collect();
    Taxonomy::from_edges(concepts, edges)
}

/// Writes the JSON format; pseudo concepts are left implicit.
pub fn write_json(t: &Taxonomy, path: &Path) -> Result<(), TaxonomyError> {
    let doc = JsonDocument {
        concepts: (2..t.node_count())
            .map(|v| {
                let c = t.node(v);
                JsonConcept {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    description: c.description.clone(),
                    parents: t.natural_parents_ix(v).map(|p| t.node(p).id.clone()).collect(),
                }
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("taxonomy serializes");
    fs::write(path, text)?;
    Ok(())
}

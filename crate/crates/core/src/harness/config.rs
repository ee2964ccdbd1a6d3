use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gateway::ProviderConfig;
use crate::mutation::{MutationKind, DEFAULT_SCHEDULE};
use crate::taxonomy::{load_taxonomy, Taxonomy, TaxonomyFormat};

/// Taxonomies at or above this size get the smaller default degradation count.
pub const LARGE_TAXONOMY: usize = 5000;

fn default_schedule() -> Vec<usize> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_kinds() -> Vec<MutationKind> {
    vec![MutationKind::Any]
}

fn default_top_k() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<String>,
    /// Companion gloss file for the TSV edge format.
    #[serde(default)]
    pub glosses: Option<PathBuf>,
    /// Degradations per kind; defaults to 100, or 50 for large taxonomies.
    #[serde(default)]
    pub degradations: Option<usize>,
    /// Explicit degradation seeds, overriding `degradations` and `base_seed`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
}

impl DatasetConfig {
    pub fn load(&self) -> Result<Taxonomy, HarnessError> {
        let format = match &self.format {
            Some(f) => f.parse::<TaxonomyFormat>().map_err(|message| HarnessError::Config {
                path: self.path.display().to_string(),
                message,
            })?,
            None => TaxonomyFormat::from_path(&self.path),
        };
        Ok(load_taxonomy(&self.path, format, self.glosses.as_deref())?)
    }

    pub fn seeds(&self, concepts: usize) -> Vec<u64> {
        if let Some(seeds) = &self.seeds {
            return seeds.clone();
        }
        let count = self
            .degradations
            .unwrap_or(if concepts < LARGE_TAXONOMY { 100 } else { 50 });
        (0..count as u64).map(|i| self.base_seed + i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<MutationKind>,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    #[serde(default)]
    pub provider: ProviderConfig,
    /// Output CSV; appended to and resumed from.
    pub records: PathBuf,
    /// Seed for sampling CSC pairs on large taxonomies.
    #[serde(default)]
    pub pair_seed: u64,
    /// Candidates requested per RaTE prompt.
    #[serde(default = "default_top_k")]
    pub rate_top_k: usize,
}

impl StudyConfig {
    /// Reads a TOML or JSON config. Relative paths are resolved against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        let bad = |message: String| HarnessError::Config {
            path: path.display().to_string(),
            message,
        };
        let mut cfg: StudyConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?,
            _ => toml::from_str(&text).map_err(|e| bad(e.to_string()))?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate().map_err(bad)?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.records);
        for d in &mut self.datasets {
            fix(&mut d.path);
            if let Some(g) = &mut d.glosses {
                fix(g);
            }
        }
        if let ProviderConfig::Files {
            embeddings,
            nli,
            fill_mask,
        } = &mut self.provider
        {
            fix(embeddings);
            fix(nli);
            if let Some(f) = fill_mask {
                fix(f);
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.datasets.is_empty() {
            return Err("no datasets".into());
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("dataset ids must be unique".into());
        }
        if self.datasets.iter().any(|d| d.degradations == Some(0)) {
            return Err("degradation counts must be positive".into());
        }
        if self.kinds.is_empty() {
            return Err("no mutation kinds".into());
        }
        crate::mutation::validate_schedule(&self.schedule).map_err(|e| e.to_string())?;
        if self.schedule.is_empty() {
            return Err("empty schedule".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults() {
        let cfg: StudyConfig = toml::from_str(
            r#"
            records = "out.csv"
            [[datasets]]
            id = "food"
            path = "food.json"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.schedule, vec![1, 8, 64, 512, 4096]);
        assert_eq!(cfg.kinds, vec![MutationKind::Any]);
        assert_eq!(cfg.provider, ProviderConfig::Mock { seed: 0 });
        assert_eq!(cfg.datasets[0].seeds(1486).len(), 100);
        assert_eq!(cfg.datasets[0].seeds(9000).len(), 50);
        cfg.validate().unwrap();
    }

    #[test]
    fn explicit_seeds_and_provider() {
        let cfg: StudyConfig = toml::from_str(
            r#"
            records = "out.csv"
            kinds = ["leaf", "non_leaf"]
            schedule = [1, 2]
            [provider]
            kind = "http"
            url = "http://localhost:9000"
            [[datasets]]
            id = "x"
            path = "x.tsv"
            seeds = [5, 7]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.datasets[0].seeds(10), vec![5, 7]);
        assert!(matches!(cfg.provider, ProviderConfig::Http { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg: StudyConfig = toml::from_str(
            r#"
            records = "out.csv"
            schedule = [8, 1]
            [[datasets]]
            id = "x"
            path = "x.json"
            "#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![1];
        cfg.datasets.push(cfg.datasets[0].clone());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.json");
        fs::write(
            &path,
            r#"{"records": "r.csv", "datasets": [{"id": "a", "path": "a.json"}]}"#,
        )
        .unwrap();
        let cfg = StudyConfig::from_file(&path).unwrap();
        assert_eq!(cfg.records, dir.path().join("r.csv"));
        assert_eq!(cfg.datasets[0].path, dir.path().join("a.json"));
    }
}

//! Seeded taxonomy degradation by random reparenting.
//!
//! A mutation picks a mover and a new parent that are unrelated (neither is
//! an ancestor of the other), removes all of the mover's parents and hangs it,
//! with its descendants, below the new parent. A degradation applies
//! mutations cumulatively and marks checkpoints along a schedule.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{Taxonomy, TaxonomyError};

/// Mutation counts at which degraded taxonomies are scored: powers of eight.
pub const DEFAULT_SCHEDULE: [usize; 5] = [1, 8, 64, 512, 4096];

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("no eligible (mover, new parent) pair for a {kind} mutation")]
    NoEligiblePair { kind: MutationKind },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("concepts `{mover}` and `{new_parent}` cannot be reparented: {reason}")]
    Ineligible {
        mover: String,
        new_parent: String,
        reason: String,
    },
    #[error("replaying operation {index}: {message}")]
    Replay { index: usize, message: String },
    #[error("trace file line {line}: {message}")]
    TraceFormat { line: usize, message: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    /// Move a concept without natural children.
    Leaf,
    /// Move a concept that has natural children, dragging its subtree along.
    NonLeaf,
    Any,
}

impl MutationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MutationKind::Leaf => "leaf",
            MutationKind::NonLeaf => "non_leaf",
            MutationKind::Any => "any",
        }
    }

    fn admits(&self, is_leaf: bool) -> bool {
        match self {
            MutationKind::Leaf => is_leaf,
            MutationKind::NonLeaf => !is_leaf,
            MutationKind::Any => true,
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "leaf" => Ok(MutationKind::Leaf),
            "non_leaf" | "nonleaf" => Ok(MutationKind::NonLeaf),
            "any" => Ok(MutationKind::Any),
            other => Err(format!(
                "unknown mutation kind `{other}` (expected any, leaf or non-leaf)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationOp {
    pub kind: MutationKind,
    pub moved_id: String,
    pub old_parent_ids: Vec<String>,
    pub new_parent_id: String,
}

fn unrelated(t: &Taxonomy, a: usize, b: usize) -> bool {
    a != b && !t.is_ancestor_ix(a, b) && !t.is_ancestor_ix(b, a)
}

/// Draws an eligible pair: rejection sampling first, then exact uniform
/// choice over all eligible pairs once the retry budget is spent.
fn sample_pair<R: Rng>(t: &Taxonomy, kind: MutationKind, rng: &mut R) -> Option<(usize, usize)> {
    let n = t.node_count();
    if t.len() < 2 {
        return None;
    }
    for _ in 0..10 * t.len() {
        let mover = rng.random_range(2..n);
        let new_parent = rng.random_range(2..n);
        if kind.admits(t.is_leaf_ix(mover)) && unrelated(t, mover, new_parent) {
            return Some((mover, new_parent));
        }
    }
    let mut eligible: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut total = 0;
    for mover in (2..n).filter(|&m| kind.admits(t.is_leaf_ix(m))) {
        let related = related_set(t, mover);
        let targets: Vec<usize> = (2..n).filter(|&p| !related[p]).collect();
        total += targets.len();
        if !targets.is_empty() {
            eligible.push((mover, targets));
        }
    }
    if total == 0 {
        return None;
    }
    let mut pick = rng.random_range(0..total);
    for (mover, targets) in eligible {
        if pick < targets.len() {
            return Some((mover, targets[pick]));
        }
        pick -= targets.len();
    }
    unreachable!("pick is below the eligible total")
}

// Ancestors and descendants of v, including v.
fn related_set(t: &Taxonomy, v: usize) -> Vec<bool> {
    let mut seen = vec![false; t.node_count()];
    seen[v] = true;
    for up in [true, false] {
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            let next = if up { t.parents_ix(x) } else { t.children_ix(x) };
            for &y in next {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen
}

fn apply(t: &mut Taxonomy, kind: MutationKind, mover: usize, new_parent: usize) -> MutationOp {
    let old = t.reparent_ix(mover, new_parent);
    MutationOp {
        kind,
        moved_id: t.node(mover).id.clone(),
        old_parent_ids: old.iter().map(|&p| t.node(p).id.clone()).collect(),
        new_parent_id: t.node(new_parent).id.clone(),
    }
}

/// Applies one random mutation to a copy of `t`.
pub fn mutate<R: Rng>(t: &Taxonomy, kind: MutationKind, rng: &mut R) -> Result<(Taxonomy, MutationOp), MutationError> {
    let (mover, new_parent) = sample_pair(t, kind, rng).ok_or(MutationError::NoEligiblePair { kind })?;
    let mut out = t.clone();
    let op = apply(&mut out, kind, mover, new_parent);
    Ok((out, op))
}

/// Moves `mover` below `new_parent` in a copy of `t`.
pub fn mutate_with(t: &Taxonomy, mover: &str, new_parent: &str) -> Result<(Taxonomy, MutationOp), MutationError> {
    let m = t.index_of(mover)?;
    let p = t.index_of(new_parent)?;
    let ineligible = |reason: &str| MutationError::Ineligible {
        mover: mover.to_string(),
        new_parent: new_parent.to_string(),
        reason: reason.to_string(),
    };
    if m < 2 || p < 2 {
        return Err(ineligible("pseudo concepts cannot be moved or adopt"));
    }
    if !unrelated(t, m, p) {
        return Err(ineligible("one is an ancestor of the other"));
    }
    let kind = if t.is_leaf_ix(m) {
        MutationKind::Leaf
    } else {
        MutationKind::NonLeaf
    };
    let mut out = t.clone();
    let op = apply(&mut out, kind, m, p);
    Ok((out, op))
}

/// Header line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TraceHeader {
    seed: u64,
    kind: MutationKind,
    schedule: Vec<usize>,
    taxonomy_fingerprint: String,
    checkpoints: Vec<usize>,
    truncated: bool,
}

/// Record of one degradation run. The taxonomy at any mutation count is
/// recovered by replaying a prefix of `ops` on the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegradationTrace {
    pub seed: u64,
    pub kind: MutationKind,
    pub schedule: Vec<usize>,
    pub taxonomy_fingerprint: String,
    pub ops: Vec<MutationOp>,
    /// Schedule entries actually reached.
    pub checkpoints: Vec<usize>,
    /// Set when no eligible pair was left before the schedule's end.
    pub truncated: bool,
}

pub fn validate_schedule(schedule: &[usize]) -> Result<(), MutationError> {
    if schedule.first() == Some(&0) {
        return Err(MutationError::InvalidSchedule("counts must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MutationError::InvalidSchedule(
            "counts must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Runs a degradation and returns its trace.
pub fn degrade(
    t: &Taxonomy,
    schedule: &[usize],
    kind: MutationKind,
    seed: u64,
) -> Result<DegradationTrace, MutationError> {
    degrade_with(t, schedule, kind, seed, |_, _| Ok(()))
}

/// Runs a degradation, handing each checkpoint taxonomy to `on_checkpoint`
/// as it is reached.
pub fn degrade_with<F, E>(
    t: &Taxonomy,
    schedule: &[usize],
    kind: MutationKind,
    seed: u64,
    mut on_checkpoint: F,
) -> Result<DegradationTrace, E>
where
    F: FnMut(usize, &Taxonomy) -> Result<(), E>,
    E: From<MutationError>,
{
    validate_schedule(schedule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = t.clone();
    let mut trace = DegradationTrace {
        seed,
        kind,
        schedule: schedule.to_vec(),
        taxonomy_fingerprint: t.fingerprint(),
        ops: Vec::new(),
        checkpoints: Vec::new(),
        truncated: false,
    };
    'schedule: for &target in schedule {
        while trace.ops.len() < target {
            match sample_pair(&current, kind, &mut rng) {
                Some((mover, new_parent)) => trace.ops.push(apply(&mut current, kind, mover, new_parent)),
                None => {
                    tracing::warn!(seed, %kind, reached = trace.ops.len(), "degradation ran out of eligible pairs");
                    trace.truncated = true;
                    break 'schedule;
                }
            }
        }
        trace.checkpoints.push(target);
        on_checkpoint(target, &current)?;
    }
    Ok(trace)
}

impl DegradationTrace {
    /// The taxonomy after the first `count` operations.
    pub fn replay(&self, original: &Taxonomy, count: usize) -> Result<Taxonomy, MutationError> {
        if original.fingerprint() != self.taxonomy_fingerprint {
            return Err(MutationError::Replay {
                index: 0,
                message: "taxonomy fingerprint differs from the trace".into(),
            });
        }
        if count > self.ops.len() {
            return Err(MutationError::Replay {
                index: self.ops.len(),
                message: format!("trace holds only {} operations", self.ops.len()),
            });
        }
        let mut t = original.clone();
        for (index, op) in self.ops[..count].iter().enumerate() {
            replay_one(&mut t, op).map_err(|message| MutationError::Replay { index, message })?;
        }
        Ok(t)
    }

    /// Every reached checkpoint with its taxonomy, replayed incrementally.
    pub fn materialize(&self, original: &Taxonomy) -> Result<Vec<(usize, Taxonomy)>, MutationError> {
        let mut t = self.replay(original, 0)?;
        let mut done = 0;
        let mut out = Vec::with_capacity(self.checkpoints.len());
        for &c in &self.checkpoints {
            for (index, op) in self.ops[done..c].iter().enumerate() {
                replay_one(&mut t, op).map_err(|message| MutationError::Replay {
                    index: done + index,
                    message,
                })?;
            }
            done = c;
            out.push((c, t.clone()));
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), MutationError> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        let header = TraceHeader {
            seed: self.seed,
            kind: self.kind,
            schedule: self.schedule.clone(),
            taxonomy_fingerprint: self.taxonomy_fingerprint.clone(),
            checkpoints: self.checkpoints.clone(),
            truncated: self.truncated,
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for op in &self.ops {
            serde_json::to_writer(&mut out, op).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, MutationError> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| MutationError::TraceFormat {
            line: line + 1,
            message: e.to_string(),
        };
        let (i, first) = lines.next().ok_or(MutationError::TraceFormat {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| bad(i, e))?;
        let ops = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(i, e)))
            .collect::<Result<Vec<MutationOp>, _>>()?;
        Ok(DegradationTrace {
            seed: header.seed,
            kind: header.kind,
            schedule: header.schedule,
            taxonomy_fingerprint: header.taxonomy_fingerprint,
            ops,
            checkpoints: header.checkpoints,
            truncated: header.truncated,
        })
    }
}

fn replay_one(t: &mut Taxonomy, op: &MutationOp) -> Result<(), String> {
    let mover = t.index_of(&op.moved_id).map_err(|e| e.to_string())?;
    let new_parent = t.index_of(&op.new_parent_id).map_err(|e| e.to_string())?;
    if mover < 2 || new_parent < 2 || !unrelated(t, mover, new_parent) {
        return Err(format!("`{}` and `{}` are related", op.moved_id, op.new_parent_id));
    }
    let old: Vec<&str> = t.natural_parents_ix(mover).map(|p| t.node(p).id.as_str()).collect();
    if old != op.old_parent_ids {
        return Err(format!(
            "`{}` has parents {old:?}, trace expects {:?}",
            op.moved_id, op.old_parent_ids
        ));
    }
    t.reparent_ix(mover, new_parent);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::tests::build;

    fn star() -> Taxonomy {
        build(&["R", "a", "b", "c"], &[("R", "a"), ("R", "b"), ("R", "c")])
    }

    #[test]
    fn forced_leaf_move_on_a_star() {
        let t = star();
        let (m, op) = mutate_with(&t, "a", "b").unwrap();
        let mut edges = m.natural_edges();
        edges.sort();
        assert_eq!(edges, vec![("R", "b"), ("R", "c"), ("b", "a")]);
        assert_eq!(op.old_parent_ids, vec!["R"]);
        assert_eq!(op.kind, MutationKind::Leaf);
        assert_eq!(m.children("b").unwrap(), vec!["a"]);
        assert_eq!(m.children("a").unwrap(), vec![crate::taxonomy::PSEUDO_LEAF_ID]);
        m.validate().unwrap();
        // input untouched
        assert_eq!(t, star());
    }

    #[test]
    fn multi_parent_mover_keeps_one_parent() {
        let t = build(&["p1", "p2", "q", "x"], &[("p1", "x"), ("p2", "x")]);
        let (m, op) = mutate_with(&t, "x", "q").unwrap();
        assert_eq!(m.parents("x").unwrap(), vec!["q"]);
        assert_eq!(op.old_parent_ids, vec!["p1", "p2"]);
        // former parents become leaves again
        assert!(m.is_leaf("p1").unwrap() && m.is_leaf("p2").unwrap());
    }

    #[test]
    fn related_pairs_are_refused() {
        let t = build(&["r", "a", "b"], &[("r", "a"), ("a", "b")]);
        assert!(matches!(
            mutate_with(&t, "a", "b"),
            Err(MutationError::Ineligible { .. })
        ));
        assert!(matches!(
            mutate_with(&t, "b", "r"),
            Err(MutationError::Ineligible { .. })
        ));
    }

    #[test]
    fn star_has_no_non_leaf_move() {
        let t = star();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            mutate(&t, MutationKind::NonLeaf, &mut rng),
            Err(MutationError::NoEligiblePair { .. })
        ));
        let (m, op) = mutate(&t, MutationKind::Leaf, &mut rng).unwrap();
        assert_ne!(op.moved_id, op.new_parent_id);
        m.validate().unwrap();
    }

    #[test]
    fn empty_schedule_is_the_identity() {
        let t = star();
        let trace = degrade(&t, &[], MutationKind::Any, 4).unwrap();
        assert!(trace.ops.is_empty());
        assert_eq!(trace.replay(&t, 0).unwrap(), t);
    }

    #[test]
    fn schedules_are_validated() {
        let t = star();
        assert!(degrade(&t, &[0, 1], MutationKind::Any, 1).is_err());
        assert!(degrade(&t, &[4, 4], MutationKind::Any, 1).is_err());
    }

    #[test]
    fn replay_reproduces_checkpoints() {
        let t = build(
            &["r", "a", "b", "c", "d", "e", "f"],
            &[("r", "a"), ("r", "b"), ("a", "c"), ("a", "d"), ("b", "e"), ("e", "f")],
        );
        let mut seen = Vec::new();
        let trace = degrade_with(&t, &[1, 3, 9], MutationKind::Any, 77, |count, snap| {
            seen.push((count, snap.clone()));
            Ok::<_, MutationError>(())
        })
        .unwrap();
        assert_eq!(trace.checkpoints, vec![1, 3, 9]);
        assert_eq!(trace.materialize(&t).unwrap(), seen);
        for (count, snap) in &seen {
            assert_eq!(&trace.replay(&t, *count).unwrap(), snap);
            snap.validate().unwrap();
        }
        assert_eq!(degrade(&t, &[1, 3, 9], MutationKind::Any, 77).unwrap(), trace);
    }

    #[test]
    fn exhausted_degradations_are_truncated() {
        // only moves: a under b or b under a, then nothing is unrelated
        let t = build(&["a", "b"], &[]);
        let trace = degrade(&t, &[1, 2, 3], MutationKind::Any, 5).unwrap();
        assert!(trace.truncated);
        assert_eq!(trace.checkpoints, vec![1]);
        assert_eq!(trace.ops.len(), 1);
    }

    #[test]
    fn trace_files_round_trip() {
        let t = star();
        let trace = degrade(&t, &[1, 2], MutationKind::Leaf, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        trace.write_jsonl(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("taxonomy_fingerprint"));
        assert_eq!(DegradationTrace::read_jsonl(&path).unwrap(), trace);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("non-leaf".parse::<MutationKind>().unwrap(), MutationKind::NonLeaf);
        assert_eq!("ANY".parse::<MutationKind>().unwrap(), MutationKind::Any);
        assert!("both".parse::<MutationKind>().is_err());
    }
}

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::taxonomy::Taxonomy;

/// Largest natural concept count scored over all pairs by [`PairPolicy::auto`].
pub const EXHAUSTIVE_LIMIT: usize = 2000;
/// Pairs drawn for larger taxonomies.
pub const SAMPLED_PAIRS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum PairPolicy {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

impl PairPolicy {
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] concepts, sampled beyond.
    pub fn auto(concepts: usize, seed: u64) -> Self {
        if concepts <= EXHAUSTIVE_LIMIT {
            PairPolicy::Exhaustive
        } else {
            PairPolicy::Sampled {
                count: SAMPLED_PAIRS,
                seed,
            }
        }
    }
}

/// Unordered pairs of distinct natural concepts, as positions into
/// [`Taxonomy::concepts`], sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub policy: PairPolicy,
    pairs: Vec<(u32, u32)>,
}

impl PairSample {
    pub fn draw(t: &Taxonomy, policy: PairPolicy) -> Self {
        Self::for_count(t.len(), policy)
    }

    pub fn for_count(m: usize, policy: PairPolicy) -> Self {
        let total = m * m.saturating_sub(1) / 2;
        let pairs = match policy {
            PairPolicy::Sampled { count, seed } if count < total => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picks = index::sample(&mut rng, total, count).into_vec();
                picks.sort_unstable();
                unrank_sorted(m, &picks)
            }
            _ => {
                let mut all = Vec::with_capacity(total);
                for i in 0..m {
                    for j in i + 1..m {
                        all.push((i as u32, j as u32));
                    }
                }
                all
            }
        };
        PairSample { policy, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positions(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn ids<'a>(&'a self, t: &'a Taxonomy) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        let concepts = t.concepts();
        self.pairs
            .iter()
            .map(move |&(i, j)| (concepts[i as usize].id.as_str(), concepts[j as usize].id.as_str()))
    }
}

// Maps sorted ranks of the row-major upper triangle back to (i, j).
fn unrank_sorted(m: usize, ranks: &[usize]) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(ranks.len());
    let mut row = 0;
    let mut row_start = 0;
    for &r in ranks {
        while r >= row_start + (m - row - 1) {
            row_start += m - row - 1;
            row += 1;
        }
        let col = row + 1 + (r - row_start);
        out.push((row as u32, col as u32));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn exhaustive_enumerates_every_pair_once() {
        let s = PairSample::for_count(5, PairPolicy::Exhaustive);
        assert_eq!(s.len(), 10);
        let set: HashSet<_> = s.positions().iter().collect();
        assert_eq!(set.len(), 10);
        assert!(s.positions().iter().all(|&(i, j)| i < j));
    }

    #[test]
    fn unranking_inverts_row_major_order() {
        let m = 7;
        let all: Vec<usize> = (0..m * (m - 1) / 2).collect();
        assert_eq!(
            unrank_sorted(m, &all),
            PairSample::for_count(m, PairPolicy::Exhaustive).pairs
        );
    }

    #[test]
    fn sampling_is_seeded_and_without_replacement() {
        let policy = PairPolicy::Sampled { count: 500, seed: 9 };
        let a = PairSample::for_count(100, policy);
        let b = PairSample::for_count(100, policy);
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let set: HashSet<_> = a.positions().iter().collect();
        assert_eq!(set.len(), 500);
        assert!(a.positions().iter().all(|&(i, j)| i < j && j < 100));
        let c = PairSample::for_count(100, PairPolicy::Sampled { count: 500, seed: 10 });
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_samples_fall_back_to_all_pairs() {
        let s = PairSample::for_count(4, PairPolicy::Sampled { count: 100, seed: 1 });
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn auto_policy_switches_at_the_limit() {
        assert_eq!(PairPolicy::auto(EXHAUSTIVE_LIMIT, 3), PairPolicy::Exhaustive);
        assert!(matches!(
            PairPolicy::auto(EXHAUSTIVE_LIMIT + 1, 3),
            PairPolicy::Sampled { .. }
        ));
    }
}

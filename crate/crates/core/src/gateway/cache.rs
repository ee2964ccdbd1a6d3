use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use super::{
    Candidate, Embedding, FillMaskProvider, GatewayError, NliPair, NliProvider, RelationJudgment, SimilarityProvider,
};

enum Slot<V> {
    Pending,
    Ready(V),
}

/// Concurrent memo table that fetches missing keys in batches.
///
/// A key requested while another caller is already fetching it waits for that
/// fetch instead of issuing its own. Failed fetches leave no entry behind.
pub struct DedupCache<K, V> {
    slots: Mutex<HashMap<K, Slot<V>>>,
    settled: Condvar,
    hits: AtomicUsize,
    fetched: AtomicUsize,
}

impl<K, V> Default for DedupCache<K, V> {
    fn default() -> Self {
        DedupCache {
            slots: Mutex::new(HashMap::new()),
            settled: Condvar::new(),
            hits: AtomicUsize::new(0),
            fetched: AtomicUsize::new(0),
        }
    }
}

struct Claim<'a, K: Eq + Hash, V> {
    cache: &'a DedupCache<K, V>,
    keys: Vec<K>,
    done: bool,
}

impl<K: Eq + Hash, V> Drop for Claim<'_, K, V> {
    fn drop(&mut self) {
        if !self.done {
            let mut slots = self.cache.slots.lock().unwrap_or_else(|e| e.into_inner());
            for k in &self.keys {
                if matches!(slots.get(k), Some(Slot::Pending)) {
                    slots.remove(k);
                }
            }
            drop(slots);
            self.cache.settled.notify_all();
        }
    }
}

impl<K, V> DedupCache<K, V>
where
    K: Eq + Hash + Clone,
    V: Clone,
{
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, HashMap<K, Slot<V>>> {
        self.slots.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, key: &K) -> Option<V> {
        match self.lock().get(key) {
            Some(Slot::Ready(v)) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn insert(&self, key: K, value: V) {
        self.lock().insert(key, Slot::Ready(value));
        self.settled.notify_all();
    }

    /// Number of resolved entries.
    pub fn len(&self) -> usize {
        self.lock().values().filter(|s| matches!(s, Slot::Ready(_))).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Requested keys answered without fetching.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Keys passed to a fetch closure.
    pub fn fetched(&self) -> usize {
        self.fetched.load(Ordering::Relaxed)
    }

    /// Resolves every key, calling `fetch` once per round with the distinct
    /// keys this caller claimed. `fetch` must return one value per key.
    pub fn get_or_fetch<E, F>(&self, keys: &[K], mut fetch: F) -> Result<Vec<V>, E>
    where
        F: FnMut(&[K]) -> Result<Vec<V>, E>,
    {
        let mut resolved: HashMap<K, V> = HashMap::with_capacity(keys.len());
        let mut first_round = true;
        loop {
            let mut claimed = Vec::new();
            let mut waiting = Vec::new();
            {
                let mut slots = self.lock();
                let mut seen = HashSet::new();
                for k in keys {
                    if resolved.contains_key(k) || !seen.insert(k) {
                        continue;
                    }
                    match slots.get(k) {
                        Some(Slot::Ready(v)) => {
                            resolved.insert(k.clone(), v.clone());
                        }
                        Some(Slot::Pending) => waiting.push(k.clone()),
                        None => {
                            slots.insert(k.clone(), Slot::Pending);
                            claimed.push(k.clone());
                        }
                    }
                }
            }
            if first_round {
                self.hits.fetch_add(resolved.len(), Ordering::Relaxed);
                first_round = false;
            }

            if !claimed.is_empty() {
                let mut claim = Claim {
                    cache: self,
                    keys: claimed,
                    done: false,
                };
                self.fetched.fetch_add(claim.keys.len(), Ordering::Relaxed);
                let values = fetch(&claim.keys)?;
                assert_eq!(values.len(), claim.keys.len(), "fetch must answer every key");
                let mut slots = self.lock();
                for (k, v) in claim.keys.iter().zip(values) {
                    slots.insert(k.clone(), Slot::Ready(v.clone()));
                    resolved.insert(k.clone(), v);
                }
                claim.done = true;
                drop(slots);
                self.settled.notify_all();
            }

            if waiting.is_empty() {
                break;
            }
            let mut slots = self.lock();
            while waiting.iter().any(|k| matches!(slots.get(k), Some(Slot::Pending))) {
                slots = self.settled.wait(slots).unwrap_or_else(|e| e.into_inner());
            }
            for k in waiting {
                if let Some(Slot::Ready(v)) = slots.get(&k) {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    resolved.insert(k, v.clone());
                }
            }
            // Keys whose owner failed are absent again and get claimed next round.
        }
        Ok(keys.iter().map(|k| resolved[k].clone()).collect())
    }
}

pub struct CachedSimilarity {
    inner: Arc<dyn SimilarityProvider>,
    cache: DedupCache<String, Embedding>,
}

impl CachedSimilarity {
    pub fn new(inner: Arc<dyn SimilarityProvider>) -> Self {
        CachedSimilarity {
            inner,
            cache: DedupCache::new(),
        }
    }

    pub fn cache(&self) -> &DedupCache<String, Embedding> {
        &self.cache
    }
}

impl SimilarityProvider for CachedSimilarity {
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, GatewayError> {
        self.cache.get_or_fetch(texts, |missing| self.inner.embed(missing))
    }

    fn apply_overrides(&self, texts: &[String], matrix: &mut super::SimilarityMatrix) {
        self.inner.apply_overrides(texts, matrix);
    }
}

pub struct CachedNli {
    inner: Arc<dyn NliProvider>,
    cache: DedupCache<NliPair, RelationJudgment>,
}

impl CachedNli {
    pub fn new(inner: Arc<dyn NliProvider>) -> Self {
        CachedNli {
            inner,
            cache: DedupCache::new(),
        }
    }

    pub fn cache(&self) -> &DedupCache<NliPair, RelationJudgment> {
        &self.cache
    }
}

impl NliProvider for CachedNli {
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn judge(&self, pairs: &[NliPair]) -> Result<Vec<RelationJudgment>, GatewayError> {
        self.cache.get_or_fetch(pairs, |missing| self.inner.judge(missing))
    }
}

pub struct CachedFillMask {
    inner: Arc<dyn FillMaskProvider>,
    cache: DedupCache<(String, usize), Vec<Candidate>>,
}

impl CachedFillMask {
    pub fn new(inner: Arc<dyn FillMaskProvider>) -> Self {
        CachedFillMask {
            inner,
            cache: DedupCache::new(),
        }
    }

    pub fn cache(&self) -> &DedupCache<(String, usize), Vec<Candidate>> {
        &self.cache
    }
}

impl FillMaskProvider for CachedFillMask {
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn fill_mask(&self, prompt: &str, k: usize) -> Result<Vec<Candidate>, GatewayError> {
        super::check_mask(prompt)?;
        let key = (prompt.to_string(), k);
        let mut out = self.cache.get_or_fetch(std::slice::from_ref(&key), |missing| {
            missing
                .iter()
                .map(|(p, k)| self.inner.fill_mask(p, *k))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Ok(out.pop().unwrap_or_default())
    }
}

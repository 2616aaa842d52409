//! Bounded set of resident models with least-recently-used eviction.
//!
//! Loads run outside the state lock and are single-flight per key: while a
//! key is loading, other requests for it wait for that load instead of
//! starting their own. A finished load is committed under the lock, evicting
//! least-recently-used residents until there is room. A failed load changes
//! nothing. Evicted models are dropped from the resident set before the new
//! model is handed out; their memory is released once in-flight requests
//! holding them finish.

use std::collections::{HashMap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use indexmap::IndexMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind<K> {
    /// A resident model was used and became most recent.
    Hit(K),
    /// A model became resident after evicting `evicted` (oldest first).
    Loaded { key: K, evicted: Vec<K> },
    LoadFailed(K),
}

/// One state transition, numbered in the order it took effect, with the
/// resident set afterwards (least recent first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerEvent<K> {
    pub seq: u64,
    pub kind: EventKind<K>,
    pub resident: Vec<K>,
}

pub type Loader<K, V, E> = Box<dyn Fn(&K) -> Result<V, E> + Send + Sync>;
pub type Observer<K> = Box<dyn Fn(&ManagerEvent<K>) + Send + Sync>;

struct State<K, V> {
    /// Front is least recently used.
    resident: IndexMap<K, Arc<Mutex<V>>>,
    loading: HashSet<K>,
    load_counts: HashMap<K, u64>,
    seq: u64,
}

pub struct ModelManager<K, V, E> {
    capacity: usize,
    loader: Loader<K, V, E>,
    observer: Option<Observer<K>>,
    state: Mutex<State<K, V>>,
    changed: Condvar,
}

impl<K, V, E> Debug for ModelManager<K, V, E>
where
    K: Debug + Clone + Eq + Hash,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelManager")
            .field("capacity", &self.capacity)
            .field("resident", &self.resident())
            .finish()
    }
}

/// Clears the loading mark even if the loader panics.
struct LoadingGuard<'a, K: Clone + Eq + Hash, V, E> {
    manager: &'a ModelManager<K, V, E>,
    key: K,
}

impl<K: Clone + Eq + Hash, V, E> Drop for LoadingGuard<'_, K, V, E> {
    fn drop(&mut self) {
        let mut st = self.manager.lock();
        st.loading.remove(&self.key);
        drop(st);
        self.manager.changed.notify_all();
    }
}

impl<K, V, E> ModelManager<K, V, E>
where
    K: Clone + Eq + Hash,
{
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, loader: impl Fn(&K) -> Result<V, E> + Send + Sync + 'static) -> Self {
        assert!(capacity >= 1, "capacity must be at least 1");
        Self {
            capacity,
            loader: Box::new(loader),
            observer: None,
            state: Mutex::new(State {
                resident: IndexMap::new(),
                loading: HashSet::new(),
                load_counts: HashMap::new(),
                seq: 0,
            }),
            changed: Condvar::new(),
        }
    }

    /// Installs a hook called, under the manager lock, after every state
    /// transition. It must not call back into the manager.
    pub fn with_observer(mut self, observer: impl Fn(&ManagerEvent<K>) + Send + Sync + 'static) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn lock(&self) -> MutexGuard<'_, State<K, V>> {
        self.state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    fn emit(&self, st: &mut State<K, V>, kind: EventKind<K>) {
        st.seq += 1;
        if let Some(observer) = &self.observer {
            observer(&ManagerEvent {
                seq: st.seq,
                kind,
                resident: st.resident.keys().cloned().collect(),
            });
        }
    }

    /// Returns the model for `key`, loading it if needed, and marks it most
    /// recently used.
    pub fn acquire(&self, key: &K) -> Result<Arc<Mutex<V>>, E> {
        let mut st = self.lock();
        loop {
            if let Some(idx) = st.resident.get_index_of(key) {
                let last = st.resident.len() - 1;
                st.resident.move_index(idx, last);
                let model = st.resident[last].clone();
                self.emit(&mut st, EventKind::Hit(key.clone()));
                return Ok(model);
            }
            if !st.loading.contains(key) {
                break;
            }
            st = self.changed.wait(st).unwrap_or_else(|poisoned| poisoned.into_inner());
        }
        st.loading.insert(key.clone());
        drop(st);

        let guard = LoadingGuard {
            manager: self,
            key: key.clone(),
        };
        let loaded = (self.loader)(key);
        let mut st = self.lock();
        let result = match loaded {
            Ok(value) => {
                let mut evicted = Vec::new();
                while st.resident.len() >= self.capacity {
                    let (victim, _) = st.resident.shift_remove_index(0).expect("non-empty at capacity");
                    evicted.push(victim);
                }
                let model = Arc::new(Mutex::new(value));
                st.resident.insert(key.clone(), model.clone());
                *st.load_counts.entry(key.clone()).or_default() += 1;
                self.emit(&mut st, EventKind::Loaded { key: key.clone(), evicted });
                Ok(model)
            }
            Err(e) => {
                self.emit(&mut st, EventKind::LoadFailed(key.clone()));
                Err(e)
            }
        };
        drop(st);
        drop(guard);
        result
    }

    /// Marks a resident model most recently used; returns whether it was resident.
    pub fn touch(&self, key: &K) -> bool {
        let mut st = self.lock();
        let Some(idx) = st.resident.get_index_of(key) else {
            return false;
        };
        let last = st.resident.len() - 1;
        st.resident.move_index(idx, last);
        self.emit(&mut st, EventKind::Hit(key.clone()));
        true
    }

    /// Resident keys, least recently used first.
    pub fn resident(&self) -> Vec<K> {
        self.lock().resident.keys().cloned().collect()
    }

    pub fn is_resident(&self, key: &K) -> bool {
        self.lock().resident.contains_key(key)
    }

    /// How many times `key` has been loaded.
    pub fn load_count(&self, key: &K) -> u64 {
        self.lock().load_counts.get(key).copied().unwrap_or(0)
    }
}

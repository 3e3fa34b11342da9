//! Sliding-window maintenance: the window `W_t`, the active set `A_t`
//! (window elements plus their referenced parents), and the
//! reverse-reference index `I_t(e)`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::types::{Element, ElementId};

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("out-of-order bucket: element {id} has ts {ts}, store is at {now} (bucket end {end})")]
    OutOfOrderBucket { id: ElementId, ts: i64, now: i64, end: i64 },
    #[error("duplicate element id {0}")]
    DuplicateId(ElementId),
}

/// What one bucket ingest changed; drives ranked-list maintenance.
#[derive(Debug, Clone, Default)]
pub struct UpdateReport {
    /// Store time after the ingest.
    pub now: i64,
    /// Ids inserted from the bucket, in processing order.
    pub inserted: Vec<ElementId>,
    /// Ids that left the active set.
    pub evicted: Vec<ElementId>,
    /// Still-active elements whose influence set grew (new referencer) or
    /// shrank (referencer expired). May overlap `inserted` when a bucket
    /// references its own elements.
    pub changed: BTreeSet<ElementId>,
    /// References dropped because the target was never seen or not older.
    pub dangling_refs: u64,
}

/// Store of active elements at the current time.
///
/// Every ingested element is archived so that a reference arriving long
/// after its target left the active set can still re-activate it; only ids
/// in `active` are visible to snapshots.
#[derive(Debug)]
pub struct ActiveStore {
    now: i64,
    window_len: i64,
    bucket_len: i64,
    archive: HashMap<ElementId, Element>,
    /// Window membership in timestamp order (front = oldest).
    in_window: VecDeque<(i64, ElementId)>,
    window_ids: BTreeSet<ElementId>,
    active: BTreeSet<ElementId>,
    /// `I_t(e)`: per parent, the window elements referencing it as
    /// `(referencer ts, referencer id)`.
    influenced_by: HashMap<ElementId, BTreeSet<(i64, ElementId)>>,
    /// Timestamp each active element was last referred to (its own ts while
    /// in the window). Diagnostics; mirrored into ranked-list tuples.
    last_ref: HashMap<ElementId, i64>,
    dangling_refs: u64,
}

impl ActiveStore {
    pub fn new(window_len: i64, bucket_len: i64) -> Self {
        Self {
            now: 0,
            window_len,
            bucket_len,
            archive: HashMap::new(),
            in_window: VecDeque::new(),
            window_ids: BTreeSet::new(),
            active: BTreeSet::new(),
            influenced_by: HashMap::new(),
            last_ref: HashMap::new(),
            dangling_refs: 0,
        }
    }

    pub fn now(&self) -> i64 {
        self.now
    }

    /// Ingest the bucket covering `(now, now + L]` and advance time by `L`.
    ///
    /// Elements are processed in arrival order (stable within equal
    /// timestamps). References to unseen or not-strictly-older targets are
    /// dropped and counted, not errors.
    pub fn ingest_bucket(&mut self, bucket: Vec<Element>) -> Result<UpdateReport, WindowError> {
        let end = self.now + self.bucket_len;
        let mut seen = std::collections::HashSet::with_capacity(bucket.len());
        for e in &bucket {
            if e.ts <= self.now || e.ts > end {
                return Err(WindowError::OutOfOrderBucket {
                    id: e.id,
                    ts: e.ts,
                    now: self.now,
                    end,
                });
            }
            if self.archive.contains_key(&e.id) || !seen.insert(e.id) {
                return Err(WindowError::DuplicateId(e.id));
            }
        }
        let mut bucket = bucket;
        bucket.sort_by_key(|e| e.ts); // stable: arrival order within equal ts

        let mut report = UpdateReport {
            now: end,
            ..Default::default()
        };

        for mut e in bucket {
            report.inserted.push(e.id);
            // resolve references against everything seen so far
            let mut resolved = Vec::with_capacity(e.refs.len());
            for &target in &e.refs {
                match self.archive.get(&target) {
                    Some(parent) if parent.ts < e.ts => resolved.push(target),
                    _ => {
                        self.dangling_refs += 1;
                        report.dangling_refs += 1;
                    }
                }
            }
            e.refs = resolved;

            for &target in &e.refs {
                self.influenced_by
                    .entry(target)
                    .or_default()
                    .insert((e.ts, e.id));
                self.active.insert(target); // re-activates evicted parents
                let lr = self.last_ref.entry(target).or_insert(e.ts);
                *lr = (*lr).max(e.ts);
                report.changed.insert(target);
            }

            self.in_window.push_back((e.ts, e.id));
            self.window_ids.insert(e.id);
            self.active.insert(e.id);
            self.last_ref.insert(e.id, e.ts);
            self.archive.insert(e.id, e);
        }

        self.now = end;

        // expire window elements older than now - T + 1
        let cutoff = self.now - self.window_len + 1;
        while let Some(&(ts, id)) = self.in_window.front() {
            if ts >= cutoff {
                break;
            }
            self.in_window.pop_front();
            self.window_ids.remove(&id);
            let expired_refs = self.archive[&id].refs.clone();
            for &target in &expired_refs {
                if let Some(set) = self.influenced_by.get_mut(&target) {
                    set.remove(&(ts, id));
                    let emptied = set.is_empty();
                    if emptied {
                        self.influenced_by.remove(&target);
                    }
                    if self.window_ids.contains(&target) {
                        // unreachable in a backward-reference stream: a
                        // referencer always outlives its parent's window stay
                        report.changed.insert(target);
                    } else if emptied {
                        self.evict(target, &mut report);
                    } else {
                        self.refresh_last_ref(target);
                        report.changed.insert(target);
                    }
                }
            }
            if self
                .influenced_by
                .get(&id)
                .map_or(true, |set| set.is_empty())
            {
                self.evict(id, &mut report);
            } else {
                self.refresh_last_ref(id);
            }
        }

        report.inserted.sort_unstable();
        report.evicted.sort_unstable();
        // evicted ids can't be "changed"
        for id in &report.evicted {
            report.changed.remove(id);
        }
        Ok(report)
    }

    fn evict(&mut self, id: ElementId, report: &mut UpdateReport) {
        if self.active.remove(&id) {
            report.evicted.push(id);
        }
        self.influenced_by.remove(&id);
        self.last_ref.remove(&id);
    }

    fn refresh_last_ref(&mut self, id: ElementId) {
        let own = if self.window_ids.contains(&id) {
            Some(self.archive[&id].ts)
        } else {
            None
        };
        let referred = self
            .influenced_by
            .get(&id)
            .and_then(|set| set.last())
            .map(|&(ts, _)| ts);
        match own.into_iter().chain(referred).max() {
            Some(ts) => {
                self.last_ref.insert(id, ts);
            }
            None => {
                self.last_ref.remove(&id);
            }
        }
    }

    /// Read-only view of the active set; valid until the next ingest.
    pub fn snapshot(&self) -> Snapshot<'_> {
        Snapshot { store: self }
    }

    /// Total references dropped since construction.
    pub fn dangling_refs(&self) -> u64 {
        self.dangling_refs
    }
}

/// Immutable view of `A_t` used by query execution.
#[derive(Clone, Copy)]
pub struct Snapshot<'a> {
    store: &'a ActiveStore,
}

impl<'a> Snapshot<'a> {
    pub fn now(&self) -> i64 {
        self.store.now
    }

    /// `n_t`: number of active elements.
    pub fn len(&self) -> usize {
        self.store.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.active.is_empty()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.store.active.contains(&id)
    }

    /// Active ids in ascending order.
    pub fn active_ids(&self) -> impl Iterator<Item = ElementId> + 'a {
        self.store.active.iter().copied()
    }

    /// Look up an active element.
    pub fn element(&self, id: ElementId) -> Option<&'a Element> {
        if self.store.active.contains(&id) {
            self.store.archive.get(&id)
        } else {
            None
        }
    }

    pub fn in_window(&self, id: ElementId) -> bool {
        self.store.window_ids.contains(&id)
    }

    /// `I_t(e)`: window elements referencing `id`, as `(referencer, ts)`
    /// in deterministic order.
    pub fn influenced_by(&self, id: ElementId) -> impl Iterator<Item = (ElementId, i64)> + 'a {
        self.store
            .influenced_by
            .get(&id)
            .into_iter()
            .flat_map(|set| set.iter().map(|&(ts, rid)| (rid, ts)))
    }

    pub fn influenced_count(&self, id: ElementId) -> usize {
        self.store.influenced_by.get(&id).map_or(0, |s| s.len())
    }

    /// Timestamp `id` was last referred to (or its own ts while windowed).
    pub fn last_ref(&self, id: ElementId) -> Option<i64> {
        self.store.last_ref.get(&id).copied()
    }
}

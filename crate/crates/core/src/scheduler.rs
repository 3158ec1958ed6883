//! Debounced, coalescing, cancellable job scheduling with staleness filtering.
//!
//! The scheduler is a pure state machine: callers pass the current time in
//! milliseconds, so the same code runs against a wall clock in a server and
//! against a virtual clock in scripts and tests.
//!
//! Every submit bumps a per-target counter and the job captures the new
//! value. A result is applied only if its captured counter is still the
//! target's current one, so a newer request always invalidates older work,
//! whether that work is still waiting or already in flight.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::document::ElementId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DebounceClass {
    Immediate,
    LensIdle,
    EditCoalesce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub idle_window_ms: u64,
    pub edit_window_ms: u64,
    pub max_inflight: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { idle_window_ms: 2000, edit_window_ms: 300, max_inflight: 4 }
    }
}

impl SchedulerConfig {
    pub fn window(&self, class: DebounceClass) -> u64 {
        match class {
            DebounceClass::Immediate => 0,
            DebounceClass::LensIdle => self.idle_window_ms,
            DebounceClass::EditCoalesce => self.edit_window_ms,
        }
    }
}

/// How a pending payload absorbs a newer submit for the same slot.
pub trait Coalesce {
    fn coalesce(self, newer: Self) -> Self;
}

impl Coalesce for () {
    fn coalesce(self, _newer: Self) -> Self {}
}

#[derive(Debug, Clone)]
pub struct Job<T> {
    pub id: JobId,
    pub target: ElementId,
    pub class: DebounceClass,
    pub payload: T,
    /// Target counter captured at submit.
    pub counter: u64,
    pub due_at: u64,
    /// Number of submits merged into this job.
    pub merged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscardReason {
    Stale,
    Cancelled,
    UnknownJob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Applied { target_counter: u64 },
    Discarded(DiscardReason),
}

#[derive(Debug, Clone)]
struct InFlight {
    target: ElementId,
    counter: u64,
    cancelled: bool,
}

#[derive(Debug, Clone)]
pub struct Scheduler<T> {
    config: SchedulerConfig,
    next_id: u64,
    pending: BTreeMap<(ElementId, DebounceClass), Job<T>>,
    inflight: BTreeMap<JobId, InFlight>,
    counters: HashMap<ElementId, u64>,
    last_applied: HashMap<ElementId, u64>,
    shut_down: bool,
}

impl<T: Coalesce> Scheduler<T> {
    pub fn new(config: SchedulerConfig) -> Self {
        Scheduler {
            config,
            next_id: 1,
            pending: BTreeMap::new(),
            inflight: BTreeMap::new(),
            counters: HashMap::new(),
            last_applied: HashMap::new(),
            shut_down: false,
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    /// Queues work for `target`, merging with a pending job of the same class
    /// and re-arming its timer.
    pub fn submit(&mut self, target: ElementId, class: DebounceClass, payload: T, now: u64) -> Result<JobId> {
        if self.shut_down {
            return Err(Error::SchedulerRejected("scheduler is shut down".into()));
        }
        let id = JobId(self.next_id);
        self.next_id += 1;
        let counter = self.counters.entry(target.clone()).or_insert(0);
        *counter += 1;
        let counter = *counter;
        let due_at = now + self.config.window(class);
        let key = (target.clone(), class);
        let (payload, merged) = match self.pending.remove(&key) {
            Some(old) => (old.payload.coalesce(payload), old.merged + 1),
            None => (payload, 1),
        };
        self.pending.insert(key, Job { id, target, class, payload, counter, due_at, merged });
        Ok(id)
    }

    /// Fires due jobs, oldest deadline first, without exceeding `max_inflight`.
    pub fn poll(&mut self, now: u64) -> Vec<Job<T>> {
        let capacity = self.config.max_inflight.saturating_sub(self.inflight.len());
        let mut due: Vec<(u64, JobId, (ElementId, DebounceClass))> = self
            .pending
            .iter()
            .filter(|(_, job)| job.due_at <= now)
            .map(|(key, job)| (job.due_at, job.id, key.clone()))
            .collect();
        due.sort();
        due.truncate(capacity);
        due.into_iter()
            .map(|(_, _, key)| {
                let job = self.pending.remove(&key).expect("pending job");
                self.inflight.insert(job.id, InFlight { target: job.target.clone(), counter: job.counter, cancelled: false });
                job
            })
            .collect()
    }

    /// Earliest deadline among waiting jobs.
    pub fn next_due(&self) -> Option<u64> {
        self.pending.values().map(|j| j.due_at).min()
    }

    /// Decides whether a fired job's result may be applied.
    pub fn on_result(&mut self, id: JobId) -> Disposition {
        let Some(flight) = self.inflight.remove(&id) else {
            return Disposition::Discarded(DiscardReason::UnknownJob);
        };
        if flight.cancelled {
            return Disposition::Discarded(DiscardReason::Cancelled);
        }
        if self.counters.get(&flight.target) != Some(&flight.counter) {
            return Disposition::Discarded(DiscardReason::Stale);
        }
        let last = self.last_applied.entry(flight.target).or_insert(0);
        debug_assert!(flight.counter > *last, "applied counters must increase");
        *last = flight.counter;
        Disposition::Applied { target_counter: flight.counter }
    }

    /// Drops waiting jobs for `target` and flags its in-flight jobs so their
    /// results are discarded. Returns how many jobs were affected.
    pub fn cancel_target(&mut self, target: &ElementId) -> usize {
        let before = self.pending.len();
        self.pending.retain(|(t, _), _| t != target);
        let mut cancelled = before - self.pending.len();
        for flight in self.inflight.values_mut().filter(|f| &f.target == target && !f.cancelled) {
            flight.cancelled = true;
            cancelled += 1;
        }
        if let Some(c) = self.counters.get_mut(target) {
            *c += 1;
        }
        cancelled
    }

    pub fn shutdown(&mut self) {
        self.shut_down = true;
    }

    pub fn pending_job(&self, target: &ElementId, class: DebounceClass) -> Option<&Job<T>> {
        self.pending.get(&(target.clone(), class))
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn inflight_count(&self) -> usize {
        self.inflight.len()
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_empty() && self.inflight.is_empty()
    }

    /// Current counter of a target (0 before its first submit).
    pub fn counter(&self, target: &ElementId) -> u64 {
        self.counters.get(target).copied().unwrap_or(0)
    }

    /// Counter captured by the last applied job of a target.
    pub fn last_applied(&self, target: &ElementId) -> u64 {
        self.last_applied.get(target).copied().unwrap_or(0)
    }
}

//! The coordinator and its agents.
//!
//! An [`Agent`] is one cluster: its members inside the sliding window, the
//! running sum of their vectors and a weight that grows with every arrival
//! and fades at every communication phase. The [`Coordinator`] is the single
//! decision point. It bootstraps the first agents, assigns every incoming
//! point, runs communication phases on the event-time grid and emits a
//! snapshot whenever a timeslot ends.
//!
//! Event scheduling: with `epoch` the first record's timestamp, phases are
//! due at `epoch + j * comm_int` (j >= 1) and timeslot `i` ends at
//! `epoch + (i + 1) * timeslot`. Before a record is processed, every phase
//! and slot end at or before its timestamp is executed in time order, a
//! phase going first when both fall on the same instant. A record therefore
//! never shows up in the snapshot of a slot that ended before it arrived.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::{ClockError, EventClock, Timestamp};
use crate::config::{Config, ConfigError};
use crate::embedding::{centroid_from_sum, dot, EmbeddingVector};
use crate::preprocess::TokenList;
use crate::topics::{self, TimeslotSnapshot};

/// Distances closer than this to the minimum count as a tie.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One document of the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub id: String,
    pub tokens: TokenList,
    pub vector: EmbeddingVector,
    pub timestamp: Timestamp,
    /// Agent currently holding the point. `None` before assignment and while
    /// an outlier waits for redistribution.
    pub subject: Option<AgentId>,
}

impl DataPoint {
    pub fn new(id: impl Into<String>, tokens: TokenList, vector: EmbeddingVector, timestamp: Timestamp) -> Self {
        DataPoint {
            id: id.into(),
            tokens,
            vector,
            timestamp,
            subject: None,
        }
    }

    fn order_key(&self) -> (Timestamp, &str) {
        (self.timestamp, &self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    id: AgentId,
    members: Vec<DataPoint>,
    sum: Vec<f64>,
    /// Members that contribute to `sum` (empty-text points do not).
    vector_count: usize,
    centroid: EmbeddingVector,
    weight: f64,
    created_at: Timestamp,
}

impl Agent {
    fn new(id: AgentId, dim: usize, created_at: Timestamp) -> Self {
        Agent {
            id,
            members: Vec::new(),
            sum: vec![0.0; dim],
            vector_count: 0,
            centroid: EmbeddingVector::empty(dim),
            weight: 0.0,
            created_at,
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[DataPoint] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Overrides the weight, e.g. when restoring a saved state.
    pub fn set_weight(&mut self, weight: f64) {
        self.weight = weight.max(0.0);
    }

    pub fn created_at(&self) -> Timestamp {
        self.created_at
    }

    /// Running sum of member vectors.
    pub fn sum_vector(&self) -> &[f64] {
        &self.sum
    }

    /// Normalized mean of the member vectors. Empty-flagged when the agent
    /// has no direction (no vector members, or they cancel out).
    pub fn centroid(&self) -> &EmbeddingVector {
        &self.centroid
    }

    fn refresh_centroid(&mut self) {
        if self.vector_count == 0 {
            self.sum.iter_mut().for_each(|s| *s = 0.0);
        }
        self.centroid = centroid_from_sum(&self.sum, self.vector_count);
    }

    /// Appends a member. Weight grows by one per arrival.
    fn push(&mut self, mut point: DataPoint) {
        if !point.vector.is_empty() {
            for (s, x) in self.sum.iter_mut().zip(point.vector.values()) {
                *s += x;
            }
            self.vector_count += 1;
            self.refresh_centroid();
        }
        point.subject = Some(self.id);
        self.members.push(point);
        self.weight += 1.0;
    }

    /// Removes every member matching `pred`, keeping the order of the rest.
    /// The weight is left untouched.
    fn remove_where<F: FnMut(&DataPoint) -> bool>(&mut self, mut pred: F) -> Vec<DataPoint> {
        let (removed, kept): (Vec<_>, Vec<_>) = core::mem::take(&mut self.members).into_iter().partition(|p| pred(p));
        self.members = kept;
        if removed.is_empty() {
            return removed;
        }
        for p in removed.iter().filter(|p| !p.vector.is_empty()) {
            for (s, x) in self.sum.iter_mut().zip(p.vector.values()) {
                *s -= x;
            }
            self.vector_count -= 1;
        }
        self.refresh_centroid();
        removed
    }

    /// Drops members with a timestamp strictly before `cutoff`.
    pub fn evict_older_than(&mut self, cutoff: Timestamp) -> usize {
        self.remove_where(|p| p.timestamp < cutoff).len()
    }

    /// Removes and returns the members whose distance to the centroid
    /// exceeds `threshold`. The centroid is fixed before the scan starts.
    /// Empty-text members are never outliers.
    pub fn find_outliers(&mut self, threshold: f64) -> Vec<DataPoint> {
        if self.centroid.is_empty() {
            return Vec::new();
        }
        let centroid = self.centroid.clone();
        let mut outliers = self.remove_where(|p| !p.vector.is_empty() && distance_to(&p.vector, &centroid) > threshold);
        for p in &mut outliers {
            p.subject = None;
        }
        outliers
    }
}

/// Cosine distance between two unit vectors.
fn distance_to(v: &EmbeddingVector, centroid: &EmbeddingVector) -> f64 {
    1.0 - dot(v.values(), centroid.values()).clamp(-1.0, 1.0)
}

/// Multiplicative fading. Returns the new weight, or `None` when the agent
/// falls below the deletion threshold.
pub fn fade(weight: f64, rate: f64, threshold: f64) -> Option<f64> {
    let next = weight * (1.0 - rate);
    (next >= threshold).then_some(next)
}

/// Outcome counts of one communication phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseReport {
    pub at: Timestamp,
    pub evicted: usize,
    pub outliers_moved: usize,
    pub agents_created: usize,
    pub agents_faded: usize,
    pub agents_emptied: usize,
}

/// Totals over the lifetime of a coordinator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub points: usize,
    pub bootstrapped: usize,
    pub assigned: usize,
    pub empty_text: usize,
    pub agents_created: usize,
    pub phases: usize,
    pub evicted: usize,
    pub outliers_moved: usize,
    pub agents_faded: usize,
    pub agents_emptied: usize,
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error("point {id} has dimension {got}, expected {expected}")]
    Dimension { id: String, expected: usize, got: usize },
    #[error("bootstrap needs exactly {expected} points, got {got}")]
    BootstrapSize { expected: usize, got: usize },
    #[error("bootstrap requires a coordinator without agents")]
    AlreadyBootstrapped,
    #[error("the stream has already been finished")]
    Finished,
}

pub struct Coordinator {
    config: Config,
    dim: usize,
    stopwords: BTreeSet<String>,
    agents: BTreeMap<AgentId, Agent>,
    next_agent_id: u64,
    rng: ChaCha8Rng,
    clock: EventClock,
    bootstrap_buffer: Vec<DataPoint>,
    bootstrapped: bool,
    degenerate_bootstrap: bool,
    finished: bool,
    next_phase: Option<Timestamp>,
    current_slot: u64,
    counters: Counters,
    phase_log: Vec<PhaseReport>,
}

impl Coordinator {
    pub fn new(config: Config, dim: usize) -> Result<Self, ClusterError> {
        config.validate()?;
        Ok(Coordinator {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            dim,
            stopwords: BTreeSet::new(),
            agents: BTreeMap::new(),
            next_agent_id: 0,
            clock: EventClock::new(),
            bootstrap_buffer: Vec::new(),
            bootstrapped: false,
            degenerate_bootstrap: false,
            finished: false,
            next_phase: None,
            current_slot: 0,
            counters: Counters::default(),
            phase_log: Vec::new(),
        })
    }

    /// Tokens excluded from topic keywords.
    pub fn with_stopwords<I, S>(mut self, stopwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = stopwords.into_iter().map(Into::into).collect();
        self
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn clock(&self) -> &EventClock {
        &self.clock
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Every communication phase run so far, in order.
    pub fn phase_reports(&self) -> &[PhaseReport] {
        &self.phase_log
    }

    /// True when the stream ended before the bootstrap buffer filled and
    /// the buffered points were assigned one by one instead.
    pub fn degenerate_bootstrap(&self) -> bool {
        self.degenerate_bootstrap
    }

    /// Points buffered until the bootstrap can run.
    pub fn pending_bootstrap(&self) -> usize {
        self.bootstrap_buffer.len()
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    /// Live agents in id order.
    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.agents.get(&id)
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut Agent> {
        self.agents.get_mut(&id)
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Index of the timeslot the clock is in.
    pub fn current_slot(&self) -> u64 {
        self.current_slot
    }

    fn check_dim(&self, point: &DataPoint) -> Result<(), ClusterError> {
        if point.vector.dim() != self.dim {
            return Err(ClusterError::Dimension {
                id: point.id.clone(),
                expected: self.dim,
                got: point.vector.dim(),
            });
        }
        Ok(())
    }

    fn now(&self) -> Timestamp {
        self.clock.current().unwrap_or_default()
    }

    fn spawn_agent(&mut self, created_at: Timestamp) -> AgentId {
        let id = AgentId(self.next_agent_id);
        self.next_agent_id += 1;
        self.agents.insert(id, Agent::new(id, self.dim, created_at));
        self.counters.agents_created += 1;
        id
    }

    /// Distributes the first `init_agents * init_agent_cap` points over
    /// `init_agents` fresh agents after a seeded shuffle.
    pub fn bootstrap(&mut self, mut points: Vec<DataPoint>) -> Result<(), ClusterError> {
        if !self.agents.is_empty() || self.bootstrapped {
            return Err(ClusterError::AlreadyBootstrapped);
        }
        let expected = self.config.bootstrap_size();
        if points.len() != expected {
            return Err(ClusterError::BootstrapSize {
                expected,
                got: points.len(),
            });
        }
        for p in &points {
            self.check_dim(p)?;
        }
        points.shuffle(&mut self.rng);
        self.counters.empty_text += points.iter().filter(|p| p.vector.is_empty()).count();
        let created_at = self.now();
        let mut points = points.into_iter();
        for _ in 0..self.config.init_agents {
            let id = self.spawn_agent(created_at);
            let agent = self.agents.get_mut(&id).expect("just spawned");
            for p in points.by_ref().take(self.config.init_agent_cap) {
                agent.push(p);
            }
        }
        self.counters.bootstrapped += expected;
        self.bootstrapped = true;
        Ok(())
    }

    /// Agent that `vector` would join, with its distance, or `None` when no
    /// agent has a usable centroid. Ties go to the lowest agent id.
    pub fn nearest_agent(&self, vector: &EmbeddingVector) -> Option<(AgentId, f64)> {
        let distances: Vec<(AgentId, f64)> = self
            .agents
            .values()
            .filter(|a| !a.centroid.is_empty())
            .map(|a| (a.id, distance_to(vector, &a.centroid)))
            .collect();
        let best = distances.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
        distances
            .into_iter()
            .find(|(_, d)| *d <= best + TIE_EPSILON)
            .map(|(id, _)| (id, best))
    }

    fn assign_at(&mut self, point: DataPoint, now: Timestamp) -> (AgentId, bool) {
        if point.vector.is_empty() {
            self.counters.empty_text += 1;
            let (target, spawned) = match self.agents.keys().next_back() {
                Some(id) => (*id, false),
                None => (self.spawn_agent(now), true),
            };
            self.agents.get_mut(&target).expect("live agent").push(point);
            return (target, spawned);
        }
        let (target, spawned) = match self.nearest_agent(&point.vector) {
            Some((id, d)) if d <= self.config.assign_radius => (id, false),
            _ => (self.spawn_agent(now), true),
        };
        self.agents.get_mut(&target).expect("live agent").push(point);
        (target, spawned)
    }

    /// Puts `point` into the closest agent within `assign_radius`, or into a
    /// new agent when none is close enough. Empty-text points go to the most
    /// recently created live agent without touching its centroid.
    pub fn assign(&mut self, point: DataPoint) -> Result<AgentId, ClusterError> {
        self.check_dim(&point)?;
        let now = self.now();
        self.counters.assigned += 1;
        Ok(self.assign_at(point, now).0)
    }

    /// Runs one communication phase at event time `now`: eviction, outlier
    /// collection, redistribution, fading, removal of empty agents.
    pub fn communicate(&mut self, now: Timestamp) -> PhaseReport {
        let cutoff = now - self.config.slid_win_int;
        let threshold = self.config.outlier_threshold;
        let scan = |agent: &mut Agent| {
            let evicted = agent.evict_older_than(cutoff);
            (evicted, agent.find_outliers(threshold))
        };

        #[cfg(feature = "rayon")]
        let scanned: Vec<(usize, Vec<DataPoint>)> = {
            use rayon::prelude::*;
            self.agents.par_iter_mut().map(|(_, a)| scan(a)).collect()
        };
        #[cfg(not(feature = "rayon"))]
        let scanned: Vec<(usize, Vec<DataPoint>)> = self.agents.values_mut().map(scan).collect();

        let mut report = PhaseReport {
            at: now,
            ..PhaseReport::default()
        };
        // The window applies to points still waiting for bootstrap too.
        let waiting = self.bootstrap_buffer.len();
        self.bootstrap_buffer.retain(|p| p.timestamp >= cutoff);
        report.evicted += waiting - self.bootstrap_buffer.len();
        let mut outliers = Vec::new();
        for (evicted, found) in scanned {
            report.evicted += evicted;
            outliers.extend(found);
        }
        outliers.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        report.outliers_moved = outliers.len();
        for p in outliers {
            if self.assign_at(p, now).1 {
                report.agents_created += 1;
            }
        }

        let rate = self.config.agent_fading_rate;
        let threshold = self.config.del_agent_weight_threshold;
        let mut faded = Vec::new();
        for agent in self.agents.values_mut() {
            match fade(agent.weight, rate, threshold) {
                Some(w) => agent.weight = w,
                None => faded.push(agent.id),
            }
        }
        report.agents_faded = faded.len();
        for id in faded {
            self.agents.remove(&id);
        }
        let before = self.agents.len();
        self.agents.retain(|_, a| !a.is_empty());
        report.agents_emptied = before - self.agents.len();

        self.counters.phases += 1;
        self.counters.evicted += report.evicted;
        self.counters.outliers_moved += report.outliers_moved;
        self.counters.agents_faded += report.agents_faded;
        self.counters.agents_emptied += report.agents_emptied;
        self.phase_log.push(report);
        log::debug!("phase at {}: {:?}", now, report);
        report
    }

    /// Ranked topics of the current state for slot `slot_index`.
    pub fn snapshot(&self, slot_index: u64) -> TimeslotSnapshot {
        let epoch = self.clock.epoch().unwrap_or_default();
        let start = epoch + slot_index as i64 * self.config.timeslot;
        topics::snapshot(
            self.agents.values(),
            slot_index,
            start,
            start + self.config.timeslot,
            self.config.no_topics,
            self.config.no_keywords,
            &self.stopwords,
        )
    }

    fn slot_end(&self, slot: u64) -> Timestamp {
        self.clock.epoch().unwrap_or_default() + (slot as i64 + 1) * self.config.timeslot
    }

    fn emit_snapshot(&mut self, out: &mut Vec<TimeslotSnapshot>) {
        out.push(self.snapshot(self.current_slot));
        self.counters.snapshots += 1;
        self.current_slot += 1;
    }

    /// Runs every phase and slot end scheduled at or before `until`.
    fn run_due_events(&mut self, until: Timestamp, out: &mut Vec<TimeslotSnapshot>) {
        while let Some(phase_at) = self.next_phase {
            let slot_end = self.slot_end(self.current_slot);
            if phase_at.min(slot_end) > until {
                break;
            }
            if phase_at <= slot_end {
                self.communicate(phase_at);
                self.next_phase = Some(phase_at + self.config.comm_int);
            } else {
                self.emit_snapshot(out);
            }
        }
    }

    /// Feeds one point. Returns the snapshots of every timeslot that ended
    /// at or before the point's timestamp.
    pub fn step(&mut self, point: DataPoint) -> Result<Vec<TimeslotSnapshot>, ClusterError> {
        if self.finished {
            return Err(ClusterError::Finished);
        }
        self.check_dim(&point)?;
        let mut snapshots = Vec::new();
        match self.clock.current() {
            None => self.next_phase = Some(point.timestamp + self.config.comm_int),
            Some(current) if point.timestamp < current => {
                return Err(ClockError::Backwards {
                    current,
                    next: point.timestamp,
                }
                .into())
            }
            Some(_) => self.run_due_events(point.timestamp, &mut snapshots),
        }
        self.clock.advance(point.timestamp)?;
        self.counters.points += 1;

        if self.bootstrapped {
            let now = self.now();
            self.counters.assigned += 1;
            self.assign_at(point, now);
        } else {
            self.bootstrap_buffer.push(point);
            if self.bootstrap_buffer.len() == self.config.bootstrap_size() {
                let buffered = core::mem::take(&mut self.bootstrap_buffer);
                self.bootstrap(buffered)?;
            }
        }
        Ok(snapshots)
    }

    /// Ends the stream: flushes pending events, runs a last communication
    /// phase at the end of the current slot and returns the remaining
    /// snapshots, the last one being the final (partial) slot.
    pub fn finish(&mut self) -> Result<Vec<TimeslotSnapshot>, ClusterError> {
        if self.finished {
            return Err(ClusterError::Finished);
        }
        self.finished = true;
        let mut snapshots = Vec::new();
        if self.clock.current().is_none() {
            return Ok(snapshots);
        }
        if !self.bootstrap_buffer.is_empty() {
            log::warn!(
                "stream ended with {} of {} bootstrap points; assigning them directly",
                self.bootstrap_buffer.len(),
                self.config.bootstrap_size()
            );
            self.degenerate_bootstrap = true;
            self.bootstrapped = true;
            let now = self.now();
            for p in core::mem::take(&mut self.bootstrap_buffer) {
                self.counters.assigned += 1;
                self.assign_at(p, now);
            }
        }
        let end = self.slot_end(self.current_slot);
        self.run_due_events(end - 1, &mut snapshots);
        self.communicate(end);
        if self.next_phase == Some(end) {
            self.next_phase = Some(end + self.config.comm_int);
        }
        self.emit_snapshot(&mut snapshots);
        Ok(snapshots)
    }
}

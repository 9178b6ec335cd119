//! Candidate generation: location clustering, usage-based service ranking,
//! top-k selection, per-service interval sets, Allen relations, and the
//! overlap-pair sweep.
//!
//! A candidate pair is two events at the same canonical location, by
//! different residents, with a positive-length half-open intersection.
//! Pairs are generated across different services too; the per-rule
//! same/different-service restriction is applied later by the rule set.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{EventId, EventSequence, Location, ServiceEvent, ServiceId, TimeInterval};

/// Default number of services kept by the usage heuristic.
pub const DEFAULT_TOP_K: usize = 7;

/// Aggregate usage of one service: how often and for how long it ran, and
/// where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UsageStats {
    pub service_id: ServiceId,
    pub locations: BTreeSet<Location>,
    pub use_count: u64,
    pub total_duration: Duration,
}

/// Groups service ids by the locations they were observed at. A service
/// with events in several rooms appears under each of them.
pub fn cluster_by_location(seq: &EventSequence) -> BTreeMap<Location, BTreeSet<ServiceId>> {
    let mut clusters: BTreeMap<Location, BTreeSet<ServiceId>> = BTreeMap::new();
    for ev in seq.iter() {
        clusters
            .entry(ev.location.clone())
            .or_default()
            .insert(ev.service_id.clone());
    }
    clusters
}

/// Ranks services by combined usage: rank by event count plus rank by total
/// duration (1 = heaviest user for each key), lower sums first, ties broken
/// by service id. Tied values share a rank (competition ranking).
pub fn rank_services(seq: &EventSequence) -> Vec<(ServiceId, UsageStats)> {
    let mut stats: BTreeMap<ServiceId, UsageStats> = BTreeMap::new();
    for ev in seq.iter() {
        let entry = stats.entry(ev.service_id.clone()).or_insert_with(|| UsageStats {
            service_id: ev.service_id.clone(),
            locations: BTreeSet::new(),
            use_count: 0,
            total_duration: Duration::ZERO,
        });
        entry.use_count += 1;
        entry.total_duration += ev.interval.duration();
        entry.locations.insert(ev.location.clone());
    }

    let all: Vec<UsageStats> = stats.into_values().collect();
    let rank_of = |better: &dyn Fn(&UsageStats) -> bool| 1 + all.iter().filter(|s| better(s)).count();

    let mut ranked: Vec<(usize, ServiceId, UsageStats)> = all
        .iter()
        .map(|s| {
            let by_count = rank_of(&|o: &UsageStats| o.use_count > s.use_count);
            let by_duration = rank_of(&|o: &UsageStats| o.total_duration > s.total_duration);
            (by_count + by_duration, s.service_id.clone(), s.clone())
        })
        .collect();
    ranked.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    ranked.into_iter().map(|(_, id, s)| (id, s)).collect()
}

/// Keeps the first `min(n, k)` services of a ranking.
pub fn select_top_k(ranked: &[(ServiceId, UsageStats)], k: usize) -> BTreeSet<ServiceId> {
    ranked.iter().take(k).map(|(id, _)| id.clone()).collect()
}

/// Interval set per selected service; selected services without events map
/// to an empty set.
pub fn interval_sets(
    seq: &EventSequence,
    selected: &BTreeSet<ServiceId>,
) -> BTreeMap<ServiceId, BTreeSet<TimeInterval>> {
    let mut sets: BTreeMap<ServiceId, BTreeSet<TimeInterval>> = selected
        .iter()
        .map(|id| (id.clone(), BTreeSet::new()))
        .collect();
    for ev in seq.iter() {
        if let Some(set) = sets.get_mut(&ev.service_id) {
            set.insert(ev.interval);
        }
    }
    sets
}

/// The thirteen mutually exclusive qualitative relations between two
/// intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllenRelation {
    Before,
    Meets,
    Overlaps,
    FinishedBy,
    Contains,
    Starts,
    Equals,
    StartedBy,
    During,
    Finishes,
    OverlappedBy,
    MetBy,
    After,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 13] = [
        AllenRelation::Before,
        AllenRelation::Meets,
        AllenRelation::Overlaps,
        AllenRelation::FinishedBy,
        AllenRelation::Contains,
        AllenRelation::Starts,
        AllenRelation::Equals,
        AllenRelation::StartedBy,
        AllenRelation::During,
        AllenRelation::Finishes,
        AllenRelation::OverlappedBy,
        AllenRelation::MetBy,
        AllenRelation::After,
    ];

    pub fn inverse(self) -> Self {
        match self {
            AllenRelation::Before => AllenRelation::After,
            AllenRelation::Meets => AllenRelation::MetBy,
            AllenRelation::Overlaps => AllenRelation::OverlappedBy,
            AllenRelation::FinishedBy => AllenRelation::Finishes,
            AllenRelation::Contains => AllenRelation::During,
            AllenRelation::Starts => AllenRelation::StartedBy,
            AllenRelation::Equals => AllenRelation::Equals,
            AllenRelation::StartedBy => AllenRelation::Starts,
            AllenRelation::During => AllenRelation::Contains,
            AllenRelation::Finishes => AllenRelation::FinishedBy,
            AllenRelation::OverlappedBy => AllenRelation::Overlaps,
            AllenRelation::MetBy => AllenRelation::Meets,
            AllenRelation::After => AllenRelation::Before,
        }
    }

    /// True for relations whose half-open intersection has positive length
    /// (assuming proper, positive-length intervals).
    pub fn is_overlap_positive(self) -> bool {
        !matches!(
            self,
            AllenRelation::Before
                | AllenRelation::Meets
                | AllenRelation::MetBy
                | AllenRelation::After
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AllenRelation::Before => "before",
            AllenRelation::Meets => "meets",
            AllenRelation::Overlaps => "overlaps",
            AllenRelation::FinishedBy => "finished_by",
            AllenRelation::Contains => "contains",
            AllenRelation::Starts => "starts",
            AllenRelation::Equals => "equals",
            AllenRelation::StartedBy => "started_by",
            AllenRelation::During => "during",
            AllenRelation::Finishes => "finishes",
            AllenRelation::OverlappedBy => "overlapped_by",
            AllenRelation::MetBy => "met_by",
            AllenRelation::After => "after",
        }
    }
}

/// Classifies the relation of `a` to `b`. Total over all valid intervals;
/// zero-length intervals are resolved by the same endpoint comparisons, with
/// `Equals`/`Before`/`After`/`Meets`/`MetBy` taking precedence, which keeps
/// `allen_relation(a, b)` and `allen_relation(b, a)` exact inverses.
pub fn allen_relation(a: TimeInterval, b: TimeInterval) -> AllenRelation {
    use std::cmp::Ordering::*;

    if a.start() == b.start() && a.end() == b.end() {
        return AllenRelation::Equals;
    }
    if a.end() < b.start() {
        return AllenRelation::Before;
    }
    if a.start() > b.end() {
        return AllenRelation::After;
    }
    if a.end() == b.start() {
        return AllenRelation::Meets;
    }
    if a.start() == b.end() {
        return AllenRelation::MetBy;
    }
    match (a.start().cmp(&b.start()), a.end().cmp(&b.end())) {
        (Less, Less) => AllenRelation::Overlaps,
        (Less, Equal) => AllenRelation::FinishedBy,
        (Less, Greater) => AllenRelation::Contains,
        (Equal, Less) => AllenRelation::Starts,
        (Equal, Greater) => AllenRelation::StartedBy,
        (Greater, Less) => AllenRelation::During,
        (Greater, Equal) => AllenRelation::Finishes,
        (Greater, Greater) => AllenRelation::OverlappedBy,
        (Equal, Equal) => unreachable!("equal intervals handled above"),
    }
}

/// Two events satisfying the conflict preconditions, annotated with their
/// Allen relation and the (positive-length) intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPair {
    pub first: ServiceEvent,
    pub second: ServiceEvent,
    pub relation: AllenRelation,
    pub overlap: TimeInterval,
}

impl OverlapPair {
    /// Builds the pair when the preconditions hold: same canonical location,
    /// different users, positive-length intersection. `first` is the event
    /// with the earlier start (ties broken by event id).
    pub fn try_new(a: &ServiceEvent, b: &ServiceEvent) -> Option<Self> {
        if a.location != b.location || a.user_id == b.user_id {
            return None;
        }
        let overlap = a.interval.intersection(&b.interval)?;
        let (first, second) =
            if (a.interval.start(), &a.event_id) <= (b.interval.start(), &b.event_id) {
                (a, b)
            } else {
                (b, a)
            };
        Some(Self {
            first: first.clone(),
            second: second.clone(),
            relation: allen_relation(first.interval, second.interval),
            overlap,
        })
    }

    pub fn same_service(&self) -> bool {
        self.first.service_id == self.second.service_id
    }

    /// Order-insensitive event-id key, for matching against labels.
    pub fn event_key(&self) -> (EventId, EventId) {
        normalize_event_key(&self.first.event_id, &self.second.event_id)
    }

    /// Lexicographically ordered service-id pair.
    pub fn service_key(&self) -> (ServiceId, ServiceId) {
        let (a, b) = (&self.first.service_id, &self.second.service_id);
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }
}

/// Normalizes an event-id pair to a canonical order.
pub fn normalize_event_key(a: &EventId, b: &EventId) -> (EventId, EventId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Finds every candidate pair among events of the selected services using a
/// per-location sweep over start-ordered events. Output is sorted by
/// (location, overlap start, first event id, second event id).
pub fn find_overlaps(seq: &EventSequence, selected: &BTreeSet<ServiceId>) -> Vec<OverlapPair> {
    let mut by_location: BTreeMap<&Location, Vec<&ServiceEvent>> = BTreeMap::new();
    for ev in seq.iter() {
        if selected.contains(&ev.service_id) {
            by_location.entry(&ev.location).or_default().push(ev);
        }
    }

    let mut pairs = Vec::new();
    for events in by_location.into_values() {
        // events inherit the sequence order: (start, event_id)
        let mut active: Vec<&ServiceEvent> = Vec::new();
        for ev in events {
            active.retain(|open| open.interval.end() > ev.interval.start());
            for open in &active {
                if open.user_id != ev.user_id {
                    if let Some(pair) = OverlapPair::try_new(open, ev) {
                        pairs.push(pair);
                    }
                }
            }
            active.push(ev);
        }
    }

    pairs.sort_by(|x, y| {
        (
            &x.first.location,
            x.overlap.start(),
            &x.first.event_id,
            &x.second.event_id,
        )
            .cmp(&(
                &y.first.location,
                y.overlap.start(),
                &y.first.event_id,
                &y.second.event_id,
            ))
    });
    pairs
}

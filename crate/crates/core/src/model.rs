//! Domain types shared by every other module: services, events, time
//! intervals, and the service registry.
//!
//! All types are immutable after construction and safe to share across
//! threads; invariants are enforced at the constructors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised while constructing or validating domain values.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("location is empty after trimming")]
    InvalidLocation,
    #[error("interval end {end} precedes start {start}")]
    InvertedInterval { start: Timestamp, end: Timestamp },
    #[error("unknown service `{0}`")]
    UnknownService(ServiceId),
    #[error("service `{service}` does not declare attribute `{attribute}`")]
    UnknownAttribute { service: ServiceId, attribute: String },
    #[error("capacity demand must be at least 1 (event `{0}`)")]
    InvalidDemand(EventId),
    #[error("duplicate service id `{0}` in registry")]
    DuplicateService(ServiceId),
    #[error("attribute `{attribute}` of `{service}` is declared both qualitative and quantitative")]
    AmbiguousAttribute { service: ServiceId, attribute: String },
    #[error("service `{0}` depends on itself")]
    SelfDependency(ServiceId),
    #[error("cannot parse timestamp `{0}`")]
    BadTimestamp(String),
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Opaque identifier of an IoT service.
    ServiceId
);
id_type!(
    /// Opaque identifier of a single service event.
    EventId
);
id_type!(
    /// Opaque identifier of a resident.
    UserId
);

/// A canonicalized location name: trimmed, case-folded, and with internal
/// whitespace collapsed to single spaces. Location equality is exact string
/// equality of this canonical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Location(String);

impl Location {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        canonicalize_location(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Location {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        canonicalize_location(s)
    }
}

impl<'de> Deserialize<'de> for Location {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        canonicalize_location(&raw).map_err(serde::de::Error::custom)
    }
}

/// Canonicalizes a raw location string. Idempotent; errors when nothing but
/// whitespace remains.
pub fn canonicalize_location(raw: &str) -> Result<Location, ModelError> {
    let folded = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if folded.is_empty() {
        return Err(ModelError::InvalidLocation);
    }
    Ok(Location(folded))
}

/// An absolute instant at microsecond resolution.
///
/// Parsed from `YYYY-MM-DD HH:MM:SS[.ffffff]`; sub-microsecond digits are
/// truncated, not rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let dt = chrono::NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S%.f")
            .map_err(|_| ModelError::BadTimestamp(s.to_string()))?;
        Ok(Self(dt.and_utc().timestamp_micros()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match chrono::DateTime::from_timestamp_micros(self.0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%d %H:%M:%S%.6f")),
            None => write!(f, "@{}us", self.0),
        }
    }
}

impl FromStr for Timestamp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// A half-open interval `[start, end)`. Two intervals sharing only an
/// endpoint do not overlap: a state change takes effect immediately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct TimeInterval {
    start: Timestamp,
    end: Timestamp,
}

#[derive(Serialize, Deserialize, Clone)]
struct IntervalRepr {
    start: Timestamp,
    end: Timestamp,
}

impl TryFrom<IntervalRepr> for TimeInterval {
    type Error = ModelError;

    fn try_from(repr: IntervalRepr) -> Result<Self, Self::Error> {
        TimeInterval::new(repr.start, repr.end)
    }
}

impl From<TimeInterval> for IntervalRepr {
    fn from(iv: TimeInterval) -> Self {
        Self {
            start: iv.start,
            end: iv.end,
        }
    }
}

impl TimeInterval {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, ModelError> {
        if end < start {
            return Err(ModelError::InvertedInterval { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn duration_micros(&self) -> i64 {
        self.end.0 - self.start.0
    }

    pub fn duration(&self) -> Duration {
        Duration::from_micros(self.duration_micros() as u64)
    }

    /// Half-open overlap test: true only when the intersection has positive
    /// length.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.start.max(other.start) < self.end.min(other.end)
    }

    /// Positive-length intersection, if any.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        if start < end {
            Some(Self { start, end })
        } else {
            None
        }
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Resource capacity of a service; `Unbounded` models services that can
/// serve any number of residents at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CapacityRepr", into = "CapacityRepr")]
pub enum Capacity {
    Unbounded,
    Bounded(u32),
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(untagged)]
enum CapacityRepr {
    Count(u32),
    Tag(String),
}

impl TryFrom<CapacityRepr> for Capacity {
    type Error = String;

    fn try_from(repr: CapacityRepr) -> Result<Self, Self::Error> {
        match repr {
            CapacityRepr::Count(n) => Ok(Capacity::Bounded(n)),
            CapacityRepr::Tag(s) if s == "unbounded" => Ok(Capacity::Unbounded),
            CapacityRepr::Tag(s) => Err(format!(
                "capacity must be a non-negative integer or \"unbounded\", got `{s}`"
            )),
        }
    }
}

impl From<Capacity> for CapacityRepr {
    fn from(c: Capacity) -> Self {
        match c {
            Capacity::Bounded(n) => CapacityRepr::Count(n),
            Capacity::Unbounded => CapacityRepr::Tag("unbounded".to_string()),
        }
    }
}

impl Capacity {
    pub fn limit(&self) -> Option<u32> {
        match self {
            Capacity::Bounded(n) => Some(*n),
            Capacity::Unbounded => None,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Unbounded => f.write_str("unbounded"),
            Capacity::Bounded(n) => write!(f, "{n}"),
        }
    }
}

/// Direction in which a service pushes a shared environment property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectDirection {
    Raises,
    Lowers,
    Neutral,
}

impl EffectDirection {
    pub fn opposes(self, other: Self) -> bool {
        matches!(
            (self, other),
            (EffectDirection::Raises, EffectDirection::Lowers)
                | (EffectDirection::Lowers, EffectDirection::Raises)
        )
    }
}

/// Declared numeric domain of a quantitative attribute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantAttrSpec {
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

fn default_capacity() -> Capacity {
    Capacity::Unbounded
}

/// Static description of one IoT service: identity, capacity, attribute
/// schema, functional dependencies, and environment effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub service_id: ServiceId,
    pub name: String,
    #[serde(default)]
    pub functions: BTreeSet<String>,
    #[serde(default = "default_capacity")]
    pub capacity: Capacity,
    #[serde(default)]
    pub qualitative_attrs: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub quantitative_attrs: BTreeMap<String, QuantAttrSpec>,
    #[serde(default)]
    pub depends_on: BTreeSet<ServiceId>,
    #[serde(default)]
    pub env_effects: BTreeMap<String, EffectDirection>,
}

impl ServiceDescriptor {
    pub fn validate(&self) -> Result<(), ModelError> {
        for attr in self.qualitative_attrs.keys() {
            if self.quantitative_attrs.contains_key(attr) {
                return Err(ModelError::AmbiguousAttribute {
                    service: self.service_id.clone(),
                    attribute: attr.clone(),
                });
            }
        }
        if self.depends_on.contains(&self.service_id) {
            return Err(ModelError::SelfDependency(self.service_id.clone()));
        }
        Ok(())
    }
}

/// Functional state recorded by a service event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceState {
    On,
    Off,
}

impl ServiceState {
    pub fn is_on(self) -> bool {
        matches!(self, ServiceState::On)
    }
}

impl fmt::Display for ServiceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceState::On => "On",
            ServiceState::Off => "Off",
        })
    }
}

impl FromStr for ServiceState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "on" => Ok(ServiceState::On),
            "off" => Ok(ServiceState::Off),
            other => Err(format!("state must be On or Off, got `{other}`")),
        }
    }
}

fn default_demand() -> u32 {
    1
}

/// One timed, located, user-attributed service invocation together with the
/// attribute values requested for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub event_id: EventId,
    pub service_id: ServiceId,
    pub state: ServiceState,
    pub interval: TimeInterval,
    pub location: Location,
    pub user_id: UserId,
    #[serde(default)]
    pub qualitative_values: BTreeMap<String, String>,
    #[serde(default)]
    pub quantitative_values: BTreeMap<String, f64>,
    #[serde(default = "default_demand")]
    pub capacity_demand: u32,
}

/// Collection of service descriptors keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceRegistry {
    services: BTreeMap<ServiceId, ServiceDescriptor>,
}

impl ServiceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_descriptors(
        descriptors: impl IntoIterator<Item = ServiceDescriptor>,
    ) -> Result<Self, ModelError> {
        let mut reg = Self::new();
        for d in descriptors {
            reg.insert(d)?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, descriptor: ServiceDescriptor) -> Result<(), ModelError> {
        descriptor.validate()?;
        if self.services.contains_key(&descriptor.service_id) {
            return Err(ModelError::DuplicateService(descriptor.service_id));
        }
        self.services.insert(descriptor.service_id.clone(), descriptor);
        Ok(())
    }

    pub fn get(&self, id: &ServiceId) -> Option<&ServiceDescriptor> {
        self.services.get(id)
    }

    pub fn contains(&self, id: &ServiceId) -> bool {
        self.services.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ServiceDescriptor> {
        self.services.values()
    }

    pub fn service_ids(&self) -> BTreeSet<ServiceId> {
        self.services.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }
}

/// Checks an event against the registry: the service must exist, every
/// attribute value must be declared in the service schema, and the demand
/// must be positive. Interval sanity is already guaranteed by construction.
pub fn validate_event(ev: &ServiceEvent, reg: &ServiceRegistry) -> Result<(), ModelError> {
    let desc = reg
        .get(&ev.service_id)
        .ok_or_else(|| ModelError::UnknownService(ev.service_id.clone()))?;
    if ev.capacity_demand == 0 {
        return Err(ModelError::InvalidDemand(ev.event_id.clone()));
    }
    for attr in ev.qualitative_values.keys() {
        if !desc.qualitative_attrs.contains_key(attr) {
            return Err(ModelError::UnknownAttribute {
                service: ev.service_id.clone(),
                attribute: attr.clone(),
            });
        }
    }
    for attr in ev.quantitative_values.keys() {
        if !desc.quantitative_attrs.contains_key(attr) {
            return Err(ModelError::UnknownAttribute {
                service: ev.service_id.clone(),
                attribute: attr.clone(),
            });
        }
    }
    Ok(())
}

/// Events in deterministic order: by interval start, then event id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<ServiceEvent>", into = "Vec<ServiceEvent>")]
pub struct EventSequence {
    events: Vec<ServiceEvent>,
}

impl EventSequence {
    pub fn from_events(mut events: Vec<ServiceEvent>) -> Self {
        events.sort_by(|a, b| {
            (a.interval.start(), &a.event_id).cmp(&(b.interval.start(), &b.event_id))
        });
        Self { events }
    }

    pub fn merge(parts: impl IntoIterator<Item = EventSequence>) -> Self {
        let mut all = Vec::new();
        for part in parts {
            all.extend(part.events);
        }
        Self::from_events(all)
    }

    pub fn events(&self) -> &[ServiceEvent] {
        &self.events
    }

    pub fn iter(&self) -> impl Iterator<Item = &ServiceEvent> {
        self.events.iter()
    }

    pub fn into_events(self) -> Vec<ServiceEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl From<Vec<ServiceEvent>> for EventSequence {
    fn from(events: Vec<ServiceEvent>) -> Self {
        Self::from_events(events)
    }
}

impl From<EventSequence> for Vec<ServiceEvent> {
    fn from(seq: EventSequence) -> Self {
        seq.events
    }
}

//! Seeded generator for labeled multi-resident corpora.
//!
//! Background events follow per-resident habit schedules with jittered
//! starts and truncated-normal attribute values, so learned preference
//! ranges are meaningful. Injected conflicts are constructed pairs that
//! provably match one rule each, placed in reserved night slots away from
//! the background schedule. Every candidate pair of the finished corpus is
//! labeled: numeric attributes by the comfort rule, everything else by the
//! corresponding rule condition.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{GroundTruthLabel, GroundTruthLabels};
use crate::ingest::{self, IngestError};
use crate::model::{
    Capacity, EventId, EventSequence, Location, ModelError, ServiceDescriptor, ServiceEvent,
    ServiceId, ServiceRegistry, ServiceState, TimeInterval, Timestamp, UserId,
};
use crate::rules::ConflictType;
use crate::selection;

const MICROS_PER_MINUTE: i64 = 60_000_000;
const MICROS_PER_HOUR: i64 = 3_600_000_000;
const MICROS_PER_DAY: i64 = 86_400_000_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible scenario: {0}")]
    InfeasibleSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O failure")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Detect(#[from] crate::detector::DetectError),
}

/// Normal distribution parameters for one quantitative preference; draws
/// are clamped to mean +/- 2 * spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDistribution {
    pub mean: f64,
    #[serde(default)]
    pub spread: f64,
}

fn one() -> u32 {
    1
}

/// One recurring service usage of a resident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Habit {
    pub service_id: ServiceId,
    pub location: Location,
    /// Hour-of-day of the first session, fractional hours allowed.
    pub start_hour: f64,
    pub duration_minutes: f64,
    #[serde(default)]
    pub jitter_minutes: f64,
    #[serde(default = "one")]
    pub sessions_per_day: u32,
    /// Gap between session starts; defaults to duration + 30 minutes.
    #[serde(default)]
    pub stride_minutes: Option<f64>,
    #[serde(default)]
    pub quantitative: BTreeMap<String, ValueDistribution>,
    #[serde(default)]
    pub qualitative: BTreeMap<String, String>,
    #[serde(default = "one")]
    pub demand: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentProfile {
    pub user_id: UserId,
    pub habits: Vec<Habit>,
}

fn default_start_date() -> String {
    "2025-06-01".to_string()
}

fn default_comfort_threshold() -> f64 {
    crate::detector::DEFAULT_COMFORT_THRESHOLD
}

fn default_injection_location() -> String {
    "living room".to_string()
}

/// Scenario description: residents and their habits, the service registry,
/// and how many conflicts of each type to inject per day.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub days: u32,
    #[serde(default = "default_start_date")]
    pub start_date: String,
    #[serde(default = "default_comfort_threshold")]
    pub comfort_threshold: f64,
    #[serde(default = "default_injection_location")]
    pub injection_location: String,
    pub residents: Vec<ResidentProfile>,
    pub services: Vec<ServiceDescriptor>,
    #[serde(default)]
    pub injection_rates: BTreeMap<ConflictType, f64>,
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| SynthError::InfeasibleSpec(format!("cannot parse scenario: {e}")))
    }

    pub fn registry(&self) -> Result<ServiceRegistry, ModelError> {
        ServiceRegistry::from_descriptors(self.services.iter().cloned())
    }
}

/// One injected conflict: the type and the two event ids that realize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedConflict {
    pub conflict_type: ConflictType,
    pub event_a: EventId,
    pub event_b: EventId,
}

/// A generated corpus with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub events: EventSequence,
    pub labels: GroundTruthLabels,
    pub injected: Vec<InjectedConflict>,
}

struct InjectionPlan {
    service_a: ServiceId,
    service_b: ServiceId,
    state_a: ServiceState,
    state_b: ServiceState,
    demand_a: u32,
    demand_b: u32,
    qualitative: Option<(String, String, String)>,
    quantitative: Option<(String, f64, f64)>,
}

fn plan_injection(
    conflict_type: ConflictType,
    spec: &ScenarioSpec,
    reg: &ServiceRegistry,
) -> Result<InjectionPlan, SynthError> {
    let infeasible = |msg: &str| SynthError::InfeasibleSpec(msg.to_string());
    let same_service = |id: &ServiceId, plan: InjectionPlan| InjectionPlan {
        service_a: id.clone(),
        service_b: id.clone(),
        ..plan
    };
    let blank = InjectionPlan {
        service_a: ServiceId::from(""),
        service_b: ServiceId::from(""),
        state_a: ServiceState::On,
        state_b: ServiceState::On,
        demand_a: 1,
        demand_b: 1,
        qualitative: None,
        quantitative: None,
    };

    // prefer unbounded-capacity services so only the targeted rule fires
    let pick = |filter: &dyn Fn(&ServiceDescriptor) -> bool| {
        reg.iter()
            .find(|d| filter(d) && d.capacity == Capacity::Unbounded)
            .or_else(|| reg.iter().find(|d| filter(d)))
    };

    match conflict_type {
        ConflictType::Functional => {
            let svc = pick(&|_| true).ok_or_else(|| infeasible("no services declared"))?;
            Ok(same_service(
                &svc.service_id,
                InjectionPlan {
                    state_b: ServiceState::Off,
                    ..blank
                },
            ))
        }
        ConflictType::ResourceCapacity => {
            let svc = reg
                .iter()
                .find(|d| d.capacity.limit().is_some())
                .ok_or_else(|| {
                    infeasible("resource capacity injection requires a bounded-capacity service")
                })?;
            let limit = svc.capacity.limit().expect("bounded");
            Ok(same_service(
                &svc.service_id,
                InjectionPlan {
                    demand_a: limit.max(1),
                    demand_b: 1,
                    ..blank
                },
            ))
        }
        ConflictType::QualitativeNonFunctional => {
            let svc = pick(&|d| !d.qualitative_attrs.is_empty())
                .ok_or_else(|| infeasible("no service declares a qualitative attribute"))?;
            let (attr, allowed) = svc.qualitative_attrs.iter().next().expect("non-empty");
            let mut values = allowed.iter().cloned();
            let left = values.next().unwrap_or_else(|| format!("{attr}-a"));
            let right = values.next().unwrap_or_else(|| format!("{attr}-b"));
            Ok(same_service(
                &svc.service_id,
                InjectionPlan {
                    qualitative: Some((attr.clone(), left, right)),
                    ..blank
                },
            ))
        }
        ConflictType::QuantitativeNonFunctional => {
            let svc = pick(&|d| !d.quantitative_attrs.is_empty())
                .ok_or_else(|| infeasible("no service declares a quantitative attribute"))?;
            let attr = svc.quantitative_attrs.keys().next().expect("non-empty").clone();
            let base = spec
                .residents
                .iter()
                .flat_map(|r| &r.habits)
                .filter(|h| h.service_id == svc.service_id)
                .find_map(|h| h.quantitative.get(&attr).map(|d| d.mean))
                .unwrap_or(20.0);
            Ok(same_service(
                &svc.service_id,
                InjectionPlan {
                    quantitative: Some((attr, base, base + spec.comfort_threshold + 2.0)),
                    ..blank
                },
            ))
        }
        ConflictType::DirectServiceImpact => {
            for d in reg.iter() {
                for dep in &d.depends_on {
                    if reg.contains(dep) {
                        return Ok(InjectionPlan {
                            service_a: d.service_id.clone(),
                            service_b: dep.clone(),
                            ..blank
                        });
                    }
                }
            }
            Err(infeasible("no declared dependency edge for direct impact"))
        }
        ConflictType::IndirectServiceImpact => {
            let services: Vec<&ServiceDescriptor> = reg.iter().collect();
            let mut shared_only: Option<(ServiceId, ServiceId)> = None;
            for (i, a) in services.iter().enumerate() {
                for b in services.iter().skip(i + 1) {
                    if a.depends_on.contains(&b.service_id)
                        || b.depends_on.contains(&a.service_id)
                    {
                        continue;
                    }
                    for (prop, dir_a) in &a.env_effects {
                        if let Some(dir_b) = b.env_effects.get(prop) {
                            if dir_a.opposes(*dir_b) {
                                return Ok(InjectionPlan {
                                    service_a: a.service_id.clone(),
                                    service_b: b.service_id.clone(),
                                    ..blank
                                });
                            }
                            shared_only.get_or_insert_with(|| {
                                (a.service_id.clone(), b.service_id.clone())
                            });
                        }
                    }
                }
            }
            match shared_only {
                Some((a, b)) => Ok(InjectionPlan {
                    service_a: a,
                    service_b: b,
                    ..blank
                }),
                None => Err(infeasible(
                    "no independent service pair shares an environment property",
                )),
            }
        }
    }
}

/// Applies the rule conditions directly to one pair, using the comfort rule
/// for quantitative attributes. This is the labeling side: detection must
/// agree with it except where strict numeric equality diverges from the
/// comfort threshold.
fn label_pair(
    pair: &selection::OverlapPair,
    reg: &ServiceRegistry,
    comfort_threshold: f64,
) -> BTreeSet<ConflictType> {
    let mut types = BTreeSet::new();
    let (a, b) = (&pair.first, &pair.second);
    if a.service_id == b.service_id {
        if a.state != b.state {
            types.insert(ConflictType::Functional);
        }
        if let Some(desc) = reg.get(&a.service_id) {
            if let Some(limit) = desc.capacity.limit() {
                if u64::from(a.capacity_demand) + u64::from(b.capacity_demand) > u64::from(limit) {
                    types.insert(ConflictType::ResourceCapacity);
                }
            }
        }
        for (attr, left) in &a.qualitative_values {
            if b.qualitative_values.get(attr).is_some_and(|right| right != left) {
                types.insert(ConflictType::QualitativeNonFunctional);
            }
        }
        for (attr, left) in &a.quantitative_values {
            if let Some(right) = b.quantitative_values.get(attr) {
                if (left - right).abs() > comfort_threshold {
                    types.insert(ConflictType::QuantitativeNonFunctional);
                }
            }
        }
    } else if a.state.is_on() && b.state.is_on() {
        let (Some(da), Some(db)) = (reg.get(&a.service_id), reg.get(&b.service_id)) else {
            return types;
        };
        let edge = da.depends_on.contains(&db.service_id) || db.depends_on.contains(&da.service_id);
        if edge {
            types.insert(ConflictType::DirectServiceImpact);
        } else if da
            .env_effects
            .keys()
            .any(|prop| db.env_effects.contains_key(prop))
        {
            types.insert(ConflictType::IndirectServiceImpact);
        }
    }
    types
}

/// Generates a corpus. Deterministic for a fixed spec: rerunning produces
/// byte-identical events and labels.
pub fn generate(spec: &ScenarioSpec) -> Result<SynthCorpus, SynthError> {
    if spec.days == 0 {
        return Err(SynthError::InfeasibleSpec("days must be at least 1".into()));
    }
    if let Some((t, r)) = spec.injection_rates.iter().find(|(_, r)| **r < 0.0) {
        return Err(SynthError::InfeasibleSpec(format!(
            "negative injection rate {r} for {t}"
        )));
    }
    let reg = spec.registry()?;
    let base = chrono::NaiveDate::parse_from_str(&spec.start_date, "%Y-%m-%d")
        .map_err(|e| SynthError::InfeasibleSpec(format!("bad start_date: {e}")))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp_micros();
    let injection_location = Location::new(&spec.injection_location)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events: Vec<ServiceEvent> = Vec::new();

    // background habit events
    for day in 0..spec.days {
        for resident in &spec.residents {
            let mut counter = 0usize;
            for habit in &resident.habits {
                let duration = (habit.duration_minutes * MICROS_PER_MINUTE as f64).round() as i64;
                let stride = (habit
                    .stride_minutes
                    .unwrap_or(habit.duration_minutes + 30.0)
                    * MICROS_PER_MINUTE as f64)
                    .round() as i64;
                let jitter_span = (habit.jitter_minutes * MICROS_PER_MINUTE as f64).round() as i64;
                for session in 0..habit.sessions_per_day {
                    let jitter = if jitter_span > 0 {
                        rng.random_range(-jitter_span..=jitter_span)
                    } else {
                        0
                    };
                    let start = base
                        + i64::from(day) * MICROS_PER_DAY
                        + (habit.start_hour * MICROS_PER_HOUR as f64).round() as i64
                        + i64::from(session) * stride
                        + jitter;
                    let mut quantitative_values = BTreeMap::new();
                    for (attr, dist) in &habit.quantitative {
                        let value = if dist.spread > 0.0 {
                            let normal = Normal::new(dist.mean, dist.spread)
                                .expect("finite mean and positive spread");
                            normal
                                .sample(&mut rng)
                                .clamp(dist.mean - 2.0 * dist.spread, dist.mean + 2.0 * dist.spread)
                        } else {
                            dist.mean
                        };
                        quantitative_values.insert(attr.clone(), value);
                    }
                    counter += 1;
                    events.push(ServiceEvent {
                        event_id: EventId::new(format!(
                            "bg-{}-d{day:03}-{counter:03}",
                            resident.user_id
                        )),
                        service_id: habit.service_id.clone(),
                        state: ServiceState::On,
                        interval: TimeInterval::new(
                            Timestamp::from_micros(start),
                            Timestamp::from_micros(start + duration),
                        )?,
                        location: habit.location.clone(),
                        user_id: resident.user_id.clone(),
                        qualitative_values: habit.qualitative.clone(),
                        quantitative_values,
                        capacity_demand: habit.demand,
                    });
                }
            }
        }
    }

    // injected conflicts, in reserved 30-minute night slots from 20:00
    let mut injected = Vec::new();
    let any_injection = spec.injection_rates.values().any(|r| *r > 0.0);
    if any_injection && spec.residents.len() < 2 {
        return Err(SynthError::InfeasibleSpec(
            "conflict injection needs at least two residents".into(),
        ));
    }
    let mut slot_of_day: BTreeMap<u32, i64> = BTreeMap::new();
    for (conflict_type, rate) in &spec.injection_rates {
        let count = (rate * f64::from(spec.days)).round() as usize;
        if count == 0 {
            continue;
        }
        let plan = plan_injection(*conflict_type, spec, &reg)?;
        let user_a = &spec.residents[0].user_id;
        let user_b = &spec.residents[1].user_id;
        for index in 0..count {
            let day = (index % spec.days as usize) as u32;
            let slot = slot_of_day.entry(day).or_insert(0);
            let slot_start = base
                + i64::from(day) * MICROS_PER_DAY
                + 20 * MICROS_PER_HOUR
                + *slot * 30 * MICROS_PER_MINUTE;
            *slot += 1;

            let prefix = format!("inj-{}-{index:03}", conflict_type.name());
            let make = |suffix: &str,
                            service: &ServiceId,
                            user: &UserId,
                            state: ServiceState,
                            demand: u32,
                            offset: i64,
                            length: i64|
             -> ServiceEvent {
                ServiceEvent {
                    event_id: EventId::new(format!("{prefix}-{suffix}")),
                    service_id: service.clone(),
                    state,
                    interval: TimeInterval::new(
                        Timestamp::from_micros(slot_start + offset),
                        Timestamp::from_micros(slot_start + offset + length),
                    )
                    .expect("forward interval"),
                    location: injection_location.clone(),
                    user_id: user.clone(),
                    qualitative_values: BTreeMap::new(),
                    quantitative_values: BTreeMap::new(),
                    capacity_demand: demand,
                }
            };

            let mut event_a = make(
                "a",
                &plan.service_a,
                user_a,
                plan.state_a,
                plan.demand_a,
                0,
                20 * MICROS_PER_MINUTE,
            );
            let mut event_b = make(
                "b",
                &plan.service_b,
                user_b,
                plan.state_b,
                plan.demand_b,
                5 * MICROS_PER_MINUTE,
                20 * MICROS_PER_MINUTE,
            );
            if let Some((attr, left, right)) = &plan.qualitative {
                event_a.qualitative_values.insert(attr.clone(), left.clone());
                event_b.qualitative_values.insert(attr.clone(), right.clone());
            }
            if let Some((attr, left, right)) = &plan.quantitative {
                event_a.quantitative_values.insert(attr.clone(), *left);
                event_b.quantitative_values.insert(attr.clone(), *right);
            }
            injected.push(InjectedConflict {
                conflict_type: *conflict_type,
                event_a: event_a.event_id.clone(),
                event_b: event_b.event_id.clone(),
            });
            events.push(event_a);
            events.push(event_b);
        }
    }

    let events = EventSequence::from_events(events);

    // ground truth over every candidate pair of the finished corpus
    let all_services: BTreeSet<ServiceId> = reg.service_ids();
    let pairs = selection::find_overlaps(&events, &all_services);
    let mut labels = GroundTruthLabels::new();
    for pair in &pairs {
        let types = label_pair(pair, &reg, spec.comfort_threshold);
        if types.is_empty() {
            labels.add(GroundTruthLabel {
                event_a: pair.first.event_id.clone(),
                event_b: pair.second.event_id.clone(),
                is_conflict: false,
                conflict_type: None,
            });
        } else {
            for t in types {
                labels.add(GroundTruthLabel {
                    event_a: pair.first.event_id.clone(),
                    event_b: pair.second.event_id.clone(),
                    is_conflict: true,
                    conflict_type: Some(t),
                });
            }
        }
    }

    debug_assert!(injected.iter().all(|inj| {
        labels
            .get(&inj.event_a, &inj.event_b)
            .is_some_and(|entry| entry.types.contains(&inj.conflict_type))
    }));

    Ok(SynthCorpus {
        events,
        labels,
        injected,
    })
}

/// Writes the corpus in the enriched format plus the labels file.
pub fn replay_to_enriched(
    corpus: &SynthCorpus,
    events_path: &Path,
    labels_path: &Path,
) -> Result<(), SynthError> {
    ingest::write_corpus(events_path, &corpus.events)?;
    corpus.labels.write_csv_path(labels_path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EffectDirection, QuantAttrSpec};

    fn descriptor(id: &str) -> ServiceDescriptor {
        ServiceDescriptor {
            service_id: ServiceId::from(id),
            name: id.to_string(),
            functions: Default::default(),
            capacity: Capacity::Unbounded,
            qualitative_attrs: Default::default(),
            quantitative_attrs: Default::default(),
            depends_on: Default::default(),
            env_effects: Default::default(),
        }
    }

    fn full_services() -> Vec<ServiceDescriptor> {
        let mut ac = descriptor("ac");
        ac.quantitative_attrs
            .insert("temperature".into(), QuantAttrSpec::default());
        ac.depends_on.insert(ServiceId::from("window"));
        ac.env_effects.insert("temperature".into(), EffectDirection::Lowers);
        let mut heater = descriptor("heater");
        heater
            .env_effects
            .insert("temperature".into(), EffectDirection::Raises);
        let mut tv = descriptor("tv");
        tv.qualitative_attrs
            .insert("channel".into(), ["news".to_string(), "sports".to_string()].into());
        let mut console = descriptor("console");
        console.capacity = Capacity::Bounded(1);
        vec![ac, heater, tv, console, descriptor("window")]
    }

    fn habit(service: &str, start_hour: f64, mean: f64) -> Habit {
        let mut quantitative = BTreeMap::new();
        if service == "ac" {
            quantitative.insert(
                "temperature".to_string(),
                ValueDistribution { mean, spread: 0.5 },
            );
        }
        Habit {
            service_id: ServiceId::from(service),
            location: Location::new("living room").unwrap(),
            start_hour,
            duration_minutes: 60.0,
            jitter_minutes: 10.0,
            sessions_per_day: 1,
            stride_minutes: None,
            quantitative,
            qualitative: BTreeMap::new(),
            demand: 1,
        }
    }

    fn spec(rates: &[(ConflictType, f64)]) -> ScenarioSpec {
        ScenarioSpec {
            seed: 7,
            days: 2,
            start_date: "2025-06-01".into(),
            comfort_threshold: 3.0,
            injection_location: "living room".into(),
            residents: vec![
                ResidentProfile {
                    user_id: UserId::from("r1"),
                    habits: vec![habit("ac", 9.0, 21.0)],
                },
                ResidentProfile {
                    user_id: UserId::from("r2"),
                    habits: vec![habit("ac", 14.0, 27.0)],
                },
            ],
            services: full_services(),
            injection_rates: rates.iter().cloned().collect(),
        }
    }

    #[test]
    fn functional_rate_one_per_day_injects_exactly_days() {
        let corpus = generate(&spec(&[(ConflictType::Functional, 1.0)])).unwrap();
        let functional: Vec<_> = corpus
            .injected
            .iter()
            .filter(|i| i.conflict_type == ConflictType::Functional)
            .collect();
        assert_eq!(functional.len(), 2);
        for inj in functional {
            let entry = corpus.labels.get(&inj.event_a, &inj.event_b).unwrap();
            assert!(entry.is_conflict);
            assert!(entry.types.contains(&ConflictType::Functional));
        }
    }

    #[test]
    fn zero_rates_yield_only_negative_or_comfort_labels() {
        let mut s = spec(&[]);
        // separate the residents' schedules so no background pair forms
        s.residents[1].habits[0].start_hour = 14.0;
        let corpus = generate(&s).unwrap();
        assert!(corpus.injected.is_empty());
        assert!(corpus.labels.iter().all(|(_, e)| !e.is_conflict));
    }

    #[test]
    fn seed_determinism_is_byte_exact() {
        let s = spec(&[(ConflictType::Functional, 1.0), (ConflictType::QuantitativeNonFunctional, 1.5)]);
        let (a, b) = (generate(&s).unwrap(), generate(&s).unwrap());
        assert_eq!(a.events, b.events);
        assert_eq!(a.injected, b.injected);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.labels.write_csv(&mut buf_a).unwrap();
        b.labels.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn capacity_injection_without_bounded_service_is_infeasible() {
        let mut s = spec(&[(ConflictType::ResourceCapacity, 1.0)]);
        s.services.retain(|d| d.service_id.as_str() != "console");
        assert!(matches!(
            generate(&s),
            Err(SynthError::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn injection_needs_two_residents() {
        let mut s = spec(&[(ConflictType::Functional, 1.0)]);
        s.residents.truncate(1);
        assert!(matches!(generate(&s), Err(SynthError::InfeasibleSpec(_))));
    }

    #[test]
    fn overlapping_backgrounds_are_comfort_labeled() {
        let mut s = spec(&[]);
        // same hour, far-apart preferences -> every cross-resident pair conflicts
        s.residents[1].habits[0].start_hour = 9.0;
        let corpus = generate(&s).unwrap();
        let positives = corpus.labels.positives();
        assert!(positives >= 1, "schedules at the same hour should overlap");
        for (_, entry) in corpus.labels.iter() {
            if entry.is_conflict {
                assert!(entry.types.contains(&ConflictType::QuantitativeNonFunctional));
            }
        }
    }

    #[test]
    fn replay_round_trips_through_the_enriched_format() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate(&spec(&[(ConflictType::Functional, 1.0)])).unwrap();
        let events_path = dir.path().join("corpus.csv");
        let labels_path = dir.path().join("labels.csv");
        replay_to_enriched(&corpus, &events_path, &labels_path).unwrap();

        let parsed = ingest::read_corpus(&events_path, None).unwrap();
        assert_eq!(parsed, corpus.events);
        let labels = GroundTruthLabels::read_csv_path(&labels_path).unwrap();
        assert_eq!(labels, corpus.labels);
    }
}

//! The conflict rule set: six evaluators over candidate pairs, the learned
//! per-resident preference ranges for numeric attributes, and the conflict
//! weight.
//!
//! Every evaluator is a pure function of the pair (plus registry context)
//! and is symmetric in the two events. Attribute comparisons walk attribute
//! names in lexicographic order and report the first difference.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    EventSequence, ServiceDescriptor, ServiceId, ServiceRegistry, TimeInterval, UserId,
};
use crate::selection::OverlapPair;

/// The six leaf conflict categories. Parent groupings (individual vs
/// multiple services, non-functional, service impact) are derivable and
/// never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictType {
    Functional,
    ResourceCapacity,
    QualitativeNonFunctional,
    QuantitativeNonFunctional,
    DirectServiceImpact,
    IndirectServiceImpact,
}

impl ConflictType {
    pub const ALL: [ConflictType; 6] = [
        ConflictType::Functional,
        ConflictType::ResourceCapacity,
        ConflictType::QualitativeNonFunctional,
        ConflictType::QuantitativeNonFunctional,
        ConflictType::DirectServiceImpact,
        ConflictType::IndirectServiceImpact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConflictType::Functional => "functional",
            ConflictType::ResourceCapacity => "resource_capacity",
            ConflictType::QualitativeNonFunctional => "qualitative_non_functional",
            ConflictType::QuantitativeNonFunctional => "quantitative_non_functional",
            ConflictType::DirectServiceImpact => "direct_service_impact",
            ConflictType::IndirectServiceImpact => "indirect_service_impact",
        }
    }
}

impl fmt::Display for ConflictType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConflictType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "functional" => Ok(ConflictType::Functional),
            "capacity" | "resource_capacity" => Ok(ConflictType::ResourceCapacity),
            "qualitative" | "qualitative_non_functional" => {
                Ok(ConflictType::QualitativeNonFunctional)
            }
            "quantitative" | "quantitative_non_functional" => {
                Ok(ConflictType::QuantitativeNonFunctional)
            }
            "direct" | "direct_impact" | "direct_service_impact" => {
                Ok(ConflictType::DirectServiceImpact)
            }
            "indirect" | "indirect_impact" | "indirect_service_impact" => {
                Ok(ConflictType::IndirectServiceImpact)
            }
            other => Err(format!(
                "unknown conflict type `{other}` (expected functional, capacity, qualitative, \
                 quantitative, direct_impact, or indirect_impact)"
            )),
        }
    }
}

/// A typed conflict found on one candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictRecord {
    pub conflict_type: ConflictType,
    pub pair: OverlapPair,
    /// Set only for qualitative/quantitative conflicts.
    pub attribute: Option<String>,
    /// Overlap duration divided by the longer event duration, in (0, 1].
    pub weight: f64,
    pub detail: String,
}

/// Learned preference interval for one (resident, service, attribute):
/// the open range (median - sigma, median + sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRange {
    pub user_id: UserId,
    pub service_id: ServiceId,
    pub attribute: String,
    pub median: f64,
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
    pub sample_count: usize,
}

impl PreferenceRange {
    pub fn new(
        user_id: UserId,
        service_id: ServiceId,
        attribute: String,
        median: f64,
        sigma: f64,
        sample_count: usize,
    ) -> Self {
        Self {
            low: median - sigma,
            high: median + sigma,
            user_id,
            service_id,
            attribute,
            median,
            sigma,
            sample_count,
        }
    }

    /// Open-interval membership: a value equal to either endpoint is
    /// outside the range.
    pub fn contains_open(&self, value: f64) -> bool {
        self.low < value && value < self.high
    }
}

/// Lookup table of learned preference ranges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<PreferenceRange>", into = "Vec<PreferenceRange>")]
pub struct PreferenceModel {
    ranges: BTreeMap<(UserId, ServiceId, String), PreferenceRange>,
}

impl PreferenceModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, range: PreferenceRange) {
        self.ranges.insert(
            (
                range.user_id.clone(),
                range.service_id.clone(),
                range.attribute.clone(),
            ),
            range,
        );
    }

    pub fn get(
        &self,
        user: &UserId,
        service: &ServiceId,
        attribute: &str,
    ) -> Option<&PreferenceRange> {
        self.ranges
            .get(&(user.clone(), service.clone(), attribute.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PreferenceRange> {
        self.ranges.values()
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

impl From<Vec<PreferenceRange>> for PreferenceModel {
    fn from(ranges: Vec<PreferenceRange>) -> Self {
        let mut model = Self::new();
        for r in ranges {
            model.insert(r);
        }
        model
    }
}

impl From<PreferenceModel> for Vec<PreferenceRange> {
    fn from(model: PreferenceModel) -> Self {
        model.ranges.into_values().collect()
    }
}

/// How numeric preference differences are judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantitativeMode {
    /// Strict inequality: any value difference is a conflict.
    Ontology,
    /// Learned ranges: a value outside the other resident's range is a
    /// conflict; residents without a learned range fall back to strict.
    Hybrid,
}

impl FromStr for QuantitativeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ontology" => Ok(QuantitativeMode::Ontology),
            "hybrid" => Ok(QuantitativeMode::Hybrid),
            other => Err(format!("mode must be ontology or hybrid, got `{other}`")),
        }
    }
}

/// How shared environment properties are judged for indirect impact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndirectStrictness {
    /// Any shared environment property name counts.
    Paper,
    /// The shared property must be pushed in opposing directions.
    Directional,
}

impl FromStr for IndirectStrictness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(IndirectStrictness::Paper),
            "directional" => Ok(IndirectStrictness::Directional),
            other => Err(format!(
                "strictness must be paper or directional, got `{other}`"
            )),
        }
    }
}

fn enabled() -> bool {
    true
}

fn default_mode() -> QuantitativeMode {
    QuantitativeMode::Hybrid
}

fn default_strictness() -> IndirectStrictness {
    IndirectStrictness::Directional
}

/// Enables/disables each rule and selects the evaluation modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesConfig {
    #[serde(default = "enabled")]
    pub functional: bool,
    #[serde(default = "enabled")]
    pub capacity: bool,
    #[serde(default = "enabled")]
    pub qualitative: bool,
    #[serde(default = "enabled")]
    pub quantitative: bool,
    #[serde(default = "enabled")]
    pub direct_impact: bool,
    #[serde(default = "enabled")]
    pub indirect_impact: bool,
    #[serde(default = "default_mode")]
    pub quantitative_mode: QuantitativeMode,
    #[serde(default = "default_strictness")]
    pub indirect_strictness: IndirectStrictness,
}

impl Default for RulesConfig {
    fn default() -> Self {
        Self {
            functional: true,
            capacity: true,
            qualitative: true,
            quantitative: true,
            direct_impact: true,
            indirect_impact: true,
            quantitative_mode: default_mode(),
            indirect_strictness: default_strictness(),
        }
    }
}

impl RulesConfig {
    /// The literal-formula configuration: strict numeric inequality and
    /// name-only environment matching.
    pub fn paper() -> Self {
        Self {
            quantitative_mode: QuantitativeMode::Ontology,
            indirect_strictness: IndirectStrictness::Paper,
            ..Self::default()
        }
    }

    pub fn any_enabled(&self) -> bool {
        self.functional
            || self.capacity
            || self.qualitative
            || self.quantitative
            || self.direct_impact
            || self.indirect_impact
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuleError {
    #[error("intervals do not overlap")]
    NonOverlapping,
}

/// Overlap duration divided by the longer of the two durations; in (0, 1].
pub fn conflict_weight(a: TimeInterval, b: TimeInterval) -> Result<f64, RuleError> {
    let overlap = a.intersection(&b).ok_or(RuleError::NonOverlapping)?;
    let longest = a.duration_micros().max(b.duration_micros());
    Ok(overlap.duration_micros() as f64 / longest as f64)
}

fn record(
    pair: &OverlapPair,
    conflict_type: ConflictType,
    attribute: Option<&str>,
    detail: String,
) -> ConflictRecord {
    let longest = pair
        .first
        .interval
        .duration_micros()
        .max(pair.second.interval.duration_micros());
    ConflictRecord {
        conflict_type,
        pair: pair.clone(),
        attribute: attribute.map(str::to_string),
        weight: pair.overlap.duration_micros() as f64 / longest as f64,
        detail,
    }
}

/// Opposite On/Off requests on the same service.
pub fn eval_functional(pair: &OverlapPair) -> Option<ConflictRecord> {
    if !pair.same_service() || pair.first.state == pair.second.state {
        return None;
    }
    Some(record(
        pair,
        ConflictType::Functional,
        None,
        format!(
            "`{}` requested {} by {} and {} by {}",
            pair.first.service_id,
            pair.first.state,
            pair.first.user_id,
            pair.second.state,
            pair.second.user_id
        ),
    ))
}

/// Combined demand strictly exceeding a bounded capacity on the same
/// service. Demands summing exactly to the capacity never conflict.
pub fn eval_capacity(pair: &OverlapPair, descriptor: &ServiceDescriptor) -> Option<ConflictRecord> {
    if !pair.same_service() {
        return None;
    }
    let limit = descriptor.capacity.limit()?;
    let demand = u64::from(pair.first.capacity_demand) + u64::from(pair.second.capacity_demand);
    if demand <= u64::from(limit) {
        return None;
    }
    Some(record(
        pair,
        ConflictType::ResourceCapacity,
        None,
        format!(
            "combined demand {} exceeds capacity {} of `{}`",
            demand, limit, pair.first.service_id
        ),
    ))
}

/// Differing nominal preference on an attribute present in both requests.
pub fn eval_qualitative(pair: &OverlapPair) -> Option<ConflictRecord> {
    if !pair.same_service() {
        return None;
    }
    for (name, left) in &pair.first.qualitative_values {
        if let Some(right) = pair.second.qualitative_values.get(name) {
            if left != right {
                return Some(record(
                    pair,
                    ConflictType::QualitativeNonFunctional,
                    Some(name),
                    format!("attribute `{name}`: `{left}` vs `{right}`"),
                ));
            }
        }
    }
    None
}

/// Differing numeric preference on an attribute present in both requests.
///
/// In hybrid mode each value is judged against the *other* resident's
/// learned range; a resident without a range falls back to the strict
/// value-inequality test for their side.
pub fn eval_quantitative(
    pair: &OverlapPair,
    model: &PreferenceModel,
    mode: QuantitativeMode,
) -> Option<ConflictRecord> {
    if !pair.same_service() {
        return None;
    }
    let service = &pair.first.service_id;
    for (name, left) in &pair.first.quantitative_values {
        let Some(right) = pair.second.quantitative_values.get(name) else {
            continue;
        };
        match mode {
            QuantitativeMode::Ontology => {
                if left != right {
                    return Some(record(
                        pair,
                        ConflictType::QuantitativeNonFunctional,
                        Some(name),
                        format!("attribute `{name}`: {left} vs {right}"),
                    ));
                }
            }
            QuantitativeMode::Hybrid => {
                let second_range = model.get(&pair.second.user_id, service, name);
                let first_range = model.get(&pair.first.user_id, service, name);
                let outside = |value: f64, other: f64, range: Option<&PreferenceRange>| match range
                {
                    Some(r) => !r.contains_open(value),
                    None => value != other,
                };
                let first_hits = outside(*left, *right, second_range);
                let second_hits = outside(*right, *left, first_range);
                if first_hits || second_hits {
                    let describe = |range: Option<&PreferenceRange>| match range {
                        Some(r) => format!("({:.4}, {:.4})", r.low, r.high),
                        None => "no learned range".to_string(),
                    };
                    return Some(record(
                        pair,
                        ConflictType::QuantitativeNonFunctional,
                        Some(name),
                        format!(
                            "attribute `{name}`: {} requested {left} against {} of {}, {} requested {right} against {} of {}",
                            pair.first.user_id,
                            describe(second_range),
                            pair.second.user_id,
                            pair.second.user_id,
                            describe(first_range),
                            pair.first.user_id,
                        ),
                    ));
                }
            }
        }
    }
    None
}

/// Two different services with a declared functional dependency, both on.
pub fn eval_direct_impact(pair: &OverlapPair, reg: &ServiceRegistry) -> Option<ConflictRecord> {
    if pair.same_service() || !pair.first.state.is_on() || !pair.second.state.is_on() {
        return None;
    }
    let left = reg.get(&pair.first.service_id)?;
    let right = reg.get(&pair.second.service_id)?;
    let linked = left.depends_on.contains(&right.service_id)
        || right.depends_on.contains(&left.service_id);
    if !linked {
        return None;
    }
    Some(record(
        pair,
        ConflictType::DirectServiceImpact,
        None,
        format!(
            "`{}` and `{}` are functionally dependent and both on",
            pair.first.service_id, pair.second.service_id
        ),
    ))
}

/// Two independent services, both on, pushing a shared environment
/// property. `Paper` strictness matches on the shared name alone;
/// `Directional` additionally requires opposing directions.
pub fn eval_indirect_impact(
    pair: &OverlapPair,
    reg: &ServiceRegistry,
    strictness: IndirectStrictness,
) -> Option<ConflictRecord> {
    if pair.same_service() || !pair.first.state.is_on() || !pair.second.state.is_on() {
        return None;
    }
    let left = reg.get(&pair.first.service_id)?;
    let right = reg.get(&pair.second.service_id)?;
    if left.depends_on.contains(&right.service_id) || right.depends_on.contains(&left.service_id) {
        return None;
    }
    for (property, left_dir) in &left.env_effects {
        let Some(right_dir) = right.env_effects.get(property) else {
            continue;
        };
        let hit = match strictness {
            IndirectStrictness::Paper => true,
            IndirectStrictness::Directional => left_dir.opposes(*right_dir),
        };
        if hit {
            return Some(record(
                pair,
                ConflictType::IndirectServiceImpact,
                None,
                format!(
                    "`{}` ({left_dir:?}) and `{}` ({right_dir:?}) both act on `{property}`",
                    pair.first.service_id, pair.second.service_id
                ),
            ));
        }
    }
    None
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn population_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    variance.sqrt()
}

/// Learns one preference range per (resident, service, attribute) seen in
/// the training events: median of the observed values plus/minus the
/// population standard deviation.
pub fn learn_ranges(training: &EventSequence) -> PreferenceModel {
    let mut samples: BTreeMap<(UserId, ServiceId, String), Vec<f64>> = BTreeMap::new();
    for ev in training.iter() {
        for (attr, value) in &ev.quantitative_values {
            samples
                .entry((ev.user_id.clone(), ev.service_id.clone(), attr.clone()))
                .or_default()
                .push(*value);
        }
    }

    let mut model = PreferenceModel::new();
    for ((user, service, attr), mut values) in samples {
        values.sort_by(f64::total_cmp);
        let median = median_of_sorted(&values);
        let sigma = population_sigma(&values);
        model.insert(PreferenceRange::new(
            user,
            service,
            attr,
            median,
            sigma,
            values.len(),
        ));
    }
    model
}

/// Splits a sequence into a training prefix and a detection window,
/// chronologically per resident: the first `floor(fraction * n)` events of
/// each resident train the preference model, the rest are analyzed.
pub fn chronological_split(seq: &EventSequence, fraction: f64) -> (EventSequence, EventSequence) {
    debug_assert!(fraction > 0.0 && fraction < 1.0);
    let mut per_user: BTreeMap<&UserId, Vec<&crate::model::ServiceEvent>> = BTreeMap::new();
    for ev in seq.iter() {
        per_user.entry(&ev.user_id).or_default().push(ev);
    }

    let mut train = Vec::new();
    let mut window = Vec::new();
    for events in per_user.into_values() {
        let cut = (fraction * events.len() as f64).floor() as usize;
        for (i, ev) in events.into_iter().enumerate() {
            if i < cut {
                train.push(ev.clone());
            } else {
                window.push(ev.clone());
            }
        }
    }
    (
        EventSequence::from_events(train),
        EventSequence::from_events(window),
    )
}

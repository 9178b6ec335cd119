//! Drives candidate pairs through the rule set, accumulates typed counts
//! and conflicting-service sets, and scores detections against
//! ground-truth labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EventId, EventSequence, ModelError, ServiceId, ServiceRegistry};
use crate::rules::{
    self, ConflictRecord, ConflictType, PreferenceModel, RulesConfig,
};
use crate::selection::{self, normalize_event_key, OverlapPair, UsageStats};

/// Ground-truth comfort threshold: numeric preferences further apart than
/// this are labeled conflicts.
pub const DEFAULT_COMFORT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("no rules enabled in configuration")]
    NoRulesEnabled,
    #[error("label references unknown event `{0}`")]
    UnknownPair(EventId),
    #[error("event `{0}` does not carry attribute `{1}`")]
    MissingAttribute(EventId, String),
    #[error("train fraction {0} must be inside (0, 1)")]
    BadTrainFraction(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O failure")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("labels line {line}: {reason}")]
    BadLabel { line: usize, reason: String },
}

/// All conflicts found in one run, with per-type counts and the service
/// pairs involved. Ordering is deterministic: (location, overlap start,
/// type, event ids).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub conflicts: Vec<ConflictRecord>,
    pub counts_by_type: BTreeMap<ConflictType, u64>,
    pub conflicting_services: BTreeMap<ConflictType, BTreeSet<(ServiceId, ServiceId)>>,
}

impl DetectionResult {
    pub fn total_conflicts(&self) -> usize {
        self.conflicts.len()
    }
}

/// Applies every enabled rule to every candidate pair. A pair matching
/// several rules yields one record per match.
pub fn detect(
    pairs: &[OverlapPair],
    config: &RulesConfig,
    model: &PreferenceModel,
    reg: &ServiceRegistry,
) -> Result<DetectionResult, DetectError> {
    if !config.any_enabled() {
        return Err(DetectError::NoRulesEnabled);
    }

    let mut conflicts: Vec<ConflictRecord> = Vec::new();
    for pair in pairs {
        if config.functional {
            conflicts.extend(rules::eval_functional(pair));
        }
        if config.capacity && pair.same_service() {
            if let Some(desc) = reg.get(&pair.first.service_id) {
                conflicts.extend(rules::eval_capacity(pair, desc));
            }
        }
        if config.qualitative {
            conflicts.extend(rules::eval_qualitative(pair));
        }
        if config.quantitative {
            conflicts.extend(rules::eval_quantitative(pair, model, config.quantitative_mode));
        }
        if config.direct_impact {
            conflicts.extend(rules::eval_direct_impact(pair, reg));
        }
        if config.indirect_impact {
            conflicts.extend(rules::eval_indirect_impact(pair, reg, config.indirect_strictness));
        }
    }

    conflicts.sort_by(|a, b| {
        (
            &a.pair.first.location,
            a.pair.overlap.start(),
            a.conflict_type,
            &a.pair.first.event_id,
            &a.pair.second.event_id,
        )
            .cmp(&(
                &b.pair.first.location,
                b.pair.overlap.start(),
                b.conflict_type,
                &b.pair.first.event_id,
                &b.pair.second.event_id,
            ))
    });

    let mut counts_by_type: BTreeMap<ConflictType, u64> =
        ConflictType::ALL.iter().map(|t| (*t, 0)).collect();
    let mut conflicting_services: BTreeMap<ConflictType, BTreeSet<(ServiceId, ServiceId)>> =
        ConflictType::ALL.iter().map(|t| (*t, BTreeSet::new())).collect();
    for record in &conflicts {
        *counts_by_type.get_mut(&record.conflict_type).expect("all types present") += 1;
        conflicting_services
            .get_mut(&record.conflict_type)
            .expect("all types present")
            .insert(record.pair.service_key());
    }

    Ok(DetectionResult {
        conflicts,
        counts_by_type,
        conflicting_services,
    })
}

/// One labeled pair of events.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLabel {
    pub event_a: EventId,
    pub event_b: EventId,
    pub is_conflict: bool,
    pub conflict_type: Option<ConflictType>,
}

/// Per-pair verdict after merging labels that share a pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelEntry {
    pub is_conflict: bool,
    pub types: BTreeSet<ConflictType>,
}

/// Labels keyed by the order-normalized event-id pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthLabels {
    entries: BTreeMap<(EventId, EventId), LabelEntry>,
}

impl GroundTruthLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, label: GroundTruthLabel) {
        let key = normalize_event_key(&label.event_a, &label.event_b);
        let entry = self.entries.entry(key).or_default();
        entry.is_conflict |= label.is_conflict;
        if label.is_conflict {
            if let Some(t) = label.conflict_type {
                entry.types.insert(t);
            }
        }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = GroundTruthLabel>) -> Self {
        let mut set = Self::new();
        for label in labels {
            set.add(label);
        }
        set
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(EventId, EventId), &LabelEntry)> {
        self.entries.iter()
    }

    pub fn get(&self, a: &EventId, b: &EventId) -> Option<&LabelEntry> {
        self.entries.get(&normalize_event_key(a, b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.entries.values().filter(|e| e.is_conflict).count()
    }

    /// Writes `event_id_1,event_id_2,is_conflict[,type]` rows; conflicts
    /// with several types get one row per type.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), DetectError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["event_id_1", "event_id_2", "is_conflict", "type"])?;
        for ((a, b), entry) in &self.entries {
            if entry.is_conflict && !entry.types.is_empty() {
                for t in &entry.types {
                    out.write_record([a.as_str(), b.as_str(), "true", t.name()])?;
                }
            } else {
                out.write_record([
                    a.as_str(),
                    b.as_str(),
                    if entry.is_conflict { "true" } else { "false" },
                    "",
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self, DetectError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut labels = Self::new();
        for (idx, row) in rdr.records().enumerate() {
            let line = idx + 1;
            let row = row?;
            if row.len() < 3 {
                return Err(DetectError::BadLabel {
                    line,
                    reason: format!("expected at least 3 fields, got {}", row.len()),
                });
            }
            if line == 1 && row.get(0) == Some("event_id_1") {
                continue;
            }
            let is_conflict = match row.get(2).unwrap_or("").trim() {
                "true" | "1" => true,
                "false" | "0" => false,
                other => {
                    return Err(DetectError::BadLabel {
                        line,
                        reason: format!("is_conflict must be true/false, got `{other}`"),
                    })
                }
            };
            let conflict_type = match row.get(3).map(str::trim) {
                None | Some("") => None,
                Some(t) => Some(t.parse::<ConflictType>().map_err(|reason| {
                    DetectError::BadLabel { line, reason }
                })?),
            };
            labels.add(GroundTruthLabel {
                event_a: EventId::from(row.get(0).unwrap_or("")),
                event_b: EventId::from(row.get(1).unwrap_or("")),
                is_conflict,
                conflict_type,
            });
        }
        Ok(labels)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self, DetectError> {
        Self::read_csv(fs::File::open(path)?)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), DetectError> {
        self.write_csv(fs::File::create(path)?)
    }
}

/// The candidate universe a label set is scored against: the pair keys plus
/// every known event id.
#[derive(Debug, Clone, Default)]
pub struct PairUniverse {
    pair_keys: BTreeSet<(EventId, EventId)>,
    event_ids: BTreeSet<EventId>,
}

impl PairUniverse {
    pub fn new(seq: &EventSequence, pairs: &[OverlapPair]) -> Self {
        Self {
            pair_keys: pairs.iter().map(|p| p.event_key()).collect(),
            event_ids: seq.iter().map(|e| e.event_id.clone()).collect(),
        }
    }

    pub fn contains_pair(&self, a: &EventId, b: &EventId) -> bool {
        self.pair_keys.contains(&normalize_event_key(a, b))
    }

    pub fn len(&self) -> usize {
        self.pair_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_keys.is_empty()
    }
}

/// Confusion matrix and derived metrics over labeled pairs. Degenerate
/// denominators yield 0 rather than an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Labels whose pair fell outside the candidate universe (for example
    /// pairs confined to the training window).
    pub labels_skipped: u64,
}

impl EvaluationReport {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64, skipped: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let accuracy = ratio(tp + tn, tp + fp + tn + fn_);
        Self {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            precision,
            recall,
            f1,
            accuracy,
            labels_skipped: skipped,
        }
    }
}

/// Scores a detection result against labels over the candidate universe.
///
/// With a `scope`, only detections of that type count as predictions, and a
/// label is positive only if untyped or carrying that type. Labels whose
/// events are unknown error out; labels whose pair is absent from the
/// universe are skipped and counted.
pub fn evaluate(
    result: &DetectionResult,
    universe: &PairUniverse,
    labels: &GroundTruthLabels,
    scope: Option<ConflictType>,
) -> Result<EvaluationReport, DetectError> {
    let mut predicted: BTreeMap<(EventId, EventId), BTreeSet<ConflictType>> = BTreeMap::new();
    for record in &result.conflicts {
        predicted
            .entry(record.pair.event_key())
            .or_default()
            .insert(record.conflict_type);
    }

    let (mut tp, mut fp, mut tn, mut fn_, mut skipped) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for ((a, b), entry) in labels.iter() {
        if !universe.pair_keys.contains(&(a.clone(), b.clone())) {
            for id in [a, b] {
                if !universe.event_ids.contains(id) {
                    return Err(DetectError::UnknownPair(id.clone()));
                }
            }
            skipped += 1;
            continue;
        }
        let actual = entry.is_conflict
            && scope.is_none_or(|t| entry.types.is_empty() || entry.types.contains(&t));
        let guess = predicted
            .get(&(a.clone(), b.clone()))
            .is_some_and(|types| match scope {
                Some(t) => types.contains(&t),
                None => !types.is_empty(),
            });
        match (guess, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(EvaluationReport::from_counts(tp, fp, tn, fn_, skipped))
}

/// Labels pairs by the comfort rule: conflict when the two requested values
/// of `attribute` differ by strictly more than `threshold`.
pub fn label_by_comfort_rule(
    pairs: &[OverlapPair],
    threshold: f64,
    attribute: &str,
) -> Result<GroundTruthLabels, DetectError> {
    let mut labels = GroundTruthLabels::new();
    for pair in pairs {
        let value_of = |ev: &crate::model::ServiceEvent| {
            ev.quantitative_values.get(attribute).copied().ok_or_else(|| {
                DetectError::MissingAttribute(ev.event_id.clone(), attribute.to_string())
            })
        };
        let v1 = value_of(&pair.first)?;
        let v2 = value_of(&pair.second)?;
        let is_conflict = (v1 - v2).abs() > threshold;
        labels.add(GroundTruthLabel {
            event_a: pair.first.event_id.clone(),
            event_b: pair.second.event_id.clone(),
            is_conflict,
            conflict_type: is_conflict.then_some(ConflictType::QuantitativeNonFunctional),
        });
    }
    Ok(labels)
}

/// Options for a full detection run.
#[derive(Debug, Clone)]
pub struct DetectRunOptions {
    /// Keep only the top-k services by usage; `None` evaluates every
    /// service (the exhaustive route).
    pub k: Option<usize>,
    pub rules: RulesConfig,
    pub train_fraction: f64,
    /// Candidate pairs overlapping for less than this are dropped; zero
    /// keeps every positive-duration overlap.
    pub min_overlap: std::time::Duration,
}

impl Default for DetectRunOptions {
    fn default() -> Self {
        Self {
            k: Some(selection::DEFAULT_TOP_K),
            rules: RulesConfig::default(),
            train_fraction: 0.8,
            min_overlap: std::time::Duration::ZERO,
        }
    }
}

/// Everything produced by a full run, kept for inspection and evaluation.
#[derive(Debug, Clone)]
pub struct DetectRun {
    /// The validated input sequence.
    pub events: EventSequence,
    pub train: EventSequence,
    pub window: EventSequence,
    pub ranked: Vec<(ServiceId, UsageStats)>,
    pub selected: BTreeSet<ServiceId>,
    pub pairs: Vec<OverlapPair>,
    pub model: PreferenceModel,
    pub result: DetectionResult,
}

/// The full pipeline: validate, split chronologically per resident, learn
/// preference ranges on the training prefix, rank/select services on the
/// detection window, generate candidate pairs, and run the rules.
pub fn run_detection(
    seq: &EventSequence,
    reg: &ServiceRegistry,
    opts: &DetectRunOptions,
) -> Result<DetectRun, DetectError> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(DetectError::BadTrainFraction(opts.train_fraction));
    }
    for ev in seq.iter() {
        crate::model::validate_event(ev, reg)?;
    }

    let (train, window) = rules::chronological_split(seq, opts.train_fraction);
    let model = rules::learn_ranges(&train);
    let ranked = selection::rank_services(&window);
    let selected = match opts.k {
        Some(k) => selection::select_top_k(&ranked, k),
        None => selection::select_top_k(&ranked, ranked.len()),
    };
    let mut pairs = selection::find_overlaps(&window, &selected);
    if !opts.min_overlap.is_zero() {
        pairs.retain(|p| p.overlap.duration() >= opts.min_overlap);
    }
    let result = detect(&pairs, &opts.rules, &model, reg)?;
    Ok(DetectRun {
        events: seq.clone(),
        train,
        window,
        ranked,
        selected,
        pairs,
        model,
        result,
    })
}

#[derive(Serialize)]
struct ConflictRow<'a> {
    #[serde(rename = "type")]
    conflict_type: &'a str,
    service_ids: [&'a str; 2],
    event_ids: [&'a str; 2],
    user_ids: [&'a str; 2],
    location: &'a str,
    overlap_start: String,
    overlap_end: String,
    weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    attribute: Option<&'a str>,
    detail: &'a str,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    total_conflicts: usize,
    counts_by_type: &'a BTreeMap<ConflictType, u64>,
}

/// Serializes a result as JSON lines: one record per conflict, then a
/// summary record with the per-type counts.
pub fn write_detection_jsonl(
    result: &DetectionResult,
    mut writer: impl Write,
) -> Result<(), DetectError> {
    for record in &result.conflicts {
        let row = ConflictRow {
            conflict_type: record.conflict_type.name(),
            service_ids: [
                record.pair.first.service_id.as_str(),
                record.pair.second.service_id.as_str(),
            ],
            event_ids: [
                record.pair.first.event_id.as_str(),
                record.pair.second.event_id.as_str(),
            ],
            user_ids: [
                record.pair.first.user_id.as_str(),
                record.pair.second.user_id.as_str(),
            ],
            location: record.pair.first.location.as_str(),
            overlap_start: record.pair.overlap.start().to_string(),
            overlap_end: record.pair.overlap.end().to_string(),
            weight: record.weight,
            attribute: record.attribute.as_deref(),
            detail: &record.detail,
        };
        writeln!(writer, "{}", serde_json::to_string(&row).expect("row serializes"))?;
    }
    let summary = SummaryRow {
        total_conflicts: result.conflicts.len(),
        counts_by_type: &result.counts_by_type,
    };
    writeln!(
        writer,
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    )?;
    Ok(())
}

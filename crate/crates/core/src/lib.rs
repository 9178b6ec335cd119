//! Conflict detection for multi-resident smart-home service event logs.
//!
//! The crate ingests raw ON/OFF sensor traces or enriched event corpora,
//! finds cross-resident temporally overlapping service usages, classifies
//! them against a six-type conflict rule set (optionally substituting a
//! learned per-resident preference range for the strict numeric-equality
//! rule), and emits weighted, typed conflict reports plus evaluation
//! metrics against ground-truth labels.

pub mod cli;
pub mod detector;
pub mod ingest;
pub mod model;
pub mod rules;
pub mod selection;
pub mod synth;

pub use detector::{detect, evaluate, DetectionResult, EvaluationReport};
pub use model::{EventSequence, ServiceEvent, ServiceRegistry, TimeInterval, Timestamp};
pub use rules::{ConflictRecord, ConflictType, PreferenceModel, RulesConfig};
pub use selection::{find_overlaps, AllenRelation, OverlapPair};

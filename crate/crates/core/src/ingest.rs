//! Log ingestion: raw ON/OFF sensor traces, the service registry / sensor
//! map file, and the enriched event corpus formats (CSV and JSON lines).
//!
//! Raw traces are whitespace-separated `DATE TIME SENSOR STATUS` lines.
//! "ON" opens a usage interval for the sensor's service and "OFF" closes
//! it. Numeric statuses are readings: they are folded into the enclosing
//! open interval of the same sensor (averaged) when the sensor declares a
//! reading attribute, otherwise discarded and counted. Nothing vanishes
//! silently; the report reconciles every input line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    EventId, EventSequence, Location, ModelError, ServiceEvent, ServiceId, ServiceRegistry,
    ServiceState, TimeInterval, Timestamp, UserId,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: sensor `{sensor}` is not mapped to a service")]
    UnmappedSensor { line: usize, sensor: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O failure")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One raw sensor log record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSensorRecord {
    pub timestamp: Timestamp,
    pub sensor: String,
    pub status: String,
}

/// A line that was dropped during ingestion, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedLine {
    pub line: usize,
    pub reason: String,
}

/// Accounting for one ingestion run. `events_emitted` equals the number of
/// well-formed ON records: every ON opens exactly one event, closed by the
/// next OFF, by a repeated ON, or at the end of the log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub events_emitted: u64,
    pub unmatched_on: u64,
    pub unmatched_off: u64,
    pub readings_folded: u64,
    pub discarded: Vec<DiscardedLine>,
}

impl IngestReport {
    pub fn absorb(&mut self, other: IngestReport) {
        self.events_emitted += other.events_emitted;
        self.unmatched_on += other.unmatched_on;
        self.unmatched_off += other.unmatched_off;
        self.readings_folded += other.readings_folded;
        self.discarded.extend(other.discarded);
        self.discarded.sort_by_key(|d| d.line);
    }
}

/// Binds one sensor id to the service it instruments, the room it sits in,
/// and optionally the quantitative attribute its numeric readings feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorBinding {
    pub service_id: ServiceId,
    pub location: Location,
    #[serde(default)]
    pub reading_attr: Option<String>,
}

/// On-disk registry: service descriptors plus the sensor map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistryFile {
    pub services: Vec<crate::model::ServiceDescriptor>,
    #[serde(default)]
    pub sensors: BTreeMap<String, SensorBinding>,
}

/// Loads and validates a registry file (JSON).
pub fn load_registry_file(
    path: &Path,
) -> Result<(ServiceRegistry, BTreeMap<String, SensorBinding>), IngestError> {
    let bytes = fs::read(path)?;
    let file: RegistryFile = serde_json::from_slice(&bytes).map_err(|e| {
        IngestError::MalformedLine {
            line: e.line(),
            reason: format!("registry: {e}"),
        }
    })?;
    let registry = ServiceRegistry::from_descriptors(file.services)?;
    Ok((registry, file.sensors))
}

/// Loads a standalone sensor-map file: either a bare `{sensor: binding}`
/// object or one wrapped in a `sensors` key.
pub fn load_sensor_map(path: &Path) -> Result<BTreeMap<String, SensorBinding>, IngestError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum SensorMapFile {
        Wrapped {
            sensors: BTreeMap<String, SensorBinding>,
        },
        Bare(BTreeMap<String, SensorBinding>),
    }
    let bytes = fs::read(path)?;
    let file: SensorMapFile =
        serde_json::from_slice(&bytes).map_err(|e| IngestError::MalformedLine {
            line: e.line(),
            reason: format!("sensor map: {e}"),
        })?;
    Ok(match file {
        SensorMapFile::Wrapped { sensors } | SensorMapFile::Bare(sensors) => sensors,
    })
}

/// Parses one `DATE TIME SENSOR STATUS` line.
pub fn parse_casas_line(line_no: usize, line: &str) -> Result<RawSensorRecord, IngestError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(IngestError::MalformedLine {
            line: line_no,
            reason: format!("expected 4 whitespace-separated fields, got {}", fields.len()),
        });
    }
    let timestamp = Timestamp::parse(&format!("{} {}", fields[0], fields[1])).map_err(|_| {
        IngestError::MalformedLine {
            line: line_no,
            reason: format!("cannot parse timestamp `{} {}`", fields[0], fields[1]),
        }
    })?;
    Ok(RawSensorRecord {
        timestamp,
        sensor: fields[2].to_string(),
        status: fields[3].to_string(),
    })
}

/// A parsed raw log: well-formed records (with their 1-based line numbers)
/// and the lines that failed to parse.
#[derive(Debug, Default)]
pub struct CasasLog {
    pub records: Vec<(usize, RawSensorRecord)>,
    pub malformed: Vec<DiscardedLine>,
}

/// Reads a raw log, keeping line numbers. Blank lines are skipped.
pub fn parse_casas_reader(reader: impl BufRead) -> Result<CasasLog, IngestError> {
    let mut log = CasasLog::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_casas_line(line_no, &line) {
            Ok(record) => log.records.push((line_no, record)),
            Err(IngestError::MalformedLine { line, reason }) => {
                log.malformed.push(DiscardedLine { line, reason });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(log)
}

struct Pending {
    start: Timestamp,
    samples: Vec<f64>,
}

/// Pairs ON/OFF records into usage events for one resident.
///
/// A repeated ON closes the open interval at the new timestamp and opens a
/// fresh one; an open interval at end-of-log is closed at the last
/// timestamp and counted as `unmatched_on`; an OFF with nothing open is
/// discarded and counted.
pub fn pair_on_off(
    records: &[(usize, RawSensorRecord)],
    sensors: &BTreeMap<String, SensorBinding>,
    user: &UserId,
    id_prefix: &str,
) -> Result<(Vec<ServiceEvent>, IngestReport), IngestError> {
    let mut ordered: Vec<&(usize, RawSensorRecord)> = records.iter().collect();
    ordered.sort_by_key(|(line, rec)| (rec.timestamp, *line));

    let mut report = IngestReport::default();
    let mut pending: BTreeMap<&str, Pending> = BTreeMap::new();
    let mut events: Vec<ServiceEvent> = Vec::new();
    let mut counter = 0usize;
    let last_ts = ordered.last().map(|(_, r)| r.timestamp);

    let close = |sensor: &str,
                     open: Pending,
                     end: Timestamp,
                     counter: &mut usize,
                     events: &mut Vec<ServiceEvent>|
     -> Result<(), IngestError> {
        let binding = &sensors[sensor];
        let mut quantitative_values = BTreeMap::new();
        if let (Some(attr), false) = (&binding.reading_attr, open.samples.is_empty()) {
            let mean = open.samples.iter().sum::<f64>() / open.samples.len() as f64;
            quantitative_values.insert(attr.clone(), mean);
        }
        *counter += 1;
        events.push(ServiceEvent {
            event_id: EventId::new(format!("{id_prefix}-{counter:06}")),
            service_id: binding.service_id.clone(),
            state: ServiceState::On,
            interval: TimeInterval::new(open.start, end)?,
            location: binding.location.clone(),
            user_id: user.clone(),
            qualitative_values: BTreeMap::new(),
            quantitative_values,
            capacity_demand: 1,
        });
        Ok(())
    };

    for (line, rec) in &ordered {
        let binding = sensors.get(&rec.sensor).ok_or_else(|| IngestError::UnmappedSensor {
            line: *line,
            sensor: rec.sensor.clone(),
        })?;
        match rec.status.as_str() {
            "ON" => {
                if let Some(open) = pending.remove(rec.sensor.as_str()) {
                    close(&rec.sensor, open, rec.timestamp, &mut counter, &mut events)?;
                }
                pending.insert(
                    &rec.sensor,
                    Pending {
                        start: rec.timestamp,
                        samples: Vec::new(),
                    },
                );
            }
            "OFF" => {
                if let Some(open) = pending.remove(rec.sensor.as_str()) {
                    close(&rec.sensor, open, rec.timestamp, &mut counter, &mut events)?;
                } else {
                    report.unmatched_off += 1;
                    report.discarded.push(DiscardedLine {
                        line: *line,
                        reason: format!("OFF for `{}` without a matching ON", rec.sensor),
                    });
                }
            }
            status => match status.parse::<f64>() {
                Ok(value) if value.is_finite() => {
                    if binding.reading_attr.is_none() {
                        report.discarded.push(DiscardedLine {
                            line: *line,
                            reason: format!("no reading attribute declared for `{}`", rec.sensor),
                        });
                    } else if let Some(open) = pending.get_mut(rec.sensor.as_str()) {
                        open.samples.push(value);
                        report.readings_folded += 1;
                    } else {
                        report.discarded.push(DiscardedLine {
                            line: *line,
                            reason: format!("reading for `{}` outside any interval", rec.sensor),
                        });
                    }
                }
                _ => {
                    report.discarded.push(DiscardedLine {
                        line: *line,
                        reason: format!("unrecognized status `{status}`"),
                    });
                }
            },
        }
    }

    if let Some(end) = last_ts {
        let open_sensors: Vec<String> = pending.keys().map(|s| s.to_string()).collect();
        for sensor in open_sensors {
            let open = pending.remove(sensor.as_str()).expect("pending entry");
            close(&sensor, open, end, &mut counter, &mut events)?;
            report.unmatched_on += 1;
        }
    }

    report.events_emitted = events.len() as u64;
    report.discarded.sort_by_key(|d| d.line);
    Ok((events, report))
}

/// Reads, parses, and pairs one raw log file for one resident. Malformed
/// lines are folded into the report.
pub fn ingest_casas_file(
    path: &Path,
    sensors: &BTreeMap<String, SensorBinding>,
    user: &UserId,
    id_prefix: &str,
) -> Result<(Vec<ServiceEvent>, IngestReport), IngestError> {
    let log = parse_casas_reader(BufReader::new(fs::File::open(path)?))?;
    let (events, mut report) = pair_on_off(&log.records, sensors, user, id_prefix)?;
    report.discarded.extend(log.malformed);
    report.discarded.sort_by_key(|d| d.line);
    Ok((events, report))
}

const FIXED_COLUMNS: [&str; 8] = [
    "event_id",
    "service_id",
    "location",
    "user_id",
    "start",
    "end",
    "state",
    "demand",
];

/// Writes the enriched CSV form: fixed columns, then `q:`-prefixed
/// quantitative and `n:`-prefixed nominal attribute columns (each sorted).
pub fn write_enriched_csv(seq: &EventSequence, writer: impl Write) -> Result<(), IngestError> {
    let mut quant: Vec<String> = Vec::new();
    let mut qual: Vec<String> = Vec::new();
    for ev in seq.iter() {
        for name in ev.quantitative_values.keys() {
            if !quant.contains(name) {
                quant.push(name.clone());
            }
        }
        for name in ev.qualitative_values.keys() {
            if !qual.contains(name) {
                qual.push(name.clone());
            }
        }
    }
    quant.sort();
    qual.sort();

    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(quant.iter().map(|n| format!("q:{n}")));
    header.extend(qual.iter().map(|n| format!("n:{n}")));
    out.write_record(&header)?;

    for ev in seq.iter() {
        let mut row: Vec<String> = vec![
            ev.event_id.to_string(),
            ev.service_id.to_string(),
            ev.location.to_string(),
            ev.user_id.to_string(),
            ev.interval.start().to_string(),
            ev.interval.end().to_string(),
            ev.state.to_string(),
            ev.capacity_demand.to_string(),
        ];
        for name in &quant {
            // Debug formatting round-trips f64 exactly; Display may not
            row.push(
                ev.quantitative_values
                    .get(name)
                    .map(|v| format!("{v:?}"))
                    .unwrap_or_default(),
            );
        }
        for name in &qual {
            row.push(ev.qualitative_values.get(name).cloned().unwrap_or_default());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

enum Column {
    Fixed(usize),
    Quant(String),
    Qual(String),
}

/// Parses the enriched CSV form. `event_id` and `demand` columns are
/// optional (row number and 1 are substituted). When a registry is given,
/// every event is validated against it.
pub fn parse_enriched_csv(
    reader: impl Read,
    registry: Option<&ServiceRegistry>,
) -> Result<EventSequence, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let mut columns: Vec<Column> = Vec::new();
    let mut fixed_seen = [false; FIXED_COLUMNS.len()];
    for name in headers.iter() {
        if let Some(pos) = FIXED_COLUMNS.iter().position(|f| *f == name) {
            fixed_seen[pos] = true;
            columns.push(Column::Fixed(pos));
        } else if let Some(attr) = name.strip_prefix("q:") {
            columns.push(Column::Quant(attr.to_string()));
        } else if let Some(attr) = name.strip_prefix("n:") {
            columns.push(Column::Qual(attr.to_string()));
        } else {
            return Err(IngestError::MalformedLine {
                line: 1,
                reason: format!("unknown column `{name}` (attributes need a q: or n: prefix)"),
            });
        }
    }
    for (pos, name) in FIXED_COLUMNS.iter().enumerate() {
        // event_id and demand may be omitted
        if !fixed_seen[pos] && *name != "event_id" && *name != "demand" {
            return Err(IngestError::MalformedLine {
                line: 1,
                reason: format!("missing required column `{name}`"),
            });
        }
    }

    let mut events = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row?;
        let malformed = |reason: String| IngestError::MalformedLine { line, reason };

        let mut fixed: [Option<&str>; FIXED_COLUMNS.len()] = Default::default();
        let mut quantitative_values = BTreeMap::new();
        let mut qualitative_values = BTreeMap::new();
        for (col, cell) in columns.iter().zip(row.iter()) {
            match col {
                Column::Fixed(pos) => fixed[*pos] = Some(cell),
                Column::Quant(attr) => {
                    if !cell.is_empty() {
                        let value: f64 = cell
                            .parse()
                            .map_err(|_| malformed(format!("bad number `{cell}` for q:{attr}")))?;
                        if !value.is_finite() {
                            return Err(malformed(format!("non-finite value for q:{attr}")));
                        }
                        quantitative_values.insert(attr.clone(), value);
                    }
                }
                Column::Qual(attr) => {
                    if !cell.is_empty() {
                        qualitative_values.insert(attr.clone(), cell.to_string());
                    }
                }
            }
        }

        let get = |pos: usize| fixed[pos].filter(|c| !c.is_empty());
        let required = |pos: usize| {
            get(pos).ok_or_else(|| IngestError::MalformedLine {
                line,
                reason: format!("missing `{}`", FIXED_COLUMNS[pos]),
            })
        };

        let event_id = get(0)
            .map(EventId::from)
            .unwrap_or_else(|| EventId::new(format!("row-{line:06}")));
        let service_id = ServiceId::from(required(1)?);
        let location = Location::new(required(2)?)?;
        let user_id = UserId::from(required(3)?);
        let start = Timestamp::parse(required(4)?)
            .map_err(|e| malformed(format!("bad start: {e}")))?;
        let end = Timestamp::parse(required(5)?).map_err(|e| malformed(format!("bad end: {e}")))?;
        let state: ServiceState = required(6)?.parse().map_err(malformed)?;
        let capacity_demand: u32 = match get(7) {
            Some(cell) => cell
                .parse()
                .ok()
                .filter(|d| *d >= 1)
                .ok_or_else(|| malformed(format!("demand must be a positive integer, got `{cell}`")))?,
            None => 1,
        };

        events.push(ServiceEvent {
            event_id,
            service_id,
            state,
            interval: TimeInterval::new(start, end)?,
            location,
            user_id,
            qualitative_values,
            quantitative_values,
            capacity_demand,
        });
    }

    let seq = EventSequence::from_events(events);
    if let Some(reg) = registry {
        for ev in seq.iter() {
            crate::model::validate_event(ev, reg)?;
        }
    }
    Ok(seq)
}

/// Writes the JSON-lines form: one event object per line.
pub fn write_enriched_jsonl(seq: &EventSequence, mut writer: impl Write) -> Result<(), IngestError> {
    for ev in seq.iter() {
        let json = serde_json::to_string(ev).expect("event serializes");
        writeln!(writer, "{json}")?;
    }
    Ok(())
}

/// Parses the JSON-lines form.
pub fn parse_enriched_jsonl(
    reader: impl Read,
    registry: Option<&ServiceRegistry>,
) -> Result<EventSequence, IngestError> {
    let buffered = BufReader::new(reader);
    let mut events = Vec::new();
    for (idx, line) in buffered.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: ServiceEvent =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        events.push(ev);
    }
    let seq = EventSequence::from_events(events);
    if let Some(reg) = registry {
        for ev in seq.iter() {
            crate::model::validate_event(ev, reg)?;
        }
    }
    Ok(seq)
}

fn is_jsonl(path: &Path, bytes: &[u8]) -> bool {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => true,
        Some("csv") => false,
        _ => bytes
            .iter()
            .find(|b| !b.is_ascii_whitespace())
            .is_some_and(|b| *b == b'{'),
    }
}

/// Reads an enriched corpus, picking the format from the extension (or the
/// first byte when the extension is ambiguous).
pub fn read_corpus(
    path: &Path,
    registry: Option<&ServiceRegistry>,
) -> Result<EventSequence, IngestError> {
    let bytes = fs::read(path)?;
    if is_jsonl(path, &bytes) {
        parse_enriched_jsonl(bytes.as_slice(), registry)
    } else {
        parse_enriched_csv(bytes.as_slice(), registry)
    }
}

/// Writes an enriched corpus; `.jsonl`/`.ndjson` extensions select the
/// JSON-lines form, anything else the CSV form.
pub fn write_corpus(path: &Path, seq: &EventSequence) -> Result<(), IngestError> {
    let file = fs::File::create(path)?;
    if matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    ) {
        write_enriched_jsonl(seq, file)
    } else {
        write_enriched_csv(seq, file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bindings() -> BTreeMap<String, SensorBinding> {
        let mut map = BTreeMap::new();
        map.insert(
            "L001".to_string(),
            SensorBinding {
                service_id: ServiceId::from("light_1"),
                location: Location::new("living room").unwrap(),
                reading_attr: Some("illuminance".to_string()),
            },
        );
        map.insert(
            "M007".to_string(),
            SensorBinding {
                service_id: ServiceId::from("motion_1"),
                location: Location::new("hallway").unwrap(),
                reading_attr: None,
            },
        );
        map
    }

    fn records(lines: &[&str]) -> Vec<(usize, RawSensorRecord)> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i + 1, parse_casas_line(i + 1, l).unwrap()))
            .collect()
    }

    #[test]
    fn casas_line_parses_fields() {
        let rec = parse_casas_line(1, "2011-06-15 13:00:00.000000 L001 ON").unwrap();
        assert_eq!(rec.sensor, "L001");
        assert_eq!(rec.status, "ON");
        assert_eq!(rec.timestamp, Timestamp::parse("2011-06-15 13:00:00").unwrap());

        let bare = parse_casas_line(2, "2011-06-15 13:00:00 M007 OFF").unwrap();
        assert_eq!(bare.sensor, "M007");

        assert!(matches!(
            parse_casas_line(3, "2011-06-15"),
            Err(IngestError::MalformedLine { line: 3, .. })
        ));
    }

    #[test]
    fn on_off_pairing_produces_one_event() {
        let recs = records(&[
            "2011-06-15 13:00:00 L001 ON",
            "2011-06-15 15:00:00 L001 OFF",
        ]);
        let (events, report) =
            pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.events_emitted, 1);
        assert_eq!(events[0].interval.start(), Timestamp::parse("2011-06-15 13:00:00").unwrap());
        assert_eq!(events[0].interval.end(), Timestamp::parse("2011-06-15 15:00:00").unwrap());
        assert_eq!(events[0].state, ServiceState::On);
        assert_eq!(events[0].location.as_str(), "living room");
    }

    #[test]
    fn orphan_off_is_counted_not_emitted() {
        let recs = records(&["2011-06-15 09:00:00 L001 OFF"]);
        let (events, report) =
            pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
        assert!(events.is_empty());
        assert_eq!(report.unmatched_off, 1);
        assert_eq!(report.discarded.len(), 1);
    }

    #[test]
    fn repeated_on_closes_and_reopens() {
        let recs = records(&[
            "2011-06-15 13:00:00 L001 ON",
            "2011-06-15 14:00:00 L001 ON",
            "2011-06-15 15:00:00 L001 OFF",
        ]);
        let (events, report) =
            pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(report.events_emitted, 2);
        assert_eq!(report.unmatched_on, 0);
        let spans: Vec<(String, String)> = events
            .iter()
            .map(|e| (e.interval.start().to_string(), e.interval.end().to_string()))
            .collect();
        assert_eq!(
            spans,
            vec![
                ("2011-06-15 13:00:00.000000".into(), "2011-06-15 14:00:00.000000".into()),
                ("2011-06-15 14:00:00.000000".into(), "2011-06-15 15:00:00.000000".into()),
            ]
        );
    }

    #[test]
    fn pending_on_is_closed_at_end_of_log() {
        let recs = records(&[
            "2011-06-15 13:00:00 L001 ON",
            "2011-06-15 14:00:00 M007 ON",
            "2011-06-15 14:30:00 M007 OFF",
        ]);
        let (events, report) =
            pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(report.unmatched_on, 1);
        let light = events
            .iter()
            .find(|e| e.service_id.as_str() == "light_1")
            .unwrap();
        assert_eq!(light.interval.end(), Timestamp::parse("2011-06-15 14:30:00").unwrap());
    }

    #[test]
    fn readings_fold_into_enclosing_interval() {
        let recs = records(&[
            "2011-06-15 13:00:00 L001 ON",
            "2011-06-15 13:10:00 L001 55.0",
            "2011-06-15 13:20:00 L001 65.0",
            "2011-06-15 14:00:00 L001 OFF",
            "2011-06-15 15:00:00 L001 40.0",
            "2011-06-15 15:30:00 M007 7.5",
        ]);
        let (events, report) =
            pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].quantitative_values["illuminance"], 60.0);
        assert_eq!(report.readings_folded, 2);
        // one reading outside the interval, one on a sensor with no reading attribute
        assert_eq!(report.discarded.len(), 2);
    }

    #[test]
    fn unmapped_sensor_is_fatal() {
        let recs = records(&["2011-06-15 13:00:00 X9 ON"]);
        let err = pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap_err();
        assert!(matches!(err, IngestError::UnmappedSensor { .. }));
    }

    fn sample_sequence() -> EventSequence {
        let mut a = ServiceEvent {
            event_id: EventId::from("e1"),
            service_id: ServiceId::from("ac_living"),
            state: ServiceState::On,
            interval: TimeInterval::new(
                Timestamp::parse("2025-06-01 21:00:00").unwrap(),
                Timestamp::parse("2025-06-01 22:00:00").unwrap(),
            )
            .unwrap(),
            location: Location::new("living room").unwrap(),
            user_id: UserId::from("r1"),
            qualitative_values: BTreeMap::new(),
            quantitative_values: BTreeMap::new(),
            capacity_demand: 1,
        };
        a.quantitative_values.insert("temperature".into(), 20.0);
        let mut b = a.clone();
        b.event_id = EventId::from("e2");
        b.service_id = ServiceId::from("tv_living");
        b.user_id = UserId::from("r2");
        b.quantitative_values.clear();
        b.qualitative_values.insert("channel".into(), "news".into());
        b.capacity_demand = 2;
        EventSequence::from_events(vec![a, b])
    }

    #[test]
    fn enriched_csv_round_trips() {
        let seq = sample_sequence();
        let mut buf = Vec::new();
        write_enriched_csv(&seq, &mut buf).unwrap();
        let parsed = parse_enriched_csv(buf.as_slice(), None).unwrap();
        assert_eq!(parsed, seq);
    }

    #[test]
    fn enriched_jsonl_round_trips() {
        let seq = sample_sequence();
        let mut buf = Vec::new();
        write_enriched_jsonl(&seq, &mut buf).unwrap();
        let parsed = parse_enriched_jsonl(buf.as_slice(), None).unwrap();
        assert_eq!(parsed, seq);
    }

    #[test]
    fn enriched_rejects_inverted_interval_and_unknown_column() {
        let csv = "service_id,location,user_id,start,end,state\n\
                   ac,living room,r1,2025-06-01 22:00:00,2025-06-01 21:00:00,On\n";
        assert!(matches!(
            parse_enriched_csv(csv.as_bytes(), None),
            Err(IngestError::Model(ModelError::InvertedInterval { .. }))
        ));

        let bad = "service_id,location,user_id,start,end,state,temperature\n";
        assert!(matches!(
            parse_enriched_csv(bad.as_bytes(), None),
            Err(IngestError::MalformedLine { .. })
        ));
    }

    #[test]
    fn enriched_accepts_minimal_columns() {
        let csv = "service_id,location,user_id,start,end,state,q:temperature\n\
                   ac,Living Room,r1,2025-06-01 21:00:00,2025-06-01 22:00:00,On,20\n";
        let seq = parse_enriched_csv(csv.as_bytes(), None).unwrap();
        assert_eq!(seq.len(), 1);
        let ev = &seq.events()[0];
        assert_eq!(ev.capacity_demand, 1);
        assert_eq!(ev.location.as_str(), "living room");
        assert_eq!(ev.quantitative_values["temperature"], 20.0);
        assert_eq!(ev.event_id.as_str(), "row-000002");
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(
            rows in proptest::collection::vec(
                (0u8..4, 0u8..3, 0i64..500, 1i64..100, -40.0f64..45.0, 0u8..2, 1u32..4),
                0..40,
            )
        ) {
            let events: Vec<ServiceEvent> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (svc, user, start, len, temp, channel, demand))| {
                    let mut qualitative_values = BTreeMap::new();
                    qualitative_values.insert("channel".to_string(), format!("ch{channel}"));
                    let mut quantitative_values = BTreeMap::new();
                    quantitative_values.insert("temperature".to_string(), temp);
                    ServiceEvent {
                        event_id: EventId::new(format!("e{i:03}")),
                        service_id: ServiceId::new(format!("s{svc}")),
                        state: if channel == 0 { ServiceState::On } else { ServiceState::Off },
                        interval: TimeInterval::new(
                            Timestamp::from_micros(start * 60_000_000),
                            Timestamp::from_micros((start + len) * 60_000_000),
                        ).unwrap(),
                        location: Location::new("living room").unwrap(),
                        user_id: UserId::new(format!("u{user}")),
                        qualitative_values,
                        quantitative_values,
                        capacity_demand: demand,
                    }
                })
                .collect();
            let seq = EventSequence::from_events(events);

            let mut csv_buf = Vec::new();
            write_enriched_csv(&seq, &mut csv_buf).unwrap();
            prop_assert_eq!(&parse_enriched_csv(csv_buf.as_slice(), None).unwrap(), &seq);

            let mut json_buf = Vec::new();
            write_enriched_jsonl(&seq, &mut json_buf).unwrap();
            prop_assert_eq!(&parse_enriched_jsonl(json_buf.as_slice(), None).unwrap(), &seq);
        }

        #[test]
        fn every_on_record_becomes_exactly_one_event(
            ops in proptest::collection::vec((0u8..2, 0u8..2), 0..60)
        ) {
            let sensors = ["L001", "M007"];
            let lines: Vec<String> = ops
                .iter()
                .enumerate()
                .map(|(i, (sensor, status))| {
                    format!(
                        "2011-06-15 {:02}:{:02}:00 {} {}",
                        i / 60,
                        i % 60,
                        sensors[*sensor as usize],
                        if *status == 0 { "ON" } else { "OFF" },
                    )
                })
                .collect();
            let line_refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
            let recs = records(&line_refs);
            let on_count = ops.iter().filter(|(_, s)| *s == 0).count() as u64;
            let (events, report) = pair_on_off(&recs, &bindings(), &UserId::from("r1"), "r1").unwrap();
            prop_assert_eq!(report.events_emitted, on_count);
            prop_assert_eq!(events.len() as u64, on_count);

            // oracle: a plain per-sensor open/closed flag
            let mut open = [false, false];
            let mut orphan_offs = 0u64;
            for (sensor, status) in &ops {
                let flag = &mut open[*sensor as usize];
                if *status == 0 {
                    *flag = true;
                } else if *flag {
                    *flag = false;
                } else {
                    orphan_offs += 1;
                }
            }
            prop_assert_eq!(report.unmatched_off, orphan_offs);
            prop_assert_eq!(report.unmatched_on, open.iter().filter(|o| **o).count() as u64);
        }
    }
}


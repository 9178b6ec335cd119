//! Command-line front end: ingestion, ranking, detection, metrics, and
//! corpus synthesis.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O
//! failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::detector::{
    self, DetectRun, DetectRunOptions, GroundTruthLabels, PairUniverse,
};
use crate::ingest;
use crate::model::UserId;
use crate::rules::{ConflictType, IndirectStrictness, QuantitativeMode, RulesConfig};
use crate::selection;
use crate::synth;

#[derive(Parser)]
#[command(
    name = "homeclash",
    version,
    about = "Detects cross-resident conflicts in smart-home service event logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw ON/OFF sensor logs into an enriched event corpus
    Ingest(IngestArgs),
    /// Print per-service usage statistics
    Rank(RankArgs),
    /// Detect conflicts in an event corpus
    Detect(DetectArgs),
    /// Score detection against ground-truth labels
    Metrics(MetricsArgs),
    /// Generate a labeled synthetic corpus from a scenario file
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Registry file with service descriptors and the sensor map
    #[arg(long, env = "HOMECLASH_REGISTRY")]
    registry: PathBuf,
    /// Separate sensor-map file; overrides the registry's sensor section
    #[arg(long)]
    sensor_map: Option<PathBuf>,
    /// Raw log with its resident, as USER=PATH; repeat per file
    #[arg(long = "log", value_name = "USER=PATH", required = true)]
    logs: Vec<String>,
    /// Output corpus (.csv or .jsonl)
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Write the ingestion report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Enriched corpus (.csv or .jsonl)
    corpus: PathBuf,
    /// Write the table here instead of stdout
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DetectionFlags {
    /// Registry file with service descriptors
    #[arg(long, env = "HOMECLASH_REGISTRY")]
    registry: PathBuf,
    /// Number of most-used services to analyze
    #[arg(long, default_value_t = selection::DEFAULT_TOP_K)]
    k: usize,
    /// Analyze every service instead of the top-k
    #[arg(long)]
    oracle: bool,
    /// Numeric preference rule: ontology (strict inequality) or hybrid
    /// (learned ranges)
    #[arg(long)]
    mode: Option<QuantitativeMode>,
    /// Indirect-impact matching: paper (shared property name) or
    /// directional (opposing directions)
    #[arg(long)]
    strictness: Option<IndirectStrictness>,
    /// Fraction of each resident's history used to learn preferences
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Ignore candidate pairs overlapping for less than this many seconds
    #[arg(long, default_value_t = 0.0)]
    min_overlap_secs: f64,
    /// Rule configuration file (JSON); flags override its modes
    #[arg(long)]
    rules: Option<PathBuf>,
}

impl DetectionFlags {
    fn validate(&self) -> Result<()> {
        if !self.oracle && self.k == 0 {
            bail!("k must be ≥ 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train-fraction must be in (0, 1)");
        }
        if !self.min_overlap_secs.is_finite() || self.min_overlap_secs < 0.0 {
            bail!("min-overlap-secs must be a non-negative number");
        }
        Ok(())
    }

    fn rules_config(&self) -> Result<RulesConfig> {
        let mut config = match &self.rules {
            Some(path) => {
                let bytes = fs::read(path)
                    .with_context(|| format!("cannot read rules file {}", path.display()))?;
                serde_json::from_slice(&bytes)
                    .with_context(|| format!("cannot parse rules file {}", path.display()))?
            }
            None => RulesConfig::default(),
        };
        if let Some(mode) = self.mode {
            config.quantitative_mode = mode;
        }
        if let Some(strictness) = self.strictness {
            config.indirect_strictness = strictness;
        }
        Ok(config)
    }

    fn run(&self, corpus: &Path) -> Result<DetectRun> {
        let (registry, _) = ingest::load_registry_file(&self.registry)
            .with_context(|| format!("cannot load registry {}", self.registry.display()))?;
        let events = ingest::read_corpus(corpus, Some(&registry))
            .with_context(|| format!("cannot read corpus {}", corpus.display()))?;
        let opts = DetectRunOptions {
            k: if self.oracle { None } else { Some(self.k) },
            rules: self.rules_config()?,
            train_fraction: self.train_fraction,
            min_overlap: std::time::Duration::from_secs_f64(self.min_overlap_secs),
        };
        detector::run_detection(&events, &registry, &opts).context("detection failed")
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Enriched corpus (.csv or .jsonl)
    corpus: PathBuf,
    #[command(flatten)]
    flags: DetectionFlags,
    /// Conflict report output (JSON lines)
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Enriched corpus (.csv or .jsonl)
    corpus: PathBuf,
    #[command(flatten)]
    flags: DetectionFlags,
    /// Ground-truth labels file (event_id_1,event_id_2,is_conflict[,type])
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Label candidate pairs by the comfort rule on this attribute instead
    /// of reading a labels file
    #[arg(long)]
    label_attribute: Option<String>,
    /// Comfort threshold for --label-attribute
    #[arg(long, default_value_t = detector::DEFAULT_COMFORT_THRESHOLD)]
    threshold: f64,
    /// Restrict scoring to one conflict type
    #[arg(long)]
    scope: Option<String>,
    /// Write the evaluation report here instead of stdout
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output corpus (.csv or .jsonl)
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Output labels file
    #[arg(long)]
    labels: PathBuf,
}

/// Parses and executes `argv`, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            eprint!("{err}");
            return 1;
        }
    };

    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|cause| cause.is::<std::io::Error>()) {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Rank(args) => run_rank(args),
        Command::Detect(args) => run_detect(args),
        Command::Metrics(args) => run_metrics(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let (registry, mut sensors) = ingest::load_registry_file(&args.registry)
        .with_context(|| format!("cannot load registry {}", args.registry.display()))?;
    if let Some(path) = &args.sensor_map {
        sensors = ingest::load_sensor_map(path)
            .with_context(|| format!("cannot load sensor map {}", path.display()))?;
    }

    #[derive(serde::Serialize)]
    struct IngestSummary {
        files: BTreeMap<String, ingest::IngestReport>,
        total: ingest::IngestReport,
    }

    let mut parts = Vec::new();
    let mut summary = IngestSummary {
        files: BTreeMap::new(),
        total: ingest::IngestReport::default(),
    };
    for (index, log) in args.logs.iter().enumerate() {
        let (user, path) = log
            .split_once('=')
            .with_context(|| format!("--log expects USER=PATH, got `{log}`"))?;
        let user = UserId::from(user);
        let prefix = format!("{user}-f{index}");
        let (events, report) =
            ingest::ingest_casas_file(Path::new(path), &sensors, &user, &prefix)
                .with_context(|| format!("cannot ingest {path}"))?;
        parts.push(crate::model::EventSequence::from_events(events));
        summary.total.absorb(report.clone());
        summary.files.insert(log.clone(), report);
    }

    let merged = crate::model::EventSequence::merge(parts);
    for ev in merged.iter() {
        crate::model::validate_event(ev, &registry)?;
    }
    ingest::write_corpus(&args.output, &merged)
        .with_context(|| format!("cannot write corpus {}", args.output.display()))?;

    let report_json = serde_json::to_string_pretty(&summary).expect("report serializes");
    match &args.report {
        Some(path) => fs::write(path, report_json + "\n")
            .with_context(|| format!("cannot write report {}", path.display()))?,
        None => println!("{report_json}"),
    }
    println!(
        "ingested {} events from {} file(s) into {}",
        merged.len(),
        args.logs.len(),
        args.output.display()
    );
    Ok(())
}

fn run_rank(args: RankArgs) -> Result<()> {
    let events = ingest::read_corpus(&args.corpus, None)
        .with_context(|| format!("cannot read corpus {}", args.corpus.display()))?;
    let ranked = selection::rank_services(&events);

    let mut table = String::new();
    table.push_str(&format!(
        "{:<24} {:>8} {:>14}  {}\n",
        "service", "uses", "seconds", "locations"
    ));
    for (id, stats) in &ranked {
        let locations: Vec<&str> = stats.locations.iter().map(|l| l.as_str()).collect();
        table.push_str(&format!(
            "{:<24} {:>8} {:>14.3}  {}\n",
            id.as_str(),
            stats.use_count,
            stats.total_duration.as_secs_f64(),
            locations.join("|")
        ));
    }
    match &args.output {
        Some(path) => fs::write(path, &table)
            .with_context(|| format!("cannot write table {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn run_detect(args: DetectArgs) -> Result<()> {
    args.flags.validate()?;
    let run = args.flags.run(&args.corpus)?;

    let mut out = Vec::new();
    detector::write_detection_jsonl(&run.result, &mut out)?;
    fs::write(&args.output, out)
        .with_context(|| format!("cannot write report {}", args.output.display()))?;
    println!(
        "{} conflicts across {} candidate pairs ({} of {} services analyzed); report: {}",
        run.result.total_conflicts(),
        run.pairs.len(),
        run.selected.len(),
        run.ranked.len(),
        args.output.display()
    );
    Ok(())
}

fn parse_scope(scope: &Option<String>) -> Result<Option<ConflictType>> {
    scope
        .as_deref()
        .map(|s| s.parse::<ConflictType>().map_err(anyhow::Error::msg))
        .transpose()
}

fn run_metrics(args: MetricsArgs) -> Result<()> {
    args.flags.validate()?;
    let scope = parse_scope(&args.scope)?;
    let run = args.flags.run(&args.corpus)?;

    let labels = match (&args.labels, &args.label_attribute) {
        (Some(path), None) => GroundTruthLabels::read_csv_path(path)
            .with_context(|| format!("cannot read labels {}", path.display()))?,
        (None, Some(attribute)) => {
            let scored: Vec<_> = run
                .pairs
                .iter()
                .filter(|p| {
                    p.first.quantitative_values.contains_key(attribute)
                        && p.second.quantitative_values.contains_key(attribute)
                })
                .cloned()
                .collect();
            detector::label_by_comfort_rule(&scored, args.threshold, attribute)?
        }
        (Some(_), Some(_)) => bail!("use either --labels or --label-attribute, not both"),
        (None, None) => bail!("provide --labels FILE or --label-attribute ATTR"),
    };

    // universe event ids span the whole corpus so training-window labels are
    // skipped rather than rejected as unknown
    let universe = PairUniverse::new(&run.events, &run.pairs);
    let report = detector::evaluate(&run.result, &universe, &labels, scope)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.output {
        Some(path) => fs::write(path, json + "\n")
            .with_context(|| format!("cannot write report {}", path.display()))?,
        None => println!("{json}"),
    }
    eprintln!(
        "precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4} ({} labels, {} skipped)",
        report.precision,
        report.recall,
        report.f1,
        report.accuracy,
        labels.len(),
        report.labels_skipped
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut spec = synth::ScenarioSpec::load(&args.spec)
        .with_context(|| format!("cannot load scenario {}", args.spec.display()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let corpus = synth::generate(&spec).context("generation failed")?;
    synth::replay_to_enriched(&corpus, &args.output, &args.labels)?;
    println!(
        "generated {} events, {} labeled pairs, {} injected conflicts; corpus: {}, labels: {}",
        corpus.events.len(),
        corpus.labels.len(),
        corpus.injected.len(),
        args.output.display(),
        args.labels.display()
    );
    Ok(())
}

// the mode flags parse through FromStr
impl clap::builder::ValueParserFactory for QuantitativeMode {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<QuantitativeMode>())
    }
}

impl clap::builder::ValueParserFactory for IndirectStrictness {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<IndirectStrictness>())
    }
}

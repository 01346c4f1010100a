//! The `metascan` command line.
//!
//! [`run`] parses arguments, dispatches to a subcommand and returns the exit
//! code: 0 for success with nothing to report, 2 when findings or raw
//! reflections were produced, 1 for operational errors and 64 for usage
//! errors. Results go to standard output, diagnostics to standard error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metascan::fingerprint::{
    bundled_core_probes, bundled_extension_catalog, load_core_probes, load_extension_catalog, CoreProbe,
    ExtensionCatalogEntry,
};
use metascan::media::{FieldKey, MediaFormat};
use metascan::payload::{
    apply_plan, build_plan, bundled_fields, bundled_vectors, load_fields, load_vectors, reflect_check, FieldCatalog,
    FieldSelection, InjectionRecord, PayloadVector, PlanMode, ReflectStatus,
};
use metascan::report::{aggregate, emit, emit_report, OutputFormat, SiteRecord};
use metascan::scan::{scan_tree, ScanRuleSet};
use metascan_crawler::{parse_targets, run_scan, FetchPolicy, Fetcher, ProbeCatalog};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FINDINGS: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "METASCAN_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "metascan",
    version,
    about = "Metadata XSS injection, Joomla fingerprinting and source scanning",
    term_width = 100,
    disable_help_subcommand = true
)]
struct Cli {
    /// Directory with replacement catalogs (vectors.jsonl, fields.jsonl, rules.toml,
    /// extensions.jsonl, core_probes.jsonl); missing files fall back to the bundled ones
    /// [default: bundled catalogs]
    #[arg(long, global = true, env = DATA_DIR_ENV, hide_env_values = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write XSS vectors into the metadata fields of a media file
    Inject(InjectArgs),
    /// List the injectable fields and their length limits
    Fields(FieldsArgs),
    /// List the XSS vector catalog
    Vectors(VectorsArgs),
    /// Probe hosts for Joomla and its top extensions
    Fingerprint(FingerprintArgs),
    /// Scan a source tree for DOM-XSS sources/sinks and unescaped PHP output or SQL
    ScanSrc(ScanSrcArgs),
    /// Classify how injected payloads come back in a saved HTTP response
    ReflectCheck(ReflectArgs),
    /// Compute installation statistics from fingerprint output
    Aggregate(AggregateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Media {
    Jpg,
    Mp3,
    Mp4,
}

impl From<Media> for MediaFormat {
    fn from(m: Media) -> Self {
        match m {
            Media::Jpg => MediaFormat::Jpeg,
            Media::Mp3 => MediaFormat::Mp3,
            Media::Mp4 => MediaFormat::Mp4,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// The first vector in every field
    Same,
    /// One fitting vector per field, each with its own marker
    Attributed,
    /// One output file per vector, covering every field
    Sweep,
}

impl From<Mode> for PlanMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Same => PlanMode::SameVectorAllFields,
            Mode::Attributed => PlanMode::PerFieldAttributed,
            Mode::Sweep => PlanMode::FullSweep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
    Pretty,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => OutputFormat::JsonLines,
            Format::Csv => OutputFormat::Csv,
            Format::Pretty => OutputFormat::Pretty,
        }
    }
}

#[derive(Debug, Args)]
struct InjectArgs {
    /// Clean media file to inject into
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Media format [default: from the input file extension]
    #[arg(long, value_enum)]
    format: Option<Media>,
    /// `all` or a comma-separated list of field keys such as iptc:2:105,iptc:2:120
    #[arg(long, default_value = "all", value_name = "KEYS")]
    fields: String,
    /// How vectors are assigned to fields
    #[arg(long, value_enum, default_value_t = Mode::Attributed)]
    mode: Mode,
    /// Vector catalog (JSON lines) [default: vectors.jsonl from the data directory]
    #[arg(long, value_name = "PATH")]
    vectors: Option<PathBuf>,
    /// Plan id, 1 to 8 letters or digits; part of every marker
    #[arg(long, default_value = "p1", value_name = "ID")]
    plan_id: String,
    /// Directory for injected files and records.jsonl (created if missing)
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct FieldsArgs {
    /// Only list fields of this media format [default: all formats]
    #[arg(long, value_enum)]
    format: Option<Media>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    output: Format,
}

#[derive(Debug, Args)]
struct VectorsArgs {
    /// Vector catalog (JSON lines) [default: vectors.jsonl from the data directory]
    #[arg(long, value_name = "PATH")]
    catalog: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Debug, Args)]
struct FingerprintArgs {
    /// Target list: one host or origin URL per line, '#' comments
    #[arg(long, value_name = "FILE")]
    targets: PathBuf,
    /// Output file for JSON lines, or '-' for standard output
    #[arg(long, default_value = "-", value_name = "PATH")]
    out: PathBuf,
    /// User-Agent header sent on every request [default: Chrome 74 on Windows 10]
    #[arg(long, value_name = "UA")]
    user_agent: Option<String>,
    /// Connect timeout in seconds
    #[arg(long, default_value_t = 10, value_name = "SECS")]
    connect_timeout: u64,
    /// Read timeout in seconds
    #[arg(long, default_value_t = 20, value_name = "SECS")]
    read_timeout: u64,
    /// Retries after the first attempt (transport failures and 502/503/504 only)
    #[arg(long, default_value_t = 10, value_name = "N")]
    max_retries: u32,
    /// Redirects followed per request
    #[arg(long, default_value_t = 10, value_name = "N")]
    max_redirects: u32,
    /// Minimum gap between requests to one host, in milliseconds
    #[arg(long, default_value_t = 500, value_name = "MS")]
    per_host_delay: u64,
    /// Bytes of each response body kept
    #[arg(long, default_value_t = 65_536, value_name = "BYTES")]
    max_body: usize,
    /// Hosts probed at the same time
    #[arg(long, default_value_t = 8, value_name = "N")]
    concurrency: usize,
    /// Skip probes disallowed by the host's robots.txt [default: off]
    #[arg(long)]
    respect_robots: bool,
    /// Only run the core probes [default: off]
    #[arg(long)]
    no_extension_probes: bool,
}

#[derive(Debug, Args)]
struct ScanSrcArgs {
    /// Root of the source tree
    #[arg(long, value_name = "DIR")]
    root: PathBuf,
    /// Rule file (TOML) [default: rules.toml from the data directory]
    #[arg(long, value_name = "PATH")]
    rules: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Debug, Args)]
struct ReflectArgs {
    /// Injection records (JSON lines) written by `inject`
    #[arg(long, value_name = "PATH")]
    records: PathBuf,
    /// Saved HTTP response body to check
    #[arg(long, value_name = "FILE")]
    response: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// Fingerprint output (JSON lines)
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Hosts in the original target list [default: number of input rows]
    #[arg(long, value_name = "N")]
    hosts_total: Option<u64>,
}

/// An operational failure, reported on standard error with exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn context<T, E: std::fmt::Display>(r: Result<T, E>, what: impl std::fmt::Display) -> Result<T, Failure> {
    r.map_err(|e| Failure(format!("{what}: {e}")))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    context(fs::read_to_string(path), path.display())
}

/// Catalog lookup: a file in the data directory if present, else the
/// bundled copy.
struct Data {
    dir: Option<PathBuf>,
}

impl Data {
    fn file(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name)).filter(|p| p.is_file())
    }

    fn vectors(&self, explicit: Option<&Path>) -> Result<Vec<PayloadVector>, Failure> {
        match explicit.map(Path::to_path_buf).or_else(|| self.file("vectors.jsonl")) {
            Some(p) => context(load_vectors(&read_text(&p)?), p.display()),
            None => Ok(bundled_vectors()),
        }
    }

    fn fields(&self) -> Result<FieldCatalog, Failure> {
        match self.file("fields.jsonl") {
            Some(p) => context(load_fields(&read_text(&p)?), p.display()),
            None => Ok(bundled_fields()),
        }
    }

    fn rules(&self, explicit: Option<&Path>) -> Result<ScanRuleSet, Failure> {
        match explicit.map(Path::to_path_buf).or_else(|| self.file("rules.toml")) {
            Some(p) => context(ScanRuleSet::from_toml(&read_text(&p)?), p.display()),
            None => Ok(ScanRuleSet::default()),
        }
    }

    fn extensions(&self) -> Result<Vec<ExtensionCatalogEntry>, Failure> {
        match self.file("extensions.jsonl") {
            Some(p) => context(load_extension_catalog(&read_text(&p)?), p.display()),
            None => Ok(bundled_extension_catalog()),
        }
    }

    fn core_probes(&self) -> Result<Vec<CoreProbe>, Failure> {
        match self.file("core_probes.jsonl") {
            Some(p) => context(load_core_probes(&read_text(&p)?), p.display()),
            None => Ok(bundled_core_probes()),
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            } else {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            };
        }
    };
    let data = Data { dir: cli.data_dir };
    let result = match cli.command {
        Command::Inject(a) => inject(&data, a, out),
        Command::Fields(a) => fields(&data, a, out),
        Command::Vectors(a) => vectors(&data, a, out),
        Command::Fingerprint(a) => fingerprint(&data, a, out, err),
        Command::ScanSrc(a) => scan_src(&data, a, out),
        Command::ReflectCheck(a) => reflect(a, out),
        Command::Aggregate(a) => aggregate_cmd(&data, a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

fn inject(data: &Data, a: InjectArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let format: MediaFormat = match a.format {
        Some(m) => m.into(),
        None => {
            let ext = a.input.extension().and_then(|e| e.to_str()).unwrap_or("");
            ext.parse()
                .map_err(|_| Failure(format!("{}: cannot infer the format; pass --format", a.input.display())))?
        }
    };
    let selection = if a.fields.trim() == "all" {
        FieldSelection::All
    } else {
        let keys: Result<Vec<FieldKey>, _> = a.fields.split(',').map(|k| k.trim().parse()).collect();
        FieldSelection::Only(context(keys, "--fields")?)
    };
    let media = context(fs::read(&a.input), a.input.display())?;
    let vectors = data.vectors(a.vectors.as_deref())?;
    let plans = build_plan(&data.fields()?, format, &selection, &vectors, a.mode.into(), &a.plan_id)?;
    context(fs::create_dir_all(&a.out_dir), a.out_dir.display())?;
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string();
    let mut records = String::new();
    for plan in &plans {
        let name = format!("{stem}.{}.{}", plan.plan_id, format.extension());
        let (bytes, recs) = apply_plan(&media, plan, &name)?;
        let path = a.out_dir.join(&name);
        context(fs::write(&path, bytes), path.display())?;
        for r in &recs {
            records.push_str(&serde_json::to_string(r)?);
            records.push('\n');
        }
        writeln!(out, "{}\t{} fields\t{} skipped pairings", path.display(), recs.len(), plan.skipped.len())?;
    }
    let path = a.out_dir.join("records.jsonl");
    context(fs::write(&path, records), path.display())?;
    writeln!(out, "{}", path.display())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FieldRow<'a> {
    key: String,
    display_name: &'a str,
    max_length: Option<usize>,
}

fn fields(data: &Data, a: FieldsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let catalog = data.fields()?;
    let only: Option<MediaFormat> = a.format.map(Into::into);
    let rows: Vec<_> = catalog.all().iter().filter(|f| only.is_none_or(|m| f.key.format() == m)).collect();
    match a.output {
        Format::Jsonl => {
            for f in rows {
                let row = FieldRow { key: f.key.to_string(), display_name: &f.display_name, max_length: f.max_length };
                writeln!(out, "{}", serde_json::to_string(&row)?)?;
            }
        }
        other => {
            let table: Vec<[String; 3]> = rows
                .iter()
                .map(|f| {
                    let max = f.max_length.map_or_else(|| "-".to_string(), |m| m.to_string());
                    [f.key.to_string(), f.display_name.clone(), max]
                })
                .collect();
            write_table(out, other, &["key", "name", "max_length"], &table)?;
        }
    }
    Ok(EXIT_OK)
}

fn vectors(data: &Data, a: VectorsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let vectors = data.vectors(a.catalog.as_deref())?;
    match a.format {
        Format::Jsonl => {
            for v in &vectors {
                writeln!(out, "{}", serde_json::to_string(v)?)?;
            }
        }
        other => {
            let table: Vec<[String; 3]> = vectors
                .iter()
                .map(|v| [v.id.clone(), v.tags.iter().cloned().collect::<Vec<_>>().join(";"), v.body.clone()])
                .collect();
            write_table(out, other, &["id", "tags", "body"], &table)?;
        }
    }
    Ok(EXIT_OK)
}

/// CSV via the report renderer's conventions, or an aligned table.
fn write_table<const N: usize>(
    out: &mut dyn Write,
    format: Format,
    headers: &[&str; N],
    rows: &[[String; N]],
) -> Result<(), Failure> {
    if let Format::Csv = format {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(headers)?;
        for r in rows {
            w.write_record(r)?;
        }
        out.write_all(&w.into_inner().map_err(|e| Failure(e.to_string()))?)?;
        return Ok(());
    }
    let widths: Vec<usize> = (0..N)
        .map(|i| rows.iter().map(|r| r[i].chars().count()).chain([headers[i].len()]).max().unwrap_or(0))
        .collect();
    let mut line = |cells: Vec<&str>| -> std::io::Result<()> {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", parts.join("  ").trim_end())
    };
    line(headers.to_vec())?;
    // The last column is not padded, so its rule only spans the header.
    let rules: Vec<String> =
        widths.iter().enumerate().map(|(i, w)| "-".repeat(if i + 1 == N { headers[i].len() } else { *w })).collect();
    line(rules.iter().map(String::as_str).collect())?;
    for r in rows {
        line(r.iter().map(String::as_str).collect())?;
    }
    Ok(())
}

/// One line of fingerprint output. Readable back as a [`SiteRecord`].
#[derive(Serialize)]
struct FingerprintRow {
    host: String,
    core_detected: bool,
    extensions: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_path: Option<String>,
    evidence: Vec<String>,
}

fn fingerprint(data: &Data, a: FingerprintArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let policy = FetchPolicy {
        user_agent: a.user_agent.unwrap_or_else(|| FetchPolicy::default().user_agent),
        connect_timeout: Duration::from_secs(a.connect_timeout),
        read_timeout: Duration::from_secs(a.read_timeout),
        max_retries: a.max_retries,
        max_redirects: a.max_redirects,
        per_host_delay: Duration::from_millis(a.per_host_delay),
        max_body: a.max_body,
        respect_robots: a.respect_robots,
        probe_extensions: !a.no_extension_probes,
    };
    policy.validate()?;
    if a.concurrency == 0 {
        return Err(Failure("--concurrency must be at least 1".into()));
    }
    let targets = parse_targets(&read_text(&a.targets)?);
    let catalog = ProbeCatalog { core: data.core_probes()?, extensions: data.extensions()? };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let fetcher = Fetcher::new(policy)?;
    let results = runtime.block_on(run_scan(&fetcher, &targets, &catalog, a.concurrency));

    let mut text = String::new();
    for (host, result) in results {
        let row = match result {
            Ok(scan) => {
                let record = SiteRecord::from(&scan.detection);
                FingerprintRow {
                    host,
                    core_detected: record.core_detected,
                    extensions: record.extensions,
                    error: None,
                    base_path: Some(scan.detection.base_path),
                    evidence: scan.detection.evidence.iter().map(|e| format!("{}: {}", e.probe_id, e.reason)).collect(),
                }
            }
            Err(e) => {
                writeln!(err, "{host}: {e}")?;
                FingerprintRow {
                    host,
                    core_detected: false,
                    extensions: BTreeSet::new(),
                    error: Some(e.to_string()),
                    base_path: None,
                    evidence: Vec::new(),
                }
            }
        };
        text.push_str(&serde_json::to_string(&row)?);
        text.push('\n');
    }
    if a.out == Path::new("-") {
        out.write_all(text.as_bytes())?;
    } else {
        context(fs::write(&a.out, text), a.out.display())?;
    }
    Ok(EXIT_OK)
}

fn scan_src(data: &Data, a: ScanSrcArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let rules = data.rules(a.rules.as_deref())?;
    let findings = scan_tree(&a.root, &rules)?;
    out.write_all(emit(&findings, a.format.into()).as_bytes())?;
    Ok(if findings.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
}

fn reflect(a: ReflectArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut records = Vec::new();
    for (i, line) in read_text(&a.records)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: InjectionRecord =
            context(serde_json::from_str(line), format_args!("{} line {}", a.records.display(), i + 1))?;
        records.push(r);
    }
    let body = String::from_utf8_lossy(&context(fs::read(&a.response), a.response.display())?).into_owned();
    let rows = reflect_check(&body, &records);
    out.write_all(emit(&rows, a.format.into()).as_bytes())?;
    let raw = rows.iter().any(|(_, s)| *s == ReflectStatus::Raw);
    Ok(if raw { EXIT_FINDINGS } else { EXIT_OK })
}

fn aggregate_cmd(data: &Data, a: AggregateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut records = Vec::new();
    for (i, line) in read_text(&a.input)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: SiteRecord = context(serde_json::from_str(line), format_args!("{} line {}", a.input.display(), i + 1))?;
        records.push(r);
    }
    let total = a.hosts_total.unwrap_or(records.len() as u64);
    let report = aggregate(&records, total).with_paths(&data.extensions()?);
    out.write_all(emit_report(&report, a.format.into()).as_bytes())?;
    Ok(EXIT_OK)
}

#[cfg(doctest)]
mod book;

//! Installation statistics and report rendering.
//!
//! Shares are kept as integer tenths of a percent and rounded half-up, so
//! 4,646 of 7,797 is exactly `59.6`. Every renderer is deterministic: the
//! same rows always give the same bytes.
//!
//! # Row schemas
//!
//! JSON lines and CSV use the same columns in the same order.
//!
//! | rows | columns |
//! |------|---------|
//! | aggregate summary (JSON lines only, first line) | `kind`="summary", `hosts_total`, `hosts_reachable`, `joomla_total`, `joomla_with_any_extension`, `core_share_of_reachable`, `extension_share_of_joomla` |
//! | aggregate extension rows | (`kind`="extension" in JSON lines), `extension`, `path`, `installations`, `share_percent` |
//! | scan findings | `file`, `line`, `column`, `kind`, `symbol`, `excerpt` |
//! | reflections | `output`, `field`, `vector_id`, `marker`, `status` |
//! | detections | `host`, `base_path`, `core_detected`, `extensions`, `evidence` |
//! | site records | `host`, `core_detected`, `extensions`, `error` |
//!
//! In CSV, list cells are joined with `;`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fingerprint::{Detection, ExtensionCatalogEntry};
use crate::payload::{InjectionRecord, ReflectStatus};
use crate::scan::{FindingKind, ScanFinding};

/// A percentage with one decimal, stored as tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(pub u32);

impl Percent {
    /// `count / denom` as a percentage rounded half-up to one decimal.
    /// A zero denominator gives 0.0.
    pub fn share(count: u64, denom: u64) -> Percent {
        if denom == 0 {
            return Percent(0);
        }
        Percent(((count * 2000 + denom) / (2 * denom)) as u32)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=1e8).contains(&v) {
            return Err(serde::de::Error::custom("percent out of range"));
        }
        Ok(Percent((v * 10.0).round() as u32))
    }
}

/// Outcome for one scanned host. A host that could not be reached carries
/// `error` and no detections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub host: String,
    pub core_detected: bool,
    #[serde(default)]
    pub extensions: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SiteRecord {
    pub fn failed(host: impl Into<String>, error: impl Into<String>) -> Self {
        Self { host: host.into(), core_detected: false, extensions: BTreeSet::new(), error: Some(error.into()) }
    }
}

impl From<&Detection> for SiteRecord {
    fn from(d: &Detection) -> Self {
        Self {
            host: d.host.clone(),
            core_detected: d.core_detected || !d.extensions.is_empty(),
            extensions: d.extensions.clone(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionShare {
    pub name: String,
    /// Identifying path from the catalog, if known.
    pub path: Option<String>,
    pub count: u64,
    pub share_percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub hosts_total: u64,
    pub hosts_reachable: u64,
    pub joomla_total: u64,
    pub joomla_with_any_extension: u64,
    /// Sorted by share descending, then name.
    pub per_extension: Vec<ExtensionShare>,
    pub core_share_of_reachable: Percent,
    pub extension_share_of_joomla: Percent,
}

impl AggregateReport {
    /// Fills `path` from a catalog, keyed by extension name.
    pub fn with_paths(mut self, catalog: &[ExtensionCatalogEntry]) -> Self {
        for row in &mut self.per_extension {
            row.path = catalog.iter().find(|e| e.name == row.name).map(|e| e.identifier_path.clone());
        }
        self
    }
}

/// Aggregates site records. Records with an error count as unreachable;
/// extension shares are relative to Joomla hosts with at least one
/// extension. `hosts_total` is raised to the record count if smaller.
pub fn aggregate(records: &[SiteRecord], hosts_total: u64) -> AggregateReport {
    let mut reachable = 0;
    let mut joomla = 0;
    let mut with_ext = 0;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.error.is_none()) {
        reachable += 1;
        if r.core_detected || !r.extensions.is_empty() {
            joomla += 1;
        }
        if !r.extensions.is_empty() {
            with_ext += 1;
            for e in &r.extensions {
                *counts.entry(e).or_default() += 1;
            }
        }
    }
    let mut per_extension: Vec<ExtensionShare> = counts
        .into_iter()
        .map(|(name, count)| ExtensionShare {
            name: name.to_string(),
            path: None,
            count,
            share_percent: Percent::share(count, with_ext),
        })
        .collect();
    per_extension.sort_by(|a, b| b.share_percent.cmp(&a.share_percent).then_with(|| a.name.cmp(&b.name)));
    AggregateReport {
        hosts_total: hosts_total.max(records.len() as u64),
        hosts_reachable: reachable,
        joomla_total: joomla,
        joomla_with_any_extension: with_ext,
        per_extension,
        core_share_of_reachable: Percent::share(joomla, reachable),
        extension_share_of_joomla: Percent::share(with_ext, joomla),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    JsonLines,
    Csv,
    Pretty,
}

/// One cell of a rendered row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Bool(bool),
    Percent(Percent),
    List(Vec<String>),
    Null,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Percent(p) => p.to_string(),
            Cell::List(v) => v.join(";"),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Str(s) => serde_json::to_string(s).unwrap(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Percent(p) => p.to_string(),
            Cell::List(v) => serde_json::to_string(v).unwrap(),
            Cell::Null => "null".into(),
        }
    }

    fn right_aligned(&self) -> bool {
        matches!(self, Cell::Int(_) | Cell::Percent(_))
    }
}

/// A type that renders as one table row.
pub trait Row {
    const COLUMNS: &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

fn str_cell(s: impl Into<String>) -> Cell {
    Cell::Str(s.into())
}

impl Row for ScanFinding {
    const COLUMNS: &'static [&'static str] = &["file", "line", "column", "kind", "symbol", "excerpt"];
    fn cells(&self) -> Vec<Cell> {
        let kind = match self.kind {
            FindingKind::DomSource => "dom-source",
            FindingKind::DomSink => "dom-sink",
            FindingKind::UnescapedOutput => "unescaped-output",
            FindingKind::UnescapedSql => "unescaped-sql",
        };
        vec![
            str_cell(self.file.to_string_lossy()),
            Cell::Int(self.line as u64),
            Cell::Int(self.column as u64),
            str_cell(kind),
            str_cell(&self.pattern_or_symbol),
            str_cell(&self.excerpt),
        ]
    }
}

impl Row for (InjectionRecord, ReflectStatus) {
    const COLUMNS: &'static [&'static str] = &["output", "field", "vector_id", "marker", "status"];
    fn cells(&self) -> Vec<Cell> {
        let (r, status) = self;
        let status = match status {
            ReflectStatus::Absent => "absent",
            ReflectStatus::Encoded => "encoded",
            ReflectStatus::Raw => "raw",
        };
        vec![
            str_cell(&r.output),
            str_cell(r.field.to_string()),
            str_cell(&r.vector_id),
            str_cell(&r.marker),
            str_cell(status),
        ]
    }
}

impl Row for Detection {
    const COLUMNS: &'static [&'static str] = &["host", "base_path", "core_detected", "extensions", "evidence"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            str_cell(&self.host),
            str_cell(&self.base_path),
            Cell::Bool(self.core_detected),
            Cell::List(self.extensions.iter().cloned().collect()),
            Cell::List(self.evidence.iter().map(|e| format!("{}: {}", e.probe_id, e.reason)).collect()),
        ]
    }
}

impl Row for SiteRecord {
    const COLUMNS: &'static [&'static str] = &["host", "core_detected", "extensions", "error"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            str_cell(&self.host),
            Cell::Bool(self.core_detected),
            Cell::List(self.extensions.iter().cloned().collect()),
            self.error.as_ref().map_or(Cell::Null, str_cell),
        ]
    }
}

impl Row for ExtensionShare {
    const COLUMNS: &'static [&'static str] = &["extension", "path", "installations", "share_percent"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            str_cell(&self.name),
            self.path.as_ref().map_or(Cell::Null, str_cell),
            Cell::Int(self.count),
            Cell::Percent(self.share_percent),
        ]
    }
}

fn json_object(columns: &[&str], cells: &[Cell]) -> String {
    let body: Vec<String> =
        columns.iter().zip(cells).map(|(k, v)| format!("{}:{}", serde_json::to_string(k).unwrap(), v.json())).collect();
    format!("{{{}}}", body.join(","))
}

fn csv_table(columns: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(columns).unwrap();
    for row in rows {
        w.write_record(row.iter().map(Cell::text)).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn pretty_table(headers: &[&str], rows: &[Vec<Cell>]) -> String {
    let text: Vec<Vec<String>> =
        rows.iter().map(|r| r.iter().map(|c| c.text().replace(['\n', '\r', '\t'], " ")).collect()).collect();
    let width =
        |i: usize| text.iter().map(|r| r[i].chars().count()).chain([headers[i].chars().count()]).max().unwrap_or(0);
    let widths: Vec<usize> = (0..headers.len()).map(width).collect();
    let right: Vec<bool> = (0..headers.len()).map(|i| rows.first().is_some_and(|r| r[i].right_aligned())).collect();
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if right[i] { format!("{c:>w$}", w = widths[i]) } else { format!("{c:<w$}", w = widths[i]) })
            .collect();
        format!("{}\n", parts.join("  ").trim_end())
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in &text {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Renders rows of any [`Row`] type.
pub fn emit<R: Row>(rows: &[R], format: OutputFormat) -> String {
    let cells: Vec<Vec<Cell>> = rows.iter().map(Row::cells).collect();
    match format {
        OutputFormat::JsonLines => cells.iter().map(|c| json_object(R::COLUMNS, c) + "\n").collect(),
        OutputFormat::Csv => csv_table(R::COLUMNS, &cells),
        OutputFormat::Pretty => pretty_table(R::COLUMNS, &cells),
    }
}

/// Renders an aggregate. JSON lines start with a summary object; CSV has
/// only the extension rows; the pretty form is a table (Extension, Path,
/// Installations %) followed by the totals.
pub fn emit_report(report: &AggregateReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::JsonLines => {
            let summary = json_object(
                &[
                    "kind",
                    "hosts_total",
                    "hosts_reachable",
                    "joomla_total",
                    "joomla_with_any_extension",
                    "core_share_of_reachable",
                    "extension_share_of_joomla",
                ],
                &[
                    str_cell("summary"),
                    Cell::Int(report.hosts_total),
                    Cell::Int(report.hosts_reachable),
                    Cell::Int(report.joomla_total),
                    Cell::Int(report.joomla_with_any_extension),
                    Cell::Percent(report.core_share_of_reachable),
                    Cell::Percent(report.extension_share_of_joomla),
                ],
            );
            let mut columns = vec!["kind"];
            columns.extend(ExtensionShare::COLUMNS);
            let mut out = summary + "\n";
            for row in &report.per_extension {
                let mut cells = vec![str_cell("extension")];
                cells.extend(row.cells());
                out.push_str(&json_object(&columns, &cells));
                out.push('\n');
            }
            out
        }
        OutputFormat::Csv => emit(&report.per_extension, OutputFormat::Csv),
        OutputFormat::Pretty => {
            let rows: Vec<Vec<Cell>> = report
                .per_extension
                .iter()
                .map(|r| {
                    vec![str_cell(&r.name), str_cell(r.path.as_deref().unwrap_or("-")), Cell::Percent(r.share_percent)]
                })
                .collect();
            let mut out = pretty_table(&["Extension", "Path", "Installations %"], &rows);
            out.push_str(&format!(
                "\nhosts: {} total, {} reachable\nJoomla: {} ({}% of reachable)\nwith extensions: {} ({}% of Joomla)\n",
                report.hosts_total,
                report.hosts_reachable,
                report.joomla_total,
                report.core_share_of_reachable,
                report.joomla_with_any_extension,
                report.extension_share_of_joomla,
            ));
            out
        }
    }
}

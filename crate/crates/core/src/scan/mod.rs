//! Lexical marking of candidate XSS and SQL injection sites in extension
//! source trees.
//!
//! JavaScript files are matched line by line against named DOM-XSS source
//! and sink patterns. PHP files go through a small lexer that separates
//! markup, code, strings and comments, then `echo`/`print` arguments and SQL
//! strings are checked for variables outside the configured wrapper calls.
//! Findings are candidates for manual review, not confirmed bugs. Every
//! symbol is reported once per file and kind.

pub mod js;
pub mod php;
pub mod rules;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use js::scan_js;
pub use php::{scan_php_output, scan_php_sql};
pub use rules::{NamedPattern, ScanRuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FindingKind {
    DomSource,
    DomSink,
    UnescapedOutput,
    UnescapedSql,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanFinding {
    pub file: PathBuf,
    pub line: usize,
    pub column: usize,
    pub kind: FindingKind,
    pub pattern_or_symbol: String,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule file: {0}")]
    Parse(String),
    #[error("pattern name {0:?} used twice")]
    DuplicateName(String),
    #[error("pattern {name:?}: {reason}")]
    BadPattern { name: String, reason: String },
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy)]
enum Lang {
    Js,
    Php,
}

fn lang_of(path: &Path) -> Option<Lang> {
    let ext = path.extension()?.to_str()?;
    if ext.eq_ignore_ascii_case("js") {
        Some(Lang::Js)
    } else if ext.eq_ignore_ascii_case("php") {
        Some(Lang::Php)
    } else {
        None
    }
}

/// Scans one file's text by its extension. Other extensions yield nothing.
pub fn scan_file(path: &Path, text: &str, rules: &ScanRuleSet) -> Vec<ScanFinding> {
    match lang_of(path) {
        Some(Lang::Js) => scan_js(path, text, rules),
        Some(Lang::Php) => {
            let mut out = scan_php_output(path, text, rules);
            out.extend(scan_php_sql(path, text, rules));
            out
        }
        None => Vec::new(),
    }
}

/// Walks `root` and scans every `.js` and `.php` file (any letter case).
/// Paths in findings are relative to `root`. Files that cannot be read or
/// are not UTF-8 are skipped with a warning. Output is sorted by file, line,
/// column, kind and symbol.
pub fn scan_tree(root: &Path, rules: &ScanRuleSet) -> Result<Vec<ScanFinding>, ScanError> {
    let io = |source| ScanError::Io { path: root.to_path_buf(), source };
    if !std::fs::metadata(root).map_err(io)?.is_dir() {
        return Err(io(std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory")));
    }
    std::fs::read_dir(root).map_err(io)?;

    let files: Vec<PathBuf> = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_map(|e| match e {
            Ok(e) => Some(e),
            Err(err) => {
                log::warn!("skipping unreadable entry: {err}");
                None
            }
        })
        .filter(|e| e.file_type().is_file() && lang_of(e.path()).is_some())
        .map(|e| e.into_path())
        .collect();

    let mut findings: Vec<ScanFinding> = files
        .par_iter()
        .flat_map_iter(|path| {
            let rel = path.strip_prefix(root).unwrap_or(path);
            match std::fs::read(path) {
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(text) => scan_file(rel, &text, rules),
                    Err(_) => {
                        log::warn!("skipping {}: not valid UTF-8", path.display());
                        Vec::new()
                    }
                },
                Err(err) => {
                    log::warn!("skipping {}: {err}", path.display());
                    Vec::new()
                }
            }
        })
        .collect();
    findings.sort_by(|a, b| {
        (&a.file, a.line, a.column, a.kind, &a.pattern_or_symbol).cmp(&(
            &b.file,
            b.line,
            b.column,
            b.kind,
            &b.pattern_or_symbol,
        ))
    });
    Ok(findings)
}

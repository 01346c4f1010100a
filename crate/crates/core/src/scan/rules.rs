use std::collections::{BTreeSet, HashSet};

use regex::Regex;
use serde::Deserialize;

use super::RuleError;

const BUNDLED: &str = include_str!("../../data/rules.toml");

#[derive(Debug, Clone)]
pub struct NamedPattern {
    pub name: String,
    pub regex: Regex,
}

#[derive(Debug, Clone)]
pub struct ScanRuleSet {
    pub source_patterns: Vec<NamedPattern>,
    pub sink_patterns: Vec<NamedPattern>,
    pub escape_wrappers: BTreeSet<String>,
    pub sql_quote_wrappers: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    #[serde(default)]
    escape_wrappers: BTreeSet<String>,
    #[serde(default)]
    sql_quote_wrappers: BTreeSet<String>,
    #[serde(default)]
    source: Vec<RawPattern>,
    #[serde(default)]
    sink: Vec<RawPattern>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    name: String,
    pattern: String,
}

impl ScanRuleSet {
    /// Parses a rule file:
    ///
    /// ```toml
    /// escape_wrappers = ["htmlentities"]
    /// sql_quote_wrappers = ["intval"]
    ///
    /// [[source]]
    /// name = "window.name"
    /// pattern = '\bwindow\.name\b'
    ///
    /// [[sink]]
    /// name = "eval"
    /// pattern = '\beval\s*\('
    /// ```
    pub fn from_toml(text: &str) -> Result<Self, RuleError> {
        let raw: RawRules = toml::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        let mut names = HashSet::new();
        let mut compile = |list: Vec<RawPattern>| -> Result<Vec<NamedPattern>, RuleError> {
            list.into_iter()
                .map(|p| {
                    if !names.insert(p.name.clone()) {
                        return Err(RuleError::DuplicateName(p.name));
                    }
                    let regex = Regex::new(&p.pattern)
                        .map_err(|e| RuleError::BadPattern { name: p.name.clone(), reason: e.to_string() })?;
                    Ok(NamedPattern { name: p.name, regex })
                })
                .collect()
        };
        Ok(Self {
            source_patterns: compile(raw.source)?,
            sink_patterns: compile(raw.sink)?,
            escape_wrappers: raw.escape_wrappers,
            sql_quote_wrappers: raw.sql_quote_wrappers,
        })
    }
}

impl Default for ScanRuleSet {
    fn default() -> Self {
        Self::from_toml(BUNDLED).expect("bundled rules are valid")
    }
}

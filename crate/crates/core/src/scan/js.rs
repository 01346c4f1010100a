use std::collections::HashSet;
use std::path::Path;

use super::rules::{NamedPattern, ScanRuleSet};
use super::{FindingKind, ScanFinding};

struct Hit<'a> {
    kind: FindingKind,
    name: &'a str,
    start: usize,
    end: usize,
}

fn hits<'a>(line: &str, kind: FindingKind, patterns: &'a [NamedPattern], out: &mut Vec<Hit<'a>>) {
    for p in patterns {
        for m in p.regex.find_iter(line) {
            // Trailing context such as the character after `=` is not part
            // of the match proper.
            let text = m.as_str().trim_end();
            if text.trim_start().is_empty() {
                continue;
            }
            let start = m.start() + (text.len() - text.trim_start().len());
            out.push(Hit { kind, name: &p.name, start, end: m.start() + text.len() });
        }
    }
}

/// Overlapping matches of the same kind keep only the longest, so
/// `document.location.href` counts as `document.location` and not also as
/// `location`. A source lying inside a sink match is the sink's target
/// (`location.href = u`), not a read, and is dropped.
fn drop_overlaps(mut hits: Vec<Hit<'_>>) -> Vec<Hit<'_>> {
    hits.sort_by_key(|h| (h.start, std::cmp::Reverse(h.end - h.start)));
    let mut keep: Vec<Hit> = Vec::new();
    for h in hits {
        let covered = keep.iter().position(|k| k.kind == h.kind && h.start < k.end && k.start < h.end);
        match covered {
            Some(i) if keep[i].end - keep[i].start >= h.end - h.start => {}
            Some(i) => keep[i] = h,
            None => keep.push(h),
        }
    }
    let sinks: Vec<(usize, usize)> =
        keep.iter().filter(|h| h.kind == FindingKind::DomSink).map(|h| (h.start, h.end)).collect();
    keep.retain(|h| h.kind == FindingKind::DomSink || !sinks.iter().any(|&(s, e)| s <= h.start && h.end <= e));
    keep
}

/// DOM-XSS sources and sinks, one finding per pattern per file at its first
/// match.
pub fn scan_js(file: &Path, text: &str, rules: &ScanRuleSet) -> Vec<ScanFinding> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let mut found = Vec::new();
        hits(line, FindingKind::DomSource, &rules.source_patterns, &mut found);
        hits(line, FindingKind::DomSink, &rules.sink_patterns, &mut found);
        let mut found = drop_overlaps(found);
        found.sort_by_key(|h| h.start);
        for h in found {
            if seen.insert((h.kind, h.name)) {
                out.push(ScanFinding {
                    file: file.to_path_buf(),
                    line: idx + 1,
                    column: line[..h.start].chars().count() + 1,
                    kind: h.kind,
                    pattern_or_symbol: h.name.to_string(),
                    excerpt: line.trim().to_string(),
                });
            }
        }
    }
    out
}

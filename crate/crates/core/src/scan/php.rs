//! Lexical PHP scanning: unescaped `echo`/`print` output and SQL strings
//! built from variables.
//!
//! The file is split into HTML, code, string and comment spans by a small
//! lexer; everything else works on byte offsets into the original text. No
//! PHP is parsed beyond that, so findings are candidates for manual review.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::{LazyLock, Mutex};

use regex::Regex;

use super::rules::ScanRuleSet;
use super::{FindingKind, ScanFinding};

static VAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"\$[A-Za-z_]\w*(?:->[A-Za-z_]\w*)*(?:\[(?:'[^'\n]*'|"[^"\n]*"|\$?\w+)\])*"#).unwrap()
});
static OUTPUT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:echo|print)\b").unwrap());
static SQL_START: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:SELECT|INSERT|UPDATE|DELETE|UNION)\b").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Html,
    /// `<?php` or `<?`.
    Open,
    /// `<?=`, an implicit echo.
    EchoOpen,
    /// `?>`.
    Close,
    Code,
    /// Single-quoted string or nowdoc: no interpolation.
    Sq,
    /// Double-quoted string, heredoc or backtick string: interpolating.
    Dq,
    Comment,
}

#[derive(Debug, Clone, Copy)]
struct Span {
    kind: Kind,
    start: usize,
    end: usize,
}

fn starts_with_ci(bytes: &[u8], at: usize, pat: &[u8]) -> bool {
    bytes.len() >= at + pat.len() && bytes[at..at + pat.len()].eq_ignore_ascii_case(pat)
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

struct Lexer<'a> {
    b: &'a [u8],
    spans: Vec<Span>,
}

impl<'a> Lexer<'a> {
    fn push(&mut self, kind: Kind, start: usize, end: usize) {
        if start == end {
            return;
        }
        match self.spans.last_mut() {
            Some(last) if last.kind == kind && last.end == start && matches!(kind, Kind::Code | Kind::Html) => {
                last.end = end;
            }
            _ => self.spans.push(Span { kind, start, end }),
        }
    }

    fn run(mut self) -> Vec<Span> {
        let b = self.b;
        let mut i = 0;
        let mut in_php = false;
        while i < b.len() {
            if !in_php {
                let open = (i..b.len()).find(|&j| b[j] == b'<' && b.get(j + 1) == Some(&b'?'));
                let Some(j) = open else {
                    self.push(Kind::Html, i, b.len());
                    break;
                };
                self.push(Kind::Html, i, j);
                let (kind, len) = if b.get(j + 2) == Some(&b'=') {
                    (Kind::EchoOpen, 3)
                } else if starts_with_ci(b, j + 2, b"php") {
                    (Kind::Open, 5)
                } else {
                    (Kind::Open, 2)
                };
                self.push(kind, j, j + len);
                i = j + len;
                in_php = true;
                continue;
            }
            let c = b[i];
            match c {
                b'\'' | b'"' | b'`' => {
                    let end = quoted_end(b, i, c);
                    self.push(if c == b'\'' { Kind::Sq } else { Kind::Dq }, i, end);
                    i = end;
                }
                b'#' if b.get(i + 1) != Some(&b'[') => i = self.line_comment(i),
                b'/' if b.get(i + 1) == Some(&b'/') => i = self.line_comment(i),
                b'/' if b.get(i + 1) == Some(&b'*') => {
                    let end = find(b, i + 2, b"*/").map_or(b.len(), |e| e + 2);
                    self.push(Kind::Comment, i, end);
                    i = end;
                }
                b'?' if b.get(i + 1) == Some(&b'>') => {
                    self.push(Kind::Close, i, i + 2);
                    i += 2;
                    in_php = false;
                }
                b'<' if b[i..].starts_with(b"<<<") => match heredoc(b, i) {
                    Some((header_end, body_end, kind)) => {
                        self.push(Kind::Code, i, header_end);
                        self.push(kind, header_end, body_end);
                        i = body_end;
                    }
                    None => {
                        self.push(Kind::Code, i, i + 3);
                        i += 3;
                    }
                },
                _ => {
                    let len = utf8_len(c);
                    self.push(Kind::Code, i, (i + len).min(b.len()));
                    i += len;
                }
            }
        }
        self.spans
    }

    /// `//` and `#` comments end at the line end or just before `?>`.
    fn line_comment(&mut self, i: usize) -> usize {
        let mut j = i;
        while j < self.b.len() && self.b[j] != b'\n' && !self.b[j..].starts_with(b"?>") {
            j += 1;
        }
        self.push(Kind::Comment, i, j);
        j
    }
}

fn utf8_len(first: u8) -> usize {
    match first {
        0xF0..=0xFF => 4,
        0xE0..=0xEF => 3,
        0xC0..=0xDF => 2,
        _ => 1,
    }
}

fn find(b: &[u8], from: usize, pat: &[u8]) -> Option<usize> {
    (from..b.len().saturating_sub(pat.len() - 1)).find(|&j| b[j..].starts_with(pat))
}

/// End (exclusive) of a quoted string starting at `i`; unterminated strings
/// run to the end of the text.
fn quoted_end(b: &[u8], i: usize, quote: u8) -> usize {
    let mut j = i + 1;
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            q if q == quote => return j + 1,
            _ => j += 1,
        }
    }
    b.len()
}

/// Parses `<<<ID`, `<<<"ID"` or `<<<'ID'` at `i`. Returns the end of the
/// header line, the offset where the closing identifier line begins, and
/// the body kind.
fn heredoc(b: &[u8], i: usize) -> Option<(usize, usize, Kind)> {
    let mut j = i + 3;
    while b.get(j).is_some_and(|&c| c == b' ' || c == b'\t') {
        j += 1;
    }
    let quote = b.get(j).copied().filter(|&c| c == b'\'' || c == b'"');
    if quote.is_some() {
        j += 1;
    }
    let id_start = j;
    while b.get(j).is_some_and(|&c| is_ident(c)) {
        j += 1;
    }
    if j == id_start || b[id_start].is_ascii_digit() {
        return None;
    }
    let id = &b[id_start..j];
    if let Some(q) = quote {
        if b.get(j) != Some(&q) {
            return None;
        }
        j += 1;
    }
    if b.get(j) == Some(&b'\r') {
        j += 1;
    }
    if b.get(j) != Some(&b'\n') {
        return None;
    }
    let header_end = j + 1;
    let mut line = header_end;
    while line < b.len() {
        let mut k = line;
        while b.get(k).is_some_and(|&c| c == b' ' || c == b'\t') {
            k += 1;
        }
        if b[k..].starts_with(id) && !b.get(k + id.len()).is_some_and(|&c| is_ident(c)) {
            break;
        }
        line = find(b, line, b"\n").map_or(b.len(), |e| e + 1);
    }
    let kind = if quote == Some(b'\'') { Kind::Sq } else { Kind::Dq };
    Some((header_end, line, kind))
}

struct Source<'a> {
    text: &'a str,
    spans: Vec<Span>,
    line_starts: Vec<usize>,
}

impl<'a> Source<'a> {
    fn new(text: &'a str) -> Self {
        let spans = Lexer { b: text.as_bytes(), spans: Vec::new() }.run();
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { text, spans, line_starts }
    }

    fn span_at(&self, offset: usize) -> Option<&Span> {
        let idx = self.spans.partition_point(|s| s.end <= offset);
        self.spans.get(idx).filter(|s| s.start <= offset)
    }

    fn kind_at(&self, offset: usize) -> Option<Kind> {
        self.span_at(offset).map(|s| s.kind)
    }

    fn position(&self, offset: usize) -> (usize, usize, &'a str) {
        let line = self.line_starts.partition_point(|&s| s <= offset) - 1;
        let start = self.line_starts[line];
        let end = self.line_starts.get(line + 1).map_or(self.text.len(), |&e| e - 1);
        let column = self.text[start..offset].chars().count() + 1;
        (line + 1, column, self.text[start..end].trim())
    }

    fn byte(&self, offset: usize) -> Option<u8> {
        self.text.as_bytes().get(offset).copied()
    }

    /// Variables that are code or interpolated into a double-quoted string.
    fn variables(&self) -> Vec<(usize, usize)> {
        VAR.find_iter(self.text)
            .filter(|m| match self.kind_at(m.start()) {
                Some(Kind::Code) => true,
                Some(Kind::Dq) => {
                    let escapes = self.text[..m.start()].bytes().rev().take_while(|&c| c == b'\\').count();
                    escapes % 2 == 0
                }
                _ => false,
            })
            .map(|m| (m.start(), m.end()))
            .collect()
    }

    /// Calls to any of `names`, as `(name_start, open_paren, close_paren)`.
    /// An unclosed call extends to the end of its PHP block.
    fn calls(&self, names: &BTreeSet<String>) -> Vec<(usize, usize, usize)> {
        if names.is_empty() {
            return Vec::new();
        }
        call_regex(names)
            .find_iter(self.text)
            .filter_map(|m| {
                let kind = self.kind_at(m.start()).filter(|k| matches!(k, Kind::Code | Kind::Dq))?;
                let prev = m.start().checked_sub(1).and_then(|p| self.byte(p));
                if prev.is_some_and(|c| is_ident(c) || matches!(c, b'$' | b'>' | b':')) {
                    return None;
                }
                let open = m.end() - 1;
                Some((m.start(), open, self.matching_paren(open, kind)))
            })
            .collect()
    }

    fn matching_paren(&self, open: usize, kind: Kind) -> usize {
        let b = self.text.as_bytes();
        let mut depth = 0usize;
        let mut i = open;
        while i < b.len() {
            let Some(span) = self.span_at(i) else { break };
            if span.kind != kind {
                if matches!(span.kind, Kind::Close | Kind::Html) || kind == Kind::Dq {
                    return span.start;
                }
                i = span.end;
                continue;
            }
            match b[i] {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return i;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        b.len()
    }

    /// End of the statement that continues from `from`: the next `;` in code,
    /// the end of the PHP block, or the end of the text.
    fn statement_end(&self, from: usize) -> usize {
        let idx = self.spans.partition_point(|s| s.end <= from);
        for s in &self.spans[idx..] {
            match s.kind {
                Kind::Code => {
                    let lo = s.start.max(from);
                    if let Some(p) = self.text[lo..s.end].find(';') {
                        return lo + p;
                    }
                }
                Kind::Close | Kind::Html | Kind::Open | Kind::EchoOpen if s.start >= from => return s.start,
                _ => {}
            }
        }
        self.text.len()
    }

    /// Start of the statement containing `at`.
    fn statement_start(&self, at: usize) -> usize {
        let idx = self.spans.partition_point(|s| s.end <= at);
        for s in self.spans[..idx.min(self.spans.len())].iter().rev() {
            match s.kind {
                Kind::Code => {
                    if let Some(p) = self.text[s.start..s.end.min(at)].rfind([';', '{', '}']) {
                        return s.start + p + 1;
                    }
                }
                Kind::Close | Kind::Html | Kind::Open | Kind::EchoOpen => return s.end,
                _ => {}
            }
        }
        0
    }

    fn prev_non_space(&self, offset: usize) -> Option<(usize, u8)> {
        self.text[..offset].bytes().enumerate().rev().find(|(_, c)| !c.is_ascii_whitespace())
    }

    fn next_non_space(&self, offset: usize) -> Option<(usize, u8)> {
        self.text.bytes().enumerate().skip(offset).find(|(_, c)| !c.is_ascii_whitespace())
    }
}

/// One alternation per wrapper set, compiled once per process.
fn call_regex(names: &BTreeSet<String>) -> Regex {
    static CACHE: LazyLock<Mutex<HashMap<BTreeSet<String>, Regex>>> = LazyLock::new(Default::default);
    let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(names.clone())
        .or_insert_with(|| {
            let alt: Vec<String> = names.iter().map(|n| regex::escape(n)).collect();
            Regex::new(&format!(r"(?i)(?:{})[ \t]*\(", alt.join("|"))).unwrap()
        })
        .clone()
}

fn inside(calls: &[(usize, usize, usize)], at: usize) -> bool {
    calls.iter().any(|&(_, open, close)| open < at && at < close)
}

fn is_callee(calls: &[(usize, usize, usize)], at: usize) -> bool {
    calls.iter().any(|&(start, _, _)| start == at)
}

fn finding(src: &Source, file: &Path, kind: FindingKind, at: usize, symbol: &str) -> ScanFinding {
    let (line, column, excerpt) = src.position(at);
    ScanFinding {
        file: file.to_path_buf(),
        line,
        column,
        kind,
        pattern_or_symbol: symbol.to_string(),
        excerpt: excerpt.to_string(),
    }
}

/// Keeps the first occurrence of each symbol, in text order.
fn dedup(src: &Source, file: &Path, kind: FindingKind, mut hits: Vec<(usize, usize)>) -> Vec<ScanFinding> {
    hits.sort_unstable();
    let mut seen = HashSet::new();
    hits.into_iter()
        .filter(|&(s, e)| seen.insert(&src.text[s..e]))
        .map(|(s, e)| finding(src, file, kind, s, &src.text[s..e]))
        .collect()
}

fn output_statements(src: &Source) -> Vec<(usize, usize)> {
    let mut starts: Vec<usize> = OUTPUT
        .find_iter(src.text)
        .filter(|m| src.kind_at(m.start()) == Some(Kind::Code))
        .filter(|m| {
            let prev = m.start().checked_sub(1).and_then(|p| src.byte(p));
            !prev.is_some_and(|c| matches!(c, b'$' | b'>' | b':'))
        })
        .map(|m| m.end())
        .collect();
    starts.extend(src.spans.iter().filter(|s| s.kind == Kind::EchoOpen).map(|s| s.end));
    starts.sort_unstable();
    starts.into_iter().map(|s| (s, src.statement_end(s))).collect()
}

/// Variables passed to `echo`, `print` or `<?=` without an escape wrapper
/// around them. Each variable is reported once per file.
pub fn scan_php_output(file: &Path, text: &str, rules: &ScanRuleSet) -> Vec<ScanFinding> {
    let src = Source::new(text);
    let calls = src.calls(&rules.escape_wrappers);
    let statements = output_statements(&src);
    let hits = src
        .variables()
        .into_iter()
        .filter(|&(s, _)| statements.iter().any(|&(a, b)| a <= s && s < b))
        .filter(|&(s, _)| !inside(&calls, s) && !is_callee(&calls, s))
        .collect();
    dedup(&src, file, FindingKind::UnescapedOutput, hits)
}

/// Variables that reach an SQL string unquoted: interpolated into a
/// double-quoted string or heredoc that starts with an SQL keyword, or
/// concatenated with `.` in a statement holding such a string (single or
/// double quoted). An interpolated variable is exempt when its latest prior
/// assignment is a call to an SQL quote wrapper; a concatenated one is exempt
/// when it sits inside such a call.
pub fn scan_php_sql(file: &Path, text: &str, rules: &ScanRuleSet) -> Vec<ScanFinding> {
    let src = Source::new(text);
    let calls = src.calls(&rules.sql_quote_wrappers);
    let vars = src.variables();

    // Latest assignment per symbol, and whether it came from a quote wrapper.
    let mut assignments: HashMap<&str, Vec<(usize, bool)>> = HashMap::new();
    for &(s, e) in &vars {
        if src.kind_at(s) != Some(Kind::Code) {
            continue;
        }
        let Some((eq, b'=')) = src.next_non_space(e) else { continue };
        if matches!(src.byte(eq + 1), Some(b'=' | b'>')) {
            continue;
        }
        let rhs = src.next_non_space(eq + 1).map(|(p, _)| p);
        let quoted = rhs.is_some_and(|p| is_callee(&calls, p));
        assignments.entry(&src.text[s..e]).or_default().push((s, quoted));
    }
    let quoted_before = |symbol: &str, at: usize| {
        assignments.get(symbol).and_then(|list| list.iter().rev().find(|(p, _)| *p < at)).is_some_and(|&(_, q)| q)
    };

    let mut hits = Vec::new();
    for lit in src.spans.iter().filter(|s| matches!(s.kind, Kind::Sq | Kind::Dq)) {
        let body = &src.text[lit.start..lit.end];
        let content = body.strip_prefix(['"', '\'', '`']).unwrap_or(body);
        if !SQL_START.is_match(content) {
            continue;
        }
        if lit.kind == Kind::Dq {
            for &(s, e) in vars.iter().filter(|(s, _)| lit.start <= *s && *s < lit.end) {
                if !inside(&calls, s) && !is_callee(&calls, s) && !quoted_before(&src.text[s..e], lit.start) {
                    hits.push((s, e));
                }
            }
        }
        let (lo, hi) = (src.statement_start(lit.start), src.statement_end(lit.end));
        for &(s, e) in vars.iter().filter(|(s, _)| lo <= *s && *s < hi) {
            if src.kind_at(s) != Some(Kind::Code) || inside(&calls, s) || is_callee(&calls, s) {
                continue;
            }
            let before = src.prev_non_space(s).is_some_and(|(_, c)| c == b'.');
            let after = src.next_non_space(e).is_some_and(|(p, c)| c == b'.' && src.byte(p + 1) != Some(b'='));
            if before || after {
                hits.push((s, e));
            }
        }
    }
    dedup(&src, file, FindingKind::UnescapedSql, hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(text: &str) -> Vec<String> {
        scan_php_output(Path::new("f.php"), text, &ScanRuleSet::default())
            .into_iter()
            .map(|f| f.pattern_or_symbol)
            .collect()
    }

    fn sql(text: &str) -> Vec<String> {
        scan_php_sql(Path::new("f.php"), text, &ScanRuleSet::default())
            .into_iter()
            .map(|f| f.pattern_or_symbol)
            .collect()
    }

    #[test]
    fn jevents_keyword_echo() {
        let text = r#"<input type="text" name="keyword" value="<?php echo $this->keyword;?>" />"#;
        let f = scan_php_output(Path::new("form_body.php"), text, &ScanRuleSet::default());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].pattern_or_symbol, "$this->keyword");
        assert_eq!(f[0].kind, FindingKind::UnescapedOutput);
        assert_eq!((f[0].line, f[0].column), (1, 53));
        assert!(f[0].excerpt.contains("$this->keyword"));
    }

    #[test]
    fn wrapped_output_is_clean() {
        assert!(out("<?php echo htmlentities($k);").is_empty());
        assert!(out("<?php echo $this->escape($this->keyword); ?>").is_empty());
        assert!(out("<?php echo HTMLSpecialChars($a, ENT_QUOTES), addslashes($b);").is_empty());
        assert!(out("<?php echo \"static\";").is_empty());
    }

    #[test]
    fn mixed_statement() {
        assert_eq!(out("<?php echo htmlentities($a) . $b . '$c' . \"x $d\";"), ["$b", "$d"]);
    }

    #[test]
    fn short_echo_tag_and_print() {
        assert_eq!(out("<p><?= $title ?></p>\n<?php print $row['name']; ?>"), ["$title", "$row['name']"]);
    }

    #[test]
    fn not_output() {
        assert!(out("<?php $echo = $x; $obj->print($y); // echo $z\n/* echo $w */").is_empty());
        assert!(out("<p>echo $notphp</p>").is_empty());
    }

    #[test]
    fn output_dedup() {
        let f = out("<?php\necho $a;\necho $a;\necho $b;\n");
        assert_eq!(f, ["$a", "$b"]);
    }

    #[test]
    fn heredoc_echo() {
        let text = "<?php\necho <<<EOT\n<b>$name</b>\nEOT;\necho <<<'RAW'\n$literal\nRAW;\n";
        assert_eq!(out(text), ["$name"]);
    }

    #[test]
    fn jevents_ics_id_query() {
        let text = r#"<?php
$ics_id=ArrayHelper::getValue($array, "ics_id",0);
  $query = "SELECT catid FROM #__jevents_icsfile WHERE ics_id=$ics_id";
  $db->setQuery( $query);
"#;
        let f = scan_php_sql(Path::new("saveIcalEvent.php"), text, &ScanRuleSet::default());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].pattern_or_symbol, "$ics_id");
        assert_eq!(f[0].line, 3);
        assert!(scan_php_output(Path::new("x.php"), text, &ScanRuleSet::default()).is_empty());
    }

    #[test]
    fn intval_concat_is_clean() {
        assert!(sql(r#"<?php $q = "SELECT * FROM t WHERE id=" . intval($id);"#).is_empty());
        assert!(sql(r#"<?php $q = 'SELECT * FROM t WHERE n=' . $db->quote($n) . ' AND k=' . $db->quoteName($k);"#)
            .is_empty());
    }

    #[test]
    fn concatenated_variables() {
        assert_eq!(sql(r#"<?php $q = 'DELETE FROM t WHERE id=' . $id . ' AND u=' . $u->id;"#), ["$id", "$u->id"]);
        assert!(sql("<?php $q .= $more;").is_empty());
    }

    #[test]
    fn quoted_assignment_exempts_interpolation() {
        let text = "<?php\n$id = intval($_GET['id']);\n$q = \"SELECT * FROM t WHERE id=$id\";\n";
        assert!(sql(text).is_empty());
        let text = "<?php\n$id = intval($_GET['id']);\n$id = $_GET['id'];\n$q = \"SELECT * FROM t WHERE id=$id\";\n";
        assert_eq!(sql(text), ["$id"]);
    }

    #[test]
    fn non_sql_strings_ignored() {
        assert!(sql("<?php $msg = \"Hello $name\"; $x = 'selection' . $y;").is_empty());
        assert!(sql("<?php $s = \"select $col\";").len() == 1);
    }

    #[test]
    fn multi_line_sql_literal() {
        let text = "<?php\n$q = \"\n  UPDATE t\n  SET a = $a\n\";\n";
        let f = scan_php_sql(Path::new("m.php"), text, &ScanRuleSet::default());
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].line, f[0].column), (4, 11));
    }

    #[test]
    fn escaped_dollar_in_string() {
        assert!(out("<?php echo \"cost: \\$price\";").is_empty());
    }
}

//! Classifies how an injected payload comes back in an HTTP response.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::plan::InjectionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectStatus {
    Absent,
    /// Reflected with its breakout characters neutralized.
    Encoded,
    /// Reflected verbatim. This is the vulnerable signal.
    Raw,
}

fn is_marker_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '.' || c == '-'
}

/// Alternatives that count as an encoded form of a breakout character.
fn encoded_alternatives(c: char) -> Option<String> {
    let code = c as u32;
    let entity = |names: &[&str]| {
        let mut alts: Vec<String> = names.iter().map(|n| format!("&{n};")).collect();
        alts.push(format!("&#0*{code};?"));
        alts.push(format!("&#[xX]0*{code:x};?"));
        alts.push(format!("\\\\u0*{code:04x}"));
        format!("(?i:{})", alts.join("|"))
    };
    match c {
        '<' => Some(entity(&["lt"])),
        '>' => Some(entity(&["gt"])),
        '"' => Some(entity(&["quot"])),
        // An apostrophe or ampersand may come back either way.
        '\'' => Some(format!("(?:'|{})", entity(&["apos"]))),
        '&' => Some(format!("(?:&|{})", entity(&["amp"]))),
        _ => None,
    }
}

fn encoded_pattern(payload: &str) -> Regex {
    let mut pattern = String::new();
    let mut literal = String::new();
    for c in payload.chars() {
        match encoded_alternatives(c) {
            Some(alt) => {
                pattern.push_str(&regex::escape(&literal));
                literal.clear();
                pattern.push_str(&alt);
            }
            None => literal.push(c),
        }
    }
    pattern.push_str(&regex::escape(&literal));
    Regex::new(&pattern).expect("escaped pattern is valid")
}

/// True when `[start, end)` does not extend a marker at either edge: a
/// payload that ends in `MAp1-iptc.2.7` must not be credited for a response
/// that actually shows `MAp1-iptc.2.70`.
fn bounded(body: &str, start: usize, end: usize, payload: &str, marker: &str) -> bool {
    if marker.is_empty() {
        return true;
    }
    let before_ok = !payload.starts_with(marker) || !body[..start].chars().next_back().is_some_and(is_marker_char);
    let after_ok = !payload.ends_with(marker) || !body[end..].chars().next().is_some_and(is_marker_char);
    before_ok && after_ok
}

/// Classifies a single payload/marker pair.
///
/// * `Raw` when the payload occurs verbatim.
/// * `Encoded` when the whole payload occurs with every `<`, `>` and `"`
///   written as an HTML character reference or `\uXXXX` escape (`'` and `&`
///   may appear either way).
/// * `Absent` otherwise, including partially escaped reflections.
pub fn classify(body: &str, payload: &str, marker: &str) -> ReflectStatus {
    if payload.is_empty() {
        return ReflectStatus::Absent;
    }
    let raw = body.match_indices(payload).any(|(i, m)| bounded(body, i, i + m.len(), payload, marker));
    if raw {
        return ReflectStatus::Raw;
    }
    let encoded = encoded_pattern(payload).find_iter(body).any(|m| bounded(body, m.start(), m.end(), payload, marker));
    if encoded {
        ReflectStatus::Encoded
    } else {
        ReflectStatus::Absent
    }
}

pub fn reflect_check(body: &str, records: &[InjectionRecord]) -> Vec<(InjectionRecord, ReflectStatus)> {
    records.iter().map(|r| (r.clone(), classify(body, &r.rendered_payload, &r.marker))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const IMG_ONERROR: &str = "<img src=x onerror=\"alert(1)\">";

    #[test]
    fn entity_encoded() {
        let body = "<p>&lt;img src=x onerror=&quot;alert(1)&quot;&gt;</p>";
        assert_eq!(classify(body, IMG_ONERROR, "MAp1-iptc.2.105"), ReflectStatus::Encoded);
    }

    #[test]
    fn verbatim_is_raw() {
        let body = format!("<noscript>{IMG_ONERROR}</noscript>");
        assert_eq!(classify(&body, IMG_ONERROR, "MAp1-iptc.2.105"), ReflectStatus::Raw);
    }

    #[test]
    fn absent() {
        assert_eq!(classify("<html></html>", IMG_ONERROR, "MAp1-iptc.2.105"), ReflectStatus::Absent);
    }

    #[test]
    fn numeric_and_unicode_escapes() {
        let p = "<b>MAp1-id3.TIT2</b>";
        for body in [
            "&#60;b&#62;MAp1-id3.TIT2&#60;/b&#62;",
            "&#x3C;b&#x3e;MAp1-id3.TIT2&#x3c;/b&#X3E;",
            "\"\\u003cb\\u003eMAp1-id3.TIT2\\u003c/b\\u003e\"",
            "&LT;b&GT;MAp1-id3.TIT2&lt;/b&gt;",
        ] {
            assert_eq!(classify(body, p, "MAp1-id3.TIT2"), ReflectStatus::Encoded, "{body}");
        }
    }

    #[test]
    fn partial_encoding_is_absent() {
        let p = "<b>MAp1-id3.TIT2</b>";
        assert_eq!(classify("&lt;b>MAp1-id3.TIT2&lt;/b&gt;", p, "MAp1-id3.TIT2"), ReflectStatus::Absent);
    }

    #[test]
    fn apostrophe_either_way() {
        let p = "<svg/onload=alert('MAp1-id3.TIT2')>";
        let enc = "&lt;svg/onload=alert('MAp1-id3.TIT2')&gt;";
        let enc2 = "&lt;svg/onload=alert(&#039;MAp1-id3.TIT2&#039;)&gt;";
        assert_eq!(classify(enc, p, "MAp1-id3.TIT2"), ReflectStatus::Encoded);
        assert_eq!(classify(enc2, p, "MAp1-id3.TIT2"), ReflectStatus::Encoded);
    }

    #[test]
    fn marker_prefix_not_credited() {
        let short = "<u>MAp1-iptc.2.7";
        let body = "<u>MAp1-iptc.2.70 and more";
        assert_eq!(classify(body, short, "MAp1-iptc.2.7"), ReflectStatus::Absent);
        assert_eq!(classify(body, "<u>MAp1-iptc.2.70", "MAp1-iptc.2.70"), ReflectStatus::Raw);
        assert_eq!(classify("<u>MAp1-iptc.2.7<br>", short, "MAp1-iptc.2.7"), ReflectStatus::Raw);
    }

    #[test]
    fn records_keep_order() {
        let rec = |p: &str, m: &str| InjectionRecord {
            field: crate::media::FieldKey::iptc(2, 105),
            vector_id: "v".into(),
            rendered_payload: p.into(),
            marker: m.into(),
            output: "a.jpg".into(),
        };
        let out = reflect_check("<i>MAa-x</i>", &[rec("<i>MAa-x</i>", "MAa-x"), rec("<b>MAa-y</b>", "MAa-y")]);
        assert_eq!(out[0].1, ReflectStatus::Raw);
        assert_eq!(out[1].1, ReflectStatus::Absent);
    }
}

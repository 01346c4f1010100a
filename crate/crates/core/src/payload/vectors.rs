//! XSS vector catalog.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::CatalogError;

/// Placeholder replaced by the per-field marker when a vector is rendered.
pub const MARKER_PLACEHOLDER: &str = "{{M}}";

const BUNDLED: &str = include_str!("../../data/vectors.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadVector {
    pub id: String,
    pub body: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl PayloadVector {
    pub fn has_placeholder(&self) -> bool {
        self.body.contains(MARKER_PLACEHOLDER)
    }

    pub fn render(&self, marker: &str) -> String {
        self.body.replace(MARKER_PLACEHOLDER, marker)
    }
}

/// Parses a line-delimited catalog: one JSON object `{id, body, tags}` per
/// line, blank lines ignored.
pub fn load_vectors(text: &str) -> Result<Vec<PayloadVector>, CatalogError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let vector: PayloadVector =
            serde_json::from_str(raw).map_err(|e| CatalogError::MalformedRecord { line, reason: e.to_string() })?;
        if vector.id.is_empty() {
            return Err(CatalogError::MalformedRecord { line, reason: "empty id".into() });
        }
        if vector.body.is_empty() {
            return Err(CatalogError::MalformedRecord { line, reason: "empty body".into() });
        }
        if !seen.insert(vector.id.clone()) {
            return Err(CatalogError::DuplicateId { id: vector.id, line });
        }
        out.push(vector);
    }
    Ok(out)
}

/// The catalog shipped with the crate.
pub fn bundled_vectors() -> Vec<PayloadVector> {
    load_vectors(BUNDLED).expect("bundled vector catalog is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_in_order() {
        let text = concat!(
            r#"{"id":"a","body":"<b>{{M}}</b>","tags":["probe"]}"#,
            "\n\n",
            r#"{"id":"b","body":"x\ty","tags":[]}"#,
            "\n"
        );
        let v = load_vectors(text).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].id, "a");
        assert_eq!(v[1].body, "x\ty");
        assert!(v[0].has_placeholder());
        assert_eq!(v[0].render("MAp1-id3.TIT2"), "<b>MAp1-id3.TIT2</b>");
    }

    #[test]
    fn duplicate_id() {
        let line = r#"{"id":"img-onerror-1","body":"<img src=x onerror=alert(1)>"}"#;
        let err = load_vectors(&format!("{line}\n{line}\n")).unwrap_err();
        assert_eq!(err, CatalogError::DuplicateId { id: "img-onerror-1".into(), line: 2 });
    }

    #[test]
    fn malformed_line_number() {
        let text = "{\"id\":\"a\",\"body\":\"x\"}\nnot json\n";
        assert!(matches!(load_vectors(text), Err(CatalogError::MalformedRecord { line: 2, .. })));
        let empty = "{\"id\":\"a\",\"body\":\"\"}";
        assert!(matches!(load_vectors(empty), Err(CatalogError::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn bundled_catalog_size() {
        let v = bundled_vectors();
        assert!(v.len() >= 200, "{}", v.len());
        assert!(v.iter().any(|v| v.body == "<img src=x onerror=\"alert(1)\">"));
    }
}

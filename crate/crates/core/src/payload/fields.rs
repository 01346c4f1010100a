//! Injectable metadata fields and their length limits.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CatalogError;
use crate::media::{FieldKey, MediaFormat};

const BUNDLED: &str = include_str!("../../data/fields.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub key: FieldKey,
    pub display_name: String,
    /// Limit in UTF-8 bytes; `None` is unlimited.
    #[serde(default)]
    pub max_length: Option<usize>,
}

impl FieldDescriptor {
    pub fn fits(&self, payload: &str) -> bool {
        self.max_length.is_none_or(|max| payload.len() <= max)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldCatalog {
    fields: Vec<FieldDescriptor>,
}

impl FieldCatalog {
    pub fn new(fields: Vec<FieldDescriptor>) -> Self {
        Self { fields }
    }

    pub fn all(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn for_format(&self, format: MediaFormat) -> impl Iterator<Item = &FieldDescriptor> {
        self.fields.iter().filter(move |f| f.key.format() == format)
    }

    pub fn get(&self, key: FieldKey) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.key == key)
    }
}

/// Parses a line-delimited field catalog: `{key, display_name, max_length}`
/// per line, with `max_length` null or absent for unlimited fields.
pub fn load_fields(text: &str) -> Result<FieldCatalog, CatalogError> {
    let mut seen = HashSet::new();
    let mut fields = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let field: FieldDescriptor =
            serde_json::from_str(raw).map_err(|e| CatalogError::MalformedRecord { line, reason: e.to_string() })?;
        if field.max_length == Some(0) {
            return Err(CatalogError::MalformedRecord { line, reason: "max_length must be positive".into() });
        }
        if !seen.insert(field.key) {
            return Err(CatalogError::DuplicateId { id: field.key.to_string(), line });
        }
        fields.push(field);
    }
    Ok(FieldCatalog { fields })
}

pub fn bundled_fields() -> FieldCatalog {
    load_fields(BUNDLED).expect("bundled field catalog is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iptc_limits() {
        let cat = bundled_fields();
        let limit = |r, d| cat.get(FieldKey::iptc(r, d)).unwrap().max_length;
        assert_eq!(limit(2, 90), Some(32));
        assert_eq!(limit(2, 105), Some(256));
        assert_eq!(limit(2, 120), Some(2000));
        assert_eq!(limit(2, 101), Some(64));
    }

    #[test]
    fn non_iptc_unlimited() {
        let cat = bundled_fields();
        for format in [MediaFormat::Mp3, MediaFormat::Mp4] {
            assert!(cat.for_format(format).all(|f| f.max_length.is_none()));
        }
        assert_eq!(cat.for_format(MediaFormat::Mp3).count(), 5);
        assert_eq!(cat.for_format(MediaFormat::Mp4).count(), 4);
    }

    #[test]
    fn fits_counts_bytes() {
        let f = FieldDescriptor { key: FieldKey::iptc(2, 90), display_name: "City".into(), max_length: Some(2) };
        assert!(f.fits("ab"));
        assert!(!f.fits("é!"));
    }

    #[test]
    fn rejects_zero_limit_and_duplicates() {
        let zero = r#"{"key":"iptc:2:90","display_name":"City","max_length":0}"#;
        assert!(matches!(load_fields(zero), Err(CatalogError::MalformedRecord { line: 1, .. })));
        let one = r#"{"key":"id3:TIT2","display_name":"Title"}"#;
        assert!(matches!(load_fields(&format!("{one}\n{one}")), Err(CatalogError::DuplicateId { line: 2, .. })));
        let bad_key = r#"{"key":"exif:1","display_name":"x"}"#;
        assert!(matches!(load_fields(bad_key), Err(CatalogError::MalformedRecord { .. })));
    }
}

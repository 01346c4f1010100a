//! Injection plans: which vector goes into which field, under which marker.

use serde::{Deserialize, Serialize};

use super::fields::FieldCatalog;
use super::vectors::PayloadVector;
use super::PlanError;
use crate::media::{write_fields, FieldKey, MediaError, MediaFormat};

const MAX_PLAN_ID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// `vectors[0]` in every field.
    SameVectorAllFields,
    /// The first vector that fits, per field.
    PerFieldAttributed,
    /// One plan per vector, each covering every field.
    FullSweep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldSelection {
    All,
    Only(Vec<FieldKey>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub field: FieldKey,
    pub vector_id: String,
    pub rendered_payload: String,
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SkipReason {
    FieldTooLong { length: usize, max_length: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub field: FieldKey,
    pub vector_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub plan_id: String,
    pub format: MediaFormat,
    pub entries: Vec<PlanEntry>,
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub field: FieldKey,
    pub vector_id: String,
    pub rendered_payload: String,
    pub marker: String,
    pub output: String,
}

fn check_plan_id(plan_id: &str) -> Result<(), PlanError> {
    let ok = (1..=MAX_PLAN_ID).contains(&plan_id.len()) && plan_id.bytes().all(|b| b.is_ascii_alphanumeric());
    if ok {
        Ok(())
    } else {
        Err(PlanError::BadPlanId(plan_id.to_string()))
    }
}

/// Builds the attribution token for one field of one plan.
///
/// The result is `MA<plan_id>-<key>` where `<key>` is the canonical field key
/// with `:` turned into `.`. Any other character outside `[A-Za-z0-9]` (the
/// `©` of iTunes item codes, for instance) is written as `-HH` using its
/// Latin-1 code, so markers stay within `[A-Za-z0-9.-]` and remain distinct.
///
/// ```
/// use metascan::media::FieldKey;
/// use metascan::payload::make_marker;
///
/// assert_eq!(make_marker("p1", FieldKey::iptc(2, 105)).unwrap(), "MAp1-iptc.2.105");
/// assert_eq!(make_marker("p1", "mp4:©nam".parse().unwrap()).unwrap(), "MAp1-mp4.-A9nam");
/// ```
pub fn make_marker(plan_id: &str, field: FieldKey) -> Result<String, PlanError> {
    check_plan_id(plan_id)?;
    let mut out = format!("MA{plan_id}-");
    let key = field.to_string();
    let (scheme, rest) = key.split_once(':').expect("field keys carry a scheme");
    out.push_str(scheme);
    out.push('.');
    for c in rest.chars() {
        match c {
            ':' => out.push('.'),
            c if c.is_ascii_alphanumeric() => out.push(c),
            // Field keys only hold Latin-1 characters.
            c => out.push_str(&format!("-{:02X}", c as u32)),
        }
    }
    Ok(out)
}

fn selected_fields(
    catalog: &FieldCatalog,
    format: MediaFormat,
    selection: &FieldSelection,
) -> Result<Vec<FieldKey>, PlanError> {
    match selection {
        FieldSelection::All => Ok(catalog.for_format(format).map(|f| f.key).collect()),
        FieldSelection::Only(keys) => {
            let mut out: Vec<FieldKey> = Vec::with_capacity(keys.len());
            for &key in keys {
                if key.format() != format || catalog.get(key).is_none() {
                    return Err(PlanError::UnknownField(key));
                }
                if !out.contains(&key) {
                    out.push(key);
                }
            }
            Ok(out)
        }
    }
}

fn sweep_ids(plan_id: &str, count: usize) -> Result<Vec<String>, PlanError> {
    let mut width = 1;
    while 36usize.pow(width as u32) < count {
        width += 1;
    }
    if plan_id.len() + width > MAX_PLAN_ID {
        return Err(PlanError::BadPlanId(plan_id.to_string()));
    }
    Ok((0..count)
        .map(|i| {
            let mut digits = vec![b'0'; width];
            let mut n = i;
            for slot in digits.iter_mut().rev() {
                *slot = b"0123456789abcdefghijklmnopqrstuvwxyz"[n % 36];
                n /= 36;
            }
            format!("{plan_id}{}", String::from_utf8(digits).unwrap())
        })
        .collect())
}

/// Assigns vectors to fields. Returns a single plan, except in
/// [`PlanMode::FullSweep`] where there is one plan per vector with ids
/// `plan_id` followed by a fixed-width base-36 index.
///
/// Pairings whose rendered payload exceeds the field's limit are never
/// truncated; they land in `skipped`.
pub fn build_plan(
    catalog: &FieldCatalog,
    format: MediaFormat,
    selection: &FieldSelection,
    vectors: &[PayloadVector],
    mode: PlanMode,
    plan_id: &str,
) -> Result<Vec<InjectionPlan>, PlanError> {
    check_plan_id(plan_id)?;
    let fields = selected_fields(catalog, format, selection)?;
    if vectors.is_empty() {
        return Err(PlanError::EmptyVectorSet);
    }

    let single = |plan_id: &str, vector: &PayloadVector| -> Result<InjectionPlan, PlanError> {
        let mut plan = InjectionPlan { plan_id: plan_id.to_string(), format, entries: vec![], skipped: vec![] };
        for &field in &fields {
            let marker = make_marker(plan_id, field)?;
            place(&mut plan, catalog, field, vector, marker);
        }
        Ok(plan)
    };

    match mode {
        PlanMode::SameVectorAllFields => Ok(vec![single(plan_id, &vectors[0])?]),
        PlanMode::FullSweep => {
            let ids = sweep_ids(plan_id, vectors.len())?;
            ids.iter().zip(vectors).map(|(id, v)| single(id, v)).collect()
        }
        PlanMode::PerFieldAttributed => {
            let mut plan = InjectionPlan { plan_id: plan_id.to_string(), format, entries: vec![], skipped: vec![] };
            for &field in &fields {
                let marker = make_marker(plan_id, field)?;
                for vector in vectors {
                    if place(&mut plan, catalog, field, vector, marker.clone()) {
                        break;
                    }
                }
            }
            Ok(vec![plan])
        }
    }
}

/// Adds the pairing as an entry if it fits, otherwise records the skip.
fn place(
    plan: &mut InjectionPlan,
    catalog: &FieldCatalog,
    field: FieldKey,
    vector: &PayloadVector,
    marker: String,
) -> bool {
    let descriptor = catalog.get(field).expect("selected fields come from the catalog");
    let rendered = vector.render(&marker);
    match descriptor.max_length {
        Some(max) if rendered.len() > max => {
            plan.skipped.push(SkippedEntry {
                field,
                vector_id: vector.id.clone(),
                reason: SkipReason::FieldTooLong { length: rendered.len(), max_length: max },
            });
            false
        }
        _ => {
            plan.entries.push(PlanEntry { field, vector_id: vector.id.clone(), rendered_payload: rendered, marker });
            true
        }
    }
}

/// Writes every plan entry into the media file. `output` names the produced
/// file in the returned records.
pub fn apply_plan(
    media: &[u8],
    plan: &InjectionPlan,
    output: &str,
) -> Result<(Vec<u8>, Vec<InjectionRecord>), MediaError> {
    let fields: Vec<(FieldKey, String)> = plan.entries.iter().map(|e| (e.field, e.rendered_payload.clone())).collect();
    let bytes = write_fields(media, plan.format, &fields)?;
    let records = plan
        .entries
        .iter()
        .map(|e| InjectionRecord {
            field: e.field,
            vector_id: e.vector_id.clone(),
            rendered_payload: e.rendered_payload.clone(),
            marker: e.marker.clone(),
            output: output.to_string(),
        })
        .collect();
    Ok((bytes, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::fields::bundled_fields;

    fn vector(id: &str, body: &str) -> PayloadVector {
        PayloadVector { id: id.into(), body: body.into(), tags: Default::default() }
    }

    #[test]
    fn marker_definition() {
        assert_eq!(make_marker("p1", FieldKey::iptc(2, 105)).unwrap(), "MAp1-iptc.2.105");
        assert_eq!(make_marker("p1", "id3:TIT2".parse().unwrap()).unwrap(), "MAp1-id3.TIT2");
        assert_eq!(make_marker("p1", FieldKey::iptc(2, 105)), make_marker("p1", FieldKey::iptc(2, 105)));
    }

    #[test]
    fn bad_plan_ids() {
        for id in ["a b", "", "123456789", "p-1", "p\u{e9}"] {
            assert!(matches!(make_marker(id, FieldKey::iptc(2, 5)), Err(PlanError::BadPlanId(_))), "{id:?}");
        }
    }

    #[test]
    fn same_vector_all_jpeg_fields() {
        let cat = bundled_fields();
        let plans = build_plan(
            &cat,
            MediaFormat::Jpeg,
            &FieldSelection::All,
            &[vector("v", "'\"><")],
            PlanMode::SameVectorAllFields,
            "p1",
        )
        .unwrap();
        assert_eq!(plans.len(), 1);
        assert_eq!(plans[0].entries.len(), cat.for_format(MediaFormat::Jpeg).count());
        assert!(plans[0].skipped.is_empty());
    }

    #[test]
    fn city_overflow_is_skipped() {
        let cat = bundled_fields();
        let body = format!("<svg/onload=alert('{}')>", "A".repeat(18));
        assert_eq!(body.len(), 40);
        let plan = &build_plan(
            &cat,
            MediaFormat::Jpeg,
            &FieldSelection::Only(vec![FieldKey::iptc(2, 90)]),
            &[vector("long", &body)],
            PlanMode::SameVectorAllFields,
            "p1",
        )
        .unwrap()[0];
        assert!(plan.entries.is_empty());
        assert_eq!(plan.skipped.len(), 1);
        assert!(matches!(plan.skipped[0].reason, SkipReason::FieldTooLong { length: 40, max_length: 32 }));
    }

    #[test]
    fn headline_verbatim() {
        let cat = bundled_fields();
        let body = "<img src=x onerror=\"alert(1)\">";
        let plan = &build_plan(
            &cat,
            MediaFormat::Jpeg,
            &FieldSelection::Only(vec![FieldKey::iptc(2, 105)]),
            &[vector("img", body)],
            PlanMode::PerFieldAttributed,
            "p1",
        )
        .unwrap()[0];
        assert_eq!(plan.entries[0].rendered_payload, body);
    }

    #[test]
    fn per_field_first_fit() {
        let cat = bundled_fields();
        let vs = [vector("long", &"x".repeat(40)), vector("short", "<b>{{M}}</b>")];
        let plan = &build_plan(
            &cat,
            MediaFormat::Jpeg,
            &FieldSelection::Only(vec![FieldKey::iptc(2, 90), FieldKey::iptc(2, 105)]),
            &vs,
            PlanMode::PerFieldAttributed,
            "p1",
        )
        .unwrap()[0];
        let ids: Vec<_> = plan.entries.iter().map(|e| (e.field, e.vector_id.as_str())).collect();
        assert_eq!(ids, [(FieldKey::iptc(2, 90), "short"), (FieldKey::iptc(2, 105), "long")]);
        assert_eq!(plan.skipped.len(), 1);
        assert_eq!(plan.entries[0].rendered_payload, "<b>MAp1-iptc.2.90</b>");
    }

    #[test]
    fn full_sweep_ids() {
        let cat = bundled_fields();
        let vs: Vec<_> = (0..40).map(|i| vector(&format!("v{i}"), "{{M}}")).collect();
        let plans = build_plan(&cat, MediaFormat::Mp3, &FieldSelection::All, &vs, PlanMode::FullSweep, "s").unwrap();
        assert_eq!(plans.len(), 40);
        assert_eq!(plans[0].plan_id, "s00");
        assert_eq!(plans[36].plan_id, "s10");
        assert_eq!(plans[39].entries[0].rendered_payload, "MAs13-id3.TIT2");
        let err = build_plan(&cat, MediaFormat::Mp3, &FieldSelection::All, &vs, PlanMode::FullSweep, "abcdefg");
        assert!(matches!(err, Err(PlanError::BadPlanId(_))));
    }

    #[test]
    fn errors() {
        let cat = bundled_fields();
        let only = FieldSelection::Only(vec!["id3:TIT2".parse().unwrap()]);
        let v = [vector("v", "x")];
        assert_eq!(
            build_plan(&cat, MediaFormat::Jpeg, &only, &v, PlanMode::FullSweep, "p"),
            Err(PlanError::UnknownField("id3:TIT2".parse().unwrap()))
        );
        let unknown = FieldSelection::Only(vec![FieldKey::iptc(2, 0)]);
        assert!(matches!(
            build_plan(&cat, MediaFormat::Jpeg, &unknown, &v, PlanMode::FullSweep, "p"),
            Err(PlanError::UnknownField(_))
        ));
        assert_eq!(
            build_plan(&cat, MediaFormat::Mp3, &FieldSelection::All, &[], PlanMode::FullSweep, "p"),
            Err(PlanError::EmptyVectorSet)
        );
    }

    #[test]
    fn empty_plan_is_identity() {
        let plan = InjectionPlan { plan_id: "p".into(), format: MediaFormat::Mp3, entries: vec![], skipped: vec![] };
        let input = [0xFF, 0xFB, 0x90, 0x64, 1, 2, 3];
        let (out, records) = apply_plan(&input, &plan, "x.mp3").unwrap();
        assert_eq!(out, input);
        assert!(records.is_empty());
    }
}

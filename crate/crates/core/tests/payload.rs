use std::collections::{BTreeMap, HashSet};

use metascan::media::id3::FrameId;
use metascan::media::mp4::FourCC;
use metascan::media::{extract_metadata, FieldKey, MediaFormat};
use metascan::payload::{
    apply_plan, build_plan, bundled_fields, bundled_vectors, classify, make_marker, FieldSelection, PayloadVector,
    PlanMode, ReflectStatus,
};
use metascan_testkit::media as gen;
use proptest::prelude::*;

fn any_field_key() -> impl Strategy<Value = FieldKey> {
    prop_oneof![
        (any::<u8>(), any::<u8>()).prop_map(|(r, d)| FieldKey::iptc(r, d)),
        "[A-Z0-9]{4}".prop_map(|s| FieldKey::Id3(s.parse::<FrameId>().unwrap())),
        any::<[u8; 4]>().prop_map(|b| FieldKey::Mp4(FourCC(b))),
    ]
}

fn any_mode() -> impl Strategy<Value = PlanMode> {
    prop_oneof![Just(PlanMode::SameVectorAllFields), Just(PlanMode::PerFieldAttributed), Just(PlanMode::FullSweep)]
}

fn any_format() -> impl Strategy<Value = MediaFormat> {
    prop_oneof![Just(MediaFormat::Jpeg), Just(MediaFormat::Mp3), Just(MediaFormat::Mp4)]
}

fn vector_set() -> impl Strategy<Value = Vec<PayloadVector>> {
    proptest::collection::vec(("[a-z<>\"' =()]{0,60}", any::<bool>(), 0usize..300), 1..12).prop_map(|parts| {
        parts
            .into_iter()
            .enumerate()
            .map(|(i, (body, with_marker, pad))| {
                let mut body = format!("x{body}{}", "y".repeat(pad));
                if with_marker {
                    body.insert_str(1, "{{M}}");
                }
                PayloadVector { id: format!("v{i}"), body, tags: Default::default() }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn rendered_payloads_respect_limits(
        format in any_format(),
        vectors in vector_set(),
        mode in any_mode(),
        pick in proptest::collection::vec(any::<bool>(), 32),
    ) {
        let catalog = bundled_fields();
        let keys: Vec<FieldKey> = catalog
            .for_format(format)
            .zip(pick.iter().cycle())
            .filter(|(_, &keep)| keep)
            .map(|(f, _)| f.key)
            .collect();
        let plans = build_plan(&catalog, format, &FieldSelection::Only(keys.clone()), &vectors, mode, "q")
            .unwrap();
        for plan in &plans {
            for e in &plan.entries {
                let max = catalog.get(e.field).unwrap().max_length;
                prop_assert!(max.is_none_or(|m| e.rendered_payload.len() <= m));
            }
            let markers: HashSet<_> = plan.entries.iter().map(|e| &e.marker).collect();
            prop_assert_eq!(markers.len(), plan.entries.len());
            if mode != PlanMode::PerFieldAttributed {
                prop_assert_eq!(plan.entries.len() + plan.skipped.len(), keys.len());
            }
        }
    }

    #[test]
    fn markers_are_injective(
        a in ("[A-Za-z0-9]{1,8}", any_field_key()),
        b in ("[A-Za-z0-9]{1,8}", any_field_key()),
    ) {
        let ma = make_marker(&a.0, a.1).unwrap();
        let mb = make_marker(&b.0, b.1).unwrap();
        prop_assert!(ma.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-'));
        prop_assert_eq!(ma == mb, a == b);
    }

    #[test]
    fn raw_implies_substring(
        body in "[a-c<>\"'&; MA.-]{0,40}",
        payload in "[a-c<>\"'& MA.-]{1,8}",
        marker in "[a-cMA.-]{0,4}",
    ) {
        if classify(&body, &payload, &marker) == ReflectStatus::Raw {
            prop_assert!(body.contains(&payload));
        }
    }

    #[test]
    fn html_escaped_reflection_is_encoded(
        before in "[a-z ]{0,10}",
        payload in "[a-z<>\"]{0,6}<[a-z<>\"' ]{0,6}",
        after in "[a-z ]{0,10}",
    ) {
        // The same replacements PHP's htmlspecialchars applies by default.
        let escaped = payload
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;");
        let body = format!("{before} {escaped} {after}");
        prop_assert_eq!(classify(&body, &payload, ""), ReflectStatus::Encoded);
    }
}

fn base_media(format: MediaFormat, seed: u64) -> Vec<u8> {
    match format {
        MediaFormat::Jpeg => gen::jpeg(seed).bytes,
        MediaFormat::Mp3 => gen::mp3(seed).bytes,
        MediaFormat::Mp4 => gen::mp4(seed).bytes,
    }
}

/// Applying a plan and reading the file back yields exactly the planned map
/// for the planned fields, over the whole bundled catalog.
#[test]
fn apply_then_extract_reproduces_plan() {
    let catalog = bundled_fields();
    let vectors = bundled_vectors();
    for format in MediaFormat::ALL {
        let plans = build_plan(&catalog, format, &FieldSelection::All, &vectors, PlanMode::FullSweep, "e2e").unwrap();
        assert_eq!(plans.len(), vectors.len());
        for (i, plan) in plans.iter().enumerate() {
            let base = base_media(format, i as u64 % 16);
            let (out, records) = apply_plan(&base, plan, "out").unwrap();
            assert_eq!(records.len(), plan.entries.len());
            let doc = extract_metadata(&out, format).unwrap();
            let planned: BTreeMap<_, _> = plan.entries.iter().map(|e| (e.field, e.rendered_payload.clone())).collect();
            for (k, v) in &planned {
                assert_eq!(doc.fields.get(k), Some(v), "{format} {} {k}", plan.plan_id);
            }
            for r in &records {
                let vector = vectors.iter().find(|v| v.id == r.vector_id).unwrap();
                if vector.has_placeholder() {
                    assert!(r.rendered_payload.contains(&r.marker));
                }
            }
        }
    }
}

#[test]
fn per_field_plan_gives_distinct_markers() {
    let catalog = bundled_fields();
    let fields = FieldSelection::Only(vec![FieldKey::iptc(2, 90), FieldKey::iptc(2, 105), FieldKey::iptc(2, 120)]);
    let plan = build_plan(&catalog, MediaFormat::Jpeg, &fields, &bundled_vectors(), PlanMode::PerFieldAttributed, "p1")
        .unwrap()
        .remove(0);
    let (_, records) = apply_plan(&gen::jpeg(3).bytes, &plan, "a.jpg").unwrap();
    assert_eq!(records.len(), 3);
    let markers: HashSet<_> = records.iter().map(|r| r.marker.as_str()).collect();
    assert_eq!(markers.len(), 3);
}

#[test]
fn every_jpeg_field_gets_a_vector() {
    let catalog = bundled_fields();
    let plan = build_plan(
        &catalog,
        MediaFormat::Jpeg,
        &FieldSelection::All,
        &bundled_vectors(),
        PlanMode::PerFieldAttributed,
        "p1",
    )
    .unwrap()
    .remove(0);
    assert_eq!(plan.entries.len(), catalog.for_format(MediaFormat::Jpeg).count());
}

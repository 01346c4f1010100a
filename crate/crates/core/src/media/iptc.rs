//! IPTC-IIM datasets carried in Photoshop image resources inside APP13.
//!
//! Wire layout of one standard dataset:
//!
//! ```text
//! 0x1C | record | dataset | length (u16 BE, high bit clear) | payload
//! ```
//!
//! Datasets live in the `8BIM` resource `0x0404`, which in turn lives in an
//! APP13 segment starting with `"Photoshop 3.0\0"`.

use thiserror::Error;

use super::jpeg::{JpegImage, Segment, APP13, MAX_SEGMENT_PAYLOAD};

pub const PHOTOSHOP_HEADER: &[u8] = b"Photoshop 3.0\0";
pub const RESOURCE_SIGNATURE: &[u8; 4] = b"8BIM";
pub const IPTC_RESOURCE_ID: u16 = 0x0404;
/// MD5 digest of the IPTC block; stale once the block is rewritten.
pub const IPTC_DIGEST_RESOURCE_ID: u16 = 0x0425;
pub const TAG_MARKER: u8 = 0x1C;
/// Largest payload a standard (non-extended) dataset can declare.
pub const MAX_DATASET_PAYLOAD: usize = 0x7FFF;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IptcError {
    #[error("dataset payload of {len} bytes exceeds the {MAX_DATASET_PAYLOAD}-byte standard limit")]
    FieldTooLong { len: usize },
    #[error("malformed IPTC data: {0}")]
    MalformedIptc(&'static str),
    #[error("APP13 payload of {len} bytes does not fit in one segment")]
    BadLength { len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IptcDataSet {
    pub record: u8,
    pub dataset: u8,
    pub payload: Vec<u8>,
}

impl IptcDataSet {
    pub fn new(record: u8, dataset: u8, payload: impl Into<Vec<u8>>) -> Self {
        Self { record, dataset, payload: payload.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotoshopResourceBlock {
    pub resource_id: u16,
    /// Pascal string content, without the length byte or padding.
    pub name: Vec<u8>,
    pub data: Vec<u8>,
}

pub fn encode_iptc_dataset(record: u8, dataset: u8, payload: &[u8]) -> Result<Vec<u8>, IptcError> {
    if payload.len() > MAX_DATASET_PAYLOAD {
        return Err(IptcError::FieldTooLong { len: payload.len() });
    }
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(&[TAG_MARKER, record, dataset]);
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn encode_iim(datasets: &[IptcDataSet]) -> Result<Vec<u8>, IptcError> {
    let mut out = Vec::new();
    for ds in datasets {
        out.extend(encode_iptc_dataset(ds.record, ds.dataset, &ds.payload)?);
    }
    Ok(out)
}

pub fn decode_iim(bytes: &[u8]) -> Result<Vec<IptcDataSet>, IptcError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes[pos] != TAG_MARKER {
            // Some writers zero-pad the resource data.
            if bytes[pos..].iter().all(|&b| b == 0) {
                break;
            }
            return Err(IptcError::MalformedIptc("expected dataset tag marker 0x1C"));
        }
        if bytes.len() - pos < 5 {
            return Err(IptcError::MalformedIptc("dataset header truncated"));
        }
        let len_field = u16::from_be_bytes([bytes[pos + 3], bytes[pos + 4]]);
        if len_field & 0x8000 != 0 {
            return Err(IptcError::MalformedIptc("extended datasets are not supported"));
        }
        let start = pos + 5;
        let end = start + len_field as usize;
        if end > bytes.len() {
            return Err(IptcError::MalformedIptc("dataset payload truncated"));
        }
        out.push(IptcDataSet::new(bytes[pos + 1], bytes[pos + 2], &bytes[start..end]));
        pos = end;
    }
    Ok(out)
}

fn padded_name_len(name_len: usize) -> usize {
    let n = 1 + name_len;
    n + (n & 1)
}

pub fn parse_resources(bytes: &[u8]) -> Result<Vec<PhotoshopResourceBlock>, IptcError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.iter().all(|&b| b == 0) {
            break;
        }
        if rest.len() < 7 || &rest[..4] != RESOURCE_SIGNATURE {
            return Err(IptcError::MalformedIptc("bad 8BIM resource header"));
        }
        let resource_id = u16::from_be_bytes([rest[4], rest[5]]);
        let name_len = rest[6] as usize;
        let name_end = 6 + padded_name_len(name_len);
        if rest.len() < name_end + 4 {
            return Err(IptcError::MalformedIptc("8BIM resource truncated"));
        }
        let name = rest[7..7 + name_len].to_vec();
        let size = u32::from_be_bytes(rest[name_end..name_end + 4].try_into().unwrap()) as usize;
        let data_start = name_end + 4;
        if rest.len() - data_start < size {
            return Err(IptcError::MalformedIptc("8BIM resource data truncated"));
        }
        let data = rest[data_start..data_start + size].to_vec();
        out.push(PhotoshopResourceBlock { resource_id, name, data });
        // The pad byte after odd-sized data is sometimes missing at the end.
        pos += (data_start + size + (size & 1)).min(rest.len());
    }
    Ok(out)
}

pub fn serialize_resources(blocks: &[PhotoshopResourceBlock]) -> Vec<u8> {
    let mut out = Vec::new();
    for b in blocks {
        out.extend_from_slice(RESOURCE_SIGNATURE);
        out.extend_from_slice(&b.resource_id.to_be_bytes());
        let name_len = b.name.len().min(255);
        out.push(name_len as u8);
        out.extend_from_slice(&b.name[..name_len]);
        if (1 + name_len) & 1 == 1 {
            out.push(0);
        }
        out.extend_from_slice(&(b.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&b.data);
        if b.data.len() & 1 == 1 {
            out.push(0);
        }
    }
    out
}

/// Resource blocks of a Photoshop APP13 segment, `None` for other APP13 uses.
fn photoshop_blocks(seg: &Segment) -> Result<Option<Vec<PhotoshopResourceBlock>>, IptcError> {
    if seg.marker != APP13 {
        return Ok(None);
    }
    if let Some(rest) = seg.payload.strip_prefix(PHOTOSHOP_HEADER) {
        return parse_resources(rest).map(Some);
    }
    if seg.payload.first() == Some(&TAG_MARKER) {
        return Err(IptcError::MalformedIptc("bare IIM in APP13 without Photoshop resources"));
    }
    Ok(None)
}

pub fn get_iptc(image: &JpegImage) -> Result<Vec<IptcDataSet>, IptcError> {
    let mut iim = Vec::new();
    for seg in &image.segments {
        if let Some(blocks) = photoshop_blocks(seg)? {
            for b in blocks.into_iter().filter(|b| b.resource_id == IPTC_RESOURCE_ID) {
                iim.extend(b.data);
            }
        }
    }
    decode_iim(&iim)
}

/// Replaces all IPTC data with `datasets`, carried in a single APP13
/// segment. Other Photoshop resources are kept (minus the IPTC digest).
pub fn set_iptc(image: &JpegImage, datasets: &[IptcDataSet]) -> Result<JpegImage, IptcError> {
    let iim = encode_iim(datasets)?;

    let mut kept_blocks = Vec::new();
    let mut segments = Vec::with_capacity(image.segments.len() + 1);
    for seg in &image.segments {
        let is_iptc_carrier = seg.marker == APP13
            && (seg.payload.starts_with(PHOTOSHOP_HEADER) || seg.payload.first() == Some(&TAG_MARKER));
        if !is_iptc_carrier {
            segments.push(seg.clone());
            continue;
        }
        if let Some(blocks) = photoshop_blocks(seg).unwrap_or(None) {
            kept_blocks.extend(
                blocks
                    .into_iter()
                    .filter(|b| b.resource_id != IPTC_RESOURCE_ID && b.resource_id != IPTC_DIGEST_RESOURCE_ID),
            );
        }
    }
    kept_blocks.push(PhotoshopResourceBlock { resource_id: IPTC_RESOURCE_ID, name: Vec::new(), data: iim });

    let mut payload = PHOTOSHOP_HEADER.to_vec();
    payload.extend(serialize_resources(&kept_blocks));
    if payload.len() > MAX_SEGMENT_PAYLOAD {
        return Err(IptcError::BadLength { len: payload.len() });
    }

    let mut out = JpegImage { segments, entropy_data: image.entropy_data.clone(), trailing: image.trailing.clone() };
    let at = out.app_insert_index();
    out.segments.insert(at, Segment::new(APP13, payload));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::jpeg::{parse_jpeg, serialize_jpeg};

    fn app13(resources: &[PhotoshopResourceBlock]) -> Segment {
        let mut p = PHOTOSHOP_HEADER.to_vec();
        p.extend(serialize_resources(resources));
        Segment::new(APP13, p)
    }

    fn iptc_block(data: &[u8]) -> PhotoshopResourceBlock {
        PhotoshopResourceBlock { resource_id: IPTC_RESOURCE_ID, name: vec![], data: data.to_vec() }
    }

    #[test]
    fn encode_single_byte_headline() {
        assert_eq!(encode_iptc_dataset(2, 105, b"A").unwrap(), [0x1C, 0x02, 0x69, 0x00, 0x01, 0x41]);
    }

    #[test]
    fn encode_empty_dataset() {
        assert_eq!(encode_iptc_dataset(2, 105, b"").unwrap(), [0x1C, 0x02, 0x69, 0x00, 0x00]);
    }

    #[test]
    fn encode_rejects_oversize() {
        assert_eq!(encode_iptc_dataset(2, 105, &vec![b'a'; 40_000]), Err(IptcError::FieldTooLong { len: 40_000 }));
    }

    #[test]
    fn no_app13_means_no_datasets() {
        let img = parse_jpeg(&[0xFF, 0xD8, 0xFF, 0xD9]).unwrap();
        assert!(get_iptc(&img).unwrap().is_empty());
    }

    #[test]
    fn truncated_after_tag_marker() {
        let img = JpegImage { segments: vec![app13(&[iptc_block(&[0x1C])])], ..Default::default() };
        assert!(matches!(get_iptc(&img), Err(IptcError::MalformedIptc(_))));
    }

    #[test]
    fn bare_app13_rejected() {
        let seg = Segment::new(APP13, encode_iptc_dataset(2, 90, b"x").unwrap());
        let img = JpegImage { segments: vec![seg], ..Default::default() };
        assert!(matches!(get_iptc(&img), Err(IptcError::MalformedIptc(_))));
    }

    #[test]
    fn extended_dataset_rejected() {
        let data = [0x1C, 2, 105, 0x80, 0x04, 0, 0, 0, 1, b'x'];
        assert!(matches!(decode_iim(&data), Err(IptcError::MalformedIptc(_))));
    }

    #[test]
    fn split_across_segments_is_concatenated() {
        let all = encode_iim(&[IptcDataSet::new(2, 90, "Bonn"), IptcDataSet::new(2, 105, "Head")]).unwrap();
        let (a, b) = all.split_at(7);
        let img = JpegImage { segments: vec![app13(&[iptc_block(a)]), app13(&[iptc_block(b)])], ..Default::default() };
        let got = get_iptc(&img).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[1].payload, b"Head");
    }

    #[test]
    fn set_places_app13_after_app_segments_and_keeps_others() {
        let other = PhotoshopResourceBlock { resource_id: 0x03ED, name: b"res".to_vec(), data: vec![1, 2, 3] };
        let digest = PhotoshopResourceBlock { resource_id: IPTC_DIGEST_RESOURCE_ID, name: vec![], data: vec![0; 16] };
        let img = JpegImage {
            segments: vec![
                Segment::new(0xE0, b"JFIF\0".to_vec()),
                app13(&[other.clone(), digest, iptc_block(&[])]),
                Segment::new(0xE1, b"Exif\0\0".to_vec()),
                Segment::new(0xDB, vec![0; 65]),
            ],
            entropy_data: vec![1, 2, 3],
            trailing: vec![],
        };
        let ds = vec![IptcDataSet::new(2, 105, "<img src=x onerror=\"alert(1)\">")];
        let out = set_iptc(&img, &ds).unwrap();
        let markers: Vec<u8> = out.segments.iter().map(|s| s.marker).collect();
        assert_eq!(markers, [0xE0, 0xE1, APP13, 0xDB]);
        assert_eq!(get_iptc(&out).unwrap(), ds);
        let blocks = parse_resources(&out.segments[2].payload[PHOTOSHOP_HEADER.len()..]).unwrap();
        assert_eq!(blocks[0], other);
        assert!(blocks.iter().all(|b| b.resource_id != IPTC_DIGEST_RESOURCE_ID));
        assert_eq!(out.entropy_data, img.entropy_data);
    }

    #[test]
    fn set_on_bare_image() {
        let img = parse_jpeg(&[0xFF, 0xD8, 0xFF, 0xD9]).unwrap();
        let ds = vec![IptcDataSet::new(2, 90, "Test")];
        let out = set_iptc(&img, &ds).unwrap();
        let bytes = serialize_jpeg(&out).unwrap();
        assert_eq!(get_iptc(&parse_jpeg(&bytes).unwrap()).unwrap(), ds);
    }

    #[test]
    fn set_capacity_bound() {
        let img = JpegImage::default();
        let ds: Vec<_> = (0..3).map(|i| IptcDataSet::new(2, 120 + i, vec![b'x'; 21_900])).collect();
        assert!(matches!(set_iptc(&img, &ds), Err(IptcError::BadLength { .. })));
    }

    #[test]
    fn odd_name_and_data_padding_round_trip() {
        let blocks = vec![
            PhotoshopResourceBlock { resource_id: 1, name: b"ab".to_vec(), data: vec![9] },
            PhotoshopResourceBlock { resource_id: 2, name: vec![], data: vec![1, 2] },
        ];
        let bytes = serialize_resources(&blocks);
        assert_eq!(bytes.len() % 2, 0);
        assert_eq!(parse_resources(&bytes).unwrap(), blocks);
    }
}

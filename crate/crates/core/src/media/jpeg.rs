//! JPEG marker-segment container.
//!
//! Only the container is modelled: the segments ahead of the first scan are
//! kept as `(marker, payload)` pairs, and everything from the end of the
//! first SOS header up to EOI is kept as one opaque run of entropy-coded
//! bytes. Nothing is decoded, so untouched bytes re-serialize identically.

use thiserror::Error;

pub const SOI: u8 = 0xD8;
pub const EOI: u8 = 0xD9;
pub const SOS: u8 = 0xDA;
pub const APP13: u8 = 0xED;

/// Largest payload a length-prefixed segment can carry.
pub const MAX_SEGMENT_PAYLOAD: usize = 0xFFFF - 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JpegError {
    #[error("input ends inside a JPEG structure at offset {offset}")]
    Truncated { offset: usize },
    #[error("missing SOI marker")]
    NotJpeg,
    #[error("segment 0xFF{marker:02X} has invalid length {length}")]
    BadLength { marker: u8, length: usize },
    #[error("expected a marker at offset {offset}")]
    BadMarker { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// Second byte of the `0xFFxx` marker.
    pub marker: u8,
    pub payload: Vec<u8>,
}

impl Segment {
    pub fn new(marker: u8, payload: Vec<u8>) -> Self {
        Self { marker, payload }
    }

    /// Markers that stand alone without a length field.
    pub fn is_standalone(marker: u8) -> bool {
        matches!(marker, 0x01 | 0xD0..=0xD7)
    }

    pub fn is_app(&self) -> bool {
        (0xE0..=0xEF).contains(&self.marker)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JpegImage {
    pub segments: Vec<Segment>,
    /// Bytes between the first SOS header and EOI.
    pub entropy_data: Vec<u8>,
    /// Bytes following EOI.
    pub trailing: Vec<u8>,
}

impl JpegImage {
    /// Index where a new APPn segment goes: just before the first segment
    /// that is not an APPn segment.
    pub fn app_insert_index(&self) -> usize {
        self.segments.iter().position(|s| !s.is_app()).unwrap_or(self.segments.len())
    }
}

fn be16(bytes: &[u8], at: usize) -> Option<usize> {
    let hi = *bytes.get(at)?;
    let lo = *bytes.get(at + 1)?;
    Some(u16::from_be_bytes([hi, lo]) as usize)
}

pub fn parse_jpeg(bytes: &[u8]) -> Result<JpegImage, JpegError> {
    if bytes.len() < 2 {
        return if bytes.first().is_some_and(|&b| b == 0xFF) {
            Err(JpegError::Truncated { offset: bytes.len() })
        } else {
            Err(JpegError::NotJpeg)
        };
    }
    if bytes[0] != 0xFF || bytes[1] != SOI {
        return Err(JpegError::NotJpeg);
    }

    let mut image = JpegImage::default();
    let mut pos = 2;
    loop {
        if pos >= bytes.len() {
            return Err(JpegError::Truncated { offset: pos });
        }
        if bytes[pos] != 0xFF {
            return Err(JpegError::BadMarker { offset: pos });
        }
        // Fill bytes.
        while bytes.get(pos + 1) == Some(&0xFF) {
            pos += 1;
        }
        let Some(&marker) = bytes.get(pos + 1) else {
            return Err(JpegError::Truncated { offset: pos + 1 });
        };
        pos += 2;

        match marker {
            EOI => {
                image.trailing = bytes[pos..].to_vec();
                return Ok(image);
            }
            m if Segment::is_standalone(m) => image.segments.push(Segment::new(m, Vec::new())),
            SOI | 0x00 => return Err(JpegError::BadMarker { offset: pos - 2 }),
            m => {
                let length = be16(bytes, pos).ok_or(JpegError::Truncated { offset: pos })?;
                if length < 2 {
                    return Err(JpegError::BadLength { marker: m, length });
                }
                let end = pos + length;
                if end > bytes.len() {
                    return Err(JpegError::Truncated { offset: bytes.len() });
                }
                image.segments.push(Segment::new(m, bytes[pos + 2..end].to_vec()));
                pos = end;
                if m == SOS {
                    let eoi = find_eoi(bytes, pos)?;
                    image.entropy_data = bytes[pos..eoi].to_vec();
                    image.trailing = bytes[eoi + 2..].to_vec();
                    return Ok(image);
                }
            }
        }
    }
}

/// Walks entropy-coded data (and any interleaved table/scan segments of a
/// progressive image) to the offset of the EOI marker.
fn find_eoi(bytes: &[u8], mut i: usize) -> Result<usize, JpegError> {
    loop {
        if i + 1 >= bytes.len() {
            return Err(JpegError::Truncated { offset: bytes.len() });
        }
        if bytes[i] != 0xFF {
            i += 1;
            continue;
        }
        match bytes[i + 1] {
            EOI => return Ok(i),
            0xFF => i += 1,
            m if m == 0x00 || Segment::is_standalone(m) => i += 2,
            m => {
                let length = be16(bytes, i + 2).ok_or(JpegError::Truncated { offset: i + 2 })?;
                if length < 2 {
                    return Err(JpegError::BadLength { marker: m, length });
                }
                i += 2 + length;
            }
        }
    }
}

pub fn serialize_jpeg(image: &JpegImage) -> Result<Vec<u8>, JpegError> {
    let body: usize = image.segments.iter().map(|s| s.payload.len() + 4).sum();
    let mut out = Vec::with_capacity(4 + body + image.entropy_data.len() + image.trailing.len());
    out.extend_from_slice(&[0xFF, SOI]);
    for seg in &image.segments {
        out.extend_from_slice(&[0xFF, seg.marker]);
        if Segment::is_standalone(seg.marker) {
            continue;
        }
        if seg.payload.len() > MAX_SEGMENT_PAYLOAD {
            return Err(JpegError::BadLength { marker: seg.marker, length: seg.payload.len() + 2 });
        }
        out.extend_from_slice(&((seg.payload.len() + 2) as u16).to_be_bytes());
        out.extend_from_slice(&seg.payload);
    }
    out.extend_from_slice(&image.entropy_data);
    out.extend_from_slice(&[0xFF, EOI]);
    out.extend_from_slice(&image.trailing);
    Ok(out)
}

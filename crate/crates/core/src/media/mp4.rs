//! ISO BMFF boxes, as far as the iTunes-style metadata path
//! `moov/udta/meta/ilst/<item>/data` needs them.
//!
//! Only boxes on that path are descended into; everything else is kept as
//! an opaque leaf.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Mp4Error {
    #[error("box at offset {offset} declares {declared} bytes but only {available} remain")]
    Truncated { offset: usize, declared: u64, available: usize },
    #[error("box at offset {offset} has invalid size {size}")]
    BadSize { offset: usize, size: u64 },
    #[error("no moov box")]
    NoMoov,
    #[error("invalid four-character code {0:?}")]
    BadFourCC(String),
    #[error("chunk offset overflows after growing moov")]
    OffsetOverflow,
}

/// Four-character box or item code. Bytes map to characters as Latin-1, so
/// `©nam` is `[0xA9, b'n', b'a', b'm']`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FourCC(pub [u8; 4]);

impl FourCC {
    pub const fn new(bytes: &[u8; 4]) -> Self {
        Self(*bytes)
    }
}

impl FromStr for FourCC {
    type Err = Mp4Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 4];
        let mut chars = s.chars();
        for slot in &mut out {
            let c = chars.next().ok_or_else(|| Mp4Error::BadFourCC(s.to_string()))?;
            *slot = u8::try_from(c as u32).map_err(|_| Mp4Error::BadFourCC(s.to_string()))?;
        }
        if chars.next().is_some() {
            return Err(Mp4Error::BadFourCC(s.to_string()));
        }
        Ok(Self(out))
    }
}

impl fmt::Display for FourCC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|&b| write!(f, "{}", b as char))
    }
}

const MOOV: FourCC = FourCC::new(b"moov");
const UDTA: FourCC = FourCC::new(b"udta");
const META: FourCC = FourCC::new(b"meta");
const ILST: FourCC = FourCC::new(b"ilst");
const HDLR: FourCC = FourCC::new(b"hdlr");
const DATA: FourCC = FourCC::new(b"data");
const MDAT: FourCC = FourCC::new(b"mdat");
const TRAK: FourCC = FourCC::new(b"trak");

/// Well-known-type indicator for UTF-8 text in a `data` atom.
pub const DATA_TYPE_UTF8: u32 = 1;
pub const DATA_TYPE_UTF16: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoxBody {
    Leaf(Vec<u8>),
    Container {
        /// Bytes before the first child: the version/flags of a full box.
        header: Vec<u8>,
        children: Vec<Mp4Box>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mp4Box {
    pub box_type: FourCC,
    pub body: BoxBody,
}

impl Mp4Box {
    pub fn leaf(box_type: FourCC, payload: Vec<u8>) -> Self {
        Self { box_type, body: BoxBody::Leaf(payload) }
    }

    pub fn container(box_type: FourCC, header: Vec<u8>, children: Vec<Mp4Box>) -> Self {
        Self { box_type, body: BoxBody::Container { header, children } }
    }

    pub fn children(&self) -> &[Mp4Box] {
        match &self.body {
            BoxBody::Container { children, .. } => children,
            BoxBody::Leaf(_) => &[],
        }
    }

    pub fn child(&self, kind: FourCC) -> Option<&Mp4Box> {
        self.children().iter().find(|b| b.box_type == kind)
    }

    fn children_mut(&mut self) -> Option<&mut Vec<Mp4Box>> {
        match &mut self.body {
            BoxBody::Container { children, .. } => Some(children),
            BoxBody::Leaf(_) => None,
        }
    }

    fn payload_len(&self) -> u64 {
        match &self.body {
            BoxBody::Leaf(p) => p.len() as u64,
            BoxBody::Container { header, children } => {
                header.len() as u64 + children.iter().map(Mp4Box::encoded_len).sum::<u64>()
            }
        }
    }

    pub fn encoded_len(&self) -> u64 {
        let payload = self.payload_len();
        if payload + 8 > u32::MAX as u64 {
            payload + 16
        } else {
            payload + 8
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        let total = self.encoded_len();
        if total > u32::MAX as u64 {
            out.extend_from_slice(&1u32.to_be_bytes());
            out.extend_from_slice(&self.box_type.0);
            out.extend_from_slice(&total.to_be_bytes());
        } else {
            out.extend_from_slice(&(total as u32).to_be_bytes());
            out.extend_from_slice(&self.box_type.0);
        }
        match &self.body {
            BoxBody::Leaf(p) => out.extend_from_slice(p),
            BoxBody::Container { header, children } => {
                out.extend_from_slice(header);
                children.iter().for_each(|c| c.write(out));
            }
        }
    }
}

/// Where a box sits on the metadata path; decides which boxes are containers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    File,
    Moov,
    Udta,
    Meta,
    Ilst,
    Item,
}

impl Level {
    /// Level of the children if a box of `kind` is a container here.
    fn descend(self, kind: FourCC) -> Option<Level> {
        match (self, kind) {
            (Level::File, MOOV) => Some(Level::Moov),
            (Level::Moov, UDTA) => Some(Level::Udta),
            (Level::Udta, META) => Some(Level::Meta),
            (Level::Meta, ILST) => Some(Level::Ilst),
            (Level::Ilst, _) => Some(Level::Item),
            _ => None,
        }
    }

    fn header_len(self) -> usize {
        // meta is a full box.
        if self == Level::Meta {
            4
        } else {
            0
        }
    }
}

pub fn parse_mp4(bytes: &[u8]) -> Result<Vec<Mp4Box>, Mp4Error> {
    parse_level(bytes, 0, Level::File)
}

fn parse_level(bytes: &[u8], base: usize, level: Level) -> Result<Vec<Mp4Box>, Mp4Error> {
    let mut boxes = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let offset = base + pos;
        let rest = &bytes[pos..];
        if rest.len() < 8 {
            return Err(Mp4Error::Truncated { offset, declared: 8, available: rest.len() });
        }
        let size = u32::from_be_bytes(rest[..4].try_into().unwrap()) as u64;
        let box_type = FourCC(rest[4..8].try_into().unwrap());
        let (header, total) = match size {
            0 => (8, rest.len() as u64),
            1 => {
                if rest.len() < 16 {
                    return Err(Mp4Error::Truncated { offset, declared: 16, available: rest.len() });
                }
                let large = u64::from_be_bytes(rest[8..16].try_into().unwrap());
                if large < 16 {
                    return Err(Mp4Error::BadSize { offset, size: large });
                }
                (16, large)
            }
            2..=7 => return Err(Mp4Error::BadSize { offset, size }),
            n => (8, n),
        };
        if total > rest.len() as u64 {
            return Err(Mp4Error::Truncated { offset, declared: total, available: rest.len() });
        }
        let total = total as usize;
        let payload = &rest[header..total];
        let body = match level.descend(box_type) {
            Some(inner) => {
                let skip = inner.header_len();
                if payload.len() < skip {
                    return Err(Mp4Error::Truncated { offset, declared: (header + skip) as u64, available: total });
                }
                BoxBody::Container {
                    header: payload[..skip].to_vec(),
                    children: parse_level(&payload[skip..], offset + header + skip, inner)?,
                }
            }
            None => BoxBody::Leaf(payload.to_vec()),
        };
        boxes.push(Mp4Box { box_type, body });
        pos += total;
    }
    Ok(boxes)
}

pub fn serialize_mp4(boxes: &[Mp4Box]) -> Vec<u8> {
    let mut out = Vec::with_capacity(boxes.iter().map(|b| b.encoded_len() as usize).sum());
    boxes.iter().for_each(|b| b.write(&mut out));
    out
}

fn mdir_handler() -> Mp4Box {
    let mut p = vec![0u8; 8];
    p.extend_from_slice(b"mdirappl");
    p.extend_from_slice(&[0u8; 9]);
    Mp4Box::leaf(HDLR, p)
}

fn text_item(code: FourCC, value: &str) -> Mp4Box {
    let mut data = DATA_TYPE_UTF8.to_be_bytes().to_vec();
    data.extend_from_slice(&[0u8; 4]);
    data.extend_from_slice(value.as_bytes());
    Mp4Box::container(code, Vec::new(), vec![Mp4Box::leaf(DATA, data)])
}

fn child_or_insert(children: &mut Vec<Mp4Box>, kind: FourCC, make: impl FnOnce() -> Mp4Box) -> &mut Mp4Box {
    let at = match children.iter().position(|b| b.box_type == kind) {
        Some(at) => at,
        None => {
            children.push(make());
            children.len() - 1
        }
    };
    &mut children[at]
}

/// Writes text items into `moov/udta/meta/ilst`, creating the path when
/// absent and replacing items that already exist.
pub fn set_mp4_metadata(boxes: &[Mp4Box], fields: &[(FourCC, String)]) -> Result<Vec<Mp4Box>, Mp4Error> {
    let moov_at = boxes.iter().position(|b| b.box_type == MOOV).ok_or(Mp4Error::NoMoov)?;
    let mut out = boxes.to_vec();
    let old_len = out[moov_at].encoded_len();

    {
        let moov = out[moov_at].children_mut().expect("moov parsed as container");
        let udta = child_or_insert(moov, UDTA, || Mp4Box::container(UDTA, vec![], vec![]));
        let udta = udta.children_mut().expect("udta parsed as container");
        let meta = child_or_insert(udta, META, || Mp4Box::container(META, vec![0; 4], vec![]));
        let meta = meta.children_mut().expect("meta parsed as container");
        if !meta.iter().any(|b| b.box_type == HDLR) {
            meta.insert(0, mdir_handler());
        }
        let ilst = child_or_insert(meta, ILST, || Mp4Box::container(ILST, vec![], vec![]));
        let items = ilst.children_mut().expect("ilst parsed as container");
        for (code, value) in fields {
            let item = text_item(*code, value);
            match items.iter().position(|b| b.box_type == *code) {
                Some(at) => {
                    items[at] = item;
                    let mut i = 0;
                    items.retain(|b| {
                        i += 1;
                        i - 1 == at || b.box_type != *code
                    });
                }
                None => items.push(item),
            }
        }
    }

    let delta = out[moov_at].encoded_len() as i64 - old_len as i64;
    let data_follows = out[moov_at + 1..].iter().any(|b| b.box_type == MDAT);
    if delta != 0 && data_follows {
        shift_chunk_offsets(&mut out[moov_at], delta)?;
    }
    Ok(out)
}

/// Moving mdat invalidates the absolute offsets in every track's
/// `stco`/`co64` table; patch them in place.
fn shift_chunk_offsets(moov: &mut Mp4Box, delta: i64) -> Result<(), Mp4Error> {
    let children = moov.children_mut().expect("moov parsed as container");
    for trak in children.iter_mut().filter(|b| b.box_type == TRAK) {
        if let BoxBody::Leaf(payload) = &mut trak.body {
            patch_offsets(payload, delta, 0)?;
        }
    }
    Ok(())
}

fn patch_offsets(buf: &mut [u8], delta: i64, depth: u8) -> Result<(), Mp4Error> {
    let mut pos = 0;
    while buf.len() - pos >= 8 {
        let size = u32::from_be_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        if size < 8 || size > buf.len() - pos {
            // Not a well-formed child list; leave it alone.
            return Ok(());
        }
        let kind: [u8; 4] = buf[pos + 4..pos + 8].try_into().unwrap();
        let body = &mut buf[pos + 8..pos + size];
        match &kind {
            b"mdia" | b"minf" | b"stbl" if depth < 3 => patch_offsets(body, delta, depth + 1)?,
            b"stco" => patch_table(body, delta, 4)?,
            b"co64" => patch_table(body, delta, 8)?,
            _ => {}
        }
        pos += size;
    }
    Ok(())
}

fn patch_table(body: &mut [u8], delta: i64, width: usize) -> Result<(), Mp4Error> {
    if body.len() < 8 {
        return Ok(());
    }
    let count = u32::from_be_bytes(body[4..8].try_into().unwrap()) as usize;
    let entries = &mut body[8..];
    for entry in entries.chunks_exact_mut(width).take(count) {
        if width == 4 {
            let v = u32::from_be_bytes(entry.try_into().unwrap()) as i64 + delta;
            let v = u32::try_from(v).map_err(|_| Mp4Error::OffsetOverflow)?;
            entry.copy_from_slice(&v.to_be_bytes());
        } else {
            let v = u64::from_be_bytes(entry.try_into().unwrap()) as i128 + delta as i128;
            let v = u64::try_from(v).map_err(|_| Mp4Error::OffsetOverflow)?;
            entry.copy_from_slice(&v.to_be_bytes());
        }
    }
    Ok(())
}

/// Text items of `moov/udta/meta/ilst`, in file order. Freeform (`----`)
/// items and non-text data atoms are skipped.
pub fn get_mp4_metadata(boxes: &[Mp4Box]) -> Vec<(FourCC, String)> {
    let Some(ilst) = boxes
        .iter()
        .find(|b| b.box_type == MOOV)
        .and_then(|m| m.child(UDTA))
        .and_then(|u| u.child(META))
        .and_then(|m| m.child(ILST))
    else {
        return Vec::new();
    };
    ilst.children()
        .iter()
        .filter(|item| &item.box_type.0 != b"----")
        .filter_map(|item| {
            let data = item.children().iter().find(|b| b.box_type == DATA)?;
            let BoxBody::Leaf(p) = &data.body else { return None };
            if p.len() < 8 {
                return None;
            }
            let kind = u32::from_be_bytes(p[..4].try_into().unwrap()) & 0x00FF_FFFF;
            let text = match kind {
                DATA_TYPE_UTF8 => String::from_utf8(p[8..].to_vec()).ok()?,
                DATA_TYPE_UTF16 => {
                    let units: Vec<u16> = p[8..].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
                    String::from_utf16(&units).ok()?
                }
                _ => return None,
            };
            Some((item.box_type, text))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_box(kind: &[u8; 4], payload: &[u8]) -> Vec<u8> {
        let mut v = ((payload.len() + 8) as u32).to_be_bytes().to_vec();
        v.extend_from_slice(kind);
        v.extend_from_slice(payload);
        v
    }

    fn nam() -> FourCC {
        "\u{a9}nam".parse().unwrap()
    }

    #[test]
    fn empty_free_box() {
        let boxes = parse_mp4(&[0, 0, 0, 8, b'f', b'r', b'e', b'e']).unwrap();
        assert_eq!(boxes, [Mp4Box::leaf(FourCC::new(b"free"), vec![])]);
    }

    #[test]
    fn declared_size_past_end() {
        let bytes = [0, 0, 0, 16, b'f', b'r', b'e', b'e', 1, 2, 3, 4];
        assert!(matches!(parse_mp4(&bytes), Err(Mp4Error::Truncated { declared: 16, .. })));
    }

    #[test]
    fn sizes_two_to_seven_rejected() {
        for s in 2u8..8 {
            let bytes = [0, 0, 0, s, b'f', b'r', b'e', b'e'];
            assert!(matches!(parse_mp4(&bytes), Err(Mp4Error::BadSize { .. })));
        }
    }

    #[test]
    fn size_zero_runs_to_end_and_is_normalized() {
        let bytes = [0, 0, 0, 0, b'm', b'd', b'a', b't', 9, 9];
        let boxes = parse_mp4(&bytes).unwrap();
        assert_eq!(boxes[0].body, BoxBody::Leaf(vec![9, 9]));
        assert_eq!(serialize_mp4(&boxes), [0, 0, 0, 10, b'm', b'd', b'a', b't', 9, 9]);
    }

    #[test]
    fn largesize_header() {
        let mut bytes = vec![0, 0, 0, 1, b'f', b'r', b'e', b'e'];
        bytes.extend_from_slice(&18u64.to_be_bytes());
        bytes.extend_from_slice(&[7, 7]);
        let boxes = parse_mp4(&bytes).unwrap();
        assert_eq!(boxes[0].body, BoxBody::Leaf(vec![7, 7]));
    }

    #[test]
    fn fourcc_latin1_mapping() {
        assert_eq!(nam().0, [0xA9, b'n', b'a', b'm']);
        assert_eq!(nam().to_string(), "\u{a9}nam");
        assert!("\u{2603}nam".parse::<FourCC>().is_err());
        assert!("abc".parse::<FourCC>().is_err());
    }

    #[test]
    fn no_moov() {
        let boxes = parse_mp4(&raw_box(b"ftyp", b"isom")).unwrap();
        assert_eq!(set_mp4_metadata(&boxes, &[(nam(), "x".into())]), Err(Mp4Error::NoMoov));
    }

    #[test]
    fn set_then_get() {
        let bytes = [raw_box(b"ftyp", b"isom"), raw_box(b"moov", &raw_box(b"mvhd", &[0; 20]))].concat();
        let boxes = parse_mp4(&bytes).unwrap();
        let out = set_mp4_metadata(&boxes, &[(nam(), "X".into())]).unwrap();
        let reparsed = parse_mp4(&serialize_mp4(&out)).unwrap();
        assert_eq!(get_mp4_metadata(&reparsed), [(nam(), "X".to_string())]);
        // Replacing keeps a single item.
        let again = set_mp4_metadata(&reparsed, &[(nam(), "Y".into())]).unwrap();
        assert_eq!(get_mp4_metadata(&again), [(nam(), "Y".to_string())]);
    }

    #[test]
    fn data_atom_layout() {
        let item = text_item(nam(), "hi");
        let mut out = Vec::new();
        item.write(&mut out);
        let expected = [
            &[0, 0, 0, 26][..],
            &[0xA9, b'n', b'a', b'm'],
            &[0, 0, 0, 18],
            b"data",
            &[0, 0, 0, 1],
            &[0, 0, 0, 0],
            b"hi",
        ]
        .concat();
        assert_eq!(out, expected);
    }

    #[test]
    fn chunk_offsets_follow_moved_mdat() {
        let mut stco = vec![0u8; 4];
        stco.extend_from_slice(&1u32.to_be_bytes());
        stco.extend_from_slice(&100u32.to_be_bytes());
        let stbl = raw_box(b"stbl", &raw_box(b"stco", &stco));
        let trak = raw_box(b"trak", &raw_box(b"mdia", &raw_box(b"minf", &stbl)));
        let bytes = [raw_box(b"moov", &trak), raw_box(b"mdat", &[1, 2, 3])].concat();
        let boxes = parse_mp4(&bytes).unwrap();
        let out = set_mp4_metadata(&boxes, &[(nam(), "X".into())]).unwrap();
        let delta = (out[0].encoded_len() - boxes[0].encoded_len()) as u32;
        let written = serialize_mp4(&out);
        let needle = b"stco";
        let at = written.windows(4).position(|w| w == needle).unwrap();
        let entry = u32::from_be_bytes(written[at + 12..at + 16].try_into().unwrap());
        assert_eq!(entry, 100 + delta);
        assert!(written.ends_with(&raw_box(b"mdat", &[1, 2, 3])));
    }
}

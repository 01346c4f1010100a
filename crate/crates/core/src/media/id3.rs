//! ID3v2 tags prepended to MP3 audio.
//!
//! The reader accepts v2.3 and v2.4; the writer always emits v2.3. Text
//! frames are decoded only when re-encoding reproduces the original bytes,
//! otherwise the frame is carried as opaque data, so an unmodified tag
//! re-serializes byte-for-byte.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const HEADER_LEN: usize = 10;
pub const FRAME_HEADER_LEN: usize = 10;
pub const MAX_SYNCSAFE: u32 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Id3Error {
    #[error("ID3 data truncated at offset {offset}")]
    Truncated { offset: usize },
    #[error("unsupported ID3v2 major version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported ID3 feature: {0}")]
    Unsupported(&'static str),
    #[error("{0} does not fit in a 28-bit syncsafe integer")]
    OutOfRange(u64),
    #[error("byte 0x{0:02X} is not syncsafe")]
    NotSyncsafe(u8),
    #[error("invalid frame id {0:?}")]
    BadFrameId(String),
}

pub fn syncsafe_encode(n: u32) -> Result<[u8; 4], Id3Error> {
    if n >= MAX_SYNCSAFE {
        return Err(Id3Error::OutOfRange(n as u64));
    }
    Ok([(n >> 21) as u8 & 0x7F, (n >> 14) as u8 & 0x7F, (n >> 7) as u8 & 0x7F, n as u8 & 0x7F])
}

pub fn syncsafe_decode(b: [u8; 4]) -> Result<u32, Id3Error> {
    if let Some(&bad) = b.iter().find(|&&x| x >= 0x80) {
        return Err(Id3Error::NotSyncsafe(bad));
    }
    Ok(b.iter().fold(0u32, |acc, &x| (acc << 7) | x as u32))
}

/// Four-character frame identifier, `[A-Z0-9]{4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId([u8; 4]);

impl FrameId {
    pub fn new(bytes: [u8; 4]) -> Result<Self, Id3Error> {
        if bytes.iter().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit()) {
            Ok(Self(bytes))
        } else {
            Err(Id3Error::BadFrameId(String::from_utf8_lossy(&bytes).into_owned()))
        }
    }

    pub fn as_bytes(&self) -> &[u8; 4] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("frame ids are ASCII")
    }

    pub fn is_text(&self) -> bool {
        self.0[0] == b'T' && &self.0 != b"TXXX"
    }

    pub fn is_comment(&self) -> bool {
        &self.0 == b"COMM"
    }
}

impl FromStr for FrameId {
    type Err = Id3Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes: [u8; 4] = s.as_bytes().try_into().map_err(|_| Id3Error::BadFrameId(s.to_string()))?;
        Self::new(bytes)
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextEncoding {
    /// Encoding byte 0.
    Latin1,
    /// Encoding byte 1 with a little-endian byte-order mark.
    Utf16Le,
    /// Encoding byte 1 with a big-endian byte-order mark.
    Utf16BomBe,
    /// Encoding byte 2 (v2.4 only): big-endian without a byte-order mark.
    Utf16Be,
    /// Encoding byte 3.
    Utf8,
}

impl TextEncoding {
    pub fn byte(self) -> u8 {
        match self {
            Self::Latin1 => 0,
            Self::Utf16Le | Self::Utf16BomBe => 1,
            Self::Utf16Be => 2,
            Self::Utf8 => 3,
        }
    }

    /// Latin-1 when every character fits, UTF-8 otherwise.
    pub fn for_text(text: &str) -> Self {
        if text.chars().all(|c| (c as u32) < 0x100) {
            Self::Latin1
        } else {
            Self::Utf8
        }
    }

    /// Reads the encoding byte, looking at the byte-order mark for byte 1.
    fn detect(byte: u8, rest: &[u8]) -> Option<Self> {
        match (byte, rest) {
            (0, _) => Some(Self::Latin1),
            (1, [0xFF, 0xFE, ..]) => Some(Self::Utf16Le),
            (1, [0xFE, 0xFF, ..]) => Some(Self::Utf16BomBe),
            (2, _) => Some(Self::Utf16Be),
            (3, _) => Some(Self::Utf8),
            _ => None,
        }
    }

    fn terminator_len(self) -> usize {
        match self {
            Self::Latin1 | Self::Utf8 => 1,
            _ => 2,
        }
    }

    fn decode(bytes: &[u8]) -> Option<(Self, String)> {
        let (&byte, rest) = bytes.split_first()?;
        let enc = Self::detect(byte, rest)?;
        Some((enc, enc.decode_str(rest)?))
    }

    /// Decodes one string. Strings in encoding 1 each carry their own
    /// byte-order mark, which must match this encoding's.
    fn decode_str(self, bytes: &[u8]) -> Option<String> {
        match self {
            Self::Latin1 => Some(bytes.iter().map(|&b| b as char).collect()),
            Self::Utf8 => String::from_utf8(bytes.to_vec()).ok(),
            Self::Utf16Le => decode_utf16(bytes.strip_prefix(&[0xFF, 0xFE])?, true),
            Self::Utf16BomBe => decode_utf16(bytes.strip_prefix(&[0xFE, 0xFF])?, false),
            Self::Utf16Be => decode_utf16(bytes, false),
        }
    }

    fn encode_str(self, text: &str) -> Option<Vec<u8>> {
        let mut out = Vec::new();
        match self {
            Self::Latin1 => {
                for c in text.chars() {
                    out.push(u8::try_from(c as u32).ok()?);
                }
            }
            Self::Utf8 => out.extend_from_slice(text.as_bytes()),
            Self::Utf16Le => {
                out.extend_from_slice(&[0xFF, 0xFE]);
                text.encode_utf16().for_each(|u| out.extend_from_slice(&u.to_le_bytes()));
            }
            Self::Utf16BomBe => {
                out.extend_from_slice(&[0xFE, 0xFF]);
                text.encode_utf16().for_each(|u| out.extend_from_slice(&u.to_be_bytes()));
            }
            Self::Utf16Be => text.encode_utf16().for_each(|u| out.extend_from_slice(&u.to_be_bytes())),
        }
        Some(out)
    }

    /// Encoding byte followed by the encoded text.
    fn encode(self, text: &str) -> Option<Vec<u8>> {
        let mut out = vec![self.byte()];
        out.extend(self.encode_str(text)?);
        Some(out)
    }

    /// Splits at the first string terminator (one NUL byte, or an aligned
    /// pair for the UTF-16 encodings).
    fn split_terminated(self, bytes: &[u8]) -> Option<(&[u8], &[u8])> {
        let width = self.terminator_len();
        let at = (0..bytes.len().saturating_sub(width - 1))
            .step_by(width)
            .find(|&i| bytes[i..i + width].iter().all(|&b| b == 0))?;
        Some((&bytes[..at], &bytes[at + width..]))
    }
}

fn decode_utf16(bytes: &[u8], little_endian: bool) -> Option<String> {
    if !bytes.len().is_multiple_of(2) {
        return None;
    }
    let units: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|c| if little_endian { u16::from_le_bytes([c[0], c[1]]) } else { u16::from_be_bytes([c[0], c[1]]) })
        .collect();
    String::from_utf16(&units).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameContent {
    /// `T***` frames other than `TXXX`. Text may hold NUL separators or a
    /// trailing terminator exactly as found on the wire.
    Text {
        encoding: TextEncoding,
        text: String,
    },
    Comment {
        encoding: TextEncoding,
        language: [u8; 3],
        description: String,
        text: String,
    },
    /// Anything not decoded; written back verbatim.
    Binary(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Id3Frame {
    pub id: FrameId,
    /// v2.3 flag layout.
    pub flags: [u8; 2],
    pub content: FrameContent,
}

impl Id3Frame {
    pub fn text(id: FrameId, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { id, flags: [0, 0], content: FrameContent::Text { encoding: TextEncoding::for_text(&text), text } }
    }

    pub fn comment(text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: FrameId(*b"COMM"),
            flags: [0, 0],
            content: FrameContent::Comment {
                encoding: TextEncoding::for_text(&text),
                language: *b"eng",
                description: String::new(),
                text,
            },
        }
    }

    /// Displayed text of a text or comment frame, without trailing NULs.
    pub fn display_text(&self) -> Option<&str> {
        match &self.content {
            FrameContent::Text { text, .. } | FrameContent::Comment { text, .. } => Some(text.trim_end_matches('\0')),
            FrameContent::Binary(_) => None,
        }
    }

    fn decode(id: FrameId, flags: [u8; 2], data: &[u8]) -> Self {
        // Compressed, encrypted or grouped frames carry extra header bytes.
        let plain = flags[1] & 0xE0 == 0;
        let content = plain
            .then(|| Self::decode_content(id, data))
            .flatten()
            .unwrap_or_else(|| FrameContent::Binary(data.to_vec()));
        Self { id, flags, content }
    }

    fn decode_content(id: FrameId, data: &[u8]) -> Option<FrameContent> {
        let content = if id.is_text() {
            let (encoding, text) = TextEncoding::decode(data)?;
            FrameContent::Text { encoding, text }
        } else if id.is_comment() {
            if data.len() < 4 {
                return None;
            }
            let language = [data[1], data[2], data[3]];
            let rest = &data[4..];
            let encoding = TextEncoding::detect(data[0], rest)?;
            let (description, text) = encoding.split_terminated(rest)?;
            FrameContent::Comment {
                encoding,
                language,
                description: encoding.decode_str(description)?,
                text: encoding.decode_str(text)?,
            }
        } else {
            return None;
        };
        // Only keep the decoded form if it reproduces the original bytes.
        (Self::encode_content(&content)?.as_slice() == data).then_some(content)
    }

    fn encode_content(content: &FrameContent) -> Option<Vec<u8>> {
        match content {
            FrameContent::Text { encoding, text } => encoding.encode(text),
            FrameContent::Comment { encoding, language, description, text } => {
                let mut out = vec![encoding.byte()];
                out.extend_from_slice(language);
                out.extend(encoding.encode_str(description)?);
                out.extend(std::iter::repeat_n(0, encoding.terminator_len()));
                out.extend(encoding.encode_str(text)?);
                Some(out)
            }
            FrameContent::Binary(data) => Some(data.clone()),
        }
    }

    /// Adjusts the content to something a v2.3 reader accepts.
    fn normalized(&self) -> FrameContent {
        let fix = |enc: TextEncoding, text: &str| match enc {
            TextEncoding::Latin1 => TextEncoding::for_text(text),
            TextEncoding::Utf16Be => TextEncoding::Utf16Le,
            other => other,
        };
        match &self.content {
            FrameContent::Text { encoding, text } => {
                FrameContent::Text { encoding: fix(*encoding, text), text: text.clone() }
            }
            FrameContent::Comment { encoding, language, description, text } => FrameContent::Comment {
                encoding: fix(*encoding, &format!("{description}{text}")),
                language: *language,
                description: description.clone(),
                text: text.clone(),
            },
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Id3Tag {
    pub major_version: u8,
    pub frames: Vec<Id3Frame>,
    /// Zero bytes after the last frame.
    pub padding: usize,
}

impl Default for Id3Tag {
    fn default() -> Self {
        Self { major_version: 3, frames: Vec::new(), padding: 0 }
    }
}

impl Id3Tag {
    /// Replaces every frame with this id by a single text frame, in place of
    /// the first one, or appends it.
    pub fn set_text(&mut self, id: FrameId, value: &str) {
        let frame = if id.is_comment() { Id3Frame::comment(value) } else { Id3Frame::text(id, value) };
        match self.frames.iter().position(|f| f.id == id) {
            Some(at) => {
                self.frames[at] = frame;
                let mut i = 0;
                self.frames.retain(|f| {
                    i += 1;
                    i - 1 == at || f.id != id
                });
            }
            None => self.frames.push(frame),
        }
    }

    /// The tag as [`serialize_id3`] would write it.
    pub fn normalized(&self) -> Self {
        Self {
            major_version: 3,
            frames: self
                .frames
                .iter()
                .map(|f| Id3Frame { id: f.id, flags: f.flags, content: f.normalized() })
                .collect(),
            padding: self.padding,
        }
    }
}

/// Splits an MP3 stream into its leading ID3v2 tag (if any) and the rest.
pub fn parse_id3(bytes: &[u8]) -> Result<(Option<Id3Tag>, Vec<u8>), Id3Error> {
    if !bytes.starts_with(b"ID3") {
        return Ok((None, bytes.to_vec()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Id3Error::Truncated { offset: bytes.len() });
    }
    let major = bytes[3];
    if major != 3 && major != 4 {
        return Err(Id3Error::UnsupportedVersion(major));
    }
    let flags = bytes[5];
    if flags & 0x80 != 0 {
        return Err(Id3Error::Unsupported("unsynchronisation"));
    }
    let size = syncsafe_decode(bytes[6..10].try_into().unwrap())? as usize;
    let footer = if major == 4 && flags & 0x10 != 0 { 10 } else { 0 };
    let end = HEADER_LEN + size;
    if end + footer > bytes.len() {
        return Err(Id3Error::Truncated { offset: bytes.len() });
    }
    let body = &bytes[HEADER_LEN..end];

    let mut pos = 0;
    if flags & 0x40 != 0 {
        pos = extended_header_len(body, major)?;
    }

    let mut tag = Id3Tag { major_version: major, frames: Vec::new(), padding: 0 };
    while pos < body.len() {
        if body[pos] == 0 {
            tag.padding = body.len() - pos;
            break;
        }
        if body.len() - pos < FRAME_HEADER_LEN {
            return Err(Id3Error::Truncated { offset: HEADER_LEN + body.len() });
        }
        let id = FrameId::new(body[pos..pos + 4].try_into().unwrap())?;
        let raw_size: [u8; 4] = body[pos + 4..pos + 8].try_into().unwrap();
        let frame_size = if major == 4 { syncsafe_decode(raw_size)? } else { u32::from_be_bytes(raw_size) } as usize;
        let raw_flags = [body[pos + 8], body[pos + 9]];
        let flags = if major == 4 { v24_flags_to_v23(raw_flags)? } else { raw_flags };
        let start = pos + FRAME_HEADER_LEN;
        if body.len() - start < frame_size {
            return Err(Id3Error::Truncated { offset: HEADER_LEN + body.len() });
        }
        tag.frames.push(Id3Frame::decode(id, flags, &body[start..start + frame_size]));
        pos = start + frame_size;
    }
    Ok((Some(tag), bytes[end + footer..].to_vec()))
}

fn extended_header_len(body: &[u8], major: u8) -> Result<usize, Id3Error> {
    if body.len() < 4 {
        return Err(Id3Error::Truncated { offset: HEADER_LEN + body.len() });
    }
    let raw: [u8; 4] = body[..4].try_into().unwrap();
    // v2.3 counts the bytes after the size field, v2.4 includes it.
    let len = if major == 4 { syncsafe_decode(raw)? as usize } else { u32::from_be_bytes(raw) as usize + 4 };
    if len > body.len() {
        return Err(Id3Error::Truncated { offset: HEADER_LEN + body.len() });
    }
    Ok(len)
}

fn v24_flags_to_v23(flags: [u8; 2]) -> Result<[u8; 2], Id3Error> {
    if flags[1] & 0x4F != 0 {
        return Err(Id3Error::Unsupported("v2.4 frame format flags"));
    }
    Ok([(flags[0] & 0x70) << 1, 0])
}

pub fn serialize_id3(tag: &Id3Tag, audio: &[u8]) -> Result<Vec<u8>, Id3Error> {
    let mut body = Vec::new();
    for frame in &tag.frames {
        let data = Id3Frame::encode_content(&frame.normalized())
            .ok_or(Id3Error::Unsupported("text not representable in its encoding"))?;
        FrameId::new(frame.id.0)?;
        body.extend_from_slice(&frame.id.0);
        body.extend_from_slice(&(data.len() as u32).to_be_bytes());
        body.extend_from_slice(&frame.flags);
        body.extend_from_slice(&data);
    }
    body.resize(body.len() + tag.padding, 0);

    let size = u32::try_from(body.len()).map_err(|_| Id3Error::OutOfRange(body.len() as u64))?;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + audio.len());
    out.extend_from_slice(b"ID3\x03\x00\x00");
    out.extend_from_slice(&syncsafe_encode(size)?);
    out.extend(body);
    out.extend_from_slice(audio);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(s: &str) -> FrameId {
        s.parse().unwrap()
    }

    /// Splits into 7-bit groups by repeated division, independent of the
    /// shift-based encoder.
    fn syncsafe_by_division(mut n: u32) -> [u8; 4] {
        let mut out = [0u8; 4];
        for slot in out.iter_mut().rev() {
            *slot = (n % 128) as u8;
            n /= 128;
        }
        out
    }

    #[test]
    fn syncsafe_examples() {
        assert_eq!(syncsafe_encode(0).unwrap(), [0, 0, 0, 0]);
        assert_eq!(syncsafe_by_division(257), [0x00, 0x00, 0x02, 0x01]);
        assert_eq!(syncsafe_encode(257).unwrap(), [0x00, 0x00, 0x02, 0x01]);
        assert_eq!(syncsafe_decode([0, 0, 0x80, 0]), Err(Id3Error::NotSyncsafe(0x80)));
        assert_eq!(syncsafe_encode(1 << 28), Err(Id3Error::OutOfRange(1 << 28)));
    }

    #[test]
    fn syncsafe_matches_division_oracle() {
        for n in (0..MAX_SYNCSAFE).step_by(99_991).chain([MAX_SYNCSAFE - 1, 127, 128, 16_383, 16_384]) {
            let enc = syncsafe_encode(n).unwrap();
            assert_eq!(enc, syncsafe_by_division(n));
            assert_eq!(syncsafe_decode(enc).unwrap(), n);
        }
    }

    #[test]
    fn no_tag_passes_audio_through() {
        let audio = [0xFF, 0xFB, 0x90, 0x64, 1, 2, 3];
        assert_eq!(parse_id3(&audio).unwrap(), (None, audio.to_vec()));
    }

    #[test]
    fn empty_v23_tag() {
        let (tag, audio) = parse_id3(b"ID3\x03\x00\x00\x00\x00\x00\x00").unwrap();
        let tag = tag.unwrap();
        assert_eq!(tag.major_version, 3);
        assert!(tag.frames.is_empty());
        assert!(audio.is_empty());
    }

    #[test]
    fn version_and_flag_checks() {
        assert_eq!(parse_id3(b"ID3\x02\x00\x00\x00\x00\x00\x00"), Err(Id3Error::UnsupportedVersion(2)));
        assert!(matches!(parse_id3(b"ID3\x03\x00\x80\x00\x00\x00\x00"), Err(Id3Error::Unsupported(_))));
        assert!(matches!(parse_id3(b"ID3\x03\x00"), Err(Id3Error::Truncated { .. })));
    }

    #[test]
    fn payload_text_is_transparent() {
        let mut tag = Id3Tag::default();
        tag.set_text(fid("TIT2"), "<script>alert(1)</script>");
        let bytes = serialize_id3(&tag, b"audio").unwrap();
        let (back, audio) = parse_id3(&bytes).unwrap();
        assert_eq!(back.unwrap().frames[0].display_text(), Some("<script>alert(1)</script>"));
        assert_eq!(audio, b"audio");
    }

    #[test]
    fn non_latin1_uses_utf8() {
        let mut tag = Id3Tag::default();
        tag.set_text(fid("TPE1"), "Bj\u{f6}rk \u{2603}");
        let bytes = serialize_id3(&tag, &[]).unwrap();
        assert_eq!(bytes[HEADER_LEN + FRAME_HEADER_LEN], 3);
        let (back, _) = parse_id3(&bytes).unwrap();
        assert_eq!(back.unwrap().frames[0].display_text(), Some("Bj\u{f6}rk \u{2603}"));
    }

    #[test]
    fn bad_frame_id_rejected() {
        assert!(matches!("ti!2".parse::<FrameId>(), Err(Id3Error::BadFrameId(_))));
        let tag = Id3Tag {
            frames: vec![Id3Frame { id: FrameId(*b"ti!2"), flags: [0, 0], content: FrameContent::Binary(vec![]) }],
            ..Default::default()
        };
        assert!(matches!(serialize_id3(&tag, &[]), Err(Id3Error::BadFrameId(_))));
    }

    #[test]
    fn v24_syncsafe_frame_sizes() {
        // TIT2 with 200 bytes of text: size 201 is 0x01 0x49 when syncsafe.
        let text = "a".repeat(200);
        let mut frame = b"TIT2\x00\x00\x01\x49\x00\x00\x03".to_vec();
        frame.extend_from_slice(text.as_bytes());
        let size = syncsafe_encode(frame.len() as u32).unwrap();
        let mut bytes = b"ID3\x04\x00\x00".to_vec();
        bytes.extend_from_slice(&size);
        bytes.extend(frame);
        let (tag, _) = parse_id3(&bytes).unwrap();
        let tag = tag.unwrap();
        assert_eq!(tag.major_version, 4);
        assert_eq!(tag.frames[0].display_text(), Some(text.as_str()));

        let rewritten = serialize_id3(&tag, &[]).unwrap();
        let (again, _) = parse_id3(&rewritten).unwrap();
        assert_eq!(again.unwrap(), tag.normalized());
    }

    #[test]
    fn comment_frame_round_trip() {
        let data = b"\x00engdesc\x00hello";
        let frame = Id3Frame::decode(fid("COMM"), [0, 0], data);
        assert_eq!(
            frame.content,
            FrameContent::Comment {
                encoding: TextEncoding::Latin1,
                language: *b"eng",
                description: "desc".into(),
                text: "hello".into(),
            }
        );
        assert_eq!(Id3Frame::encode_content(&frame.content).unwrap(), data);
    }

    #[test]
    fn utf16_comment_has_two_boms() {
        // Description "d" and text "hi", each with its own BOM, split by 00 00.
        let data = b"\x01eng\xFF\xFEd\x00\x00\x00\xFF\xFEh\x00i\x00";
        let frame = Id3Frame::decode(fid("COMM"), [0, 0], data);
        assert_eq!(frame.display_text(), Some("hi"));
        assert_eq!(Id3Frame::encode_content(&frame.content).unwrap(), data);
    }

    #[test]
    fn undecodable_text_kept_binary() {
        // Invalid UTF-8 under encoding 3.
        let frame = Id3Frame::decode(fid("TALB"), [0, 0], &[3, 0xC3, 0x28]);
        assert!(matches!(frame.content, FrameContent::Binary(_)));
        let utf16 = Id3Frame::decode(fid("TALB"), [0, 0], &[1, 0xFE, 0xFF, 0x00, 0x41]);
        assert_eq!(utf16.display_text(), Some("A"));
    }

    #[test]
    fn set_text_replaces_duplicates() {
        let mut tag = Id3Tag::default();
        tag.frames.push(Id3Frame::text(fid("TIT2"), "a"));
        tag.frames.push(Id3Frame::text(fid("TPE1"), "b"));
        tag.frames.push(Id3Frame::text(fid("TIT2"), "c"));
        tag.set_text(fid("TIT2"), "x");
        let ids: Vec<_> =
            tag.frames.iter().map(|f| (f.id.to_string(), f.display_text().unwrap().to_string())).collect();
        assert_eq!(ids, [("TIT2".into(), "x".into()), ("TPE1".into(), "b".into())]);
    }

    #[test]
    fn padding_preserved() {
        let mut tag = Id3Tag { padding: 64, ..Default::default() };
        tag.set_text(fid("TALB"), "x");
        let bytes = serialize_id3(&tag, b"zz").unwrap();
        let (back, audio) = parse_id3(&bytes).unwrap();
        assert_eq!(back.unwrap().padding, 64);
        assert_eq!(audio, b"zz");
    }
}

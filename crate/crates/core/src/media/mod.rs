//! Byte-exact media containers and a uniform text-field view over them.
//!
//! | format | carrier                               | field key          |
//! |--------|---------------------------------------|--------------------|
//! | JPEG   | APP13 / 8BIM `0x0404` / IPTC-IIM       | `iptc:2:105`       |
//! | MP3    | leading ID3v2 tag                      | `id3:TIT2`         |
//! | MP4    | `moov/udta/meta/ilst` data atoms       | `mp4:©nam`         |

pub mod id3;
pub mod iptc;
pub mod jpeg;
pub mod mp4;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use self::id3::{FrameId, Id3Error, Id3Tag};
use self::iptc::{IptcDataSet, IptcError};
use self::jpeg::JpegError;
use self::mp4::{FourCC, Mp4Error};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MediaError {
    #[error(transparent)]
    Jpeg(#[from] JpegError),
    #[error(transparent)]
    Iptc(#[from] IptcError),
    #[error(transparent)]
    Id3(#[from] Id3Error),
    #[error(transparent)]
    Mp4(#[from] Mp4Error),
    #[error("invalid field key {0:?}")]
    BadFieldKey(String),
    #[error("field {key} does not belong to {format} files")]
    WrongFormat { key: FieldKey, format: MediaFormat },
    #[error("field {0} is not a text field")]
    NotText(FieldKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaFormat {
    #[serde(rename = "jpg")]
    Jpeg,
    Mp3,
    Mp4,
}

impl MediaFormat {
    pub const ALL: [MediaFormat; 3] = [MediaFormat::Jpeg, MediaFormat::Mp3, MediaFormat::Mp4];

    pub fn extension(self) -> &'static str {
        match self {
            MediaFormat::Jpeg => "jpg",
            MediaFormat::Mp3 => "mp3",
            MediaFormat::Mp4 => "mp4",
        }
    }
}

impl fmt::Display for MediaFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for MediaFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jpg" | "jpeg" => Ok(MediaFormat::Jpeg),
            "mp3" => Ok(MediaFormat::Mp3),
            "mp4" | "m4a" | "m4v" => Ok(MediaFormat::Mp4),
            other => Err(format!("unknown media format {other:?}")),
        }
    }
}

/// Format-qualified field identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldKey {
    Iptc { record: u8, dataset: u8 },
    Id3(FrameId),
    Mp4(FourCC),
}

impl FieldKey {
    pub fn iptc(record: u8, dataset: u8) -> Self {
        FieldKey::Iptc { record, dataset }
    }

    pub fn format(&self) -> MediaFormat {
        match self {
            FieldKey::Iptc { .. } => MediaFormat::Jpeg,
            FieldKey::Id3(_) => MediaFormat::Mp3,
            FieldKey::Mp4(_) => MediaFormat::Mp4,
        }
    }
}

impl fmt::Display for FieldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKey::Iptc { record, dataset } => write!(f, "iptc:{record}:{dataset}"),
            FieldKey::Id3(id) => write!(f, "id3:{id}"),
            FieldKey::Mp4(code) => write!(f, "mp4:{code}"),
        }
    }
}

impl FromStr for FieldKey {
    type Err = MediaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MediaError::BadFieldKey(s.to_string());
        let (scheme, rest) = s.split_once(':').ok_or_else(bad)?;
        match scheme {
            "iptc" => {
                let (r, d) = rest.split_once(':').ok_or_else(bad)?;
                Ok(FieldKey::iptc(r.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?))
            }
            "id3" => Ok(FieldKey::Id3(rest.parse().map_err(|_| bad())?)),
            "mp4" => Ok(FieldKey::Mp4(rest.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for FieldKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataDocument {
    pub format: MediaFormat,
    pub fields: BTreeMap<FieldKey, String>,
}

/// Decodes IPTC payload bytes: UTF-8 when valid, Latin-1 otherwise.
fn iptc_text(payload: &[u8]) -> String {
    match std::str::from_utf8(payload) {
        Ok(s) => s.to_string(),
        Err(_) => payload.iter().map(|&b| b as char).collect(),
    }
}

/// Reads the text fields of a media file. When a field occurs more than once
/// (repeatable IPTC datasets, duplicate frames) the first occurrence wins.
/// IPTC record 2 dataset 0 (binary record version) is not a text field and
/// is left out.
pub fn extract_metadata(bytes: &[u8], format: MediaFormat) -> Result<MetadataDocument, MediaError> {
    let mut fields = BTreeMap::new();
    match format {
        MediaFormat::Jpeg => {
            let image = jpeg::parse_jpeg(bytes)?;
            for ds in iptc::get_iptc(&image)? {
                if ds.record == 2 && ds.dataset == 0 {
                    continue;
                }
                fields.entry(FieldKey::iptc(ds.record, ds.dataset)).or_insert_with(|| iptc_text(&ds.payload));
            }
        }
        MediaFormat::Mp3 => {
            if let (Some(tag), _) = id3::parse_id3(bytes)? {
                for frame in &tag.frames {
                    if let Some(text) = frame.display_text() {
                        fields.entry(FieldKey::Id3(frame.id)).or_insert_with(|| text.to_string());
                    }
                }
            }
        }
        MediaFormat::Mp4 => {
            let boxes = mp4::parse_mp4(bytes)?;
            for (code, text) in mp4::get_mp4_metadata(&boxes) {
                fields.entry(FieldKey::Mp4(code)).or_insert(text);
            }
        }
    }
    Ok(MetadataDocument { format, fields })
}

/// Sets text fields in a media file, leaving everything else in place. An
/// empty field list returns the input unchanged.
pub fn write_fields(bytes: &[u8], format: MediaFormat, fields: &[(FieldKey, String)]) -> Result<Vec<u8>, MediaError> {
    for (key, _) in fields {
        if key.format() != format {
            return Err(MediaError::WrongFormat { key: *key, format });
        }
    }
    if fields.is_empty() {
        return Ok(bytes.to_vec());
    }
    match format {
        MediaFormat::Jpeg => {
            let image = jpeg::parse_jpeg(bytes)?;
            let mut datasets = iptc::get_iptc(&image)?;
            datasets.retain(|ds| !fields.iter().any(|(k, _)| *k == FieldKey::iptc(ds.record, ds.dataset)));
            for (key, value) in fields {
                if let FieldKey::Iptc { record, dataset } = *key {
                    datasets.push(IptcDataSet::new(record, dataset, value.as_bytes()));
                }
            }
            let image = iptc::set_iptc(&image, &datasets)?;
            Ok(jpeg::serialize_jpeg(&image)?)
        }
        MediaFormat::Mp3 => {
            let (tag, audio) = id3::parse_id3(bytes)?;
            let mut tag = tag.unwrap_or_else(Id3Tag::default);
            for (key, value) in fields {
                if let FieldKey::Id3(id) = *key {
                    if !(id.is_text() || id.is_comment()) {
                        return Err(MediaError::NotText(*key));
                    }
                    tag.set_text(id, value);
                }
            }
            Ok(id3::serialize_id3(&tag, &audio)?)
        }
        MediaFormat::Mp4 => {
            let boxes = mp4::parse_mp4(bytes)?;
            let items: Vec<(FourCC, String)> = fields
                .iter()
                .filter_map(|(k, v)| match k {
                    FieldKey::Mp4(code) => Some((*code, v.clone())),
                    _ => None,
                })
                .collect();
            let boxes = mp4::set_mp4_metadata(&boxes, &items)?;
            Ok(mp4::serialize_mp4(&boxes))
        }
    }
}

//! Security-audit toolkit for CMS media galleries and extensions.
//!
//! * [`media`] reads and writes text metadata in JPEG (IPTC), MP3 (ID3v2)
//!   and MP4 (`ilst`) files without disturbing image, audio or movie data.
//! * [`payload`] keeps the XSS vector and field catalogs, plans which vector
//!   goes into which field, applies plans and classifies reflections.
//! * [`scan`] marks DOM-XSS sources/sinks in JavaScript and unescaped
//!   output or SQL construction in PHP.
//! * [`fingerprint`] turns HTTP probe outcomes into Joomla core and
//!   extension detections.
//! * [`report`] aggregates detections into installation statistics and
//!   renders JSON lines, CSV or aligned tables.
//!
//! The network side (fetch policy, politeness, scheduling) lives in the
//! `metascan-crawler` crate.

pub mod fingerprint;
pub mod media;
pub mod payload;
pub mod report;
pub mod scan;

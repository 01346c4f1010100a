//! Test-only helpers: hand-assembled media files and a scripted HTTP server.
//!
//! Nothing here goes through the `metascan` serializers, so the files it
//! produces are an independent check on the parsers.

pub mod http;
pub mod media;

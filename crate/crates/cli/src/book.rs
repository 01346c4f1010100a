// The guide's code blocks are compiled and run as doc-tests from here, one
// module per chapter so a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/media.md")]
mod media {}
#[doc = include_str!("../../../book/src/payloads.md")]
mod payloads {}
#[doc = include_str!("../../../book/src/scanning.md")]
mod scanning {}
#[doc = include_str!("../../../book/src/fingerprinting.md")]
mod fingerprinting {}
#[doc = include_str!("../../../book/src/reports.md")]
mod reports {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

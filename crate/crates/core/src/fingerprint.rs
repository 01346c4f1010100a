//! Joomla core and extension detection from probe outcomes.
//!
//! Probes request static files whose location is fixed by a default Joomla
//! install (core text files, component manifests under
//! `/administrator/components/<id>/`, Sigplus's `initialization.js`). A probe
//! hits only when the response is a 200 *and* the body contains one of the
//! probe's markers, so catch-all pages that answer 200 for everything do not
//! count. Evaluation is pure; fetching lives in the crawler crate.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

const BUNDLED_EXTENSIONS: &str = include_str!("../data/extensions.jsonl");
const BUNDLED_CORE: &str = include_str!("../data/core_probes.jsonl");

/// Bodies are inspected up to this many bytes.
pub const BODY_EXCERPT_LIMIT: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("base path {0:?} must begin and end with '/'")]
    BadBasePath(String),
    #[error("result for unknown probe {0:?}")]
    UnknownProbeId(String),
    #[error("catalog line {line}: {reason}")]
    Catalog { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTarget {
    Core,
    Extension(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub probe_id: String,
    /// Absolute path on the host, base path included.
    pub path: String,
    /// Any one of these, matched case-sensitively, makes a 200 a hit.
    pub expect_markers: Vec<String>,
    pub target: ProbeTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Http(u16),
    TransportFailure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe_id: String,
    pub status: ProbeStatus,
    /// Only kept for status 200.
    pub body_excerpt: Option<String>,
    pub final_url: String,
}

impl ProbeResult {
    /// Builds a result, dropping the body unless the status is 200 and
    /// cutting it to [`BODY_EXCERPT_LIMIT`] bytes.
    pub fn new(probe_id: impl Into<String>, status: ProbeStatus, body: &[u8], final_url: impl Into<String>) -> Self {
        let body_excerpt = (status == ProbeStatus::Http(200))
            .then(|| String::from_utf8_lossy(&body[..body.len().min(BODY_EXCERPT_LIMIT)]).into_owned());
        Self { probe_id: probe_id.into(), status, body_excerpt, final_url: final_url.into() }
    }
}

/// One row of the extension catalog. An `identifier_path` starting with `/`
/// names a file relative to the base path; anything else is a component
/// identifier probed under `administrator/components/`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionCatalogEntry {
    pub name: String,
    pub identifier_path: String,
    /// Component manifest file name; defaults to the identifier without its
    /// `com_` prefix plus `.xml`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    pub markers: Vec<String>,
}

impl ExtensionCatalogEntry {
    pub fn is_component(&self) -> bool {
        !self.identifier_path.starts_with('/')
    }

    pub fn manifest_file(&self) -> String {
        self.manifest.clone().unwrap_or_else(|| {
            let id = &self.identifier_path;
            format!("{}.xml", id.strip_prefix("com_").unwrap_or(id))
        })
    }

    fn probe_id(&self) -> String {
        let slug: String =
            self.name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
        format!("ext:{slug}")
    }
}

/// A core probe relative to the base path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreProbe {
    pub probe_id: String,
    pub path: String,
    pub markers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub probe_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub host: String,
    pub base_path: String,
    pub core_detected: bool,
    pub extensions: BTreeSet<String>,
    pub evidence: Vec<Evidence>,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>, FingerprintError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| FingerprintError::Catalog { line: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Parses a line-delimited extension catalog. Names must be unique and every
/// entry needs at least one non-empty marker.
pub fn load_extension_catalog(text: &str) -> Result<Vec<ExtensionCatalogEntry>, FingerprintError> {
    let mut names = HashSet::new();
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (line, e) in parse_lines::<ExtensionCatalogEntry>(text)? {
        let bad = |reason: &str| FingerprintError::Catalog { line, reason: reason.to_string() };
        if e.name.is_empty() || e.identifier_path.is_empty() {
            return Err(bad("name and identifier_path must be non-empty"));
        }
        if e.markers.is_empty() || e.markers.iter().any(String::is_empty) {
            return Err(bad("markers must be non-empty"));
        }
        if !names.insert(e.name.clone()) || !ids.insert(e.probe_id()) {
            return Err(bad("duplicate extension name"));
        }
        out.push(e);
    }
    Ok(out)
}

/// Parses a line-delimited core probe list (`probe_id`, `path` relative to
/// the base path, `markers`).
pub fn load_core_probes(text: &str) -> Result<Vec<CoreProbe>, FingerprintError> {
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    for (line, p) in parse_lines::<CoreProbe>(text)? {
        let bad = |reason: &str| FingerprintError::Catalog { line, reason: reason.to_string() };
        if p.markers.is_empty() || p.markers.iter().any(String::is_empty) {
            return Err(bad("markers must be non-empty"));
        }
        if p.path.starts_with('/') {
            return Err(bad("path is relative to the base path and must not start with '/'"));
        }
        if !ids.insert(p.probe_id.clone()) {
            return Err(bad("duplicate probe_id"));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn bundled_extension_catalog() -> Vec<ExtensionCatalogEntry> {
    load_extension_catalog(BUNDLED_EXTENSIONS).expect("bundled extension catalog is well-formed")
}

pub fn bundled_core_probes() -> Vec<CoreProbe> {
    load_core_probes(BUNDLED_CORE).expect("bundled core probes are well-formed")
}

fn check_base(base_path: &str) -> Result<(), FingerprintError> {
    if base_path.starts_with('/') && base_path.ends_with('/') {
        Ok(())
    } else {
        Err(FingerprintError::BadBasePath(base_path.to_string()))
    }
}

/// The bundled core probes rooted at `base_path`.
pub fn core_probe_set(base_path: &str) -> Result<Vec<ProbeSpec>, FingerprintError> {
    core_probe_set_from(&bundled_core_probes(), base_path)
}

pub fn core_probe_set_from(probes: &[CoreProbe], base_path: &str) -> Result<Vec<ProbeSpec>, FingerprintError> {
    check_base(base_path)?;
    Ok(probes
        .iter()
        .map(|p| ProbeSpec {
            probe_id: p.probe_id.clone(),
            path: format!("{base_path}{}", p.path),
            expect_markers: p.markers.clone(),
            target: ProbeTarget::Core,
        })
        .collect())
}

/// Probes for every catalog entry. Components get their named manifest and
/// a `manifest.xml` fallback (`<probe_id>:fallback`).
pub fn extension_probe_set(
    catalog: &[ExtensionCatalogEntry],
    base_path: &str,
) -> Result<Vec<ProbeSpec>, FingerprintError> {
    check_base(base_path)?;
    let mut out = Vec::new();
    for e in catalog {
        let target = ProbeTarget::Extension(e.name.clone());
        let spec = |probe_id: String, path: String| ProbeSpec {
            probe_id,
            path,
            expect_markers: e.markers.clone(),
            target: target.clone(),
        };
        if e.is_component() {
            let dir = format!("{base_path}administrator/components/{}/", e.identifier_path);
            out.push(spec(e.probe_id(), format!("{dir}{}", e.manifest_file())));
            if e.manifest_file() != "manifest.xml" {
                out.push(spec(format!("{}:fallback", e.probe_id()), format!("{dir}manifest.xml")));
            }
        } else {
            out.push(spec(e.probe_id(), format!("{base_path}{}", &e.identifier_path[1..])));
        }
    }
    Ok(out)
}

/// Directory of the last URL's path, as `/.../`. A last segment containing
/// `.` is taken to be a file and dropped. Unparseable URLs give `/`.
pub fn discover_base_path<S: AsRef<str>>(redirect_chain: &[S]) -> String {
    let Some(last) = redirect_chain.last() else { return "/".into() };
    let Ok(url) = Url::parse(last.as_ref()) else { return "/".into() };
    let mut segments: Vec<&str> = url.path_segments().map(|s| s.collect()).unwrap_or_default();
    if segments.last().is_some_and(|s| s.is_empty() || s.contains('.')) {
        segments.pop();
    }
    segments.retain(|s| !s.is_empty());
    if segments.is_empty() {
        "/".into()
    } else {
        format!("/{}/", segments.join("/"))
    }
}

/// Turns probe results into a detection. Extension hits imply a Joomla
/// install. Every hit is listed in `evidence` with the marker that matched.
pub fn evaluate(
    host: &str,
    base_path: &str,
    results: &[ProbeResult],
    probes: &[ProbeSpec],
) -> Result<Detection, FingerprintError> {
    let by_id: HashMap<&str, &ProbeSpec> = probes.iter().map(|p| (p.probe_id.as_str(), p)).collect();
    let mut detection = Detection {
        host: host.to_string(),
        base_path: base_path.to_string(),
        core_detected: false,
        extensions: BTreeSet::new(),
        evidence: Vec::new(),
    };
    for r in results {
        let spec =
            by_id.get(r.probe_id.as_str()).ok_or_else(|| FingerprintError::UnknownProbeId(r.probe_id.clone()))?;
        if r.status != ProbeStatus::Http(200) {
            continue;
        }
        let Some(body) = &r.body_excerpt else { continue };
        let Some(marker) = spec.expect_markers.iter().find(|m| body.contains(m.as_str())) else { continue };
        detection.core_detected = true;
        if let ProbeTarget::Extension(name) = &spec.target {
            detection.extensions.insert(name.clone());
        }
        detection.evidence.push(Evidence {
            probe_id: r.probe_id.clone(),
            reason: format!("200 at {} contains {marker:?}", spec.path),
        });
    }
    Ok(detection)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(id: &str, body: &str) -> ProbeResult {
        ProbeResult::new(id, ProbeStatus::Http(200), body.as_bytes(), "http://h/")
    }

    #[test]
    fn core_probes_rooted_at_base() {
        let p = core_probe_set("/").unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|s| s.path.starts_with('/') && !s.path.starts_with("//")));
        let robots = p.iter().find(|s| s.path == "/robots.txt").unwrap();
        assert_eq!(robots.expect_markers, ["Joomla!", "If the Joomla site is installed"]);
        let site = core_probe_set("/site/").unwrap();
        assert!(site.iter().all(|s| s.path.starts_with("/site/")));
        assert!(site.iter().any(|s| s.path == "/site/administrator/manifests/files/joomla.xml"
            && s.expect_markers == ["<name>files_joomla</name>"]));
        assert_eq!(core_probe_set("nope"), Err(FingerprintError::BadBasePath("nope".into())));
        assert!(core_probe_set("/site").is_err());
    }

    #[test]
    fn extension_probes() {
        let catalog = bundled_extension_catalog();
        assert_eq!(catalog.len(), 10);
        let p = extension_probe_set(&catalog, "/").unwrap();
        let akeeba = p.iter().find(|s| s.path == "/administrator/components/com_akeeba/akeeba.xml").unwrap();
        assert!(akeeba.expect_markers.contains(&"Akeeba".to_string()));
        assert_eq!(akeeba.target, ProbeTarget::Extension("Akeeba Backup".into()));
        assert!(p.iter().any(|s| s.path == "/administrator/components/com_akeeba/manifest.xml"));
        let sig = p.iter().find(|s| s.path == "/media/sigplus/js/initialization.js").unwrap();
        assert_eq!(sig.expect_markers, ["sigplus"]);
        assert_eq!(p.len(), 9 * 2 + 1);
        assert!(extension_probe_set(&[], "/").unwrap().is_empty());
        let ids: HashSet<_> = p.iter().map(|s| &s.probe_id).collect();
        assert_eq!(ids.len(), p.len());
    }

    #[test]
    fn base_path_discovery() {
        assert_eq!(discover_base_path(&["http://h/"]), "/");
        assert_eq!(discover_base_path(&["http://h/", "https://h/site/"]), "/site/");
        assert_eq!(discover_base_path(&["http://h/", "https://h/site/index.php"]), "/site/");
        assert_eq!(discover_base_path(&["http://h/", "https://h/a/b?x=1"]), "/a/b/");
        assert_eq!(discover_base_path(&["http://h/index.php"]), "/");
        assert_eq!(discover_base_path::<&str>(&[]), "/");
    }

    #[test]
    fn akeeba_hit() {
        let probes = extension_probe_set(&bundled_extension_catalog(), "/").unwrap();
        let d = evaluate("h", "/", &[ok("ext:akeeba-backup", "<name>Akeeba Backup</name>")], &probes).unwrap();
        assert!(d.extensions.contains("Akeeba Backup"));
        assert!(d.core_detected);
        assert_eq!(d.evidence.len(), 1);
    }

    #[test]
    fn misses() {
        let mut probes = core_probe_set("/").unwrap();
        probes.extend(extension_probe_set(&bundled_extension_catalog(), "/").unwrap());
        let all_404: Vec<_> = probes
            .iter()
            .map(|p| ProbeResult::new(&p.probe_id, ProbeStatus::Http(404), b"Joomla! Akeeba", "http://h/"))
            .collect();
        let d = evaluate("h", "/", &all_404, &probes).unwrap();
        assert!(!d.core_detected && d.extensions.is_empty() && d.evidence.is_empty());
        assert!(all_404.iter().all(|r| r.body_excerpt.is_none()));

        let parked = "<html><body><h1>This domain is parked</h1></body></html>";
        let soft: Vec<_> = probes.iter().map(|p| ok(&p.probe_id, parked)).collect();
        let d = evaluate("h", "/", &soft, &probes).unwrap();
        assert!(!d.core_detected && d.extensions.is_empty());
    }

    #[test]
    fn unknown_probe() {
        let probes = core_probe_set("/").unwrap();
        assert_eq!(
            evaluate("h", "/", &[ok("nope", "")], &probes),
            Err(FingerprintError::UnknownProbeId("nope".into()))
        );
    }

    #[test]
    fn excerpt_is_capped() {
        let big = vec![b'a'; BODY_EXCERPT_LIMIT + 10];
        let r = ProbeResult::new("x", ProbeStatus::Http(200), &big, "u");
        assert_eq!(r.body_excerpt.unwrap().len(), BODY_EXCERPT_LIMIT);
    }

    #[test]
    fn catalog_validation() {
        assert!(load_extension_catalog("{\"name\":\"A\",\"identifier_path\":\"com_a\",\"markers\":[]}").is_err());
        let dup = "{\"name\":\"A\",\"identifier_path\":\"com_a\",\"markers\":[\"a\"]}\n".repeat(2);
        assert!(matches!(load_extension_catalog(&dup), Err(FingerprintError::Catalog { line: 2, .. })));
        assert!(load_core_probes("{\"probe_id\":\"x\",\"path\":\"/abs\",\"markers\":[\"m\"]}").is_err());
        let e =
            &load_extension_catalog("{\"name\":\"B\",\"identifier_path\":\"com_b\",\"markers\":[\"b\"]}").unwrap()[0];
        assert_eq!(e.manifest_file(), "b.xml");
    }
}

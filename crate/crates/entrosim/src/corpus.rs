//! Corpus-level extraction: labels CSV in, one `.egr` per input file plus a
//! JSONL manifest out.
//!
//! Manifest: one JSON object per line, sorted by `egr_path`, optionally
//! followed by a final `{"skipped":[...]}` object naming inputs without a
//! label. Labels file: `relative_path,family` CSV, one sample per line.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::egr::write_egr;
use crate::entropy::{extract_file, ExtractConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub family: String,
    pub egr_path: String,
    pub source_len: u64,
    pub n_segments: u64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
    pub skipped: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SkippedLine {
    skipped: Vec<String>,
}

/// Serialize the manifest to JSONL (rows sorted by `egr_path`).
pub fn encode_manifest(manifest: &CorpusManifest) -> String {
    let mut rows = manifest.rows.clone();
    rows.sort_by(|a, b| a.egr_path.cmp(&b.egr_path));
    let mut out = String::new();
    for row in &rows {
        out.push_str(&serde_json::to_string(row).expect("manifest row serializes"));
        out.push('\n');
    }
    if !manifest.skipped.is_empty() {
        let line = SkippedLine {
            skipped: manifest.skipped.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("skipped line serializes"));
        out.push('\n');
    }
    out
}

/// Parse manifest JSONL. The `{"skipped":[...]}` object may only appear as
/// the final line.
pub fn parse_manifest_str(text: &str) -> Result<CorpusManifest> {
    let mut manifest = CorpusManifest::default();
    let mut saw_skipped = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if saw_skipped {
            return Err(Error::Format(format!(
                "manifest line {}: content after skipped section",
                lineno + 1
            )));
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
        if value.get("skipped").is_some() {
            let parsed: SkippedLine = serde_json::from_value(value)
                .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
            manifest.skipped = parsed.skipped;
            saw_skipped = true;
        } else {
            let row: ManifestRow = serde_json::from_value(value)
                .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
            manifest.rows.push(row);
        }
    }
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    std::fs::write(path, encode_manifest(manifest)).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest_str(&text)
}

/// Parse a `relative_path,family` labels CSV.
///
/// The family column is taken after the last comma, so paths may contain
/// commas; family names may not. Blank lines and `#` comments are ignored.
pub fn parse_labels_csv_str(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, family) = line.rsplit_once(',').ok_or_else(|| {
            Error::Format(format!("labels line {}: missing comma", lineno + 1))
        })?;
        let (path, family) = (path.trim(), family.trim());
        if path.is_empty() || family.is_empty() {
            return Err(Error::Format(format!(
                "labels line {}: empty path or family",
                lineno + 1
            )));
        }
        out.push((path.to_string(), family.to_string()));
    }
    Ok(out)
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels_csv_str(&text)
}

pub fn write_labels_csv(path: &Path, labels: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (rel, family) in labels {
        if family.contains(',') {
            return Err(Error::Invalid(format!("family name with comma: {family}")));
        }
        text.push_str(rel);
        text.push(',');
        text.push_str(family);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn relative_paths_under(root: &Path, exclude: Option<&Path>) -> Result<Vec<String>> {
    let mut rels = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| {
            Error::Format(format!("walking {}: {e}", root.display()))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if let Some(skip) = exclude {
            if entry.path() == skip {
                continue;
            }
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        // Forward slashes so ids and manifests are platform-stable.
        let rel: String = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        rels.push(rel);
    }
    rels.sort();
    Ok(rels)
}

/// Extract every labeled file under `root` into `out_dir`.
///
/// One `.egr` per input at `out_dir/<relative_path>.egr`; files with no
/// label land in the manifest's skipped list. Output is bit-identical for
/// any worker count because each graph depends only on its own input bytes.
pub fn extract_corpus(
    root: &Path,
    labels_path: &Path,
    config: &ExtractConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<CorpusManifest> {
    config.validate()?;
    let labels: BTreeMap<String, String> =
        read_labels_csv(labels_path)?.into_iter().collect();
    let exclude = labels_path.canonicalize().ok();
    let rels = relative_paths_under(root, exclude.as_deref())?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut skipped = Vec::new();
    let mut work = Vec::new();
    for rel in rels {
        match labels.get(&rel) {
            Some(family) => work.push((rel, family.clone())),
            None => skipped.push(rel),
        }
    }

    let run = || -> Result<Vec<ManifestRow>> {
        work.par_iter()
            .map(|(rel, family)| {
                let src = root.join(rel);
                let (mut graph, meta) = extract_file(&src, config)?;
                graph.sample_id = rel.clone();
                let egr_rel = format!("{rel}.egr");
                let dst = out_dir.join(&egr_rel);
                if let Some(parent) = dst.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                write_egr(&dst, &graph)?;
                Ok(ManifestRow {
                    id: rel.clone(),
                    family: family.clone(),
                    egr_path: egr_rel,
                    source_len: meta.source_len as u64,
                    n_segments: meta.n_segments as u64,
                    warnings: meta.warnings,
                })
            })
            .collect()
    };

    let mut rows = if workers == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)?
    };
    rows.sort_by(|a, b| a.egr_path.cmp(&b.egr_path));

    let manifest = CorpusManifest { rows, skipped };
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        let text = "famA/one.bin,famA\nfamB/two.bin,famB\n";
        let labels = parse_labels_csv_str(text).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0], ("famA/one.bin".into(), "famA".into()));
    }

    #[test]
    fn labels_allow_comma_in_path() {
        let labels = parse_labels_csv_str("weird,name.bin,fam\n").unwrap();
        assert_eq!(labels[0], ("weird,name.bin".into(), "fam".into()));
    }

    #[test]
    fn labels_reject_missing_comma() {
        assert!(parse_labels_csv_str("no-comma-line\n").is_err());
    }

    #[test]
    fn manifest_round_trip_with_skipped() {
        let manifest = CorpusManifest {
            rows: vec![
                ManifestRow {
                    id: "b/x.bin".into(),
                    family: "famB".into(),
                    egr_path: "b/x.bin.egr".into(),
                    source_len: 10,
                    n_segments: 1,
                    warnings: vec![],
                },
                ManifestRow {
                    id: "a/y.bin".into(),
                    family: "famA".into(),
                    egr_path: "a/y.bin.egr".into(),
                    source_len: 0,
                    n_segments: 0,
                    warnings: vec!["empty source file: graph is all zeros".into()],
                },
            ],
            skipped: vec!["a/unlabeled.bin".into()],
        };
        let text = encode_manifest(&manifest);
        // Sorted by egr_path: a/... before b/...
        assert!(text.find("a/y.bin.egr").unwrap() < text.find("b/x.bin.egr").unwrap());
        let parsed = parse_manifest_str(&text).unwrap();
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.rows[0].egr_path, "a/y.bin.egr");
        assert_eq!(parsed.skipped, manifest.skipped);
    }

    #[test]
    fn manifest_rejects_rows_after_skipped() {
        let text = "{\"skipped\":[]}\n{\"id\":\"x\",\"family\":\"f\",\"egr_path\":\"x.egr\",\"source_len\":1,\"n_segments\":1,\"warnings\":[]}\n";
        assert!(parse_manifest_str(text).is_err());
    }

    #[test]
    fn manifest_rejects_garbage() {
        assert!(parse_manifest_str("not json\n").is_err());
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::{DatasetRecord, RunOutput, StageStats};
use crate::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<FileEntry>,
    pub stats: StageStats,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializes");
    out.push(b'\n');
    out
}

fn write_tree(root: &Path, files: &[(String, Vec<u8>)], stats: StageStats) -> Result<Manifest, PipelineError> {
    fs::create_dir_all(root.join("diagrams")).map_err(|e| PipelineError::io(root, e))?;
    let mut entries = Vec::new();
    for (rel, bytes) in files {
        let path = root.join(rel);
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        entries.push(FileEntry {
            path: rel.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { files: entries, stats };
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, pretty(&manifest)).map_err(|e| PipelineError::io(&path, e))?;
    Ok(manifest)
}

fn sibling(dir: &Path, tag: &str) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    dir.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

/// Writes records, rejections, diagrams, stats and a manifest into `dir`.
///
/// Everything is written to a sibling staging directory first and moved into
/// place with a rename, so `dir` never holds a partial run. An existing `dir`
/// is replaced only if it holds a manifest from an earlier run.
pub fn persist(out: &RunOutput, dir: &Path) -> Result<Manifest, PipelineError> {
    if dir.exists() && !dir.join(MANIFEST_FILE).is_file() {
        return Err(PipelineError::NotAnOutputDir(dir.display().to_string()));
    }
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }

    let mut files = vec![
        ("records.jsonl".to_string(), jsonl(out.retained.iter().map(|r| &r.record))),
        ("rejections.jsonl".to_string(), jsonl(&out.rejections)),
        ("stats.json".to_string(), pretty(&out.stats)),
    ];
    for r in &out.retained {
        files.push((r.record.diagram.clone(), r.svg.clone()));
    }

    let staging = sibling(dir, "staging");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| PipelineError::io(&staging, e))?;
    }
    let manifest = match write_tree(&staging, &files, out.stats) {
        Ok(m) => m,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };

    let previous = sibling(dir, "previous");
    let had_previous = dir.exists();
    if had_previous {
        fs::rename(dir, &previous).map_err(|e| {
            let _ = fs::remove_dir_all(&staging);
            PipelineError::io(dir, e)
        })?;
    }
    if let Err(e) = fs::rename(&staging, dir) {
        if had_previous {
            let _ = fs::rename(&previous, dir);
        }
        let _ = fs::remove_dir_all(&staging);
        return Err(PipelineError::io(dir, e));
    }
    if had_previous {
        fs::remove_dir_all(&previous).map_err(|e| PipelineError::io(&previous, e))?;
    }
    Ok(manifest)
}

fn walk(root: &Path, rel: &str, out: &mut Vec<String>) -> Result<(), PipelineError> {
    let dir = root.join(rel);
    for entry in fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))? {
        let entry = entry.map_err(|e| PipelineError::io(&dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let child = if rel.is_empty() { name } else { format!("{rel}/{name}") };
        if entry.path().is_dir() {
            walk(root, &child, out)?;
        } else {
            out.push(child);
        }
    }
    Ok(())
}

/// Re-hashes an output directory against its manifest. Returns one message
/// per missing, unlisted or altered file; empty means intact.
pub fn hash_walk(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read(&mpath).map_err(|e| PipelineError::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| PipelineError::Corrupt {
        path: mpath.display().to_string(),
        message: e.to_string(),
    })?;
    let mut on_disk = Vec::new();
    walk(dir, "", &mut on_disk)?;
    on_disk.retain(|p| p != MANIFEST_FILE);
    on_disk.sort();

    let mut problems = Vec::new();
    for f in &manifest.files {
        match fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 && bytes.len() as u64 == f.bytes => {}
            Ok(_) => problems.push(format!("{}: content differs from manifest", f.path)),
            Err(_) => problems.push(format!("{}: missing", f.path)),
        }
    }
    for p in on_disk {
        if !manifest.files.iter().any(|f| f.path == p) {
            problems.push(format!("{p}: not listed in manifest"));
        }
    }
    Ok(problems)
}

/// Records of a persisted run, parsed back from `records.jsonl`.
pub fn read_records(dir: &Path) -> Result<Vec<DatasetRecord>, PipelineError> {
    let path = dir.join("records.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Corrupt {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

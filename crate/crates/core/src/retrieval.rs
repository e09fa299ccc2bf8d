//! Keyword index over classified images and conjunctive/disjunctive
//! keyword queries.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mlnn::MlnnModel;
use crate::pipeline::{analyze_image, PipelineParams};

pub const INDEX_MAGIC: &str = "RIQIDX 1";
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "ppm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    pub keywords: BTreeSet<String>,
    pub region_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageIndex {
    pub fingerprint: String,
    pub records: Vec<ImageRecord>,
}

#[derive(Debug)]
pub struct IndexFailure {
    pub id: String,
    pub error: Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryMode {
    /// Records containing every query keyword.
    #[default]
    All,
    /// Records containing at least one query keyword.
    Any,
}

/// SHA-256 over the model file bytes and the pipeline parameters.
pub fn fingerprint(model_bytes: &[u8], p: &PipelineParams) -> String {
    let mut h = Sha256::new();
    h.update(model_bytes);
    h.update(b"\n");
    h.update(p.segmentation.canonical().as_bytes());
    h.update(
        format!(
            "\ntarget_size={} sigma={:e} kernel={} equalize={} patch={} levels={}",
            p.preprocess.target_size,
            p.preprocess.gaussian_sigma,
            p.preprocess.gaussian_kernel,
            p.preprocess.equalize,
            p.features.patch_side,
            p.features.levels
        )
        .as_bytes(),
    );
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(Error::invalid(
            "image id",
            format!("{id:?} is empty or contains tab/newline"),
        ));
    }
    Ok(())
}

/// Classifies every significant region and records the set of predicted
/// category names.
pub fn index_image(path: &Path, id: &str, model: &MlnnModel, p: &PipelineParams) -> Result<ImageRecord> {
    check_id(id)?;
    let analysis = analyze_image(path, p)?;
    let mut keywords = BTreeSet::new();
    for f in &analysis.features {
        let (level, _) = model.classify(f)?;
        keywords.insert(model.category_name(level).to_string());
    }
    Ok(ImageRecord {
        id: id.to_string(),
        keywords,
        region_count: analysis.features.len(),
    })
}

/// Image files under `root`, recursively, as `(id, path)` sorted by id.
/// Ids are `/`-separated paths relative to `root`.
pub fn list_images(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            let id = if prefix.is_empty() {
                name
            } else {
                format!("{prefix}/{name}")
            };
            if entry.file_type()?.is_dir() {
                walk(&path, &id, out)?;
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            {
                out.push((id, path));
            }
        }
        Ok(())
    }
    if !root.is_dir() {
        return Err(Error::FileNotFound(root.to_path_buf()));
    }
    let mut out = Vec::new();
    walk(root, "", &mut out)?;
    out.sort();
    Ok(out)
}

/// Indexes every image under `root`. Images that fail are reported and
/// left out; record order follows the sorted ids.
pub fn build_index(
    root: &Path,
    model: &MlnnModel,
    model_bytes: &[u8],
    p: &PipelineParams,
) -> Result<(ImageIndex, Vec<IndexFailure>)> {
    let images = list_images(root)?;
    let results: Vec<_> = images
        .par_iter()
        .map(|(id, path)| index_image(path, id, model, p).map_err(|error| IndexFailure { id: id.clone(), error }))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    Ok((
        ImageIndex {
            fingerprint: fingerprint(model_bytes, p),
            records,
        },
        failures,
    ))
}

/// Maps query terms onto category names, case-insensitively.
pub fn resolve_keywords<T: AsRef<str>, C: AsRef<str>>(terms: &[T], categories: &[C]) -> Result<BTreeSet<String>> {
    terms
        .iter()
        .map(|t| {
            let t = t.as_ref();
            categories
                .iter()
                .map(AsRef::as_ref)
                .find(|c| c.eq_ignore_ascii_case(t))
                .map(str::to_string)
                .ok_or_else(|| Error::UnknownKeyword(t.to_string()))
        })
        .collect()
}

/// Ids of matching records, sorted.
pub fn query(index: &ImageIndex, keywords: &BTreeSet<String>, mode: QueryMode) -> Vec<String> {
    let mut ids: Vec<String> = index
        .records
        .iter()
        .filter(|r| match mode {
            QueryMode::All => keywords.is_subset(&r.keywords),
            QueryMode::Any => keywords.iter().any(|k| r.keywords.contains(k)),
        })
        .map(|r| r.id.clone())
        .collect();
    ids.sort();
    ids
}

impl ImageIndex {
    pub fn check_fingerprint(&self, current: &str) -> Result<()> {
        if self.fingerprint != current {
            return Err(Error::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                current: current.to_string(),
            });
        }
        Ok(())
    }
}

pub fn index_to_string(index: &ImageIndex) -> String {
    let mut out = format!("{INDEX_MAGIC}\nfingerprint {}\n", index.fingerprint);
    for r in &index.records {
        let kw = if r.keywords.is_empty() {
            "-".to_string()
        } else {
            r.keywords.iter().cloned().collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(out, "{}\t{kw}\t{}", r.id, r.region_count);
    }
    out
}

pub fn save_index(index: &ImageIndex, path: &Path) -> Result<()> {
    for r in &index.records {
        check_id(&r.id)?;
    }
    std::fs::write(path, index_to_string(index))?;
    Ok(())
}

pub fn parse_index(text: &str) -> Result<ImageIndex> {
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if magic != INDEX_MAGIC {
        return Err(Error::format(format!("bad magic {magic:?}, expected {INDEX_MAGIC:?}")));
    }
    let fingerprint = lines
        .next()
        .and_then(|l| l.strip_prefix("fingerprint "))
        .filter(|f| f.len() == 64 && f.bytes().all(|b| b.is_ascii_hexdigit()))
        .ok_or_else(|| Error::format("line 2: expected `fingerprint <64 hex digits>`"))?
        .to_string();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let n = i + 3;
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, kw, count] = fields[..] else {
            return Err(Error::format(format!("line {n}: expected 3 tab-separated fields")));
        };
        if id.is_empty() || !seen.insert(id) {
            return Err(Error::format(format!("line {n}: empty or duplicate id {id:?}")));
        }
        let keywords: BTreeSet<String> = match kw {
            "-" => BTreeSet::new(),
            _ => kw.split(',').map(str::to_string).collect(),
        };
        if keywords.iter().any(String::is_empty) {
            return Err(Error::format(format!("line {n}: empty keyword")));
        }
        let region_count = count
            .parse()
            .map_err(|_| Error::format(format!("line {n}: bad region count {count:?}")))?;
        records.push(ImageRecord {
            id: id.to_string(),
            keywords,
            region_count,
        });
    }
    Ok(ImageIndex { fingerprint, records })
}

pub fn load_index(path: &Path) -> Result<ImageIndex> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        std::io::ErrorKind::InvalidData => Error::format("index file is not UTF-8"),
        _ => Error::Io(e),
    })?;
    parse_index(&text)
}

//! Labeled-region manifests: `<image path>\t<region index>\t<category>` per
//! line. Relative image paths resolve against the manifest's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mlnn::LabeledRegion;
use crate::pipeline::{analyze_image, PipelineParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    pub image: PathBuf,
    pub region: usize,
    pub category: String,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::BadManifest {
            line,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = raw.split('\t').collect();
        let [image, region, category] = fields[..] else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let region = region
            .trim()
            .parse()
            .map_err(|_| bad("region index is not an integer"))?;
        let image = Path::new(image);
        let image = if image.is_absolute() {
            image.to_path_buf()
        } else {
            base.join(image)
        };
        out.push(ManifestEntry {
            line,
            image,
            region,
            category: category.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Segments every referenced image once and returns the raw features of the
/// listed regions, in manifest order.
pub fn load_labeled(
    entries: &[ManifestEntry],
    categories: &[String],
    p: &PipelineParams,
) -> Result<Vec<LabeledRegion>> {
    let mut images: Vec<&Path> = Vec::new();
    let mut slot: HashMap<&Path, usize> = HashMap::new();
    for e in entries {
        if !categories.contains(&e.category) {
            return Err(Error::BadManifest {
                line: e.line,
                reason: format!("unknown category {:?}", e.category),
            });
        }
        slot.entry(e.image.as_path()).or_insert_with(|| {
            images.push(e.image.as_path());
            images.len() - 1
        });
    }
    let analyses = images
        .par_iter()
        .map(|path| analyze_image(path, p).map(|a| a.features))
        .collect::<Vec<_>>();
    let mut analyses = analyses.into_iter().collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let features = &mut analyses[slot[e.image.as_path()]];
        let fv = features.get(e.region).ok_or_else(|| Error::BadManifest {
            line: e.line,
            reason: format!(
                "region {} out of range: {} has {} significant regions",
                e.region,
                e.image.display(),
                features.len()
            ),
        })?;
        let category = categories.iter().position(|c| *c == e.category).unwrap() + 1;
        out.push(LabeledRegion {
            features: fv.clone(),
            category,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let text = "# comment\nimgs/a.ppm\t0\tSky\n\n/abs/b.ppm\t2\tWater\n";
        let e = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].image, PathBuf::from("/data/imgs/a.ppm"));
        assert_eq!((e[0].line, e[0].region), (2, 0));
        assert_eq!(e[1].image, PathBuf::from("/abs/b.ppm"));
        assert_eq!(e[1].category, "Water");
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_manifest("a.ppm\t0\tSky\na.ppm\tx\tSky\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::BadManifest { line: 2, .. }));
        let err = parse_manifest("a.ppm 0 Sky\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::BadManifest { line: 1, .. }));
    }
}

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{preprocess, LineImage, Sample};

/// One manifest line: `image-path<TAB>transcript`, path relative to the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub transcript: String,
}

pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fail = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (img, transcript) = line
            .split_once('\t')
            .ok_or_else(|| fail("missing TAB between image path and transcript".into()))?;
        if img.is_empty() {
            return Err(fail("empty image path".into()));
        }
        if !seen.insert(img.to_string()) {
            return Err(fail(format!("duplicate image path `{img}`")));
        }
        out.push(ManifestEntry {
            path: base.join(img),
            transcript: transcript.to_string(),
        });
    }
    Ok(out)
}

/// Read a manifest and its images (raw 0-255 gray values, unpreprocessed).
pub fn load_manifest(path: &Path) -> Result<Vec<Sample>> {
    parse_manifest(path)?
        .into_iter()
        .map(|e| {
            if !e.path.is_file() {
                return Err(Error::Manifest {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: format!("image {} not found", e.path.display()),
                });
            }
            Ok(Sample {
                id: e.path.display().to_string(),
                image: LineImage::read_raw(&e.path)?,
                transcript: e.transcript,
            })
        })
        .collect()
}

/// [`load_manifest`] followed by [`preprocess`] of every image.
pub fn load_dataset(path: &Path, height: usize) -> Result<Vec<Sample>> {
    load_manifest(path)?
        .into_iter()
        .map(|s| {
            let image = preprocess(&s.image, height).map_err(|e| e.in_sample(&s.id))?;
            Ok(Sample { image, ..s })
        })
        .collect()
}

pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (img, transcript) in entries {
        text.push_str(img);
        text.push('\t');
        text.push_str(transcript);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

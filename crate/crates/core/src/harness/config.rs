//! Run configuration and its line-oriented `key = value` file format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may use `-` or
//! `_`. List values: `specs` are separated by `;` (a spec contains commas),
//! `sizes` by `,`. Relative paths are taken relative to the working
//! directory. Every key accepted here is also a command-line flag, and flags
//! given on the command line override the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::AugmentRanges;
use crate::error::{Error, Result};
use crate::model::Profile;
use crate::optim::AdamHyper;
use crate::scalar::Precision;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Source checkpoint for `finetune`/`sweep`, model for `evaluate`.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Architecture for scratch training (reduced when unset). When set for
    /// a fine-tune it must match the source checkpoint.
    pub profile: Option<Profile>,
    /// Overrides the profile's input height.
    pub height: Option<usize>,
    pub precision: Precision,
    pub seed: u64,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub freeze: String,
    /// Train on a seeded random subset of this many lines.
    pub train_lines: Option<usize>,
    pub specs: Vec<String>,
    pub sizes: Vec<usize>,
    pub augment: bool,
    pub ranges: AugmentRanges,
    /// Write per-line transcriptions when evaluating.
    pub dump: bool,
    /// Fail evaluation when the data has characters outside the alphabet.
    pub strict: bool,
    pub source_lines: usize,
    pub target_lines: usize,
    /// Print a line per epoch to stderr.
    pub progress: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: None,
            valid: None,
            test: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            profile: None,
            height: None,
            precision: Precision::F64,
            seed: 1,
            epochs: 10,
            patience: None,
            batch_size: 20,
            lr: AdamHyper::default().lr,
            freeze: "ALL".into(),
            train_lines: None,
            specs: Vec::new(),
            sizes: Vec::new(),
            augment: false,
            ranges: AugmentRanges::default(),
            dump: false,
            strict: false,
            source_lines: 1000,
            target_lines: 100,
            progress: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected on/off, got `{value}`"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "train" => self.train = opt_path(value),
            "valid" => self.valid = opt_path(value),
            "test" => self.test = opt_path(value),
            "checkpoint" => self.checkpoint = opt_path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "profile" => self.profile = Some(Profile::parse(value)?),
            "height" => self.height = Some(num(&key, value)?),
            "precision" => {
                self.precision = Precision::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown precision `{value}`")))?
            }
            "seed" => self.seed = num(&key, value)?,
            "epochs" => self.epochs = num(&key, value)?,
            "patience" => self.patience = Some(num(&key, value)?),
            "batch_size" => self.batch_size = num(&key, value)?,
            "lr" => self.lr = num(&key, value)?,
            "freeze" => self.freeze = value.to_string(),
            "train_lines" => self.train_lines = Some(num(&key, value)?),
            "specs" => {
                self.specs = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "sizes" => {
                self.sizes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num(&key, s))
                    .collect::<Result<_>>()?
            }
            "augment" => self.augment = flag(&key, value)?,
            "aug_rotation" => self.ranges.max_rotation_deg = num(&key, value)?,
            "aug_shear" => self.ranges.max_shear = num(&key, value)?,
            "aug_translate" => self.ranges.max_translate = num(&key, value)?,
            "aug_scale_min" => self.ranges.min_scale = num(&key, value)?,
            "aug_scale_max" => self.ranges.max_scale = num(&key, value)?,
            "aug_radius" => self.ranges.max_radius = num(&key, value)?,
            "dump" => self.dump = flag(&key, value)?,
            "strict" => self.strict = flag(&key, value)?,
            "source_lines" => self.source_lines = num(&key, value)?,
            "target_lines" => self.target_lines = num(&key, value)?,
            "progress" => self.progress = flag(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            ..AdamHyper::default()
        }
    }

    /// Every setting in the file format; reading it back gives `self`.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("train", path(&self.train));
        put("valid", path(&self.valid));
        put("test", path(&self.test));
        put("checkpoint", path(&self.checkpoint));
        put("out_dir", self.out_dir.display().to_string());
        if let Some(p) = self.profile {
            put("profile", p.as_str().into());
        }
        if let Some(h) = self.height {
            put("height", h.to_string());
        }
        put("precision", self.precision.as_str().into());
        put("seed", self.seed.to_string());
        put("epochs", self.epochs.to_string());
        if let Some(p) = self.patience {
            put("patience", p.to_string());
        }
        put("batch_size", self.batch_size.to_string());
        put("lr", format!("{:?}", self.lr));
        put("freeze", self.freeze.clone());
        if let Some(n) = self.train_lines {
            put("train_lines", n.to_string());
        }
        put("specs", self.specs.join("; "));
        put(
            "sizes",
            self.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        put("augment", self.augment.to_string());
        put("aug_rotation", format!("{:?}", self.ranges.max_rotation_deg));
        put("aug_shear", format!("{:?}", self.ranges.max_shear));
        put("aug_translate", format!("{:?}", self.ranges.max_translate));
        put("aug_scale_min", format!("{:?}", self.ranges.min_scale));
        put("aug_scale_max", format!("{:?}", self.ranges.max_scale));
        put("aug_radius", self.ranges.max_radius.to_string());
        put("dump", self.dump.to_string());
        put("strict", self.strict.to_string());
        put("source_lines", self.source_lines.to_string());
        put("target_lines", self.target_lines.to_string());
        put("progress", self.progress.to_string());
        s
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.txt");
        fs::write(&path, self.snapshot()).map_err(|e| Error::io(&path, e))
    }

    pub(crate) fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required")))
    }
}

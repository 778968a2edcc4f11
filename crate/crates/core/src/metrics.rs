//! Edit distance, character error rate and CSV reporting.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(reference: &str, hypothesis: &str) -> usize {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    let mut prev: Vec<usize> = (0..=h.len()).collect();
    let mut cur = vec![0; h.len() + 1];
    for (i, &rc) in r.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &hc) in h.iter().enumerate() {
            let sub = prev[j] + usize::from(rc != hc);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[h.len()]
}

/// Corpus totals behind a CER.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub edits: usize,
    pub reference_chars: usize,
    pub samples: usize,
}

impl ErrorCounts {
    pub fn from_pairs<R: AsRef<str>, H: AsRef<str>>(pairs: &[(R, H)]) -> Self {
        pairs.iter().fold(ErrorCounts::default(), |acc, (r, h)| ErrorCounts {
            edits: acc.edits + edit_distance(r.as_ref(), h.as_ref()),
            reference_chars: acc.reference_chars + r.as_ref().chars().count(),
            samples: acc.samples + 1,
        })
    }

    pub fn cer(&self) -> Result<f64> {
        if self.reference_chars == 0 {
            return Err(Error::Invalid("CER undefined: references are empty".into()));
        }
        Ok(self.edits as f64 / self.reference_chars as f64)
    }
}

/// Micro-averaged character error rate: total edits over total reference
/// characters.
pub fn cer<R: AsRef<str>, H: AsRef<str>>(pairs: &[(R, H)]) -> Result<f64> {
    ErrorCounts::from_pairs(pairs).cer()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitResult {
    pub cer: f64,
    pub counts: ErrorCounts,
}

/// One row of a results table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    /// Trainable-layers label exactly as given by the user.
    pub label: String,
    pub train: Option<SplitResult>,
    pub valid: Option<SplitResult>,
    pub test: Option<SplitResult>,
    pub train_lines: usize,
    pub seed: u64,
    pub epochs: usize,
    /// Set when the run failed; CER columns are then empty.
    pub error: Option<String>,
}

pub const REPORT_HEADER: &str =
    "trainable_layers,train_cer,valid_cer,test_cer,train_lines,seed,epochs,test_edits,test_chars,error";

fn percent(r: &Option<SplitResult>) -> String {
    r.as_ref().map_or(String::new(), |s| format!("{:.1}", s.cer * 100.0))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV with one row per report in input order; CER columns are percentages
/// with one decimal.
pub fn report_table(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let (edits, chars) = r
            .test
            .as_ref()
            .map_or((String::new(), String::new()), |t| {
                (t.counts.edits.to_string(), t.counts.reference_chars.to_string())
            });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.label),
            percent(&r.train),
            percent(&r.valid),
            percent(&r.test),
            r.train_lines,
            r.seed,
            r.epochs,
            edits,
            chars,
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

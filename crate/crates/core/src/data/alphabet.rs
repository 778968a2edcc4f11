use std::collections::HashMap;

use crate::ctc::LabelSeq;
use crate::error::{Error, Result};

use super::Sample;

/// Ordered character set; index `len()` is the CTC blank.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    /// Characters are kept in the given order; duplicates are an error.
    pub fn new(chars: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::Invalid(format!("duplicate alphabet character {c:?}")));
            }
        }
        Ok(Alphabet { chars, index })
    }

    /// Sorted unique characters (code-point order) of all transcripts.
    pub fn from_transcripts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = texts.into_iter().flat_map(str::chars).collect();
        chars.sort_unstable();
        chars.dedup();
        Alphabet::new(chars).expect("deduplicated")
    }

    pub fn from_samples(samples: &[Sample]) -> Self {
        Self::from_transcripts(samples.iter().map(|s| s.transcript.as_str()))
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn encode(&self, text: &str, sample: &str) -> Result<LabelSeq> {
        text.chars()
            .map(|ch| {
                self.index_of(ch).ok_or_else(|| Error::Encode {
                    sample: sample.to_string(),
                    ch,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelSeq)
    }

    pub fn decode(&self, labels: &LabelSeq) -> String {
        labels.as_slice().iter().filter_map(|&i| self.chars.get(i)).collect()
    }

    /// Characters of `text` missing from the alphabet, sorted and unique.
    pub fn unknown_chars<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> Vec<char> {
        let mut v: Vec<char> = texts
            .into_iter()
            .flat_map(str::chars)
            .filter(|c| !self.index.contains_key(c))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }
}

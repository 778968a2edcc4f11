//! Trainable-layer sets written as `Conv[1,2], BLSTM[3,4,5], FC`.
//!
//! Listed layers are trainable; everything else is frozen. Layer indices are
//! 1 to 5, names are case-insensitive, and whitespace is ignored. `ALL`
//! alone makes every layer trainable.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

use super::ModelConfig;

const MAX_INDEX: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FreezeSpec {
    /// Every layer trains (scratch training).
    All,
    Layers(BTreeSet<String>),
}

impl FreezeSpec {
    pub fn all() -> Self {
        FreezeSpec::All
    }

    pub fn from_layers<I, S>(layers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FreezeSpec::Layers(layers.into_iter().map(Into::into).collect())
    }

    pub fn is_trainable(&self, layer: &str) -> bool {
        match self {
            FreezeSpec::All => true,
            FreezeSpec::Layers(set) => set.contains(layer),
        }
    }

    /// Check against a concrete architecture: every listed layer must exist
    /// and at least one layer must train.
    pub fn validate_for(&self, config: &ModelConfig) -> Result<()> {
        let names = config.layer_names();
        if let FreezeSpec::Layers(set) = self {
            if let Some(missing) = set.iter().find(|l| !names.contains(l)) {
                return Err(Error::FreezeSpec {
                    spec: self.to_string(),
                    reason: format!("layer `{missing}` does not exist in this model"),
                });
            }
            if set.is_empty() {
                return Err(Error::NothingTrainable);
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |reason: String| Error::FreezeSpec {
            spec: text.to_string(),
            reason,
        };
        let s: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err("empty spec".into()));
        }
        if s.iter().collect::<String>().eq_ignore_ascii_case("all") {
            return Ok(FreezeSpec::All);
        }
        let mut layers = BTreeSet::new();
        let add = |name: String, layers: &mut BTreeSet<String>| {
            if !layers.insert(name.clone()) {
                return Err(err(format!("layer `{name}` listed twice")));
            }
            Ok(())
        };
        let mut i = 0;
        loop {
            let start = i;
            while i < s.len() && s[i].is_ascii_alphabetic() {
                i += 1;
            }
            let word: String = s[start..i].iter().collect::<String>().to_ascii_lowercase();
            match word.as_str() {
                "fc" => {
                    if s.get(i) == Some(&'[') {
                        return Err(err("FC takes no indices".into()));
                    }
                    add("fc".into(), &mut layers)?;
                }
                "conv" | "blstm" => {
                    if s.get(i) != Some(&'[') {
                        return Err(err(format!("expected `[` after `{word}`")));
                    }
                    i += 1;
                    let close = s[i..]
                        .iter()
                        .position(|&c| c == ']')
                        .ok_or_else(|| err("unclosed `[`".into()))?;
                    let inner: String = s[i..i + close].iter().collect();
                    if inner.is_empty() || inner.contains('[') {
                        return Err(err(format!("malformed index list `[{inner}]`")));
                    }
                    for idx in inner.split(',') {
                        let n: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
                        if !(1..=MAX_INDEX).contains(&n) {
                            return Err(err(format!("index {n} outside 1..={MAX_INDEX}")));
                        }
                        add(format!("{word}{n}"), &mut layers)?;
                    }
                    i += close + 1;
                }
                "" => return Err(err(format!("unexpected `{}`", s.get(i).copied().unwrap_or(' ')))),
                other => return Err(err(format!("unknown layer `{other}`"))),
            }
            match s.get(i) {
                None => break,
                Some(',') if i + 1 < s.len() => i += 1,
                Some(c) => return Err(err(format!("unexpected `{c}`"))),
            }
        }
        Ok(FreezeSpec::Layers(layers))
    }
}

impl fmt::Display for FreezeSpec {
    /// Canonical spelling, e.g. `Conv[3,4,5], BLSTM[1,2], FC`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = match self {
            FreezeSpec::All => return f.write_str("ALL"),
            FreezeSpec::Layers(set) => set,
        };
        let indices = |prefix: &str| -> Vec<String> {
            let mut v: Vec<usize> = set
                .iter()
                .filter_map(|l| l.strip_prefix(prefix).and_then(|n| n.parse().ok()))
                .collect();
            v.sort_unstable();
            v.iter().map(|n| n.to_string()).collect()
        };
        let mut groups = Vec::new();
        for (prefix, label) in [("conv", "Conv"), ("blstm", "BLSTM")] {
            let idx = indices(prefix);
            if !idx.is_empty() {
                groups.push(format!("{label}[{}]", idx.join(",")));
            }
        }
        if set.contains("fc") {
            groups.push("FC".into());
        }
        f.write_str(&groups.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layers(spec: &str) -> Vec<String> {
        match FreezeSpec::parse(spec).unwrap() {
            FreezeSpec::Layers(s) => s.into_iter().collect(),
            FreezeSpec::All => unreachable!(),
        }
    }

    #[test]
    fn table_rows() {
        assert_eq!(layers("FC"), ["fc"]);
        assert_eq!(layers("BLSTM[3,4,5], FC"), ["blstm3", "blstm4", "blstm5", "fc"]);
        let all = layers("Conv[1,2,3,4,5], BLSTM[1,2,3,4,5], FC");
        assert_eq!(all.len(), 11);
        let cfg = ModelConfig::paper(79);
        assert_eq!(all, cfg.layer_names().into_iter().collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn whitespace_and_case() {
        assert_eq!(layers(" conv [ 2 , 3 ] ,fc "), ["conv2", "conv3", "fc"]);
    }

    #[test]
    fn errors() {
        for bad in [
            "",
            "LSTM[1], FC",
            "Conv[6], FC",
            "Conv[0]",
            "Conv[1,1], FC",
            "FC, FC",
            "Conv[1,2",
            "Conv1",
            "Conv[], FC",
            "FC[1]",
            "Conv[4,5]. BLSTM[1], FC",
            "FC,",
            "BLSTM[x]",
        ] {
            assert!(
                matches!(FreezeSpec::parse(bad), Err(Error::FreezeSpec { .. })),
                "accepted `{bad}`"
            );
        }
    }

    #[test]
    fn canonical_display() {
        let s = FreezeSpec::parse("FC, BLSTM[5,3], Conv[2]").unwrap();
        assert_eq!(s.to_string(), "Conv[2], BLSTM[3,5], FC");
        assert_eq!(FreezeSpec::parse(&s.to_string()).unwrap(), s);
        assert_eq!(FreezeSpec::parse(" all ").unwrap(), FreezeSpec::All);
        assert_eq!(FreezeSpec::parse(&FreezeSpec::All.to_string()).unwrap(), FreezeSpec::All);
        assert!(FreezeSpec::parse("ALL, FC").is_err());
    }

    #[test]
    fn validation_against_model() {
        let reduced = ModelConfig::reduced(10);
        assert!(FreezeSpec::parse("BLSTM[1,2], FC").unwrap().validate_for(&reduced).is_ok());
        assert!(FreezeSpec::parse("BLSTM[3], FC").unwrap().validate_for(&reduced).is_err());
        assert!(matches!(
            FreezeSpec::from_layers(Vec::<String>::new()).validate_for(&reduced),
            Err(Error::NothingTrainable)
        ));
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Precision;

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub conv_filters: Vec<usize>,
    /// 1-based indices of the conv layers followed by 2x2 max pooling.
    pub pool_after: Vec<usize>,
    pub lstm_layers: usize,
    pub lstm_units: usize,
    /// Applied after every conv layer except the first.
    pub dropout_cnn: f64,
    /// Applied after every BLSTM layer.
    pub dropout_lstm: f64,
    pub alphabet_size: usize,
    pub input_height: usize,
    pub leaky_slope: f64,
    pub precision: Precision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Paper,
    Reduced,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "paper" => Ok(Profile::Paper),
            "reduced" => Ok(Profile::Reduced),
            other => Err(Error::Config(format!("unknown model profile `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Reduced => "reduced",
        }
    }

    pub fn config(self, alphabet_size: usize) -> ModelConfig {
        match self {
            Profile::Paper => ModelConfig::paper(alphabet_size),
            Profile::Reduced => ModelConfig::reduced(alphabet_size),
        }
    }
}

impl ModelConfig {
    /// Full-size network: five conv layers, five 256-unit BLSTM layers,
    /// 128-pixel input height.
    pub fn paper(alphabet_size: usize) -> Self {
        ModelConfig {
            conv_filters: vec![16, 32, 48, 64, 80],
            pool_after: vec![1, 2, 3],
            lstm_layers: 5,
            lstm_units: 256,
            dropout_cnn: 0.2,
            dropout_lstm: 0.5,
            alphabet_size,
            input_height: 128,
            leaky_slope: 0.01,
            precision: Precision::F64,
        }
    }

    /// Desk-scale network exercising the same code paths.
    pub fn reduced(alphabet_size: usize) -> Self {
        ModelConfig {
            conv_filters: vec![8, 16, 16],
            pool_after: vec![1, 2, 3],
            lstm_layers: 2,
            lstm_units: 32,
            input_height: 32,
            ..Self::paper(alphabet_size)
        }
    }

    pub fn profile(&self) -> Option<Profile> {
        let strip = |c: &ModelConfig| ModelConfig {
            alphabet_size: 0,
            precision: Precision::F64,
            dropout_cnn: 0.0,
            dropout_lstm: 0.0,
            leaky_slope: 0.0,
            ..c.clone()
        };
        [Profile::Paper, Profile::Reduced]
            .into_iter()
            .find(|p| strip(&p.config(0)) == strip(self))
    }

    pub fn downsampling(&self) -> usize {
        1 << self.pool_after.len()
    }

    /// Feature width of the collapsed sequence entering the first BLSTM.
    pub fn sequence_features(&self) -> usize {
        (self.input_height / self.downsampling()) * self.conv_filters.last().copied().unwrap_or(0)
    }

    pub fn classes(&self) -> usize {
        self.alphabet_size + 1
    }

    /// Number of output timesteps for an input of the given width.
    pub fn sequence_len(&self, width: usize) -> usize {
        self.pool_after.iter().fold(width, |w, _| w / 2)
    }

    pub fn conv_pools(&self, layer: usize) -> bool {
        self.pool_after.contains(&(layer + 1))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            return fail(format!("bad conv filters {:?}", self.conv_filters));
        }
        let mut pools = self.pool_after.clone();
        pools.sort_unstable();
        pools.dedup();
        if pools.len() != self.pool_after.len() || pools.iter().any(|&p| p == 0 || p > self.conv_filters.len()) {
            return fail(format!("bad pooling layers {:?}", self.pool_after));
        }
        if self.lstm_layers == 0 || self.lstm_units == 0 {
            return fail("need at least one BLSTM layer with units".into());
        }
        if self.alphabet_size == 0 {
            return fail("alphabet is empty".into());
        }
        if self.input_height == 0 || !self.input_height.is_multiple_of(self.downsampling()) {
            return fail(format!(
                "input height {} not divisible by {}",
                self.input_height,
                self.downsampling()
            ));
        }
        for (name, r) in [("dropout_cnn", self.dropout_cnn), ("dropout_lstm", self.dropout_lstm)] {
            if !(0.0..1.0).contains(&r) {
                return fail(format!("{name} {r} outside [0, 1)"));
            }
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return fail(format!("leaky slope {} outside (0, 1)", self.leaky_slope));
        }
        Ok(())
    }

    /// Layer names in network order.
    pub fn layer_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.conv_filters.len()).map(|i| format!("conv{i}")).collect();
        v.extend((1..=self.lstm_layers).map(|i| format!("blstm{i}")));
        v.push("fc".into());
        v
    }

    pub fn to_kv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "conv_filters={}", join(&self.conv_filters));
        let _ = writeln!(s, "pool_after={}", join(&self.pool_after));
        let _ = writeln!(s, "lstm_layers={}", self.lstm_layers);
        let _ = writeln!(s, "lstm_units={}", self.lstm_units);
        let _ = writeln!(s, "dropout_cnn={}", self.dropout_cnn);
        let _ = writeln!(s, "dropout_lstm={}", self.dropout_lstm);
        let _ = writeln!(s, "alphabet_size={}", self.alphabet_size);
        let _ = writeln!(s, "input_height={}", self.input_height);
        let _ = writeln!(s, "leaky_slope={}", self.leaky_slope);
        let _ = writeln!(s, "precision={}", self.precision.as_str());
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map: BTreeMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| Error::Config(format!("bad config line `{l}`")))
            })
            .collect::<Result<_>>()?;
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::Config(format!("missing config key `{k}`")));
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Config(format!("bad integer for `{k}`")))
        };
        let real = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Config(format!("bad number for `{k}`"))) };
        let list = |k: &str| -> Result<Vec<usize>> {
            let v = get(k)?;
            if v.is_empty() {
                return Ok(vec![]);
            }
            v.split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad list for `{k}`"))))
                .collect()
        };
        let cfg = ModelConfig {
            conv_filters: list("conv_filters")?,
            pool_after: list("pool_after")?,
            lstm_layers: num("lstm_layers")?,
            lstm_units: num("lstm_units")?,
            dropout_cnn: real("dropout_cnn")?,
            dropout_lstm: real("dropout_lstm")?,
            alphabet_size: num("alphabet_size")?,
            input_height: num("input_height")?,
            leaky_slope: real("leaky_slope")?,
            precision: Precision::parse(get("precision")?)
                .ok_or_else(|| Error::Config("bad precision".into()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Closed-form number of trainable scalars implied by `config`.
pub fn count_parameters(config: &ModelConfig) -> usize {
    let mut total = 0;
    let mut c_in = 1;
    for &c_out in &config.conv_filters {
        total += 9 * c_in * c_out + c_out;
        c_in = c_out;
    }
    let u = config.lstm_units;
    let mut input = config.sequence_features();
    for _ in 0..config.lstm_layers {
        total += 2 * 4 * u * (input + u + 1);
        input = 2 * u;
    }
    total + (2 * u + 1) * config.classes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_totals() {
        assert_eq!(count_parameters(&ModelConfig::paper(79)), 9_581_008);
        assert_eq!(count_parameters(&ModelConfig::paper(83)), 9_583_060);
        assert_eq!(count_parameters(&ModelConfig::paper(96)), 9_589_729);
    }

    #[test]
    fn paper_conv_stage() {
        let mut cfg = ModelConfig::paper(79);
        cfg.lstm_layers = 0;
        let conv_only: usize = {
            let mut c_in = 1;
            cfg.conv_filters
                .iter()
                .map(|&c| {
                    let n = 9 * c_in * c + c;
                    c_in = c;
                    n
                })
                .sum()
        };
        assert_eq!(conv_only, 92_544);
        assert_eq!(ModelConfig::paper(79).sequence_features(), 1280);
        assert_eq!(ModelConfig::paper(79).sequence_len(160), 20);
    }

    #[test]
    fn kv_roundtrip() {
        let cfg = ModelConfig::reduced(17);
        assert_eq!(ModelConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        assert_eq!(cfg.profile(), Some(Profile::Reduced));
        assert_eq!(ModelConfig::paper(3).profile(), Some(Profile::Paper));
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::paper(79).validate().is_ok());
        assert!(ModelConfig { input_height: 100, ..ModelConfig::paper(79) }.validate().is_err());
        assert!(ModelConfig::paper(0).validate().is_err());
        assert!(ModelConfig { pool_after: vec![6], ..ModelConfig::paper(79) }.validate().is_err());
    }
}

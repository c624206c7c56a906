//! Plain-text `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown
//! or repeated keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::network::Mode;
use crate::train::TrainConfig;

/// Sizes of the generated splits when no dataset path is given.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplits {
    pub spec: SyntheticSpec,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SyntheticSplits {
    fn default() -> Self {
        SyntheticSplits {
            spec: SyntheticSpec::default(),
            train: 60,
            val: 0,
            test: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Dataset directory or manifest; synthetic data is generated when unset.
    pub data: Option<PathBuf>,
    pub synthetic: SyntheticSplits,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            data: None,
            synthetic: SyntheticSplits::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[(&str, &str)] = &[
    ("data", "dataset directory or manifest file; unset = synthetic data"),
    ("out_dir", "output directory"),
    ("mode", "full | nf | al | 1d"),
    ("seed", "training seed"),
    ("epochs", "training epochs"),
    ("warmup_epochs", "epochs before the first Abs-filter synthesis"),
    ("synthesis_period", "epochs between synthesis passes"),
    ("batch_size", "sequences per optimizer step"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("epsilon", "Adam denominator offset"),
    ("validation_fraction", "share of training sequences held out when no val split exists"),
    ("max_abs_filters", "Abs-filters kept per synthesis pass"),
    ("synthesis_budget", "chain-search expansion budget"),
    ("t", "Al-filter length in frames"),
    ("a", "kernel shift"),
    ("filter_count", "number of Al-filters"),
    ("threshold", "pair-detection threshold r"),
    ("max_chain", "longest Abs-filter chain"),
    ("init_jitter", "std of the jitter on data-sampled Al-filters"),
    ("depth", "number of deep layers q"),
    ("widths", "comma-separated channel widths, one per deep layer"),
    ("dropout", "dropout rate after each deep layer"),
    ("synthetic.seed", "generator seed"),
    ("synthetic.classes", "action classes (gap excluded)"),
    ("synthetic.channels", "channels per sequence"),
    ("synthetic.motif_len", "nominal motif length"),
    ("synthetic.noise", "additive Gaussian noise std"),
    ("synthetic.gap_fraction", "expected share of gap frames"),
    ("synthetic.min_segments", "fewest action segments per sequence"),
    ("synthetic.max_segments", "most action segments per sequence"),
    ("synthetic.min_len", "shortest sequence"),
    ("synthetic.max_len", "longest sequence"),
    ("synthetic.min_warp", "smallest temporal scaling"),
    ("synthetic.max_warp", "largest temporal scaling"),
    ("synthetic.train", "training sequences"),
    ("synthetic.val", "validation sequences"),
    ("synthetic.test", "test sequences"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Reads a config file; a relative `data` path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: key `{key}` repeated", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("configuration error: "))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let net = &mut t.network;
        let syn = &mut self.synthetic;
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "mode" => {
                net.mode = Mode::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown mode `{value}` (full, nf, al, 1d)")))?
            }
            "seed" => t.seed = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "warmup_epochs" => t.warmup_epochs = parse(key, value)?,
            "synthesis_period" => t.synthesis_period = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "learning_rate" => t.adam.learning_rate = parse(key, value)?,
            "beta1" => t.adam.beta1 = parse(key, value)?,
            "beta2" => t.adam.beta2 = parse(key, value)?,
            "epsilon" => t.adam.epsilon = parse(key, value)?,
            "validation_fraction" => t.validation_fraction = parse(key, value)?,
            "max_abs_filters" => t.max_abs_filters = parse(key, value)?,
            "synthesis_budget" => t.synthesis_budget = parse(key, value)?,
            "t" => net.align.t = parse(key, value)?,
            "a" => net.align.a = parse(key, value)?,
            "filter_count" => net.align.filter_count = parse(key, value)?,
            "threshold" => net.threshold = parse(key, value)?,
            "max_chain" => net.max_chain = parse(key, value)?,
            "init_jitter" => net.init_jitter = parse(key, value)?,
            "depth" => net.backbone.depth = parse(key, value)?,
            "widths" => {
                net.backbone.widths = value
                    .split(',')
                    .map(|w| parse(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "dropout" => net.backbone.dropout = parse(key, value)?,
            "synthetic.seed" => syn.spec.seed = parse(key, value)?,
            "synthetic.classes" => syn.spec.classes = parse(key, value)?,
            "synthetic.channels" => syn.spec.channels = parse(key, value)?,
            "synthetic.motif_len" => syn.spec.motif_len = parse(key, value)?,
            "synthetic.noise" => syn.spec.noise = parse(key, value)?,
            "synthetic.gap_fraction" => syn.spec.gap_fraction = parse(key, value)?,
            "synthetic.min_segments" => syn.spec.segments.0 = parse(key, value)?,
            "synthetic.max_segments" => syn.spec.segments.1 = parse(key, value)?,
            "synthetic.min_len" => syn.spec.length.0 = parse(key, value)?,
            "synthetic.max_len" => syn.spec.length.1 = parse(key, value)?,
            "synthetic.min_warp" => syn.spec.warp.0 = parse(key, value)?,
            "synthetic.max_warp" => syn.spec.warp.1 = parse(key, value)?,
            "synthetic.train" => syn.train = parse(key, value)?,
            "synthetic.val" => syn.val = parse(key, value)?,
            "synthetic.test" => syn.test = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        let t = &self.train;
        let net = &t.network;
        let s = &self.synthetic;
        match key {
            "data" => self.data.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "out_dir" => self.out_dir.display().to_string(),
            "mode" => net.mode.name().to_string(),
            "seed" => t.seed.to_string(),
            "epochs" => t.epochs.to_string(),
            "warmup_epochs" => t.warmup_epochs.to_string(),
            "synthesis_period" => t.synthesis_period.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "learning_rate" => t.adam.learning_rate.to_string(),
            "beta1" => t.adam.beta1.to_string(),
            "beta2" => t.adam.beta2.to_string(),
            "epsilon" => t.adam.epsilon.to_string(),
            "validation_fraction" => t.validation_fraction.to_string(),
            "max_abs_filters" => t.max_abs_filters.to_string(),
            "synthesis_budget" => t.synthesis_budget.to_string(),
            "t" => net.align.t.to_string(),
            "a" => net.align.a.to_string(),
            "filter_count" => net.align.filter_count.to_string(),
            "threshold" => net.threshold.to_string(),
            "max_chain" => net.max_chain.to_string(),
            "init_jitter" => net.init_jitter.to_string(),
            "depth" => net.backbone.depth.to_string(),
            "widths" => net.backbone.widths.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            "dropout" => net.backbone.dropout.to_string(),
            "synthetic.seed" => s.spec.seed.to_string(),
            "synthetic.classes" => s.spec.classes.to_string(),
            "synthetic.channels" => s.spec.channels.to_string(),
            "synthetic.motif_len" => s.spec.motif_len.to_string(),
            "synthetic.noise" => s.spec.noise.to_string(),
            "synthetic.gap_fraction" => s.spec.gap_fraction.to_string(),
            "synthetic.min_segments" => s.spec.segments.0.to_string(),
            "synthetic.max_segments" => s.spec.segments.1.to_string(),
            "synthetic.min_len" => s.spec.length.0.to_string(),
            "synthetic.max_len" => s.spec.length.1.to_string(),
            "synthetic.min_warp" => s.spec.warp.0.to_string(),
            "synthetic.max_warp" => s.spec.warp.1.to_string(),
            "synthetic.train" => s.train.to_string(),
            "synthetic.val" => s.val.to_string(),
            "synthetic.test" => s.test.to_string(),
            _ => unreachable!("every listed key has a value"),
        }
    }

    /// Full configuration text, one documented key per line. An unset
    /// `data` key is written as a comment.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            let value = self.value_of(key);
            let _ = writeln!(out, "# {doc}");
            if *key == "data" && self.data.is_none() {
                let _ = writeln!(out, "# data = path/to/dataset");
            } else {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.data.is_none() {
            self.synthetic.spec.validate(self.train.network.align.t)?;
            if self.synthetic.train == 0 {
                return Err(Error::Config("synthetic.train must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendered_defaults_parse_back() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse_str(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn every_key_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("widths", "8, 16").unwrap();
        cfg.set("depth", "2").unwrap();
        cfg.set("mode", "1d").unwrap();
        cfg.set("data", "some/dir").unwrap();
        cfg.set("learning_rate", "0.003").unwrap();
        let back = RunConfig::parse_str(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.train.network.backbone.widths, vec![8, 16]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse_str("epochs = 3\nlerning_rate = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("lerning_rate") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn bad_values_and_repeats_rejected() {
        assert!(RunConfig::parse_str("epochs = many").is_err());
        assert!(RunConfig::parse_str("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse_str("mode = deep").is_err());
        assert!(RunConfig::parse_str("just a line").is_err());
        assert!(RunConfig::parse_str("a = 1.5").is_err());
        assert!(RunConfig::parse_str("depth = 2").is_err());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = RunConfig::parse_str("# note\n\nepochs = 7 # trailing\n").unwrap();
        assert_eq!(cfg.train.epochs, 7);
    }
}

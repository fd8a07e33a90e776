//! Flat `key = value` run configuration.
//!
//! Recognized keys are exactly the model fields plus the evaluation cadence:
//! `n`, `m`, `d`, `negative_k`, `lr_entity`, `lr_relation`, `batch_size`,
//! `max_epochs`, `seed`, `eval_every`, `patience`. Unknown or duplicate keys
//! are hard errors. Blank lines and `#` comments are allowed.

use anyhow::{bail, Context, Result};
use orthogonale::model::ModelConfig;
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub model: ModelConfig,
    /// Validate every this many epochs.
    pub eval_every: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
}

impl TrainSettings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_str(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let mut n = None;
        let mut m = None;
        let mut d = None;
        let mut negative_k = 300usize;
        let mut lr_entity = None;
        let mut lr_relation = None;
        let mut batch_size = 500usize;
        let mut max_epochs = 500usize;
        let mut seed = 42u64;
        let mut eval_every = 5usize;
        let mut patience = 50usize;

        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => bail!("line {}: expected key = value, got {raw:?}", idx + 1),
            };
            if !seen.insert(key.to_owned()) {
                bail!("line {}: duplicate key {key:?}", idx + 1);
            }
            let parse_usize = || -> Result<usize> {
                value
                    .parse()
                    .with_context(|| format!("line {}: {key} wants an integer, got {value:?}", idx + 1))
            };
            let parse_f64 = || -> Result<f64> {
                value
                    .parse()
                    .with_context(|| format!("line {}: {key} wants a number, got {value:?}", idx + 1))
            };
            match key {
                "n" => n = Some(parse_usize()?),
                "m" => m = Some(parse_usize()?),
                "d" => d = Some(parse_usize()?),
                "negative_k" => negative_k = parse_usize()?,
                "lr_entity" => lr_entity = Some(parse_f64()?),
                "lr_relation" => lr_relation = Some(parse_f64()?),
                "batch_size" => batch_size = parse_usize()?,
                "max_epochs" => max_epochs = parse_usize()?,
                "seed" => {
                    seed = value
                        .parse()
                        .with_context(|| format!("line {}: seed wants an integer", idx + 1))?
                }
                "eval_every" => eval_every = parse_usize()?,
                "patience" => patience = parse_usize()?,
                other => bail!("line {}: unknown key {other:?}", idx + 1),
            }
        }

        let require = |name: &str, v: Option<usize>| -> Result<usize> {
            v.with_context(|| format!("missing required key {name:?}"))
        };
        let model = ModelConfig {
            n: require("n", n)?,
            m: require("m", m)?,
            d: require("d", d)?,
            negative_k,
            lr_entity: lr_entity.context("missing required key \"lr_entity\"")?,
            lr_relation: lr_relation.context("missing required key \"lr_relation\"")?,
            batch_size,
            max_epochs,
            seed,
        };
        if eval_every == 0 {
            bail!("eval_every must be at least 1");
        }
        Ok(Self {
            model,
            eval_every,
            patience,
        })
    }
}

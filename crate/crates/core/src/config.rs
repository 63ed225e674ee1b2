//! Flat `key = value` training configuration with named presets.
//!
//! Layers apply in order: preset, config file, command-line overrides. When a
//! layer sets `delta` but not `delta0`, `delta0` follows as `delta / 2`; the
//! same holds for `lr_final` following `lr_init / 10`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Direction;
use crate::objective::{QuantizationScope, Reduction};
use crate::train::TrainConfig;
use crate::triplet::VirtualRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Dense-network settings: δ = 24, δ₀ = 12, η = 40.
    Epinions,
    /// Sparse-network settings: δ = 16, δ₀ = 8, η = 0.55.
    Slashdot,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epinions" => Ok(Preset::Epinions),
            "slashdot" => Ok(Preset::Slashdot),
            other => Err(Error::config(format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn config(self) -> TrainConfig {
        let mut c = TrainConfig::default();
        match self {
            Preset::Epinions => {
                c.loss.delta = 24.0;
                c.loss.delta0 = 12.0;
                c.loss.eta = 40.0;
            }
            Preset::Slashdot => {
                c.loss.delta = 16.0;
                c.loss.delta0 = 8.0;
                c.loss.eta = 0.55;
            }
        }
        c
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("invalid value `{v}` for `{key}`")))
}

/// Applies one layer of overrides.
pub fn apply_pairs(config: &mut TrainConfig, pairs: &[(String, String)]) -> Result<()> {
    let mut delta0_set = false;
    let mut delta_set = false;
    let mut lr_final_set = false;
    let mut lr_init_set = false;
    for (key, v) in pairs {
        let v = v.as_str();
        match key.as_str() {
            "embed_dim" | "d0" => config.model.embed_dim = num(key, v)?,
            "hidden" => {
                config.model.hidden_dims = v
                    .split(',')
                    .map(|s| num::<usize>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "code_len" | "d" => config.model.code_len = num(key, v)?,
            "seed" => {
                let s: u64 = num(key, v)?;
                config.seed = s;
                config.model.seed = s;
            }
            "lr_init" | "lr" => {
                config.lr_init = num(key, v)?;
                lr_init_set = true;
            }
            "lr_final" => {
                config.lr_final = num(key, v)?;
                lr_final_set = true;
            }
            "epochs" => config.epochs = num(key, v)?,
            "batch_size" => config.batch_size = num(key, v)?,
            "delta" => {
                config.loss.delta = num(key, v)?;
                delta_set = true;
            }
            "delta0" => {
                config.loss.delta0 = num(key, v)?;
                delta0_set = true;
            }
            "eta" => config.loss.eta = num(key, v)?,
            "alpha" => config.loss.alpha = num(key, v)?,
            "quantization" => {
                config.loss.quantization = match v {
                    "batch" => QuantizationScope::Batch,
                    "full" => QuantizationScope::Full,
                    _ => return Err(Error::config(format!("quantization must be batch|full, got `{v}`"))),
                }
            }
            "reduction" => {
                config.loss.reduction = match v {
                    "mean" => Reduction::Mean,
                    "sum" => Reduction::Sum,
                    _ => return Err(Error::config(format!("reduction must be mean|sum, got `{v}`"))),
                }
            }
            "sampling" => {
                config.sampler.direction = match v {
                    "undirected" => Direction::Undirected,
                    "directed" => Direction::Out,
                    _ => {
                        return Err(Error::config(format!(
                            "sampling must be undirected|directed, got `{v}`"
                        )))
                    }
                }
            }
            "virtual_rule" => {
                config.sampler.virtual_rule = match v {
                    "one_hop" => VirtualRule::OneHop,
                    "two_hop" => VirtualRule::TwoHop,
                    _ => {
                        return Err(Error::config(format!(
                            "virtual_rule must be one_hop|two_hop, got `{v}`"
                        )))
                    }
                }
            }
            "threads" => config.threads = num(key, v)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
    }
    if delta_set && !delta0_set {
        config.loss.delta0 = config.loss.delta / 2.0;
    }
    if lr_init_set && !lr_final_set {
        config.lr_final = config.lr_init / 10.0;
    }
    Ok(())
}

/// Every key, in a form [`apply_pairs`] reads back to an equal config.
/// Assumes `seed` and `model.seed` agree.
pub fn dump(config: &TrainConfig) -> String {
    let mut s = String::new();
    let m = &config.model;
    let hidden: Vec<String> = m.hidden_dims.iter().map(usize::to_string).collect();
    let l = &config.loss;
    let lines: [(&str, String); 17] = [
        ("embed_dim", m.embed_dim.to_string()),
        ("hidden", hidden.join(",")),
        ("code_len", m.code_len.to_string()),
        ("seed", config.seed.to_string()),
        ("lr_init", format!("{:?}", config.lr_init)),
        ("lr_final", format!("{:?}", config.lr_final)),
        ("epochs", config.epochs.to_string()),
        ("batch_size", config.batch_size.to_string()),
        ("delta", format!("{:?}", l.delta)),
        ("delta0", format!("{:?}", l.delta0)),
        ("eta", format!("{:?}", l.eta)),
        ("alpha", format!("{:?}", l.alpha)),
        (
            "quantization",
            match l.quantization {
                QuantizationScope::Batch => "batch",
                QuantizationScope::Full => "full",
            }
            .into(),
        ),
        (
            "reduction",
            match l.reduction {
                Reduction::Mean => "mean",
                Reduction::Sum => "sum",
            }
            .into(),
        ),
        (
            "sampling",
            match config.sampler.direction {
                Direction::Undirected => "undirected",
                Direction::Out => "directed",
            }
            .into(),
        ),
        (
            "virtual_rule",
            match config.sampler.virtual_rule {
                VirtualRule::OneHop => "one_hop",
                VirtualRule::TwoHop => "two_hop",
            }
            .into(),
        ),
        ("threads", config.threads.to_string()),
    ];
    for (k, v) in lines {
        writeln!(s, "{k} = {v}").unwrap();
    }
    s
}

/// Preset (or plain defaults), then file text, then `key=value` overrides.
pub fn resolve(preset: Option<Preset>, file_text: Option<&str>, overrides: &[String]) -> Result<TrainConfig> {
    let mut config = preset.map_or_else(TrainConfig::default, Preset::config);
    if let Some(text) = file_text {
        apply_pairs(&mut config, &parse_pairs(text)?)?;
    }
    let pairs = overrides
        .iter()
        .map(|o| {
            o.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::config(format!("override `{o}` is not key=value")))
        })
        .collect::<Result<Vec<_>>>()?;
    apply_pairs(&mut config, &pairs)?;
    config.validate()?;
    Ok(config)
}

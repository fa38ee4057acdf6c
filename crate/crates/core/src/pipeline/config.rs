//! `key=value` configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! max_seq_len = 1024
//! stride = 1024
//! seed = 7
//! velocity_levels = 6
//! masking_ratio = 0.15
//! deletion_ratio = 0.15
//! infilling_ratio = 0.15
//! infill_mean = 3.0
//! renumber_bars = true
//! kinds = token-masking:1, token-deletion:1, text-infilling:1, sentence-permutation:1, document-rotation:1
//! methods.token-masking = octuple-element:1, nbar-element:2
//! input = corpus/
//! output = out/
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use crate::codec::DEFAULT_MAX_SEQ_LEN;
use crate::corruption::{CorruptionConfig, CorruptionKind};
use crate::selection::SelectionMethod;

use super::PipelineError;

pub const DEFAULT_VELOCITY_LEVELS: u32 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub max_seq_len: usize,
    /// Distance between window starts; equal to `max_seq_len` for disjoint windows.
    pub stride: usize,
    pub seed: u64,
    pub velocity_levels: u32,
    pub corruption: CorruptionConfig,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            stride: DEFAULT_MAX_SEQ_LEN,
            seed: 0,
            velocity_levels: DEFAULT_VELOCITY_LEVELS,
            corruption: CorruptionConfig::default(),
            input: None,
            output: None,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| bad(key, format!("cannot parse {value:?}")))
}

/// Parses `name:weight, name:weight`; a bare name has weight 1.
fn parse_weights<T: FromStr>(key: &str, value: &str) -> Result<Vec<(T, f64)>, PipelineError> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, weight) = match item.split_once(':') {
            Some((n, w)) => (n.trim(), parse_num::<f64>(key, w.trim())?),
            None => (item, 1.0),
        };
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(bad(key, format!("weight {weight} must be finite and >= 0")));
        }
        let parsed = name
            .parse()
            .map_err(|_| bad(key, format!("unknown name {name:?}")))?;
        out.push((parsed, weight));
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = PipelineConfig::default();
        let mut stride_set = false;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "max_seq_len" => cfg.max_seq_len = parse_num(key, value)?,
                "stride" => {
                    cfg.stride = parse_num(key, value)?;
                    stride_set = true;
                }
                "seed" => cfg.seed = parse_num(key, value)?,
                "velocity_levels" => cfg.velocity_levels = parse_num(key, value)?,
                "masking_ratio" => cfg.corruption.masking_ratio = parse_num(key, value)?,
                "deletion_ratio" => cfg.corruption.deletion_ratio = parse_num(key, value)?,
                "infilling_ratio" => cfg.corruption.infilling_ratio = parse_num(key, value)?,
                "infill_mean" => cfg.corruption.infill_mean = parse_num(key, value)?,
                "renumber_bars" => cfg.corruption.renumber_bars = parse_num(key, value)?,
                "kinds" => {
                    cfg.corruption.kinds = if value == "all" {
                        CorruptionKind::ALL.iter().map(|&k| (k, 1.0)).collect()
                    } else {
                        parse_weights(key, value)?
                    }
                }
                "input" => cfg.input = Some(PathBuf::from(value)),
                "output" => cfg.output = Some(PathBuf::from(value)),
                _ => {
                    let Some(kind) = key.strip_prefix("methods.") else {
                        return Err(bad(key, "unknown key"));
                    };
                    let kind: CorruptionKind = kind
                        .parse()
                        .map_err(|_| bad(key, format!("unknown corruption kind {kind:?}")))?;
                    let weights: Vec<(SelectionMethod, f64)> = parse_weights(key, value)?;
                    if let Some((m, _)) = weights.iter().find(|(m, _)| !kind.allows(*m)) {
                        return Err(bad(key, format!("{m} is not allowed for {}", kind.name())));
                    }
                    cfg.corruption.methods.retain(|(k, _)| *k != kind);
                    cfg.corruption.methods.push((kind, weights));
                }
            }
        }
        if !stride_set {
            cfg.stride = cfg.max_seq_len;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets `max_seq_len`, keeping windows disjoint if they were before.
    pub fn set_max_seq_len(&mut self, len: usize) {
        if self.stride == self.max_seq_len {
            self.stride = len;
        }
        self.max_seq_len = len;
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.max_seq_len < 2 {
            return Err(bad("max_seq_len", "must be at least 2"));
        }
        if self.stride == 0 || self.stride > self.max_seq_len {
            return Err(bad("stride", "must be in 1..=max_seq_len"));
        }
        if self.velocity_levels == 0 || self.velocity_levels > 128 {
            return Err(bad("velocity_levels", "must be in 1..=128"));
        }
        let c = &self.corruption;
        for (key, r) in [
            ("masking_ratio", c.masking_ratio),
            ("deletion_ratio", c.deletion_ratio),
            ("infilling_ratio", c.infilling_ratio),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(bad(key, "must be in (0, 1)"));
            }
        }
        if !(c.infill_mean > 0.0 && c.infill_mean.is_finite()) {
            return Err(bad("infill_mean", "must be positive"));
        }
        if !c.kinds.iter().any(|&(_, w)| w > 0.0) {
            return Err(bad("kinds", "no corruption kind enabled"));
        }
        for &(kind, w) in &c.kinds {
            if w > 0.0 && c.method_weights(kind).is_empty() {
                return Err(bad(&format!("methods.{}", kind.name()), "no method enabled"));
            }
        }
        Ok(())
    }
}

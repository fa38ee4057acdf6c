//! Downstream-task labels.
//!
//! Token-level label files hold one block per segment, in segment order:
//!
//! ```text
//! @labels task=velocity
//! 3
//! 4
//!
//! ```
//!
//! Sequence-level files hold one line per segment:
//! `@seqlabel task=emotion label=2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::codec::{velocity_bin_center, Field, FieldValue, FieldVocab};

use super::{PipelineError, SegmentRecord};

/// Label id for positions that carry no target (special tokens, padding).
pub const IGNORE_LABEL: i64 = -100;

/// The four emotion quadrants (valence x arousal).
pub const EMOTION_CLASSES: [&str; 4] = ["HVHA", "HVLA", "LVHA", "LVLA"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelTask {
    Velocity,
    Melody,
    SequenceClass,
}

impl LabelTask {
    pub fn name(self) -> &'static str {
        match self {
            LabelTask::Velocity => "velocity",
            LabelTask::Melody => "melody",
            LabelTask::SequenceClass => "sequence-class",
        }
    }
}

impl FromStr for LabelTask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "velocity" => Ok(LabelTask::Velocity),
            "melody" => Ok(LabelTask::Melody),
            "sequence-class" => Ok(LabelTask::SequenceClass),
            _ => Err(format!("unknown task {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    /// One label per token.
    Token(Vec<i64>),
    Sequence(i64),
}

/// Where labels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource {
    /// Derived from each token's velocity field.
    Velocity { levels: u32 },
    /// Per-note labels per source file, in token order of the whole file.
    PerNote(BTreeMap<String, Vec<i64>>),
    /// One label per source file.
    PerFile(BTreeMap<String, i64>),
}

/// `floor(v * 6 / 128)`.
pub fn velocity_level(v: u32) -> Result<u32, PipelineError> {
    velocity_level_with(v, super::DEFAULT_VELOCITY_LEVELS)
}

pub fn velocity_level_with(v: u32, levels: u32) -> Result<u32, PipelineError> {
    if v > 127 {
        return Err(PipelineError::OutOfRange(v));
    }
    Ok(v * levels / 128)
}

fn token_velocity_label(token: &crate::codec::OctupleToken, levels: u32) -> Result<i64, PipelineError> {
    if !token.is_musical() {
        return Ok(IGNORE_LABEL);
    }
    match FieldVocab::of(Field::Velocity).value(token.get(Field::Velocity)) {
        Ok(FieldValue::VelocityBin(b)) => {
            Ok(velocity_level_with(velocity_bin_center(b) as u32, levels)? as i64)
        }
        _ => Ok(IGNORE_LABEL),
    }
}

/// Attaches labels of `source` to every segment.
///
/// Token labels align 1:1 with the segment's tokens; non-musical tokens get
/// [`IGNORE_LABEL`]. Per-note tables must have exactly one row per note of the
/// source file.
pub fn attach_labels(
    segments: &mut [SegmentRecord],
    source: &LabelSource,
) -> Result<(), PipelineError> {
    match source {
        LabelSource::Velocity { levels } => {
            for seg in segments.iter_mut() {
                let labels = seg
                    .tokens
                    .tokens
                    .iter()
                    .map(|t| token_velocity_label(t, *levels))
                    .collect::<Result<Vec<_>, _>>()?;
                seg.labels = Some(Labels::Token(labels));
            }
        }
        LabelSource::PerNote(table) => {
            for seg in segments.iter_mut() {
                let file = &seg.tokens.provenance.source;
                let rows = table
                    .get(file)
                    .ok_or_else(|| PipelineError::MissingLabels(file.clone()))?;
                if rows.len() != seg.file_notes {
                    return Err(PipelineError::AlignmentMismatch {
                        file: file.clone(),
                        labels: rows.len(),
                        notes: seg.file_notes,
                    });
                }
                let labels = seg
                    .tokens
                    .tokens
                    .iter()
                    .zip(&seg.token_index)
                    .map(|(t, &i)| if t.is_musical() { rows[i] } else { IGNORE_LABEL })
                    .collect();
                seg.labels = Some(Labels::Token(labels));
            }
        }
        LabelSource::PerFile(table) => {
            for seg in segments.iter_mut() {
                let file = &seg.tokens.provenance.source;
                let label = table
                    .get(file)
                    .ok_or_else(|| PipelineError::MissingLabels(file.clone()))?;
                seg.labels = Some(Labels::Sequence(*label));
            }
        }
    }
    Ok(())
}

/// Parses a per-note table: one row per note, the label in the last
/// comma-separated column. Blank lines and `#` comments are skipped, as is a
/// first line whose last column is not an integer (a header).
pub fn parse_note_table(text: &str) -> Result<Vec<i64>, PipelineError> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or("").trim();
        match last.parse::<i64>() {
            Ok(v) => out.push(v),
            Err(_) if first => {}
            Err(_) => {
                return Err(PipelineError::LabelTable {
                    line: i + 1,
                    reason: format!("bad label {last:?}"),
                })
            }
        }
        first = false;
    }
    Ok(out)
}

/// Parses `path,label` rows. Labels are integers or emotion quadrant names
/// (`HVHA`=0, `HVLA`=1, `LVHA`=2, `LVLA`=3).
pub fn parse_file_table(text: &str) -> Result<BTreeMap<String, i64>, PipelineError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| PipelineError::LabelTable { line: i + 1, reason };
        let (path, label) = line
            .rsplit_once(',')
            .ok_or_else(|| err("expected path,label".into()))?;
        let label = label.trim();
        let id = match EMOTION_CLASSES.iter().position(|c| c.eq_ignore_ascii_case(label)) {
            Some(k) => k as i64,
            None => match label.parse::<i64>() {
                Ok(v) => v,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(err(format!("bad label {label:?}"))),
            },
        };
        out.insert(path.trim().to_string(), id);
    }
    Ok(out)
}

/// Writes the label file for `segments` (all must carry labels of one kind).
pub fn write_labels(task: &str, segments: &[SegmentRecord]) -> Result<String, PipelineError> {
    let mut out = String::new();
    for seg in segments {
        match &seg.labels {
            Some(Labels::Token(labels)) => {
                let _ = writeln!(out, "@labels task={task}");
                for l in labels {
                    let _ = writeln!(out, "{l}");
                }
                out.push('\n');
            }
            Some(Labels::Sequence(l)) => {
                let _ = writeln!(out, "@seqlabel task={task} label={l}");
            }
            None => return Err(PipelineError::MissingLabels(seg.tokens.provenance.source.clone())),
        }
    }
    Ok(out)
}

/// Parses a label file written by [`write_labels`].
pub fn read_labels(text: &str) -> Result<Vec<(String, Labels)>, PipelineError> {
    let mut out: Vec<(String, Labels)> = Vec::new();
    let mut open = false;
    for (i, line) in text.lines().enumerate() {
        let err = |reason: &str| PipelineError::LabelTable {
            line: i + 1,
            reason: reason.to_string(),
        };
        if let Some(rest) = line.strip_prefix("@labels task=") {
            out.push((rest.to_string(), Labels::Token(Vec::new())));
            open = true;
        } else if let Some(rest) = line.strip_prefix("@seqlabel task=") {
            let (task, label) = rest.split_once(" label=").ok_or_else(|| err("missing label="))?;
            let label = label.parse().map_err(|_| err("bad label"))?;
            out.push((task.to_string(), Labels::Sequence(label)));
            open = false;
        } else if line.is_empty() {
            open = false;
        } else if open {
            let v = line.trim().parse().map_err(|_| err("bad label"))?;
            if let Some((_, Labels::Token(l))) = out.last_mut() {
                l.push(v);
            }
        } else {
            return Err(err("label outside a block"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_levels() {
        assert_eq!(velocity_level(0).unwrap(), 0);
        assert_eq!(velocity_level(127).unwrap(), 5);
        assert_eq!(velocity_level(21).unwrap(), 0);
        assert_eq!(velocity_level(22).unwrap(), 1);
        assert!(matches!(velocity_level(128), Err(PipelineError::OutOfRange(128))));
        // edges at every multiple of 128/6
        for k in 1..6u32 {
            let edge = (128 * k).div_ceil(6);
            assert_eq!(velocity_level(edge - 1).unwrap(), k - 1);
            assert_eq!(velocity_level(edge).unwrap(), k);
        }
        let levels: Vec<u32> = (0..128).map(|v| velocity_level(v).unwrap()).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(levels.iter().copied().max(), Some(5));
    }

    #[test]
    fn note_table() {
        let t = "onset,pitch,label\n0,60,1\n\n# x\n480,62,2\n";
        assert_eq!(parse_note_table(t).unwrap(), vec![1, 2]);
        assert!(parse_note_table("0,60,1\n1,61,x\n").is_err());
    }

    #[test]
    fn file_table() {
        let t = "path,label\na.mid,HVHA\nb.mid,lvla\nsub/c, d.mid,2\n";
        let m = parse_file_table(t).unwrap();
        assert_eq!(m["a.mid"], 0);
        assert_eq!(m["b.mid"], 3);
        assert_eq!(m["sub/c, d.mid"], 2);
    }

    #[test]
    fn label_file_round_trip() {
        let text = "@labels task=velocity\n1\n-100\n\n@seqlabel task=emotion label=3\n";
        let parsed = read_labels(text).unwrap();
        assert_eq!(
            parsed,
            vec![
                ("velocity".to_string(), Labels::Token(vec![1, -100])),
                ("emotion".to_string(), Labels::Sequence(3)),
            ]
        );
        assert!(read_labels("7\n").is_err());
    }
}

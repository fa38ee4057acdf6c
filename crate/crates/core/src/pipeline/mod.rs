//! Corpus-level processing: MIDI folders to segments, training pairs, labels
//! and statistics.
//!
//! Files are processed in parallel but results are merged in sorted path
//! order, and every segment draws its corruption from a seed derived from
//! `(seed, source path, segment index)`, so output bytes do not depend on
//! scheduling.

mod config;
pub mod labels;
pub mod wire;

pub use config::{PipelineConfig, DEFAULT_VELOCITY_LEVELS};
pub use labels::{
    attach_labels, parse_file_table, parse_note_table, read_labels, velocity_level,
    velocity_level_with, write_labels, LabelSource, LabelTask, Labels, IGNORE_LABEL,
};
pub use wire::{read_pairs, write_pair, write_pairs, PairRecord};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::vocab::MAX_BAR;
use crate::codec::{quantize_score, CodecError, Field, FieldVocab, QuantizeReport, TokenSequence};
use crate::corruption::{corrupt, CorruptionError, CorruptionPair};
use crate::midi::{parse_midi_with_report, MidiError, ParseReport, Score};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no MIDI files under {0}")]
    NoMidiFiles(PathBuf),
    #[error("none of the {0} MIDI files could be parsed")]
    NoParseableFiles(usize),
    #[error("config key {key}: {reason}")]
    Config { key: String, reason: String },
    #[error("pair file line {line}: {reason}")]
    Wire { line: usize, reason: String },
    #[error("label table line {line}: {reason}")]
    LabelTable { line: usize, reason: String },
    #[error("velocity {0} outside 0..=127")]
    OutOfRange(u32),
    #[error("{file}: {labels} labels for {notes} notes")]
    AlignmentMismatch { file: String, labels: usize, notes: usize },
    #[error("no labels for {0}")]
    MissingLabels(String),
    #[error(transparent)]
    Midi(#[from] MidiError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}

/// One window of a file's token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRecord {
    /// Tokens with bar ids rebased to start at 0; provenance names the file
    /// (relative to the corpus root) and the segment index.
    pub tokens: TokenSequence,
    /// Position of each token in the token order of the whole file.
    pub token_index: Vec<usize>,
    /// Number of notes in the whole file.
    pub file_notes: usize,
    /// PAD tokens needed to reach `max_seq_len`; not stored in `tokens`.
    pub padding: usize,
    pub labels: Option<Labels>,
}

impl SegmentRecord {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits a score into windows of at most `max_seq_len` tokens starting every
/// `stride` tokens. A window is cut early if its bars would exceed 255 after
/// rebasing; the next window then starts at the cut.
pub fn segment_score(
    score: &Score,
    source: &str,
    config: &PipelineConfig,
) -> Result<(Vec<SegmentRecord>, QuantizeReport), CodecError> {
    let (notes, report) = quantize_score(score)?;
    let n = notes.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let base = notes[start].bar;
        let mut end = (start + config.max_seq_len).min(n);
        if let Some(cut) = notes[start..end].iter().position(|q| q.bar - base > MAX_BAR) {
            end = start + cut;
        }
        let tokens = notes[start..end]
            .iter()
            .map(|q| q.to_token(base))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(SegmentRecord {
            tokens: TokenSequence::new(tokens).with_provenance(source, out.len()),
            token_index: (start..end).collect(),
            file_notes: n,
            padding: config.max_seq_len - (end - start),
            labels: None,
        });
        if end == n {
            break;
        }
        start = (start + config.stride).min(end);
    }
    Ok((out, report))
}

/// MIDI files (`.mid`, `.midi`, any case) under `folder`, recursively, sorted
/// by relative path.
pub fn list_midi_files(folder: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut stack = vec![folder.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| PipelineError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
            {
                out.push(path);
            }
        }
    }
    out.sort_by_key(|p| source_id(folder, p));
    Ok(out)
}

/// Path of `file` relative to `root`, with `/` separators.
pub fn source_id(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Everything learned from one file.
#[derive(Debug)]
pub struct FileResult {
    pub source: String,
    pub notes: usize,
    pub parse: ParseReport,
    pub quantize: QuantizeReport,
    pub segments: Vec<SegmentRecord>,
}

fn process_file(root: &Path, path: &Path, config: &PipelineConfig) -> Result<FileResult, PipelineError> {
    let source = source_id(root, path);
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let (score, parse) = parse_midi_with_report(&bytes)?;
    let (segments, quantize) = segment_score(&score, &source, config)?;
    Ok(FileResult {
        source,
        notes: score.notes.len(),
        parse,
        quantize,
        segments,
    })
}

/// Per-file outcome of [`scan_corpus`].
pub type FileOutcome = (PathBuf, Result<FileResult, PipelineError>);

/// Processes every MIDI file under `folder`. Files that fail are logged and
/// returned as errors in their slot; results keep sorted path order.
pub fn scan_corpus(
    folder: &Path,
    config: &PipelineConfig,
) -> Result<Vec<FileOutcome>, PipelineError> {
    let files = list_midi_files(folder)?;
    let results: Vec<_> = files
        .par_iter()
        .map(|p| process_file(folder, p, config))
        .collect();
    Ok(files
        .into_iter()
        .zip(results)
        .inspect(|(p, r)| {
            if let Err(e) = r {
                log::warn!("skipping {}: {e}", p.display());
            }
        })
        .collect())
}

/// Segments every parseable MIDI file under `folder`, in sorted path order.
pub fn segment_corpus(folder: &Path, config: &PipelineConfig) -> Result<Vec<SegmentRecord>, PipelineError> {
    config.validate()?;
    let scanned = scan_corpus(folder, config)?;
    if scanned.is_empty() {
        return Err(PipelineError::NoMidiFiles(folder.to_path_buf()));
    }
    let tried = scanned.len();
    let parsed: Vec<FileResult> = scanned.into_iter().filter_map(|(_, r)| r.ok()).collect();
    if parsed.is_empty() {
        return Err(PipelineError::NoParseableFiles(tried));
    }
    log::info!("segmented {} of {tried} files", parsed.len());
    Ok(parsed.into_iter().flat_map(|f| f.segments).collect())
}

/// Seed for segment `segment` of `source`: the first 8 bytes (little endian)
/// of SHA-256 over the run seed, the length-prefixed source id and the index.
pub fn derive_seed(seed: u64, source: &str, segment: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((source.len() as u64).to_le_bytes());
    h.update(source.as_bytes());
    h.update((segment as u64).to_le_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Draws one corruption pair per sequence, in input order.
pub fn corrupt_sequences(
    sequences: &[TokenSequence],
    config: &PipelineConfig,
) -> Result<Vec<CorruptionPair>, PipelineError> {
    config.validate()?;
    sequences
        .par_iter()
        .map(|s| {
            let seed = derive_seed(config.seed, &s.provenance.source, s.provenance.segment);
            corrupt(s, seed, &config.corruption).map_err(PipelineError::from)
        })
        .collect()
}

/// Corrupts every segment and renders the pair file.
pub fn emit_pretraining_pairs(
    segments: &[SegmentRecord],
    config: &PipelineConfig,
) -> Result<String, PipelineError> {
    let seqs: Vec<TokenSequence> = segments.iter().map(|s| s.tokens.clone()).collect();
    Ok(write_pairs(&corrupt_sequences(&seqs, config)?))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub files: usize,
    pub failed_files: usize,
    pub notes: usize,
    pub segments: usize,
    pub tokens: usize,
    /// Distinct value ids seen per field.
    pub coverage: [usize; 8],
    pub durations_clamped: usize,
    pub durations_rounded_up: usize,
    pub tempos_clamped: usize,
    pub unpaired_note_ons: usize,
    pub truncated_overlaps: usize,
    pub dropped_zero_length: usize,
}

impl CorpusStats {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("files", self.files.to_string());
        kv("failed_files", self.failed_files.to_string());
        kv("notes", self.notes.to_string());
        kv("segments", self.segments.to_string());
        kv("tokens", self.tokens.to_string());
        for f in Field::ALL {
            kv(
                &format!("coverage.{}", f.name()),
                format!("{}/{}", self.coverage[f.index()], FieldVocab::of(f).cardinality()),
            );
        }
        kv("durations_clamped", self.durations_clamped.to_string());
        kv("durations_rounded_up", self.durations_rounded_up.to_string());
        kv("tempos_clamped", self.tempos_clamped.to_string());
        kv("unpaired_note_ons", self.unpaired_note_ons.to_string());
        kv("truncated_overlaps", self.truncated_overlaps.to_string());
        kv("dropped_zero_length", self.dropped_zero_length.to_string());
        out
    }
}

/// Counts over a corpus folder. A folder without MIDI files gives zero counts.
pub fn corpus_stats(folder: &Path, config: &PipelineConfig) -> Result<CorpusStats, PipelineError> {
    let mut stats = CorpusStats::default();
    let mut seen: [BTreeSet<u16>; 8] = Default::default();
    for (_, result) in scan_corpus(folder, config)? {
        let Ok(f) = result else {
            stats.failed_files += 1;
            continue;
        };
        stats.files += 1;
        stats.notes += f.notes;
        stats.segments += f.segments.len();
        stats.durations_clamped += f.quantize.durations_clamped;
        stats.durations_rounded_up += f.quantize.durations_rounded_up;
        stats.tempos_clamped += f.quantize.tempos_clamped;
        stats.unpaired_note_ons += f.parse.unpaired_note_ons;
        stats.truncated_overlaps += f.parse.truncated_overlaps;
        stats.dropped_zero_length += f.parse.dropped_zero_length;
        for seg in &f.segments {
            stats.tokens += seg.len();
            for t in seg.tokens.tokens.iter().filter(|t| t.is_musical()) {
                for (set, &id) in seen.iter_mut().zip(&t.0) {
                    set.insert(id);
                }
            }
        }
    }
    for (c, s) in stats.coverage.iter_mut().zip(&seen) {
        *c = s.len();
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::NoteEvent;

    fn score_with(notes: usize, per_bar: u64) -> Score {
        let mut s = Score::new(480);
        let step = 4 * 480 / per_bar;
        for i in 0..notes as u64 {
            s.notes.push(NoteEvent {
                onset_ticks: i * step,
                duration_ticks: step,
                pitch: 60 + (i % 12) as u8,
                velocity: 80,
                channel: 0,
                program: 0,
            });
        }
        s
    }

    #[test]
    fn windows_of_2500_tokens() {
        let (segs, _) = segment_score(&score_with(2500, 16), "a.mid", &PipelineConfig::default()).unwrap();
        let sizes: Vec<usize> = segs.iter().map(SegmentRecord::len).collect();
        assert_eq!(sizes, vec![1024, 1024, 452]);
        assert_eq!(segs[2].padding, 1024 - 452);
        assert_eq!(segs[1].token_index[0], 1024);
        assert_eq!(segs[1].tokens.provenance.segment, 1);
        for s in &segs {
            assert_eq!(s.tokens.tokens[0].bar(), Some(0));
        }
    }

    #[test]
    fn long_pieces_are_cut_at_bar_255() {
        // one note per bar: 300 bars fit in one 1024 window by count but not by bar id
        let (segs, _) = segment_score(&score_with(300, 1), "a.mid", &PipelineConfig::default()).unwrap();
        let sizes: Vec<usize> = segs.iter().map(SegmentRecord::len).collect();
        assert_eq!(sizes, vec![256, 44]);
        assert!(segs
            .iter()
            .flat_map(|s| &s.tokens.tokens)
            .all(|t| t.bar().unwrap() <= MAX_BAR));
    }

    #[test]
    fn overlapping_stride() {
        let cfg = PipelineConfig {
            max_seq_len: 10,
            stride: 5,
            ..Default::default()
        };
        let (segs, _) = segment_score(&score_with(22, 4), "a.mid", &cfg).unwrap();
        let starts: Vec<usize> = segs.iter().map(|s| s.token_index[0]).collect();
        assert_eq!(starts, vec![0, 5, 10, 15]);
        assert_eq!(segs.last().unwrap().len(), 7);
    }

    #[test]
    fn empty_score_has_no_segments() {
        let (segs, _) = segment_score(&Score::new(480), "a.mid", &PipelineConfig::default()).unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn seeds_depend_on_every_input() {
        let s = derive_seed(1, "a.mid", 0);
        assert_eq!(s, derive_seed(1, "a.mid", 0));
        assert_ne!(s, derive_seed(2, "a.mid", 0));
        assert_ne!(s, derive_seed(1, "b.mid", 0));
        assert_ne!(s, derive_seed(1, "a.mid", 1));
    }
}

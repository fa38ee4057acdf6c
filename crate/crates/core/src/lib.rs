//! Octuple tokenization, corruption and evaluation for symbolic piano music.
//!
//! The crate reads Standard MIDI Files into a [`Score`], encodes scores into
//! eight-field Octuple tokens, builds corrupted training pairs with several
//! masking strategies, and computes PCHE, GS and PFS metrics.

pub mod codec;
pub mod corruption;
pub mod metrics;
pub mod midi;
pub mod num;
pub mod pipeline;
pub mod selection;

pub use codec::{decode_tokens, encode_score, CodecError, Field, OctupleToken, TokenSequence};
pub use corruption::{corrupt, CorruptionConfig, CorruptionError, CorruptionKind, CorruptionPair};
pub use metrics::{GaussianSummary, MetricError, MetricReport, PitchClassHistogram};
pub use midi::{parse_midi, write_midi, MidiError, NoteEvent, Score, ScoreError};
pub use num::Scalar;
pub use pipeline::{PipelineConfig, PipelineError, SegmentRecord};
pub use selection::{select, SelectionError, SelectionMask, SelectionMethod};

pub type GaussianSummaryF64 = GaussianSummary<f64>;
pub type GaussianSummaryF32 = GaussianSummary<f32>;
pub type MetricReportF64 = MetricReport<f64>;
pub type MetricReportF32 = MetricReport<f32>;
pub type PitchClassHistogramF64 = PitchClassHistogram<f64>;
pub type PitchClassHistogramF32 = PitchClassHistogram<f32>;

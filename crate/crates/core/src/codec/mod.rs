//! Octuple encoding: one 8-field token per note.

pub(crate) mod text;
pub mod vocab;

pub use text::{read_sequences, write_sequence, write_sequences};
pub use vocab::{
    tempo_bin, tempo_bin_center, velocity_bin, velocity_bin_center, Field, FieldValue,
    FieldVocab, TimeSignature, BOS, EOS, FIRST_VALUE_ID, MASK, PAD,
};

use std::fmt;

use thiserror::Error;

use crate::midi::{NoteEvent, Score, TempoEvent, TimeSigEvent};
use vocab::{MAX_BAR, MAX_DURATION};

pub const DEFAULT_MAX_SEQ_LEN: usize = 1024;
pub const DEFAULT_DECODE_TICKS_PER_QUARTER: u16 = 480;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("{field}: value out of vocabulary ({detail})")]
    OutOfVocabulary { field: Field, detail: String },
    #[error("time signature {0} cannot be encoded")]
    UnsupportedTimeSig(TimeSignature),
    #[error("bar {0} exceeds the largest encodable bar index")]
    BarOverflow(u32),
    #[error("token {0} contains a MASK id")]
    MaskedTokenPresent(usize),
    #[error("token {index}: {reason}")]
    InvalidToken { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One note as eight field ids, in [`Field::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OctupleToken(pub [u16; 8]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Special(u16),
    Musical,
    Masked,
}

impl OctupleToken {
    pub const PAD: OctupleToken = OctupleToken([PAD; 8]);
    pub const BOS: OctupleToken = OctupleToken([BOS; 8]);
    pub const EOS: OctupleToken = OctupleToken([EOS; 8]);
    pub const MASK: OctupleToken = OctupleToken([MASK; 8]);

    pub fn get(&self, field: Field) -> u16 {
        self.0[field.index()]
    }

    pub fn set(&mut self, field: Field, id: u16) {
        self.0[field.index()] = id;
    }

    /// Classifies the token, or `None` if it mixes ids in a way no token may.
    pub fn class(&self) -> Option<TokenClass> {
        let first = self.0[0];
        if first < MASK && self.0.iter().all(|&id| id == first) {
            return Some(TokenClass::Special(first));
        }
        if self.0.iter().all(|&id| id >= FIRST_VALUE_ID) {
            return Some(TokenClass::Musical);
        }
        if self.0.iter().all(|&id| id >= MASK) {
            return Some(TokenClass::Masked);
        }
        None
    }

    pub fn is_musical(&self) -> bool {
        self.class() == Some(TokenClass::Musical)
    }

    pub fn is_special(&self) -> bool {
        matches!(self.class(), Some(TokenClass::Special(_)))
    }

    pub fn has_mask(&self) -> bool {
        self.0.contains(&MASK)
    }

    /// Duration in sixty-fourth notes, for a musical token.
    pub fn duration64(&self) -> Option<u16> {
        match FieldVocab::of(Field::Duration).value(self.get(Field::Duration)) {
            Ok(FieldValue::Duration(d)) => Some(d),
            _ => None,
        }
    }

    pub fn bar(&self) -> Option<u32> {
        let id = self.get(Field::Bar);
        (id >= FIRST_VALUE_ID).then(|| (id - FIRST_VALUE_ID) as u32)
    }

    /// Checks that each id fits its field vocabulary and the token is well formed.
    pub fn validate(&self) -> Result<(), String> {
        for (field, &id) in Field::ALL.iter().zip(self.0.iter()) {
            if id >= FieldVocab::of(*field).size() {
                return Err(format!("{field} id {id} out of range"));
            }
        }
        match self.class() {
            Some(_) => Ok(()),
            None => Err("mixes special and musical ids".into()),
        }
    }
}

impl fmt::Display for OctupleToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g, h, i] = self.0;
        write!(f, "{a} {b} {c} {d} {e} {g} {h} {i}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub source: String,
    pub segment: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<OctupleToken>,
    pub provenance: Provenance,
}

impl TokenSequence {
    pub fn new(tokens: Vec<OctupleToken>) -> Self {
        TokenSequence {
            tokens,
            provenance: Provenance::default(),
        }
    }

    pub fn with_provenance(mut self, source: impl Into<String>, segment: usize) -> Self {
        self.provenance = Provenance {
            source: source.into(),
            segment,
        };
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A note quantized onto the Octuple grid, before the bar index is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizedNote {
    pub timesig: TimeSignature,
    pub tempo_bin: u8,
    pub bar: u32,
    pub position: u16,
    pub pitch: u8,
    pub duration: u16,
    pub velocity_bin: u8,
    /// Index of the source note in `Score::notes`.
    pub note_index: usize,
}

impl QuantizedNote {
    fn sort_key(&self) -> (u32, u16, u8, u16, u8, TimeSignature, u8) {
        (
            self.bar,
            self.position,
            self.pitch,
            self.duration,
            self.velocity_bin,
            self.timesig,
            self.tempo_bin,
        )
    }

    /// Token with the bar shifted down by `bar_offset`.
    pub fn to_token(&self, bar_offset: u32) -> Result<OctupleToken, CodecError> {
        let bar = self.bar - bar_offset;
        if bar > MAX_BAR {
            return Err(CodecError::BarOverflow(bar));
        }
        let values = [
            FieldValue::TimeSig(self.timesig),
            FieldValue::TempoBin(self.tempo_bin),
            FieldValue::Bar(bar),
            FieldValue::Position(self.position),
            FieldValue::Piano,
            FieldValue::Pitch(self.pitch),
            FieldValue::Duration(self.duration),
            FieldValue::VelocityBin(self.velocity_bin),
        ];
        let mut ids = [0u16; 8];
        for (slot, value) in ids.iter_mut().zip(values) {
            *slot = FieldVocab::of(value.field()).id(value)?;
        }
        Ok(OctupleToken(ids))
    }
}

/// Values that had to be clamped during quantization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuantizeReport {
    pub durations_clamped: usize,
    pub durations_rounded_up: usize,
    pub tempos_clamped: usize,
}

impl QuantizeReport {
    pub fn merge(&mut self, other: &QuantizeReport) {
        self.durations_clamped += other.durations_clamped;
        self.durations_rounded_up += other.durations_rounded_up;
        self.tempos_clamped += other.tempos_clamped;
    }
}

fn ticks_to_64ths(ticks: u64, tpq: u16) -> u64 {
    // round half up: ticks * 16 / tpq
    let tpq = tpq as u64;
    (ticks * 32 + tpq) / (2 * tpq)
}

struct BarGrid {
    /// (start in 64ths, bar index at start, time signature)
    segments: Vec<(u64, u32, TimeSignature)>,
}

impl BarGrid {
    fn new(score: &Score) -> Self {
        let mut starts: Vec<(u64, TimeSignature)> = Vec::new();
        for ts in &score.timesigs {
            let at = ticks_to_64ths(ts.at_ticks, score.ticks_per_quarter.max(1));
            let sig = TimeSignature::new(ts.numerator, ts.denominator);
            match starts.last_mut() {
                Some(last) if last.0 == at => last.1 = sig,
                _ => starts.push((at, sig)),
            }
        }
        if starts.first().is_none_or(|s| s.0 > 0) {
            starts.insert(0, (0, TimeSignature::new(4, 4)));
        }
        let mut segments = Vec::with_capacity(starts.len());
        let mut bar = 0u32;
        for (i, &(start, sig)) in starts.iter().enumerate() {
            segments.push((start, bar, sig));
            if let Some(&(next, _)) = starts.get(i + 1) {
                let len = Self::counting_length(sig);
                bar += (next - start).div_ceil(len) as u32;
            }
        }
        BarGrid { segments }
    }

    fn counting_length(sig: TimeSignature) -> u64 {
        sig.bar_length().unwrap_or(1).max(1) as u64
    }

    /// (bar, position, time signature) of a grid point.
    fn locate(&self, at: u64) -> Result<(u32, u16, TimeSignature), CodecError> {
        let i = self.segments.partition_point(|s| s.0 <= at) - 1;
        let (start, first_bar, sig) = self.segments[i];
        if !sig.is_encodable() {
            return Err(CodecError::UnsupportedTimeSig(sig));
        }
        let len = Self::counting_length(sig);
        let offset = at - start;
        Ok((first_bar + (offset / len) as u32, (offset % len) as u16, sig))
    }
}

/// Quantizes every note of `score` onto the grid, sorted in token order.
pub fn quantize_score(score: &Score) -> Result<(Vec<QuantizedNote>, QuantizeReport), CodecError> {
    let tpq = score.ticks_per_quarter.max(1);
    let grid = BarGrid::new(score);
    let mut report = QuantizeReport::default();
    // Tempo is looked up at the quantized onset so that notes sharing a grid
    // point always share a tempo bin.
    let tempo_at: Vec<u64> = score
        .tempos
        .iter()
        .map(|t| ticks_to_64ths(t.at_ticks, tpq))
        .collect();
    let mut tempo_idx = 0usize;
    let mut order: Vec<usize> = (0..score.notes.len()).collect();
    order.sort_by_key(|&i| score.notes[i].onset_ticks);

    let mut out = Vec::with_capacity(score.notes.len());
    for i in order {
        let note: &NoteEvent = &score.notes[i];
        let onset = ticks_to_64ths(note.onset_ticks, tpq);
        while tempo_idx + 1 < tempo_at.len() && tempo_at[tempo_idx + 1] <= onset {
            tempo_idx += 1;
        }
        let bpm = score.tempos.get(tempo_idx).map_or(120.0, |t| t.bpm);
        if !(vocab::MIN_BPM..=vocab::MAX_BPM).contains(&bpm) {
            report.tempos_clamped += 1;
        }
        let (bar, position, timesig) = grid.locate(onset)?;
        let raw = ticks_to_64ths(note.duration_ticks, tpq);
        let duration = if raw == 0 {
            report.durations_rounded_up += 1;
            1
        } else if raw > MAX_DURATION as u64 {
            report.durations_clamped += 1;
            MAX_DURATION
        } else {
            raw as u16
        };
        out.push(QuantizedNote {
            timesig,
            tempo_bin: tempo_bin(bpm),
            bar,
            position,
            pitch: note.pitch.min(127),
            duration,
            velocity_bin: velocity_bin(note.velocity),
            note_index: i,
        });
    }
    out.sort_by_key(QuantizedNote::sort_key);
    Ok((out, report))
}

/// Encodes a whole score; fails with [`CodecError::BarOverflow`] past bar 255.
pub fn encode_score(score: &Score) -> Result<TokenSequence, CodecError> {
    let (notes, _) = quantize_score(score)?;
    let tokens = notes
        .iter()
        .map(|n| n.to_token(0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenSequence::new(tokens))
}

pub fn decode_tokens(seq: &TokenSequence) -> Result<Score, CodecError> {
    decode_tokens_with(seq, DEFAULT_DECODE_TICKS_PER_QUARTER)
}

/// Rebuilds a score from tokens. Special tokens are skipped.
///
/// Empty bars inherit the time signature of the bar before them. Tempo and
/// velocity come back at their bin centers. Overlapping notes of one pitch
/// are spread over separate channels (skipping channel 10) so that the
/// result stays monophonic per channel and pitch; past 15 simultaneous
/// copies the earlier note is truncated.
pub fn decode_tokens_with(seq: &TokenSequence, ticks_per_quarter: u16) -> Result<Score, CodecError> {
    struct Decoded {
        ts: TimeSignature,
        tempo: u8,
        bar: u32,
        position: u16,
        pitch: u8,
        duration: u16,
        velocity: u8,
    }
    let mut notes = Vec::new();
    for (index, token) in seq.tokens.iter().enumerate() {
        match token.class() {
            Some(TokenClass::Special(_)) => continue,
            Some(TokenClass::Masked) => return Err(CodecError::MaskedTokenPresent(index)),
            Some(TokenClass::Musical) => {}
            None => {
                return Err(CodecError::InvalidToken {
                    index,
                    reason: "mixes special and musical ids".into(),
                })
            }
        }
        let mut d = Decoded {
            ts: TimeSignature::new(4, 4),
            tempo: 0,
            bar: 0,
            position: 0,
            pitch: 0,
            duration: 1,
            velocity: 0,
        };
        for field in Field::ALL {
            match FieldVocab::of(field).value(token.get(field))? {
                FieldValue::TimeSig(ts) => d.ts = ts,
                FieldValue::TempoBin(b) => d.tempo = b,
                FieldValue::Bar(b) => d.bar = b,
                FieldValue::Position(p) => d.position = p,
                FieldValue::Piano => {}
                FieldValue::Pitch(p) => d.pitch = p,
                FieldValue::Duration(x) => d.duration = x,
                FieldValue::VelocityBin(v) => d.velocity = v,
            }
        }
        if !d.ts.is_encodable() {
            return Err(CodecError::UnsupportedTimeSig(d.ts));
        }
        notes.push(d);
    }

    let tpq = ticks_per_quarter.max(1);
    let to_ticks = |x64: u64| (x64 * tpq as u64 + 8) / 16;
    let mut score = Score::new(tpq);
    if notes.is_empty() {
        return Ok(score);
    }

    let max_bar = notes.iter().map(|n| n.bar).max().unwrap_or(0) as usize;
    let mut bar_sig: Vec<Option<TimeSignature>> = vec![None; max_bar + 1];
    for n in &notes {
        bar_sig[n.bar as usize].get_or_insert(n.ts);
    }
    let mut bar_start = vec![0u64; max_bar + 1];
    let mut current = notes[0].ts;
    let mut at = 0u64;
    score.timesigs.clear();
    for b in 0..=max_bar {
        let sig = bar_sig[b].unwrap_or(current);
        if b == 0 || sig != current {
            score.timesigs.push(TimeSigEvent {
                at_ticks: to_ticks(at),
                numerator: sig.numerator,
                denominator: sig.denominator,
            });
        }
        current = sig;
        bar_start[b] = at;
        at += sig.bar_length().unwrap_or(64) as u64;
    }

    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by_key(|&i| bar_start[notes[i].bar as usize] + notes[i].position as u64);

    score.tempos.clear();
    // channel -> pitch -> end tick of the sounding note
    let channels: Vec<u8> = (0..16).filter(|&c| c != 9).collect();
    let mut busy = vec![[0u64; 128]; 16];
    let mut last_on: Vec<[Option<usize>; 128]> = vec![[None; 128]; 16];
    for i in order {
        let n = &notes[i];
        let onset = to_ticks(bar_start[n.bar as usize] + n.position as u64);
        let duration = to_ticks(n.duration as u64).max(1);
        let bpm = tempo_bin_center(n.tempo);
        match score.tempos.last_mut() {
            None => score.tempos.push(TempoEvent { at_ticks: 0, bpm }),
            Some(t) if t.bpm == bpm => {}
            Some(t) if t.at_ticks == onset => t.bpm = bpm,
            Some(_) => score.tempos.push(TempoEvent { at_ticks: onset, bpm }),
        }
        let p = n.pitch as usize;
        let channel = channels
            .iter()
            .copied()
            .find(|&c| busy[c as usize][p] <= onset)
            .unwrap_or_else(|| {
                // all voices busy: truncate the earliest-ending one
                let c = *channels
                    .iter()
                    .min_by_key(|&&c| busy[c as usize][p])
                    .expect("non-empty channel list");
                if let Some(j) = last_on[c as usize][p] {
                    let prev: &mut NoteEvent = &mut score.notes[j];
                    prev.duration_ticks = onset.saturating_sub(prev.onset_ticks).max(1);
                }
                c
            });
        busy[channel as usize][p] = onset + duration;
        last_on[channel as usize][p] = Some(score.notes.len());
        score.notes.push(NoteEvent {
            onset_ticks: onset,
            duration_ticks: duration,
            pitch: n.pitch,
            velocity: velocity_bin_center(n.velocity).max(1),
            channel,
            program: 0,
        });
    }
    score.sort_notes();
    Ok(score)
}

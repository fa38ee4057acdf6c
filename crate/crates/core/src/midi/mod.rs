//! Standard MIDI File input/output.
//!
//! Files are read into a [`Score`]: a track-merged list of notes together with
//! the tempo and time-signature maps. Control changes, pitch bend, sustain pedal
//! and SysEx data are discarded since the Octuple representation has no field
//! for them. Program changes are tracked only to stamp each note with the
//! program active on its channel at note-on time.
//!
//! Recovery policy for irregular input:
//!
//! * a note-on that is never closed is closed at the end of its track and
//!   counted in [`ParseReport::unpaired_note_ons`];
//! * a note-on for a pitch that is already sounding on the same channel
//!   truncates the earlier note at the new onset
//!   ([`ParseReport::truncated_overlaps`]);
//! * notes that end up with zero length are dropped
//!   ([`ParseReport::dropped_zero_length`]).

mod reader;
mod writer;

pub use reader::{parse_midi, parse_midi_with_report, ParseReport};
pub use writer::write_midi;

use thiserror::Error;

pub const DEFAULT_BPM: f64 = 120.0;
pub const DEFAULT_TIME_SIG: (u8, u8) = (4, 4);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed MIDI file: {0}")]
    MalformedFile(String),
    #[error("unsupported MIDI file: {0}")]
    UnsupportedFormat(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("ticks_per_quarter must be at least 1")]
    ZeroResolution,
    #[error("note {index}: {reason}")]
    InvalidNote { index: usize, reason: &'static str },
    #[error("notes are not in canonical order at index {0}")]
    Unsorted(usize),
    #[error("notes {0} and {1} overlap on the same channel and pitch")]
    Overlap(usize, usize),
    #[error("tempo map: {0}")]
    InvalidTempoMap(&'static str),
    #[error("time-signature map: {0}")]
    InvalidTimeSigMap(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoteEvent {
    pub onset_ticks: u64,
    pub duration_ticks: u64,
    pub pitch: u8,
    pub velocity: u8,
    pub channel: u8,
    pub program: u8,
}

impl NoteEvent {
    pub fn end_ticks(&self) -> u64 {
        self.onset_ticks + self.duration_ticks
    }

    /// Canonical sort key: onset, then pitch, then the remaining fields.
    fn sort_key(&self) -> (u64, u8, u8, u64, u8, u8) {
        (
            self.onset_ticks,
            self.pitch,
            self.channel,
            self.duration_ticks,
            self.velocity,
            self.program,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoEvent {
    pub at_ticks: u64,
    pub bpm: f64,
}

impl TempoEvent {
    pub fn micros_per_quarter(&self) -> u32 {
        (60_000_000.0 / self.bpm).round().clamp(1.0, 16_777_215.0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeSigEvent {
    pub at_ticks: u64,
    pub numerator: u8,
    pub denominator: u8,
}

/// Track-merged view of a MIDI file.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub ticks_per_quarter: u16,
    pub notes: Vec<NoteEvent>,
    pub tempos: Vec<TempoEvent>,
    pub timesigs: Vec<TimeSigEvent>,
}

impl Score {
    /// An empty score with the default 120 BPM tempo and 4/4 time signature.
    pub fn new(ticks_per_quarter: u16) -> Self {
        Score {
            ticks_per_quarter,
            notes: Vec::new(),
            tempos: vec![TempoEvent {
                at_ticks: 0,
                bpm: DEFAULT_BPM,
            }],
            timesigs: vec![TimeSigEvent {
                at_ticks: 0,
                numerator: DEFAULT_TIME_SIG.0,
                denominator: DEFAULT_TIME_SIG.1,
            }],
        }
    }

    pub fn sort_notes(&mut self) {
        self.notes.sort_by_key(NoteEvent::sort_key);
    }

    /// Tick just past the last sounding note or the last map event.
    pub fn end_ticks(&self) -> u64 {
        let notes = self.notes.iter().map(NoteEvent::end_ticks).max().unwrap_or(0);
        let tempos = self.tempos.iter().map(|t| t.at_ticks).max().unwrap_or(0);
        let sigs = self.timesigs.iter().map(|t| t.at_ticks).max().unwrap_or(0);
        notes.max(tempos).max(sigs)
    }

    /// Checks every invariant a score must satisfy to be written and re-read
    /// losslessly.
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.ticks_per_quarter == 0 || self.ticks_per_quarter > 0x7fff {
            return Err(ScoreError::ZeroResolution);
        }
        for (index, n) in self.notes.iter().enumerate() {
            let reason = if n.duration_ticks == 0 {
                Some("zero duration")
            } else if n.pitch > 127 {
                Some("pitch out of range")
            } else if n.velocity == 0 || n.velocity > 127 {
                Some("velocity must be in 1..=127")
            } else if n.channel > 15 {
                Some("channel out of range")
            } else if n.program > 127 {
                Some("program out of range")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(ScoreError::InvalidNote { index, reason });
            }
            if index > 0 && self.notes[index - 1].sort_key() > n.sort_key() {
                return Err(ScoreError::Unsorted(index));
            }
        }
        // monophonic per (channel, pitch)
        let mut last: std::collections::HashMap<(u8, u8), usize> = Default::default();
        for (i, n) in self.notes.iter().enumerate() {
            if let Some(&j) = last.get(&(n.channel, n.pitch)) {
                if self.notes[j].end_ticks() > n.onset_ticks {
                    return Err(ScoreError::Overlap(j, i));
                }
            }
            last.insert((n.channel, n.pitch), i);
        }

        match self.tempos.first() {
            Some(t) if t.at_ticks == 0 => {}
            _ => return Err(ScoreError::InvalidTempoMap("first event must be at tick 0")),
        }
        if self.tempos.windows(2).any(|w| w[0].at_ticks >= w[1].at_ticks) {
            return Err(ScoreError::InvalidTempoMap("events not strictly increasing"));
        }
        if self
            .tempos
            .iter()
            .any(|t| !(1.0..=1000.0).contains(&t.bpm))
        {
            return Err(ScoreError::InvalidTempoMap("bpm outside [1, 1000]"));
        }

        match self.timesigs.first() {
            Some(t) if t.at_ticks == 0 => {}
            _ => {
                return Err(ScoreError::InvalidTimeSigMap(
                    "first event must be at tick 0",
                ))
            }
        }
        if self
            .timesigs
            .windows(2)
            .any(|w| w[0].at_ticks >= w[1].at_ticks)
        {
            return Err(ScoreError::InvalidTimeSigMap(
                "events not strictly increasing",
            ));
        }
        if self
            .timesigs
            .iter()
            .any(|t| t.numerator == 0 || !t.denominator.is_power_of_two() || t.denominator > 128)
        {
            return Err(ScoreError::InvalidTimeSigMap(
                "numerator must be >= 1 and denominator a power of two",
            ));
        }
        Ok(())
    }
}

#![allow(dead_code)]

pub mod oracle;

use std::path::Path;

use rand::Rng;

use octuple::codec::{FieldValue, FieldVocab, OctupleToken, TimeSignature, TokenSequence};
use octuple::midi::{write_midi, NoteEvent, Score, TempoEvent, TimeSigEvent};

/// Musical token from raw values (4/4, tempo bin 20, velocity bin 20 unless set).
pub fn token(bar: u32, pos: u16, pitch: u8, dur: u16) -> OctupleToken {
    token_full(TimeSignature::new(4, 4), 20, bar, pos, pitch, dur, 20)
}

pub fn token_full(
    ts: TimeSignature,
    tempo: u8,
    bar: u32,
    pos: u16,
    pitch: u8,
    dur: u16,
    vel: u8,
) -> OctupleToken {
    let v = |x: FieldValue| FieldVocab::of(x.field()).id(x).unwrap();
    OctupleToken([
        v(FieldValue::TimeSig(ts)),
        v(FieldValue::TempoBin(tempo)),
        v(FieldValue::Bar(bar)),
        v(FieldValue::Position(pos)),
        v(FieldValue::Piano),
        v(FieldValue::Pitch(pitch)),
        v(FieldValue::Duration(dur)),
        v(FieldValue::VelocityBin(vel)),
    ])
}

/// `n` consecutive quarter notes in 4/4.
pub fn quarter_stream(n: usize) -> TokenSequence {
    TokenSequence::new(
        (0..n)
            .map(|i| token((i / 4) as u32, (i % 4) as u16 * 16, 60 + (i % 12) as u8, 16))
            .collect(),
    )
}

/// A random score that passes `Score::validate` and survives a MIDI write.
///
/// Tempos are derived from whole microsecond values so that they re-parse
/// bit-exactly; time signature changes fall on bar lines.
pub fn random_score<R: Rng>(rng: &mut R, max_notes: usize) -> Score {
    let tpq = [96u16, 120, 192, 384, 480, 960][rng.random_range(0..6)];
    let mut score = Score::new(tpq);
    let q = tpq as u64;

    score.timesigs.clear();
    let mut at = 0u64;
    for _ in 0..rng.random_range(1..4) {
        let denominator = [4u8, 8][rng.random_range(0..2)];
        let numerator = rng.random_range(1..=if denominator == 4 { 7 } else { 12 });
        score.timesigs.push(TimeSigEvent {
            at_ticks: at,
            numerator,
            denominator,
        });
        let bar = q * 4 * numerator as u64 / denominator as u64;
        at += bar * rng.random_range(1..4);
    }
    let span = at + 4 * q * 4;

    score.tempos.clear();
    let mut t = 0u64;
    while t < span {
        let micros: u32 = rng.random_range(250_000..1_500_000);
        score.tempos.push(TempoEvent {
            at_ticks: t,
            bpm: 60_000_000.0 / micros as f64,
        });
        t += rng.random_range(q..4 * q);
    }

    let n = rng.random_range(0..=max_notes);
    for _ in 0..n {
        let onset = rng.random_range(0..span);
        let duration = rng.random_range(1..3 * q);
        let note = NoteEvent {
            onset_ticks: onset,
            duration_ticks: duration,
            pitch: rng.random_range(21..109),
            velocity: rng.random_range(1..128),
            channel: rng.random_range(0..16),
            program: rng.random_range(0..128),
        };
        let clash = score.notes.iter().any(|m| {
            m.channel == note.channel
                && m.pitch == note.pitch
                && m.onset_ticks < note.end_ticks()
                && note.onset_ticks < m.end_ticks()
        });
        if !clash {
            score.notes.push(note);
        }
    }
    score.sort_notes();
    score
}

/// One note per entry: `(onset in sixteenths, duration in sixteenths, pitch, velocity)`.
pub fn simple_score(notes: &[(u64, u64, u8, u8)]) -> Score {
    let mut s = Score::new(480);
    for &(on, dur, pitch, velocity) in notes {
        s.notes.push(NoteEvent {
            onset_ticks: on * 120,
            duration_ticks: dur * 120,
            pitch,
            velocity,
            channel: 0,
            program: 0,
        });
    }
    s.sort_notes();
    s
}

/// A monophonic line of `n` sixteenth notes.
pub fn sixteenth_line(n: usize, seed_pitch: u8) -> Score {
    let notes: Vec<(u64, u64, u8, u8)> = (0..n as u64)
        .map(|i| (i, 1, seed_pitch + (i * 7 % 24) as u8, 40 + (i * 13 % 80) as u8))
        .collect();
    simple_score(&notes)
}

pub fn write_score(path: &Path, score: &Score) {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).unwrap();
    }
    std::fs::write(path, write_midi(score)).unwrap();
}

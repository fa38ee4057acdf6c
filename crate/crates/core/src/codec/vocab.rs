//! Per-field vocabularies.
//!
//! Every field shares the special-id layout `PAD=0, BOS=1, EOS=2, MASK=3`;
//! musical values start at id 4. Layouts:
//!
//! | field      | values                                             | size |
//! |------------|----------------------------------------------------|------|
//! | TimeSig    | numerator 1..=16 x denominator {2,4,8,16}          | 68   |
//! | Tempo      | 32 log-spaced bins over [16, 256] BPM              | 36   |
//! | Bar        | 0..=255                                            | 260  |
//! | Position   | 0..=127 sixty-fourth notes from the bar start      | 132  |
//! | Instrument | piano                                              | 5    |
//! | Pitch      | 0..=127                                            | 132  |
//! | Duration   | 1..=128 sixty-fourth notes                         | 132  |
//! | Velocity   | 32 bins of width 4                                 | 36   |

use std::fmt;

use super::CodecError;

pub const PAD: u16 = 0;
pub const BOS: u16 = 1;
pub const EOS: u16 = 2;
pub const MASK: u16 = 3;
pub const FIRST_VALUE_ID: u16 = 4;

pub const MAX_BAR: u32 = 255;
pub const POSITIONS: u16 = 128;
pub const MAX_DURATION: u16 = 128;
pub const TEMPO_BINS: u8 = 32;
pub const MIN_BPM: f64 = 16.0;
pub const MAX_BPM: f64 = 256.0;
pub const VELOCITY_BINS: u8 = 32;
pub const TS_DENOMINATORS: [u8; 4] = [2, 4, 8, 16];
pub const MAX_TS_NUMERATOR: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    TimeSig,
    Tempo,
    Bar,
    Position,
    Instrument,
    Pitch,
    Duration,
    Velocity,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::TimeSig,
        Field::Tempo,
        Field::Bar,
        Field::Position,
        Field::Instrument,
        Field::Pitch,
        Field::Duration,
        Field::Velocity,
    ];

    /// Column of this field inside an [`OctupleToken`](super::OctupleToken).
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Field> {
        Field::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::TimeSig => "timesig",
            Field::Tempo => "tempo",
            Field::Bar => "bar",
            Field::Position => "position",
            Field::Instrument => "instrument",
            Field::Pitch => "pitch",
            Field::Duration => "duration",
            Field::Velocity => "velocity",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeSignature {
    pub numerator: u8,
    pub denominator: u8,
}

impl TimeSignature {
    pub const fn new(numerator: u8, denominator: u8) -> Self {
        TimeSignature {
            numerator,
            denominator,
        }
    }

    /// Bar length in sixty-fourth notes, if it is a whole number of them.
    pub fn bar_length(&self) -> Option<u32> {
        let num = self.numerator as u32 * 64;
        let den = self.denominator as u32;
        (den != 0 && num.is_multiple_of(den)).then(|| num / den)
    }

    /// In the vocabulary and short enough for the position grid.
    pub fn is_encodable(&self) -> bool {
        TS_DENOMINATORS.contains(&self.denominator)
            && (1..=MAX_TS_NUMERATOR).contains(&self.numerator)
            && self.bar_length().is_some_and(|l| l <= POSITIONS as u32)
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// A quantized musical value of one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldValue {
    TimeSig(TimeSignature),
    TempoBin(u8),
    Bar(u32),
    Position(u16),
    Piano,
    Pitch(u8),
    /// Sixty-fourth notes, 1..=128.
    Duration(u16),
    VelocityBin(u8),
}

impl FieldValue {
    pub fn field(&self) -> Field {
        match self {
            FieldValue::TimeSig(_) => Field::TimeSig,
            FieldValue::TempoBin(_) => Field::Tempo,
            FieldValue::Bar(_) => Field::Bar,
            FieldValue::Position(_) => Field::Position,
            FieldValue::Piano => Field::Instrument,
            FieldValue::Pitch(_) => Field::Pitch,
            FieldValue::Duration(_) => Field::Duration,
            FieldValue::VelocityBin(_) => Field::Velocity,
        }
    }
}

/// Vocabulary of one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldVocab {
    pub field: Field,
}

impl FieldVocab {
    pub const fn of(field: Field) -> Self {
        FieldVocab { field }
    }

    pub fn all() -> [FieldVocab; 8] {
        Field::ALL.map(FieldVocab::of)
    }

    /// Number of musical values in the field.
    pub const fn cardinality(&self) -> u16 {
        match self.field {
            Field::TimeSig => MAX_TS_NUMERATOR as u16 * TS_DENOMINATORS.len() as u16,
            Field::Tempo => TEMPO_BINS as u16,
            Field::Bar => MAX_BAR as u16 + 1,
            Field::Position => POSITIONS,
            Field::Instrument => 1,
            Field::Pitch => 128,
            Field::Duration => MAX_DURATION,
            Field::Velocity => VELOCITY_BINS as u16,
        }
    }

    pub const fn size(&self) -> u16 {
        FIRST_VALUE_ID + self.cardinality()
    }

    pub fn value(&self, id: u16) -> Result<FieldValue, CodecError> {
        if id < FIRST_VALUE_ID || id >= self.size() {
            return Err(CodecError::OutOfVocabulary {
                field: self.field,
                detail: format!("id {id}"),
            });
        }
        let k = id - FIRST_VALUE_ID;
        Ok(match self.field {
            Field::TimeSig => {
                let den = TS_DENOMINATORS[(k / MAX_TS_NUMERATOR as u16) as usize];
                let num = (k % MAX_TS_NUMERATOR as u16) as u8 + 1;
                FieldValue::TimeSig(TimeSignature::new(num, den))
            }
            Field::Tempo => FieldValue::TempoBin(k as u8),
            Field::Bar => FieldValue::Bar(k as u32),
            Field::Position => FieldValue::Position(k),
            Field::Instrument => FieldValue::Piano,
            Field::Pitch => FieldValue::Pitch(k as u8),
            Field::Duration => FieldValue::Duration(k + 1),
            Field::Velocity => FieldValue::VelocityBin(k as u8),
        })
    }

    pub fn id(&self, value: FieldValue) -> Result<u16, CodecError> {
        let oov = || CodecError::OutOfVocabulary {
            field: self.field,
            detail: format!("{value:?}"),
        };
        if value.field() != self.field {
            return Err(oov());
        }
        let k: u16 = match value {
            FieldValue::TimeSig(ts) => {
                let d = TS_DENOMINATORS
                    .iter()
                    .position(|&d| d == ts.denominator)
                    .ok_or_else(oov)?;
                if !(1..=MAX_TS_NUMERATOR).contains(&ts.numerator) {
                    return Err(oov());
                }
                d as u16 * MAX_TS_NUMERATOR as u16 + (ts.numerator as u16 - 1)
            }
            FieldValue::TempoBin(b) if b < TEMPO_BINS => b as u16,
            FieldValue::Bar(b) if b <= MAX_BAR => b as u16,
            FieldValue::Position(p) if p < POSITIONS => p,
            FieldValue::Piano => 0,
            FieldValue::Pitch(p) if p < 128 => p as u16,
            FieldValue::Duration(d) if (1..=MAX_DURATION).contains(&d) => d - 1,
            FieldValue::VelocityBin(b) if b < VELOCITY_BINS => b as u16,
            _ => return Err(oov()),
        };
        Ok(FIRST_VALUE_ID + k)
    }
}

/// Tempo bin for a BPM value, clamping to [16, 256] first.
pub fn tempo_bin(bpm: f64) -> u8 {
    let bpm = bpm.clamp(MIN_BPM, MAX_BPM);
    let span = (MAX_BPM / MIN_BPM).log2();
    let x = (TEMPO_BINS - 1) as f64 * (bpm.log2() - MIN_BPM.log2()) / span;
    x.round() as u8
}

/// Representative BPM of a tempo bin (inverse of [`tempo_bin`] on bin centers).
pub fn tempo_bin_center(bin: u8) -> f64 {
    let span = (MAX_BPM / MIN_BPM).log2();
    (MIN_BPM.log2() + span * bin as f64 / (TEMPO_BINS - 1) as f64).exp2()
}

pub fn velocity_bin(velocity: u8) -> u8 {
    velocity.min(127) / 4
}

pub fn velocity_bin_center(bin: u8) -> u8 {
    bin * 4 + 2
}

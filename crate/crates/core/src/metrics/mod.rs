//! Evaluation metrics for generated music.
//!
//! * PCHE: entropy (base 2) of the 12-bin pitch-class histogram, averaged
//!   over non-empty bars.
//! * GS: mean similarity `1 - hamming / 64` between the 64-position onset
//!   vectors of all unordered pairs of non-empty bars.
//! * PFS: `exp(-d)` where `d` is the Fréchet distance between Gaussian fits of
//!   the per-bar pitch-class histograms of two pieces.
//!
//! All functions are generic over [`Scalar`] so they can run in `f32` or `f64`.

mod frechet;

pub use frechet::{frechet_distance, sqrtm_psd, GaussianSummary, COV_RIDGE};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{Field, FieldValue, FieldVocab, OctupleToken, TokenSequence};
use crate::num::{from_usize, lit, Scalar};

pub const PITCH_CLASSES: usize = 12;
pub const GROOVE_POSITIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("every histogram is empty")]
    AllEmpty,
    #[error("need at least 2 non-empty bars, found {0}")]
    TooFewBars(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least 2 samples, found {0}")]
    DegenerateCount(usize),
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error("covariance has a negative eigenvalue")]
    NotPositiveSemidefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Whole,
    PerBar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchClassHistogram<T: Scalar> {
    pub bins: [T; PITCH_CLASSES],
    /// Number of notes counted; 0 means the histogram is the zero vector.
    pub notes: usize,
}

impl<T: Scalar> PitchClassHistogram<T> {
    pub fn from_pitches(pitches: impl IntoIterator<Item = u8>) -> Self {
        let mut counts = [0usize; PITCH_CLASSES];
        let mut notes = 0;
        for p in pitches {
            counts[p as usize % PITCH_CLASSES] += 1;
            notes += 1;
        }
        let mut bins = [T::zero(); PITCH_CLASSES];
        if notes > 0 {
            let total = from_usize::<T>(notes);
            for (b, c) in bins.iter_mut().zip(counts) {
                *b = from_usize::<T>(c) / total;
            }
        }
        PitchClassHistogram { bins, notes }
    }

    pub fn is_empty(&self) -> bool {
        self.notes == 0
    }

    /// Shannon entropy in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> T {
        self.bins
            .iter()
            .filter(|&&p| p > T::zero())
            .fold(T::zero(), |acc, &p| acc - p * p.log2())
    }

    pub fn to_vector(&self) -> DVector<T> {
        DVector::from_column_slice(&self.bins)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroovingVector {
    pub bits: [bool; GROOVE_POSITIONS],
}

impl GroovingVector {
    pub fn similarity<T: Scalar>(&self, other: &GroovingVector) -> T {
        let diff = self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count();
        T::one() - from_usize::<T>(diff) / from_usize::<T>(GROOVE_POSITIONS)
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// Musical attributes the metrics read from a token.
#[derive(Debug, Clone, Copy)]
struct NoteView {
    bar: u32,
    position: u16,
    pitch: u8,
    bar_length: u32,
}

fn note_view(t: &OctupleToken) -> Option<NoteView> {
    if !t.is_musical() {
        return None;
    }
    let value = |f: Field| FieldVocab::of(f).value(t.get(f)).ok();
    let (Some(FieldValue::Bar(bar)), Some(FieldValue::Position(position)), Some(FieldValue::Pitch(pitch))) =
        (value(Field::Bar), value(Field::Position), value(Field::Pitch))
    else {
        return None;
    };
    let bar_length = match value(Field::TimeSig) {
        Some(FieldValue::TimeSig(ts)) => ts.bar_length().unwrap_or(64),
        _ => 64,
    }
    .max(1);
    Some(NoteView {
        bar,
        position,
        pitch,
        bar_length,
    })
}

fn notes_by_bar(seq: &TokenSequence) -> BTreeMap<u32, Vec<NoteView>> {
    let mut bars: BTreeMap<u32, Vec<NoteView>> = BTreeMap::new();
    for n in seq.tokens.iter().filter_map(note_view) {
        bars.entry(n.bar).or_default().push(n);
    }
    bars
}

/// Pitch-class histograms of the whole sequence or of each bar from the first
/// to the last bar present (empty bars yield zero vectors).
pub fn pitch_class_histogram<T: Scalar>(seq: &TokenSequence, scope: Scope) -> Vec<PitchClassHistogram<T>> {
    match scope {
        Scope::Whole => vec![PitchClassHistogram::from_pitches(
            seq.tokens.iter().filter_map(note_view).map(|n| n.pitch),
        )],
        Scope::PerBar => {
            let bars = notes_by_bar(seq);
            let (Some(&first), Some(&last)) = (bars.keys().next(), bars.keys().next_back()) else {
                return Vec::new();
            };
            (first..=last)
                .map(|b| {
                    PitchClassHistogram::from_pitches(
                        bars.get(&b).into_iter().flatten().map(|n| n.pitch),
                    )
                })
                .collect()
        }
    }
}

/// Mean entropy over the non-empty histograms.
pub fn pche<T: Scalar>(hists: &[PitchClassHistogram<T>]) -> Result<T, MetricError> {
    let non_empty: Vec<&PitchClassHistogram<T>> = hists.iter().filter(|h| !h.is_empty()).collect();
    if non_empty.is_empty() {
        return Err(MetricError::AllEmpty);
    }
    let sum = non_empty.iter().fold(T::zero(), |acc, h| acc + h.entropy());
    Ok(sum / from_usize::<T>(non_empty.len()))
}

/// PCHE of a sequence, averaged per bar.
pub fn sequence_pche<T: Scalar>(seq: &TokenSequence) -> Result<T, MetricError> {
    pche(&pitch_class_histogram::<T>(seq, Scope::PerBar))
}

fn grooving_of(notes: &[NoteView]) -> GroovingVector {
    let mut bits = [false; GROOVE_POSITIONS];
    for n in notes {
        let j = n.position as usize * GROOVE_POSITIONS / n.bar_length as usize;
        if j < GROOVE_POSITIONS {
            bits[j] = true;
        }
    }
    GroovingVector { bits }
}

/// Onset vector of bar `bar_index`: bit `j` is set when a note starts in the
/// `j`-th sixty-fourth of the bar.
pub fn grooving_vector(seq: &TokenSequence, bar_index: u32) -> GroovingVector {
    let notes: Vec<NoteView> = seq
        .tokens
        .iter()
        .filter_map(note_view)
        .filter(|n| n.bar == bar_index)
        .collect();
    grooving_of(&notes)
}

/// Mean pairwise grooving similarity over all unordered pairs of non-empty bars.
pub fn gs<T: Scalar>(seq: &TokenSequence) -> Result<T, MetricError> {
    let vectors: Vec<GroovingVector> = notes_by_bar(seq).values().map(|n| grooving_of(n)).collect();
    if vectors.len() < 2 {
        return Err(MetricError::TooFewBars(vectors.len()));
    }
    let mut sum = T::zero();
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            sum += vectors[i].similarity::<T>(&vectors[j]);
            pairs += 1;
        }
    }
    Ok(sum / from_usize::<T>(pairs))
}

/// Gaussian fit of the per-bar pitch-class histograms of non-empty bars.
pub fn pitch_summary<T: Scalar>(seq: &TokenSequence) -> Result<GaussianSummary<T>, MetricError> {
    let samples: Vec<DVector<T>> = pitch_class_histogram::<T>(seq, Scope::PerBar)
        .iter()
        .filter(|h| !h.is_empty())
        .map(PitchClassHistogram::to_vector)
        .collect();
    if samples.len() < 2 {
        return Err(MetricError::TooFewBars(samples.len()));
    }
    GaussianSummary::fit(&samples)
}

/// Pitch Fréchet similarity `exp(-d)`; 1 for identical summaries.
pub fn pfs<T: Scalar>(generated: &TokenSequence, reference: &TokenSequence) -> Result<T, MetricError> {
    let a = pitch_summary::<T>(generated)?;
    let b = pitch_summary::<T>(reference)?;
    Ok((-frechet_distance(&a, &b)?).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T: Scalar> {
    pub pfs_gt: T,
    pub pfs_prompt: T,
    pub pche_abs_diff: T,
    pub gs_abs_diff: T,
}

impl<T: Scalar> MetricReport<T> {
    fn values(&self) -> [(&'static str, T); 4] {
        [
            ("pfs_gt", self.pfs_gt),
            ("pfs_prompt", self.pfs_prompt),
            ("pche_abs_diff", self.pche_abs_diff),
            ("gs_abs_diff", self.gs_abs_diff),
        ]
    }

    /// One `key=value` line per metric, six decimals.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.values() {
            let _ = writeln!(out, "{k}={:.6}", v.to_f64().unwrap_or(f64::NAN));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>10}", "metric", "value");
        let _ = writeln!(out, "{:-<14} {:->10}", "", "");
        for (k, v) in self.values() {
            let _ = writeln!(out, "{k:<14} {:>10.6}", v.to_f64().unwrap_or(f64::NAN));
        }
        out
    }

    /// Parses the output of [`MetricReport::to_key_values`].
    pub fn from_key_values(text: &str) -> Option<Self> {
        let mut vals: BTreeMap<&str, f64> = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=')?;
            vals.insert(k.trim(), v.trim().parse().ok()?);
        }
        Some(MetricReport {
            pfs_gt: lit(*vals.get("pfs_gt")?),
            pfs_prompt: lit(*vals.get("pfs_prompt")?),
            pche_abs_diff: lit(*vals.get("pche_abs_diff")?),
            gs_abs_diff: lit(*vals.get("gs_abs_diff")?),
        })
    }
}

pub fn compare_to_reference<T: Scalar>(
    generated: &TokenSequence,
    ground_truth: &TokenSequence,
    prompt: &TokenSequence,
) -> Result<MetricReport<T>, MetricError> {
    Ok(MetricReport {
        pfs_gt: pfs(generated, ground_truth)?,
        pfs_prompt: pfs(generated, prompt)?,
        pche_abs_diff: (sequence_pche::<T>(generated)? - sequence_pche::<T>(ground_truth)?).abs(),
        gs_abs_diff: (gs::<T>(generated)? - gs::<T>(ground_truth)?).abs(),
    })
}

/// Evaluates every `(generated, ground truth, prompt)` triple in parallel and
/// averages the reports in piece order.
pub fn compare_corpus<T: Scalar>(
    pieces: &[(TokenSequence, TokenSequence, TokenSequence)],
) -> Result<(Vec<MetricReport<T>>, MetricReport<T>), MetricError> {
    let reports = pieces
        .par_iter()
        .map(|(g, t, p)| compare_to_reference::<T>(g, t, p))
        .collect::<Result<Vec<_>, _>>()?;
    if reports.is_empty() {
        return Err(MetricError::DegenerateCount(0));
    }
    let n = from_usize::<T>(reports.len());
    let mut mean = MetricReport {
        pfs_gt: T::zero(),
        pfs_prompt: T::zero(),
        pche_abs_diff: T::zero(),
        gs_abs_diff: T::zero(),
    };
    for r in &reports {
        mean.pfs_gt += r.pfs_gt;
        mean.pfs_prompt += r.pfs_prompt;
        mean.pche_abs_diff += r.pche_abs_diff;
        mean.gs_abs_diff += r.gs_abs_diff;
    }
    mean.pfs_gt /= n;
    mean.pfs_prompt /= n;
    mean.pche_abs_diff /= n;
    mean.gs_abs_diff /= n;
    Ok((reports, mean))
}

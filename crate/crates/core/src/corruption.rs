//! Denoising corruptions producing aligned (source, target) pairs.
//!
//! Each transformation accepts only some selection methods:
//!
//! | kind                 | methods                                            |
//! |----------------------|----------------------------------------------------|
//! | token masking        | octuple-element, octuple-token, nbar-element, nbar-token |
//! | token deletion       | octuple-token, nbar-token                          |
//! | text infilling       | octuple-token, nbar-token                          |
//! | sentence permutation | octuple-token, bar-token                           |
//! | document rotation    | octuple-token                                      |
//!
//! After permutation and rotation the bar field of the source is renumbered
//! densely from 0 in the new order, unless `renumber_bars` is off; the
//! original bar ids would otherwise give the original order away.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{Field, FieldValue, FieldVocab, OctupleToken, TokenSequence};
use crate::selection::{
    self, Granularity, SelectionError, SelectionMask, SelectionMethod,
};

pub const DEFAULT_RATIO: f64 = 0.15;
pub const DEFAULT_INFILL_MEAN: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorruptionError {
    #[error("{method} selection is not allowed for {kind}")]
    MethodNotAllowed {
        kind: CorruptionKind,
        method: SelectionMethod,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("no corruption kind or method is enabled")]
    NothingEnabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    TokenMasking,
    TokenDeletion,
    TextInfilling,
    SentencePermutation,
    DocumentRotation,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::TokenMasking,
        CorruptionKind::TokenDeletion,
        CorruptionKind::TextInfilling,
        CorruptionKind::SentencePermutation,
        CorruptionKind::DocumentRotation,
    ];

    pub fn allowed_methods(self) -> &'static [SelectionMethod] {
        use SelectionMethod as M;
        match self {
            CorruptionKind::TokenMasking => &[
                M::OCTUPLE_ELEMENT,
                M::OCTUPLE_TOKEN,
                M::NBAR_ELEMENT,
                M::NBAR_TOKEN,
            ],
            CorruptionKind::TokenDeletion | CorruptionKind::TextInfilling => {
                &[M::OCTUPLE_TOKEN, M::NBAR_TOKEN]
            }
            CorruptionKind::SentencePermutation => &[M::OCTUPLE_TOKEN, M::BAR_TOKEN],
            CorruptionKind::DocumentRotation => &[M::OCTUPLE_TOKEN],
        }
    }

    pub fn allows(self, method: SelectionMethod) -> bool {
        self.allowed_methods().contains(&method)
    }

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::TokenMasking => "token-masking",
            CorruptionKind::TokenDeletion => "token-deletion",
            CorruptionKind::TextInfilling => "text-infilling",
            CorruptionKind::SentencePermutation => "sentence-permutation",
            CorruptionKind::DocumentRotation => "document-rotation",
        }
    }

    fn check(self, method: SelectionMethod) -> Result<(), CorruptionError> {
        if self.allows(method) {
            Ok(())
        } else {
            Err(CorruptionError::MethodNotAllowed { kind: self, method })
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown corruption kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionPair {
    pub source: TokenSequence,
    pub target: TokenSequence,
    pub kind: CorruptionKind,
    pub method: SelectionMethod,
    pub seed: u64,
    /// Selection used by masking, deletion and infilling.
    pub mask: Option<SelectionMask>,
    /// For permutation and rotation: target index of each source token.
    pub origin: Option<Vec<usize>>,
}

/// Which kinds and methods [`corrupt`] may draw, and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    /// Enabled kinds with relative weights.
    pub kinds: Vec<(CorruptionKind, f64)>,
    /// Per-kind method weights; a kind missing here uses its allowed set uniformly.
    pub methods: Vec<(CorruptionKind, Vec<(SelectionMethod, f64)>)>,
    pub masking_ratio: f64,
    pub deletion_ratio: f64,
    pub infilling_ratio: f64,
    pub infill_mean: f64,
    pub renumber_bars: bool,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            kinds: CorruptionKind::ALL.iter().map(|&k| (k, 1.0)).collect(),
            methods: Vec::new(),
            masking_ratio: DEFAULT_RATIO,
            deletion_ratio: DEFAULT_RATIO,
            infilling_ratio: DEFAULT_RATIO,
            infill_mean: DEFAULT_INFILL_MEAN,
            renumber_bars: true,
        }
    }
}

impl CorruptionConfig {
    pub fn only(kind: CorruptionKind) -> Self {
        CorruptionConfig {
            kinds: vec![(kind, 1.0)],
            ..Default::default()
        }
    }

    pub fn method_weights(&self, kind: CorruptionKind) -> Vec<(SelectionMethod, f64)> {
        let configured = self
            .methods
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, w)| w.clone());
        configured
            .unwrap_or_else(|| kind.allowed_methods().iter().map(|&m| (m, 1.0)).collect())
            .into_iter()
            .filter(|&(m, w)| kind.allows(m) && w > 0.0)
            .collect()
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[(T, f64)], rng: &mut R) -> Option<T> {
    let total: f64 = items.iter().map(|(_, w)| w.max(0.0)).sum();
    if items.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for &(item, w) in items {
        let w = w.max(0.0);
        if x < w {
            return Some(item);
        }
        x -= w;
    }
    items.iter().rev().find(|(_, w)| *w > 0.0).map(|&(t, _)| t)
}

fn pair(
    seq: &TokenSequence,
    source: Vec<OctupleToken>,
    kind: CorruptionKind,
    method: SelectionMethod,
    seed: u64,
) -> CorruptionPair {
    CorruptionPair {
        source: TokenSequence {
            tokens: source,
            provenance: seq.provenance.clone(),
        },
        target: seq.clone(),
        kind,
        method,
        seed,
        mask: None,
        origin: None,
    }
}

/// Replaces every selected cell with `MASK`.
pub fn apply_mask(seq: &TokenSequence, mask: &SelectionMask) -> Vec<OctupleToken> {
    seq.tokens
        .iter()
        .zip(&mask.grid)
        .map(|(t, row)| {
            let mut t = *t;
            for (id, &sel) in t.0.iter_mut().zip(row) {
                if sel {
                    *id = crate::codec::MASK;
                }
            }
            t
        })
        .collect()
}

/// Drops every fully selected row.
pub fn apply_deletion(seq: &TokenSequence, mask: &SelectionMask) -> Vec<OctupleToken> {
    seq.tokens
        .iter()
        .enumerate()
        .filter(|&(i, _)| !mask.row_selected(i))
        .map(|(_, t)| *t)
        .collect()
}

/// Collapses each selected span into a single all-`MASK` token.
pub fn apply_infilling(seq: &TokenSequence, mask: &SelectionMask) -> Vec<OctupleToken> {
    let mut spans = mask.spans.clone();
    spans.sort_by_key(|s| s.start);
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    for span in spans.iter().filter(|s| s.len > 0) {
        out.extend_from_slice(&seq.tokens[i..span.start]);
        out.push(OctupleToken::MASK);
        i = span.end();
    }
    out.extend_from_slice(&seq.tokens[i..]);
    out
}

pub fn mask_tokens(
    seq: &TokenSequence,
    method: SelectionMethod,
    ratio: f64,
    seed: u64,
) -> Result<CorruptionPair, CorruptionError> {
    mask_tokens_rng(seq, method, ratio, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn mask_tokens_rng<R: Rng + ?Sized>(
    seq: &TokenSequence,
    method: SelectionMethod,
    ratio: f64,
    seed: u64,
    rng: &mut R,
) -> Result<CorruptionPair, CorruptionError> {
    CorruptionKind::TokenMasking.check(method)?;
    let mask = selection::select(seq, method, ratio, rng)?;
    let mut p = pair(seq, apply_mask(seq, &mask), CorruptionKind::TokenMasking, method, seed);
    p.mask = Some(mask);
    Ok(p)
}

pub fn delete_tokens(
    seq: &TokenSequence,
    method: SelectionMethod,
    prob: f64,
    seed: u64,
) -> Result<CorruptionPair, CorruptionError> {
    delete_tokens_rng(seq, method, prob, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn delete_tokens_rng<R: Rng + ?Sized>(
    seq: &TokenSequence,
    method: SelectionMethod,
    prob: f64,
    seed: u64,
    rng: &mut R,
) -> Result<CorruptionPair, CorruptionError> {
    CorruptionKind::TokenDeletion.check(method)?;
    let mask = selection::select(seq, method, prob, rng)?;
    let mut p = pair(seq, apply_deletion(seq, &mask), CorruptionKind::TokenDeletion, method, seed);
    p.mask = Some(mask);
    Ok(p)
}

/// Text infilling. Octuple-level spans have Poisson(`mean_len`) lengths
/// (at least 1); n-Bar spans follow the duration threshold rule.
pub fn infill_spans(
    seq: &TokenSequence,
    method: SelectionMethod,
    ratio: f64,
    mean_len: f64,
    seed: u64,
) -> Result<CorruptionPair, CorruptionError> {
    infill_spans_rng(seq, method, ratio, mean_len, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn infill_spans_rng<R: Rng + ?Sized>(
    seq: &TokenSequence,
    method: SelectionMethod,
    ratio: f64,
    mean_len: f64,
    seed: u64,
    rng: &mut R,
) -> Result<CorruptionPair, CorruptionError> {
    CorruptionKind::TextInfilling.check(method)?;
    let mask = if method == SelectionMethod::OCTUPLE_TOKEN {
        selection::select_poisson_spans(seq, ratio, mean_len, rng)?
    } else {
        selection::select(seq, method, ratio, rng)?
    };
    let mut p = pair(seq, apply_infilling(seq, &mask), CorruptionKind::TextInfilling, method, seed);
    p.mask = Some(mask);
    Ok(p)
}

/// Rewrites bar ids so they count up from 0 in source order, incrementing
/// whenever the original bar id changes between consecutive tokens.
pub fn renumber_bars(tokens: &mut [OctupleToken]) {
    let vocab = FieldVocab::of(Field::Bar);
    let mut prev: Option<u16> = None;
    let mut bar = 0u32;
    for t in tokens.iter_mut() {
        let id = t.get(Field::Bar);
        if vocab.value(id).is_err() {
            continue;
        }
        if let Some(p) = prev {
            if p != id {
                bar += 1;
            }
        }
        prev = Some(id);
        let new_id = vocab
            .id(FieldValue::Bar(bar.min(crate::codec::vocab::MAX_BAR)))
            .expect("bar clamped into vocabulary");
        t.set(Field::Bar, new_id);
    }
}

/// Range of the sequence between leading and trailing special tokens.
fn body_range(seq: &TokenSequence) -> std::ops::Range<usize> {
    let start = seq.tokens.iter().position(|t| !t.is_special()).unwrap_or(seq.len());
    let end = seq
        .tokens
        .iter()
        .rposition(|t| !t.is_special())
        .map_or(start, |i| i + 1);
    start..end
}

fn reorder(
    seq: &TokenSequence,
    origin: Vec<usize>,
    renumber: bool,
    kind: CorruptionKind,
    method: SelectionMethod,
    seed: u64,
) -> CorruptionPair {
    let mut source: Vec<OctupleToken> = origin.iter().map(|&i| seq.tokens[i]).collect();
    if renumber {
        let body = body_range(seq);
        renumber_bars(&mut source[body]);
    }
    let mut p = pair(seq, source, kind, method, seed);
    p.origin = Some(origin);
    p
}

/// Sentence permutation with bars as sentences (`bar-token`) or random split
/// points (`octuple-token`, as many segments as there are bars).
pub fn permute_sentences(
    seq: &TokenSequence,
    method: SelectionMethod,
    renumber: bool,
    seed: u64,
) -> Result<CorruptionPair, CorruptionError> {
    permute_rng(seq, method, renumber, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn permute_rng<R: Rng + ?Sized>(
    seq: &TokenSequence,
    method: SelectionMethod,
    renumber: bool,
    seed: u64,
    rng: &mut R,
) -> Result<CorruptionPair, CorruptionError> {
    let kind = CorruptionKind::SentencePermutation;
    kind.check(method)?;
    let body = body_range(seq);
    // indices where a musical bar change starts a new bar
    let bar_starts: Vec<usize> = body
        .clone()
        .filter(|&i| seq.tokens[i].is_musical())
        .scan(None, |prev, i| {
            let bar = seq.tokens[i].bar();
            let starts = *prev != Some(bar);
            *prev = Some(bar);
            Some((i, starts))
        })
        .filter_map(|(i, starts)| starts.then_some(i))
        .collect();
    let mut cuts: Vec<usize> = if method == SelectionMethod::BAR_TOKEN {
        bar_starts.iter().copied().filter(|&i| i > body.start).collect()
    } else {
        let candidates: Vec<usize> = (body.start + 1..body.end)
            .filter(|&i| seq.tokens[i].is_musical())
            .collect();
        let k = bar_starts.len().saturating_sub(1).min(candidates.len());
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), k)
            .into_iter()
            .map(|j| candidates[j])
            .collect();
        picked.sort_unstable();
        picked
    };
    cuts.insert(0, body.start);
    cuts.push(body.end);
    let mut segments: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    segments.shuffle(rng);

    let mut origin: Vec<usize> = (0..body.start).collect();
    for (a, b) in segments {
        origin.extend(a..b);
    }
    origin.extend(body.end..seq.len());
    Ok(reorder(seq, origin, renumber, kind, method, seed))
}

/// Rotates the sequence so that a uniformly chosen musical token comes first.
pub fn rotate_document(
    seq: &TokenSequence,
    renumber: bool,
    seed: u64,
) -> Result<CorruptionPair, CorruptionError> {
    rotate_rng(seq, renumber, seed, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn rotate_rng<R: Rng + ?Sized>(
    seq: &TokenSequence,
    renumber: bool,
    seed: u64,
    rng: &mut R,
) -> Result<CorruptionPair, CorruptionError> {
    let body = body_range(seq);
    if body.is_empty() {
        return Err(CorruptionError::EmptySequence);
    }
    let candidates: Vec<usize> = body.clone().filter(|&i| seq.tokens[i].is_musical()).collect();
    if candidates.is_empty() {
        return Err(CorruptionError::EmptySequence);
    }
    let k = candidates[rng.random_range(0..candidates.len())] - body.start;
    Ok(rotate_by(seq, k, renumber, seed))
}

/// Deterministic rotation of the body by `k` tokens: `seq[k..] ++ seq[..k]`.
pub fn rotate_by(seq: &TokenSequence, k: usize, renumber: bool, seed: u64) -> CorruptionPair {
    let body = body_range(seq);
    let n = body.len();
    let mut origin: Vec<usize> = (0..body.start).collect();
    if n > 0 {
        origin.extend((0..n).map(|i| body.start + (i + k) % n));
    }
    origin.extend(body.end..seq.len());
    reorder(
        seq,
        origin,
        renumber,
        CorruptionKind::DocumentRotation,
        SelectionMethod::OCTUPLE_TOKEN,
        seed,
    )
}

/// Draws one transformation and one of its methods, then applies it.
pub fn corrupt(
    seq: &TokenSequence,
    seed: u64,
    config: &CorruptionConfig,
) -> Result<CorruptionPair, CorruptionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = pick(&config.kinds, &mut rng).ok_or(CorruptionError::NothingEnabled)?;
    let method = pick(&config.method_weights(kind), &mut rng).ok_or(CorruptionError::NothingEnabled)?;
    let rng = &mut rng;
    match kind {
        CorruptionKind::TokenMasking => mask_tokens_rng(seq, method, config.masking_ratio, seed, rng),
        CorruptionKind::TokenDeletion => delete_tokens_rng(seq, method, config.deletion_ratio, seed, rng),
        CorruptionKind::TextInfilling => {
            infill_spans_rng(seq, method, config.infilling_ratio, config.infill_mean, seed, rng)
        }
        CorruptionKind::SentencePermutation => permute_rng(seq, method, config.renumber_bars, seed, rng),
        CorruptionKind::DocumentRotation => rotate_rng(seq, config.renumber_bars, seed, rng),
    }
}

/// n-Bar mask from fixed `(start, m, field)` draws instead of random ones.
pub fn forced_nbar_mask(
    seq: &TokenSequence,
    granularity: Granularity,
    draws: &[(usize, u32, Option<Field>)],
) -> Result<SelectionMask, CorruptionError> {
    Ok(selection::mask_from_draws(seq, granularity, draws)?)
}

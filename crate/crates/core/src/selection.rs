//! Multi-level object selection.
//!
//! A selection picks the cells of an `L x 8` token grid that a corruption will
//! act on. Two axes combine into six methods:
//!
//! * granularity: a single field of a token (`Element`) or all eight fields
//!   (`Token`);
//! * level: independent tokens (`Octuple`), whole bars (`Bar`), or runs of
//!   consecutive tokens whose summed duration reaches a random threshold
//!   (`NBar`, see [`nbar_span`]).
//!
//! Units are drawn without replacement until the selected fraction of
//! musical cells first reaches the requested ratio; the last unit may
//! overshoot. Special tokens are never selected, and spans never cross them.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::codec::{Field, OctupleToken, TokenSequence};

/// Largest n-Bar threshold, in sixty-fourth notes (two whole notes).
pub const MAX_SPAN_THRESHOLD: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("sequence has no musical tokens")]
    EmptySequence,
    #[error("index {0} does not point at a musical token")]
    BadIndex(usize),
    #[error("span threshold {0} outside 1..=128")]
    BadM(u32),
    #[error("selection ratio {0} outside (0, 1)")]
    BadRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Octuple,
    Bar,
    NBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Element,
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SelectionMethod {
    pub level: Level,
    pub granularity: Granularity,
}

impl SelectionMethod {
    pub const OCTUPLE_ELEMENT: Self = Self::new(Level::Octuple, Granularity::Element);
    pub const OCTUPLE_TOKEN: Self = Self::new(Level::Octuple, Granularity::Token);
    pub const BAR_ELEMENT: Self = Self::new(Level::Bar, Granularity::Element);
    pub const BAR_TOKEN: Self = Self::new(Level::Bar, Granularity::Token);
    pub const NBAR_ELEMENT: Self = Self::new(Level::NBar, Granularity::Element);
    pub const NBAR_TOKEN: Self = Self::new(Level::NBar, Granularity::Token);

    pub const ALL: [Self; 6] = [
        Self::OCTUPLE_ELEMENT,
        Self::OCTUPLE_TOKEN,
        Self::BAR_ELEMENT,
        Self::BAR_TOKEN,
        Self::NBAR_ELEMENT,
        Self::NBAR_TOKEN,
    ];

    pub const fn new(level: Level, granularity: Granularity) -> Self {
        SelectionMethod { level, granularity }
    }

    pub fn name(&self) -> &'static str {
        match (self.level, self.granularity) {
            (Level::Octuple, Granularity::Element) => "octuple-element",
            (Level::Octuple, Granularity::Token) => "octuple-token",
            (Level::Bar, Granularity::Element) => "bar-element",
            (Level::Bar, Granularity::Token) => "bar-token",
            (Level::NBar, Granularity::Element) => "nbar-element",
            (Level::NBar, Granularity::Token) => "nbar-token",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown selection method {s:?}"))
    }
}

/// One n-Bar draw: start token `p`, threshold `m` and resulting length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanDraw {
    pub p: usize,
    pub m: u32,
    pub n: usize,
}

/// A contiguous run of selected rows; `field` is set for element granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedSpan {
    pub start: usize,
    pub len: usize,
    pub field: Option<Field>,
}

impl SelectedSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    pub grid: Vec<[bool; 8]>,
    pub method: SelectionMethod,
    /// Selected fraction of the musical cells.
    pub coverage: f64,
    /// Units in draw order.
    pub spans: Vec<SelectedSpan>,
}

impl SelectionMask {
    /// A mask selecting nothing.
    pub fn none(len: usize, method: SelectionMethod) -> Self {
        SelectionMask {
            grid: vec![[false; 8]; len],
            method,
            coverage: 0.0,
            spans: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn selected_cells(&self) -> usize {
        self.grid.iter().flatten().filter(|&&b| b).count()
    }

    pub fn row_selected(&self, row: usize) -> bool {
        self.grid[row].iter().all(|&b| b)
    }

    pub fn selected_rows(&self) -> usize {
        (0..self.grid.len()).filter(|&r| self.row_selected(r)).count()
    }

    fn mark(&mut self, span: SelectedSpan) {
        for row in &mut self.grid[span.start..span.end()] {
            match span.field {
                Some(f) => row[f.index()] = true,
                None => *row = [true; 8],
            }
        }
        self.spans.push(span);
    }

    fn finish(mut self, musical_rows: usize) -> Self {
        self.coverage = if musical_rows == 0 {
            0.0
        } else {
            self.selected_cells() as f64 / (musical_rows * 8) as f64
        };
        self
    }

    /// Grid as `L` lines of eight `0`/`1` characters.
    pub fn to_bit_lines(&self) -> String {
        let mut out = String::with_capacity(self.grid.len() * 9);
        for row in &self.grid {
            for &b in row {
                out.push(if b { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

fn musical_dur(token: &OctupleToken) -> Option<u32> {
    if token.is_musical() {
        token.duration64().map(u32::from)
    } else {
        None
    }
}

/// Smallest `n >= 1` such that the durations of tokens `p..p+n` sum to at
/// least `m` sixty-fourth notes.
///
/// The run stops early at the end of the sequence or at the first
/// non-musical token.
pub fn nbar_span(seq: &TokenSequence, p: usize, m: u32) -> Result<SpanDraw, SelectionError> {
    if !(1..=MAX_SPAN_THRESHOLD).contains(&m) {
        return Err(SelectionError::BadM(m));
    }
    let first = seq
        .tokens
        .get(p)
        .and_then(musical_dur)
        .ok_or(SelectionError::BadIndex(p))?;
    let mut total = first;
    let mut n = 1;
    while total < m {
        match seq.tokens.get(p + n).and_then(musical_dur) {
            Some(d) => {
                total += d;
                n += 1;
            }
            None => break,
        }
    }
    Ok(SpanDraw { p, m, n })
}

fn check_ratio(ratio: f64) -> Result<(), SelectionError> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(SelectionError::BadRatio(ratio))
    }
}

fn musical_rows(seq: &TokenSequence) -> Vec<usize> {
    (0..seq.len()).filter(|&i| seq.tokens[i].is_musical()).collect()
}

fn cell_target(ratio: f64, musical: usize) -> usize {
    ((ratio * (musical * 8) as f64).ceil() as usize).max(1)
}

/// Groups of musical rows sharing a bar id, as contiguous runs.
fn bar_groups(seq: &TokenSequence) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        let Some(bar) = seq.tokens[i].is_musical().then(|| seq.tokens[i].bar()).flatten() else {
            i += 1;
            continue;
        };
        let start = i;
        while i < seq.len() && seq.tokens[i].is_musical() && seq.tokens[i].bar() == Some(bar) {
            i += 1;
        }
        groups.push((start, i - start));
    }
    groups
}

/// Draws a selection mask with the given method.
pub fn select<R: Rng + ?Sized>(
    seq: &TokenSequence,
    method: SelectionMethod,
    ratio: f64,
    rng: &mut R,
) -> Result<SelectionMask, SelectionError> {
    check_ratio(ratio)?;
    let rows = musical_rows(seq);
    if rows.is_empty() {
        return Err(SelectionError::EmptySequence);
    }
    let target = cell_target(ratio, rows.len());
    let mut mask = SelectionMask::none(seq.len(), method);
    let cells_per_unit = match method.granularity {
        Granularity::Element => 1,
        Granularity::Token => 8,
    };

    match method.level {
        Level::Octuple => {
            let units = match method.granularity {
                Granularity::Element => rows.len() * 8,
                Granularity::Token => rows.len(),
            };
            let k = target.div_ceil(cells_per_unit).min(units);
            let mut picked = rand::seq::index::sample(rng, units, k).into_vec();
            picked.sort_unstable();
            for u in picked {
                let span = match method.granularity {
                    Granularity::Element => SelectedSpan {
                        start: rows[u / 8],
                        len: 1,
                        field: Field::from_index(u % 8),
                    },
                    Granularity::Token => SelectedSpan {
                        start: rows[u],
                        len: 1,
                        field: None,
                    },
                };
                mask.mark(span);
            }
        }
        Level::Bar => {
            let groups = bar_groups(seq);
            let mut units: Vec<(usize, Option<Field>)> = match method.granularity {
                Granularity::Token => (0..groups.len()).map(|g| (g, None)).collect(),
                Granularity::Element => (0..groups.len())
                    .flat_map(|g| Field::ALL.into_iter().map(move |f| (g, Some(f))))
                    .collect(),
            };
            units.shuffle(rng);
            let mut covered = 0;
            for (g, field) in units {
                if covered >= target {
                    break;
                }
                let (start, len) = groups[g];
                mask.mark(SelectedSpan { start, len, field });
                covered += len * if field.is_some() { 1 } else { 8 };
            }
        }
        Level::NBar => {
            let mut covered = 0;
            while covered < target {
                let field = match method.granularity {
                    Granularity::Element => Some(Field::ALL[rng.random_range(0..8)]),
                    Granularity::Token => None,
                };
                let col = field.map(Field::index);
                let is_free = |mask: &SelectionMask, r: usize| match col {
                    Some(c) => !mask.grid[r][c],
                    None => !mask.grid[r][0],
                };
                let free: Vec<usize> = rows.iter().copied().filter(|&r| is_free(&mask, r)).collect();
                if free.is_empty() {
                    if field.is_some() && mask.selected_cells() < rows.len() * 8 {
                        // this column is exhausted but others are not
                        continue;
                    }
                    break;
                }
                let p = free[rng.random_range(0..free.len())];
                let m = rng.random_range(1..=MAX_SPAN_THRESHOLD);
                let draw = nbar_span(seq, p, m).expect("p is a musical row");
                let len = (p..p + draw.n).take_while(|&r| is_free(&mask, r)).count();
                mask.mark(SelectedSpan { start: p, len, field });
                covered += len * cells_per_unit;
            }
        }
    }
    Ok(mask.finish(rows.len()))
}

/// Builds a mask from explicit n-Bar draws `(p, m, field)`, as [`select`]
/// would for those draws. Each span is cut where it meets already-selected
/// cells.
pub fn mask_from_draws(
    seq: &TokenSequence,
    granularity: Granularity,
    draws: &[(usize, u32, Option<Field>)],
) -> Result<SelectionMask, SelectionError> {
    let rows = musical_rows(seq);
    let mut mask = SelectionMask::none(seq.len(), SelectionMethod::new(Level::NBar, granularity));
    for &(p, m, field) in draws {
        let field = match granularity {
            Granularity::Element => Some(field.unwrap_or(Field::Pitch)),
            Granularity::Token => None,
        };
        let draw = nbar_span(seq, p, m)?;
        let col = field.map_or(0, Field::index);
        let len = (p..p + draw.n).take_while(|&r| !mask.grid[r][col]).count();
        if len > 0 {
            mask.mark(SelectedSpan { start: p, len, field });
        }
    }
    Ok(mask.finish(rows.len()))
}

/// Token-level spans with Poisson-distributed lengths, used by text infilling
/// at the Octuple level. Spans are disjoint and never adjacent to special
/// tokens' positions.
pub fn select_poisson_spans<R: Rng + ?Sized>(
    seq: &TokenSequence,
    ratio: f64,
    mean_len: f64,
    rng: &mut R,
) -> Result<SelectionMask, SelectionError> {
    use rand_distr::{Distribution, Poisson};

    check_ratio(ratio)?;
    let rows = musical_rows(seq);
    if rows.is_empty() {
        return Err(SelectionError::EmptySequence);
    }
    let poisson = Poisson::new(mean_len).map_err(|_| SelectionError::BadRatio(mean_len))?;
    let target = rows.len().min(cell_target(ratio, rows.len()).div_ceil(8));
    let mut mask = SelectionMask::none(seq.len(), SelectionMethod::OCTUPLE_TOKEN);
    let mut covered = 0;
    while covered < target {
        let free: Vec<usize> = rows.iter().copied().filter(|&r| !mask.grid[r][0]).collect();
        if free.is_empty() {
            break;
        }
        let p = free[rng.random_range(0..free.len())];
        let want = (poisson.sample(rng) as usize).max(1);
        let len = (p..seq.len())
            .take_while(|&r| seq.tokens[r].is_musical() && !mask.grid[r][0])
            .take(want)
            .count();
        mask.mark(SelectedSpan {
            start: p,
            len,
            field: None,
        });
        covered += len;
    }
    Ok(mask.finish(rows.len()))
}

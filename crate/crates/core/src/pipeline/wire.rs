//! Pair file format shared with the trainer.
//!
//! ```text
//! @pair kind=token-masking method=octuple-element seed=1234 src_len=2 tgt_len=2
//! 8 27 4 4 4 64 3 20
//! 8 27 4 20 4 67 19 20
//! 8 27 4 4 4 64 19 20
//! 8 27 4 20 4 67 19 20
//!
//! ```

use std::fmt::Write as _;

use crate::codec::text::parse_token;
use crate::codec::OctupleToken;
use crate::corruption::{CorruptionKind, CorruptionPair};
use crate::selection::SelectionMethod;

use super::PipelineError;

/// One parsed pair record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub kind: CorruptionKind,
    pub method: SelectionMethod,
    pub seed: u64,
    pub source: Vec<OctupleToken>,
    pub target: Vec<OctupleToken>,
}

impl From<&CorruptionPair> for PairRecord {
    fn from(p: &CorruptionPair) -> Self {
        PairRecord {
            kind: p.kind,
            method: p.method,
            seed: p.seed,
            source: p.source.tokens.clone(),
            target: p.target.tokens.clone(),
        }
    }
}

pub fn write_pair(out: &mut String, pair: &PairRecord) {
    let _ = writeln!(
        out,
        "@pair kind={} method={} seed={} src_len={} tgt_len={}",
        pair.kind.name(),
        pair.method,
        pair.seed,
        pair.source.len(),
        pair.target.len()
    );
    for t in pair.source.iter().chain(&pair.target) {
        let _ = writeln!(out, "{t}");
    }
    out.push('\n');
}

pub fn write_pairs<'a>(pairs: impl IntoIterator<Item = &'a CorruptionPair>) -> String {
    let mut out = String::new();
    for p in pairs {
        write_pair(&mut out, &PairRecord::from(p));
    }
    out
}

fn wire_err(line: usize, reason: impl Into<String>) -> PipelineError {
    PipelineError::Wire {
        line,
        reason: reason.into(),
    }
}

struct Header {
    kind: CorruptionKind,
    method: SelectionMethod,
    seed: u64,
    src_len: usize,
    tgt_len: usize,
}

fn parse_header(line: &str, line_no: usize) -> Result<Header, PipelineError> {
    let rest = line
        .strip_prefix("@pair ")
        .ok_or_else(|| wire_err(line_no, "expected '@pair' header"))?;
    let mut fields = rest.split(' ');
    let mut take = |key: &str| -> Result<&str, PipelineError> {
        fields
            .next()
            .and_then(|f| f.strip_prefix(key)?.strip_prefix('='))
            .ok_or_else(|| wire_err(line_no, format!("expected {key}=")))
    };
    let kind = take("kind")?;
    let kind: CorruptionKind = kind
        .parse()
        .map_err(|_| wire_err(line_no, format!("unknown kind {kind:?}")))?;
    let method = take("method")?;
    let method: SelectionMethod = method
        .parse()
        .map_err(|_| wire_err(line_no, format!("unknown method {method:?}")))?;
    let num = |s: &str| -> Result<u64, PipelineError> {
        s.parse().map_err(|_| wire_err(line_no, format!("bad number {s:?}")))
    };
    let seed = num(take("seed")?)?;
    let src_len = num(take("src_len")?)? as usize;
    let tgt_len = num(take("tgt_len")?)? as usize;
    if fields.next().is_some() {
        return Err(wire_err(line_no, "trailing header fields"));
    }
    Ok(Header {
        kind,
        method,
        seed,
        src_len,
        tgt_len,
    })
}

/// Parses a pair file. Every record must be followed by exactly one blank line.
pub fn read_pairs(text: &str) -> Result<Vec<PairRecord>, PipelineError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let header = parse_header(lines[i], i + 1)?;
        i += 1;
        let read = |n: usize, i: &mut usize| -> Result<Vec<OctupleToken>, PipelineError> {
            let mut tokens = Vec::with_capacity(n);
            for _ in 0..n {
                let line = lines
                    .get(*i)
                    .ok_or_else(|| wire_err(*i + 1, "record ends early"))?;
                tokens.push(parse_token(line, *i + 1).map_err(|e| wire_err(*i + 1, e.to_string()))?);
                *i += 1;
            }
            Ok(tokens)
        };
        let source = read(header.src_len, &mut i)?;
        let target = read(header.tgt_len, &mut i)?;
        match lines.get(i) {
            Some(&"") => i += 1,
            _ => return Err(wire_err(i + 1, "expected blank line after record")),
        }
        out.push(PairRecord {
            kind: header.kind,
            method: header.method,
            seed: header.seed,
            source,
            target,
        });
    }
    Ok(out)
}

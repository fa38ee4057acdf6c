//! Plain-text token format.
//!
//! ```text
//! # segment=0 source=corpus/piece.mid
//! 8 27 4 4 4 64 19 20
//! 8 27 4 20 4 67 19 20
//! ```
//!
//! Each sequence starts with a `#` header line carrying its provenance,
//! followed by one token per line as 8 space-separated ids. A file may hold
//! any number of sequences. Blank lines are ignored.

use std::fmt::Write as _;

use super::{CodecError, OctupleToken, Provenance, TokenSequence};

pub fn write_sequence(out: &mut String, seq: &TokenSequence) {
    let _ = writeln!(
        out,
        "# segment={} source={}",
        seq.provenance.segment, seq.provenance.source
    );
    for t in &seq.tokens {
        let _ = writeln!(out, "{t}");
    }
}

pub fn write_sequences<'a>(seqs: impl IntoIterator<Item = &'a TokenSequence>) -> String {
    let mut out = String::new();
    for s in seqs {
        write_sequence(&mut out, s);
    }
    out
}

pub fn read_sequences(text: &str) -> Result<Vec<TokenSequence>, CodecError> {
    let mut seqs: Vec<TokenSequence> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            seqs.push(TokenSequence {
                tokens: Vec::new(),
                provenance: parse_header(header, line_no)?,
            });
            continue;
        }
        let token = parse_token(line, line_no)?;
        match seqs.last_mut() {
            Some(seq) => seq.tokens.push(token),
            None => {
                return Err(CodecError::Parse {
                    line: line_no,
                    reason: "token line before any '#' header".into(),
                })
            }
        }
    }
    Ok(seqs)
}

pub(crate) fn parse_token(line: &str, line_no: usize) -> Result<OctupleToken, CodecError> {
    let err = |reason: String| CodecError::Parse {
        line: line_no,
        reason,
    };
    let mut ids = [0u16; 8];
    let mut parts = line.split_ascii_whitespace();
    for slot in ids.iter_mut() {
        let part = parts
            .next()
            .ok_or_else(|| err("expected 8 ids".into()))?;
        *slot = part
            .parse()
            .map_err(|_| err(format!("bad id {part:?}")))?;
    }
    if parts.next().is_some() {
        return Err(err("more than 8 ids".into()));
    }
    let token = OctupleToken(ids);
    token.validate().map_err(err)?;
    Ok(token)
}

fn parse_header(header: &str, line_no: usize) -> Result<Provenance, CodecError> {
    let mut prov = Provenance::default();
    let mut rest = header.trim_start();
    while !rest.is_empty() {
        if let Some(source) = rest.strip_prefix("source=") {
            // source runs to the end of the line so paths may contain spaces
            prov.source = source.to_string();
            break;
        }
        let (word, tail) = rest.split_once(' ').unwrap_or((rest, ""));
        if let Some(k) = word.strip_prefix("segment=") {
            prov.segment = k.parse().map_err(|_| CodecError::Parse {
                line: line_no,
                reason: format!("bad segment index {k:?}"),
            })?;
        }
        rest = tail.trim_start();
    }
    Ok(prov)
}

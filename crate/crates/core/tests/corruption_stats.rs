mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use octuple::codec::{Field, OctupleToken, TokenSequence};
use octuple::corruption::{
    corrupt, delete_tokens, infill_spans, permute_sentences, rotate_by, rotate_document,
    CorruptionConfig, CorruptionKind,
};
use octuple::selection::SelectionMethod;

/// `bars` bars of four quarter notes.
fn bars(bars: usize) -> TokenSequence {
    common::quarter_stream(bars * 4)
}

/// A long piece with varied durations: 2500 bars-worth of tokens, bar ids
/// capped at 255 by cycling.
fn long_piece(n: usize) -> TokenSequence {
    let mut tokens = Vec::with_capacity(n);
    let (mut bar, mut pos) = (0u32, 0u16);
    for i in 0..n {
        let dur = [4u16, 8, 16, 8, 4, 12][i % 6];
        tokens.push(common::token(bar % 256, pos, 40 + (i % 40) as u8, dur));
        pos += dur;
        if pos >= 64 {
            pos = 0;
            bar += 1;
        }
    }
    TokenSequence::new(tokens)
}

fn without_bar(t: &OctupleToken) -> [u16; 7] {
    let mut out = [0; 7];
    let mut j = 0;
    for f in Field::ALL {
        if f != Field::Bar {
            out[j] = t.get(f);
            j += 1;
        }
    }
    out
}

fn multiset(tokens: &[OctupleToken]) -> HashMap<[u16; 7], usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(without_bar(t)).or_default() += 1;
    }
    m
}

#[test]
fn two_bar_permutation_is_a_fair_coin() {
    let seq = bars(2);
    let trials = 4000;
    let swapped = (0..trials)
        .filter(|&s| {
            let p = permute_sentences(&seq, SelectionMethod::BAR_TOKEN, false, s).unwrap();
            p.source.tokens[0] != seq.tokens[0]
        })
        .count();
    let f = swapped as f64 / trials as f64;
    assert!((0.45..=0.55).contains(&f), "{f}");
}

#[test]
fn default_config_draws_kinds_uniformly() {
    let seq = bars(8);
    let config = CorruptionConfig::default();
    let mut counts: HashMap<CorruptionKind, usize> = HashMap::new();
    let draws = 10_000;
    for s in 0..draws {
        *counts.entry(corrupt(&seq, s, &config).unwrap().kind).or_default() += 1;
    }
    for kind in CorruptionKind::ALL {
        let f = counts.get(&kind).copied().unwrap_or(0) as f64 / draws as f64;
        assert!((0.18..=0.22).contains(&f), "{kind}: {f}");
    }
}

#[test]
fn deletion_fraction_is_close_to_the_ratio() {
    let seq = long_piece(10_000);
    for &method in CorruptionKind::TokenDeletion.allowed_methods() {
        for seed in 0..3 {
            let p = delete_tokens(&seq, method, 0.15, seed).unwrap();
            let f = 1.0 - p.source.len() as f64 / seq.len() as f64;
            assert!((0.14..=0.16).contains(&f), "{method}: {f}");
        }
    }
}

#[test]
fn rotation_only_config() {
    let seq = bars(4);
    let config = CorruptionConfig::only(CorruptionKind::DocumentRotation);
    for s in 0..50 {
        let p = corrupt(&seq, s, &config).unwrap();
        assert_eq!(p.kind, CorruptionKind::DocumentRotation);
        assert_eq!(p.target, seq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn infilling_length_identity(n in 4usize..300, seed in any::<u64>(), method_idx in 0usize..4) {
        let seq = long_piece(n);
        let method = CorruptionKind::TextInfilling.allowed_methods()[method_idx % CorruptionKind::TextInfilling.allowed_methods().len()];
        let p = infill_spans(&seq, method, 0.15, 3.0, seed).unwrap();
        let mask = p.mask.as_ref().unwrap();
        let removed: usize = mask.spans.iter().filter(|s| s.len > 0).map(|s| s.len - 1).sum();
        prop_assert_eq!(p.source.len(), p.target.len() - removed);
        let masks = p.source.tokens.iter().filter(|t| **t == OctupleToken::MASK).count();
        prop_assert_eq!(masks, mask.spans.iter().filter(|s| s.len > 0).count());
    }

    #[test]
    fn reorderings_preserve_the_multiset(
        n_bars in 1usize..30,
        seed in any::<u64>(),
        renumber in any::<bool>(),
        which in 0usize..3,
    ) {
        let seq = bars(n_bars);
        let p = match which {
            0 => permute_sentences(&seq, SelectionMethod::BAR_TOKEN, renumber, seed).unwrap(),
            1 => permute_sentences(&seq, SelectionMethod::OCTUPLE_TOKEN, renumber, seed).unwrap(),
            _ => rotate_document(&seq, renumber, seed).unwrap(),
        };
        prop_assert_eq!(p.source.len(), seq.len());
        prop_assert_eq!(multiset(&p.source.tokens), multiset(&seq.tokens));
        let origin = p.origin.as_ref().unwrap();
        for (i, &j) in origin.iter().enumerate() {
            prop_assert_eq!(without_bar(&p.source.tokens[i]), without_bar(&seq.tokens[j]));
            if !renumber {
                prop_assert_eq!(p.source.tokens[i], seq.tokens[j]);
            }
        }
        if renumber {
            let bars: Vec<u32> = p.source.tokens.iter().filter_map(|t| t.bar()).collect();
            prop_assert_eq!(bars[0], 0);
            prop_assert!(bars.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        }
    }

    #[test]
    fn rotation_is_cyclic(n_bars in 1usize..20, k in 0usize..80, renumber in any::<bool>()) {
        let seq = bars(n_bars);
        let k = k % seq.len();
        let p = rotate_by(&seq, k, renumber, 0);
        let back = rotate_by(&p.source, (seq.len() - k) % seq.len(), false, 0);
        for (a, b) in back.source.tokens.iter().zip(&seq.tokens) {
            prop_assert_eq!(without_bar(a), without_bar(b));
        }
        if !renumber {
            prop_assert_eq!(back.source.tokens, seq.tokens);
        }
    }
}

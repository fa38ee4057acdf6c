mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use octuple::codec::{OctupleToken, TokenSequence};
use octuple::selection::{nbar_span, select, Granularity, Level, SelectionError, SelectionMethod};

/// Musical tokens (sorted by bar) with the occasional special token mixed in.
fn arb_sequence() -> impl Strategy<Value = TokenSequence> {
    prop::collection::vec((0u32..3, 0u16..64, 1u16..=128, 0u8..10), 1..80).prop_map(|rows| {
        let mut bar = 0;
        let tokens = rows
            .into_iter()
            .map(|(step, pos, dur, kind)| {
                bar += step;
                match kind {
                    0 => OctupleToken::BOS,
                    1 => OctupleToken::PAD,
                    _ => common::token(bar.min(255), pos, 60, dur),
                }
            })
            .collect();
        TokenSequence::new(tokens)
    })
}

/// Prefix sums, then the first prefix that reaches `m`.
fn brute_force_n(seq: &TokenSequence, p: usize, m: u32) -> usize {
    let run: Vec<u32> = seq.tokens[p..]
        .iter()
        .take_while(|t| t.is_musical())
        .map(|t| t.duration64().unwrap() as u32)
        .collect();
    let mut sums = vec![0u32];
    for d in &run {
        sums.push(sums.last().unwrap() + d);
    }
    (1..=run.len()).find(|&n| sums[n] >= m).unwrap_or(run.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn nbar_span_matches_brute_force(seq in arb_sequence(), p in 0usize..80, m in 1u32..=128) {
        let p = p % seq.len();
        match nbar_span(&seq, p, m) {
            Ok(draw) => {
                prop_assert!(seq.tokens[p].is_musical());
                prop_assert_eq!(draw.n, brute_force_n(&seq, p, m));
                prop_assert!(draw.n >= 1 && p + draw.n <= seq.len());
            }
            Err(SelectionError::BadIndex(i)) => {
                prop_assert_eq!(i, p);
                prop_assert!(!seq.tokens[p].is_musical());
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn selections_respect_their_granularity(
        seq in arb_sequence(),
        method_idx in 0usize..6,
        ratio in 0.05f64..0.9,
        seed in any::<u64>(),
    ) {
        let method = SelectionMethod::ALL[method_idx];
        let musical = seq.tokens.iter().filter(|t| t.is_musical()).count();
        let result = select(&seq, method, ratio, &mut ChaCha8Rng::seed_from_u64(seed));
        if musical == 0 {
            prop_assert!(matches!(result, Err(SelectionError::EmptySequence)));
            return Ok(());
        }
        let mask = result.unwrap();
        prop_assert_eq!(mask.len(), seq.len());
        let target = (ratio * (musical * 8) as f64).ceil() as usize;
        // enough cells, and specials untouched
        prop_assert!(mask.selected_cells() >= target.min(musical * 8));
        for (row, t) in mask.grid.iter().zip(&seq.tokens) {
            if !t.is_musical() {
                prop_assert!(row.iter().all(|&b| !b));
            }
            if method.granularity == Granularity::Token {
                prop_assert!(row.iter().all(|&b| b) || row.iter().all(|&b| !b));
            }
        }
        // bar-token masks whole bar runs
        if method.level == Level::Bar && method.granularity == Granularity::Token {
            for i in 1..seq.len() {
                let (a, b) = (&seq.tokens[i - 1], &seq.tokens[i]);
                if a.is_musical() && b.is_musical() && a.bar() == b.bar() {
                    prop_assert_eq!(mask.row_selected(i - 1), mask.row_selected(i));
                }
            }
        }
        // same seed, same mask
        let again = select(&seq, method, ratio, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(again, mask);
    }
}

#[test]
fn quarter_notes_follow_the_ceiling_rule() {
    let seq = common::quarter_stream(16);
    for m in 1..=128u32 {
        let n = nbar_span(&seq, 0, m).unwrap().n;
        assert_eq!(n, m.div_ceil(16) as usize, "m={m}");
        assert_eq!(n, brute_force_n(&seq, 0, m));
    }
}

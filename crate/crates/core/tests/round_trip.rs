mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use octuple::codec::{
    decode_tokens, encode_score, read_sequences, write_sequences, OctupleToken, TimeSignature,
    TokenSequence,
};
use octuple::midi::{parse_midi, write_midi};

fn arb_token() -> impl Strategy<Value = OctupleToken> {
    let sig = prop_oneof![
        (1u8..=8).prop_map(|n| TimeSignature::new(n, 4)),
        (1u8..=16).prop_map(|n| TimeSignature::new(n, 8)),
        (1u8..=4).prop_map(|n| TimeSignature::new(n, 2)),
        (1u8..=16).prop_map(|n| TimeSignature::new(n, 16)),
    ];
    (sig, 0u8..32, 0u32..200, 0u16..128, 0u8..128, 1u16..=128, 0u8..32)
        .prop_map(|(ts, tempo, bar, pos, pitch, dur, vel)| common::token_full(ts, tempo, bar, pos, pitch, dur, vel))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn midi_write_parse_round_trip(seed in any::<u64>()) {
        let score = common::random_score(&mut ChaCha8Rng::seed_from_u64(seed), 80);
        prop_assert!(score.validate().is_ok());
        let back = parse_midi(&write_midi(&score)).unwrap();
        prop_assert_eq!(back, score);
    }

    #[test]
    fn encode_is_a_fixed_point_of_decode(seed in any::<u64>()) {
        let score = common::random_score(&mut ChaCha8Rng::seed_from_u64(seed), 80);
        let tokens = encode_score(&score).unwrap();
        let decoded = decode_tokens(&tokens).unwrap();
        prop_assert!(decoded.validate().is_ok());
        prop_assert_eq!(encode_score(&decoded).unwrap(), tokens.clone());
        let reparsed = parse_midi(&write_midi(&decoded)).unwrap();
        prop_assert_eq!(encode_score(&reparsed).unwrap(), tokens);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// Arbitrary token lists settle after one decode/encode pass.
    #[test]
    fn arbitrary_tokens_settle(tokens in prop::collection::vec(arb_token(), 0..60)) {
        let once = encode_score(&decode_tokens(&TokenSequence::new(tokens)).unwrap()).unwrap();
        let twice = encode_score(&decode_tokens(&once).unwrap()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn text_format_round_trip(
        seqs in prop::collection::vec(
            (prop::collection::vec(arb_token(), 0..20), "[a-z0-9 _./-]{0,12}", 0usize..50),
            0..4,
        )
    ) {
        let seqs: Vec<TokenSequence> = seqs
            .into_iter()
            .map(|(t, src, k)| TokenSequence::new(t).with_provenance(src.trim(), k))
            .collect();
        let text = write_sequences(&seqs);
        prop_assert_eq!(read_sequences(&text).unwrap(), seqs);
    }
}

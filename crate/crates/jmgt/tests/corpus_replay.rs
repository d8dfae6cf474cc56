//! Replays the checked-in fuzz corpus through the two untrusted-input
//! decoders and runs a deterministic bit-flip sweep, so the corpus stays
//! valid and the decoders stay panic-free even without a fuzzing toolchain.

use jmgt::checkpoint;
use jmgt::config::RunSpec;
use jmgt::rng::SplitMix64;
use std::path::PathBuf;

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

#[test]
fn config_corpus_seeds_parse_and_roundtrip() {
    let dir = corpus_dir("fuzz_config");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let spec = RunSpec::parse(&text)
            .unwrap_or_else(|e| panic!("corpus seed {path:?} must parse: {e}"));
        let dumped = spec.dump();
        let reparsed = RunSpec::parse(&dumped).unwrap();
        assert_eq!(dumped, reparsed.dump(), "canonical dump fixed point for {path:?}");
        seen += 1;
    }
    assert!(seen >= 3, "expected the checked-in config seeds, found {seen}");
}

#[test]
fn checkpoint_corpus_seed_decodes_and_roundtrips() {
    let path = corpus_dir("fuzz_checkpoint").join("tiny_valid.ckpt");
    let bytes = std::fs::read(&path).unwrap();
    let ck = checkpoint::decode(&bytes).expect("checked-in checkpoint seed must decode");
    let re = checkpoint::encode(&ck.state, &ck.params, ck.s_max_factor, ck.ring_budget);
    assert_eq!(re, bytes, "seed must re-encode identically");
}

/// Single-bit corruption of a valid checkpoint must never panic, and when a
/// flip happens to decode it must still re-encode consistently.
#[test]
fn checkpoint_bit_flips_never_panic() {
    let path = corpus_dir("fuzz_checkpoint").join("tiny_valid.ckpt");
    let bytes = std::fs::read(&path).unwrap();
    let mut rng = SplitMix64::new(20240803);
    let mut decoded_ok = 0;
    for _ in 0..4000 {
        let mut mutated = bytes.clone();
        let pos = (rng.next_u64() as usize) % mutated.len();
        let bit = (rng.next_u64() % 8) as u8;
        mutated[pos] ^= 1 << bit;
        if let Ok(ck) = checkpoint::decode(&mutated) {
            decoded_ok += 1;
            let re = checkpoint::encode(&ck.state, &ck.params, ck.s_max_factor, ck.ring_budget);
            assert_eq!(re, mutated, "decode/encode round trip after bit flip");
        }
    }
    // flips inside coefficient payloads generally still decode
    assert!(decoded_ok > 0);
}

/// Random truncations and random byte blobs must be rejected cleanly.
#[test]
fn checkpoint_truncations_and_noise_rejected_cleanly() {
    let path = corpus_dir("fuzz_checkpoint").join("tiny_valid.ckpt");
    let bytes = std::fs::read(&path).unwrap();
    let mut rng = SplitMix64::new(7);
    for _ in 0..200 {
        let cut = (rng.next_u64() as usize) % bytes.len();
        assert!(checkpoint::decode(&bytes[..cut]).is_err());
    }
    for len in [0usize, 1, 5, 6, 64, 333] {
        let blob: Vec<u8> = (0..len).map(|_| rng.next_u64() as u8).collect();
        let _ = checkpoint::decode(&blob); // must not panic
    }
}

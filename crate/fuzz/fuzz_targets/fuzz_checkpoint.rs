#![no_main]
use libfuzzer_sys::fuzz_target;

// The binary checkpoint decoder must handle arbitrary bytes without
// panicking or over-allocating; successful decodes must re-encode to the
// same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = jmgt::checkpoint::decode(data) {
        let bytes = jmgt::checkpoint::encode(
            &ck.state,
            &ck.params,
            ck.s_max_factor,
            ck.ring_budget,
        );
        assert_eq!(bytes.as_slice(), data, "decode/encode must round-trip");
    }
});

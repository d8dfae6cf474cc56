#![no_main]
use libfuzzer_sys::fuzz_target;

// The sectioned key = value config parser must reject or accept arbitrary
// text without panicking; accepted configs must survive a dump/parse
// round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = jmgt::config::RunSpec::parse(text) {
        let dumped = spec.dump();
        let reparsed = jmgt::config::RunSpec::parse(&dumped)
            .expect("canonical dump must reparse");
        assert_eq!(dumped, reparsed.dump(), "dump must be a fixed point");
    }
});

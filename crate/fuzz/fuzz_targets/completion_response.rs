#![no_main]

use kgmend::complete::parse_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let out = parse_response(text);
    assert!(out.triples.len() + out.malformed <= text.lines().count());
    for t in &out.triples {
        // Rendering a parsed triple and parsing it again is stable.
        let again = parse_response(&t.to_string());
        assert_eq!(again.triples.len(), 1);
        assert_eq!(again.triples[0].key(), t.key());
        assert_eq!(again.triples[0].citations, t.citations);
    }
});

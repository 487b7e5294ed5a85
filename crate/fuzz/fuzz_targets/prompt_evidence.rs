#![no_main]

use kgmend::complete::extract_evidence_ids;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = extract_evidence_ids(text);
    }
});

#![no_main]

use kgmend::gnn::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&model);
        let again = decode_checkpoint(&bytes).expect("encoded checkpoint decodes");
        assert_eq!(encode_checkpoint(&again), bytes);
    }
});

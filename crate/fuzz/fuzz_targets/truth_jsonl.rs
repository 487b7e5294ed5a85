#![no_main]

use kgmend::synth::PlantedTruth;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(truth) = PlantedTruth::read(data) {
        let mut out = Vec::new();
        truth.write(&mut out).expect("writing to memory");
        let back = PlantedTruth::read(out.as_slice()).expect("written truth reads back");
        assert_eq!(back.relations.len(), truth.relations.len());
    }
});

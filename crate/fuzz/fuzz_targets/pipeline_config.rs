#![no_main]

use kgmend::config::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_toml_str(text) {
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).expect("serialized config parses");
        assert_eq!(back.digest(), cfg.digest());
    }
});

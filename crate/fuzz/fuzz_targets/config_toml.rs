#![no_main]

use libfuzzer_sys::fuzz_target;
use prodform::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
            let _ = cfg.validate();
            let _ = cfg.to_toml_string();
        }
    }
});

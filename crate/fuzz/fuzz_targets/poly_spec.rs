#![no_main]

use libfuzzer_sys::fuzz_target;
use prodform::models::PolynomialSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PolynomialSpec::from_toml_str(text);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use prodform::liouville::DensityOperator;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = DensityOperator::from_json_str(text);
    }
});

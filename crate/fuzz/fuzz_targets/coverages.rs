#![no_main]

use flingopt::exec_stop::parse_coverages;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(values) = parse_coverages(text) {
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
});

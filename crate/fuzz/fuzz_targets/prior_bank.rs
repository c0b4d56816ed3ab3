#![no_main]

use flingopt::belief::PriorBank;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bank) = PriorBank::from_json_str(text) {
        let again = PriorBank::from_json_str(&bank.to_json_string()).expect("roundtrip parses");
        assert_eq!(again, bank);
    }
});

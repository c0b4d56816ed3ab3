#![no_main]

use flingopt::sim_env::EnvSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = EnvSpec::from_json_str(text) {
        let again = EnvSpec::from_json_str(&spec.to_json_string()).expect("roundtrip parses");
        assert_eq!(again, spec);
    }
});

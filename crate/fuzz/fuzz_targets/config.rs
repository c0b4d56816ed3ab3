#![no_main]

use flingopt::harness::pipeline::Setup;
use flingopt::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_toml_str(text) else {
        return;
    };
    // a valid config serializes back to the same config; compared as text
    // so NaN-valued fields do not trip the check
    let text = cfg.to_toml_string();
    let again = ExperimentConfig::from_toml_str(&text).expect("roundtrip parses");
    assert_eq!(again.to_toml_string(), text);
    // range overrides and grid names are resolved here; errors are fine, panics are not
    if cfg.catalog.is_none() {
        let _ = Setup::new(&cfg);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use nfsar_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_toml(text) {
        let written = config.to_toml();
        let again = RunConfig::from_toml(&written).expect("written config parses");
        assert_eq!(again.to_toml(), written);
    }
});

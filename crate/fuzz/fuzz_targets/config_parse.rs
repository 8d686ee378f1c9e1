//! Fuzz the key=value training-config parser: never panic; accepted configs
//! must validate.
//!
//! cargo fuzz run config_parse

#![no_main]

use entrosim::config::parse_train_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_train_config_str(text) {
        assert!(cfg.validate().is_ok(), "parser returned an invalid config");
    }
});

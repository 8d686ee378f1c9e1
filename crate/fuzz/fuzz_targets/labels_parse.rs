//! Fuzz the labels-CSV parser: never panic; accepted rows are non-empty.
//!
//! cargo fuzz run labels_parse

#![no_main]

use entrosim::corpus::parse_labels_csv_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(labels) = parse_labels_csv_str(text) {
        for (path, family) in &labels {
            assert!(!path.is_empty() && !family.is_empty());
        }
    }
});

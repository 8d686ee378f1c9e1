//! Fuzz the start:end:step ratio-spec parser: never panic; accepted specs
//! yield a bounded, in-range, non-decreasing ratio list.
//!
//! cargo fuzz run ratio_spec_parse

#![no_main]

use entrosim::config::parse_ratio_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ratios) = parse_ratio_spec(text) {
        assert!(!ratios.is_empty() && ratios.len() <= 10_001);
        for w in ratios.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for r in ratios {
            assert!(r > 0.0 && r < 1.0 + 1e-9);
        }
    }
});

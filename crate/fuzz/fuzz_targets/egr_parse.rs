//! Fuzz the `.egr` entropy-graph decoder: must never panic or over-allocate,
//! and anything it accepts must re-encode to the same bytes.
//!
//! cargo fuzz run egr_parse

#![no_main]

use entrosim::egr::{encode_egr, parse_egr_bytes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(graph) = parse_egr_bytes(data) {
        for &c in graph.cells() {
            assert!((0.0..=8.0).contains(&c), "accepted out-of-range cell {c}");
        }
        assert_eq!(encode_egr(&graph).as_slice(), data, "round-trip mismatch");
    }
});

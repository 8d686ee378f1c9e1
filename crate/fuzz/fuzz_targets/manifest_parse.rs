//! Fuzz the JSONL manifest parser: never panic, and accepted manifests must
//! survive an encode -> parse round trip.
//!
//! cargo fuzz run manifest_parse

#![no_main]

use entrosim::corpus::{encode_manifest, parse_manifest_str};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = parse_manifest_str(text) {
        let reparsed = parse_manifest_str(&encode_manifest(&manifest)).expect("own encoding parses");
        // Encoding sorts rows by egr_path; row content is preserved.
        assert_eq!(reparsed.rows.len(), manifest.rows.len());
        assert_eq!(reparsed.skipped, manifest.skipped);
    }
});

//! Fuzz the `.ntc` checkpoint decoder: arbitrary bytes must never panic or
//! over-allocate, and accepted checkpoints must survive one
//! encode -> parse normalization round trip.
//!
//! cargo fuzz run ntc_parse

#![no_main]

use entrosim::checkpoint::{encode_checkpoint, parse_checkpoint_bytes};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = parse_checkpoint_bytes(data) {
        assert!(ckpt.model.params().iter().all(|v| v.is_finite()));
        let normalized = encode_checkpoint(&ckpt.model, ckpt.alpha);
        let reparsed = parse_checkpoint_bytes(&normalized).expect("own encoding parses");
        assert_eq!(reparsed.model.params(), ckpt.model.params());
        assert_eq!(reparsed.model.config, ckpt.model.config);
        assert_eq!(encode_checkpoint(&reparsed.model, reparsed.alpha), normalized);
    }
});

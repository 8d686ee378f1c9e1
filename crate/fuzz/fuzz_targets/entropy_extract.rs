//! Fuzz the raw extraction path on arbitrary binary input: entropy values
//! stay in [0, 8], the stream has ceil(n/l) entries, and the graph always
//! comes out at the configured size.
//!
//! cargo fuzz run entropy_extract

#![no_main]

use entrosim::entropy::{build_entropy_graph, entropy_stream, ExtractConfig, FillPolicy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // First byte steers the configuration; the rest is the "file".
    let (head, body) = match data.split_first() {
        Some((h, b)) => (*h, b),
        None => return,
    };
    let cfg = ExtractConfig {
        segment_len: 1 + (head & 0x3F) as usize,
        graph_h: 1 + (head >> 6) as usize,
        graph_w: 1 + (head >> 4 & 0x3) as usize,
        fill_policy: if head & 1 == 0 {
            FillPolicy::Resample
        } else {
            FillPolicy::PadTruncate
        },
    };
    let stream = entropy_stream(body, &cfg);
    assert_eq!(stream.values.len(), body.len().div_ceil(cfg.segment_len));
    assert!(stream.values.iter().all(|&v| (0.0..=8.0).contains(&v)));
    let graph = build_entropy_graph(&stream, &cfg);
    assert_eq!(graph.cells().len(), cfg.graph_h * cfg.graph_w);
    assert!(graph.cells().iter().all(|&c| (0.0..=8.0).contains(&c)));
    assert_eq!(graph.empty_source, body.is_empty());
});

//! Segmented Shannon-entropy extraction: binary bytes -> entropy stream ->
//! fixed-size entropy-graph matrix.
//!
//! A file is cut into segments of `segment_len` bytes (the final segment may
//! be shorter), each segment scored with base-2 Shannon entropy over its byte
//! histogram, and the resulting stream mapped onto an `H x W` matrix.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Upper bound of the per-segment entropy in bits/byte (log2 of 256 symbols).
pub const ENTROPY_MAX: f64 = 8.0;

/// How an entropy stream is fitted onto the fixed matrix size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Linearly interpolate the stream to exactly `H*W` values (default).
    Resample,
    /// Write the stream row-major, truncating at `H*W` or zero-padding up to it.
    PadTruncate,
}

impl FillPolicy {
    pub fn to_byte(self) -> u8 {
        match self {
            FillPolicy::Resample => 0,
            FillPolicy::PadTruncate => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(FillPolicy::Resample),
            1 => Ok(FillPolicy::PadTruncate),
            other => Err(Error::Format(format!("unknown fill policy byte {other}"))),
        }
    }
}

/// Extraction parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractConfig {
    pub segment_len: usize,
    pub graph_h: usize,
    pub graph_w: usize,
    pub fill_policy: FillPolicy,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            segment_len: 200,
            graph_h: 224,
            graph_w: 224,
            fill_policy: FillPolicy::Resample,
        }
    }
}

impl ExtractConfig {
    /// Small-graph preset for fast desk-scale runs.
    pub fn desk() -> Self {
        Self {
            graph_h: 64,
            graph_w: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_len == 0 {
            return Err(Error::Config("segment_len must be >= 1".into()));
        }
        if self.graph_h == 0 || self.graph_w == 0 {
            return Err(Error::Config("graph dimensions must be >= 1".into()));
        }
        self.graph_h
            .checked_mul(self.graph_w)
            .ok_or_else(|| Error::Config("graph dimensions overflow".into()))?;
        Ok(())
    }
}

/// Per-segment entropies of one file, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyStream {
    pub values: Vec<f64>,
    pub source_len: usize,
    pub segment_len: usize,
}

/// Fixed-size matrix of entropy values; the model input.
///
/// Cells are `f32` (the on-disk precision); all intermediate arithmetic runs
/// in `f64` and rounds once when the matrix is assembled, so an in-memory
/// graph and its `.egr` round-trip are bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyGraph {
    h: usize,
    w: usize,
    data: Vec<f32>,
    fill_policy: FillPolicy,
    /// Set when the source had zero length and the matrix is all zeros.
    pub empty_source: bool,
    pub sample_id: String,
}

impl EntropyGraph {
    pub fn new(
        h: usize,
        w: usize,
        data: Vec<f32>,
        fill_policy: FillPolicy,
        sample_id: String,
    ) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Invalid("graph dimensions must be >= 1".into()));
        }
        let cells = h
            .checked_mul(w)
            .ok_or_else(|| Error::Invalid("graph dimensions overflow".into()))?;
        if data.len() != cells {
            return Err(Error::Invalid(format!(
                "graph data length {} != {}x{}",
                data.len(),
                h,
                w
            )));
        }
        for &v in &data {
            if !v.is_finite() || !(0.0..=ENTROPY_MAX as f32).contains(&v) {
                return Err(Error::Invalid(format!("graph cell {v} outside [0, 8]")));
            }
        }
        Ok(Self {
            h,
            w,
            data,
            fill_policy,
            empty_source: false,
            sample_id,
        })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn cells(&self) -> &[f32] {
        &self.data
    }

    pub fn fill_policy(&self) -> FillPolicy {
        self.fill_policy
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.w + col]
    }
}

/// Shared handle used by datasets so resamples and splits stay cheap.
pub type GraphRef = Arc<EntropyGraph>;

/// Split `file_bytes` into consecutive segments of `segment_len` bytes.
///
/// The final segment carries the remainder and may be shorter; concatenating
/// the segments reproduces the input. Empty input yields no segments.
pub fn segment_bytes(file_bytes: &[u8], segment_len: usize) -> impl Iterator<Item = &[u8]> {
    assert!(segment_len >= 1, "segment_len must be >= 1");
    file_bytes.chunks(segment_len)
}

/// Base-2 Shannon entropy of a byte slice in bits/byte, in `[0, 8]`.
///
/// `0 * log 0` terms are omitted; empty input returns 0.
pub fn shannon_entropy(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 0.0;
    }
    let mut counts = [0usize; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    let len = bytes.len() as f64;
    let mut entropy = 0.0;
    for &c in counts.iter() {
        if c == 0 {
            continue;
        }
        let p = c as f64 / len;
        entropy -= p * p.log2();
    }
    entropy
}

/// Entropy of one segment; errors on an empty segment.
pub fn segment_entropy(segment: &[u8]) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::Invalid("entropy of an empty segment".into()));
    }
    Ok(shannon_entropy(segment))
}

/// Per-segment entropy stream of a byte buffer.
pub fn entropy_stream(file_bytes: &[u8], config: &ExtractConfig) -> EntropyStream {
    let values = segment_bytes(file_bytes, config.segment_len)
        .map(shannon_entropy)
        .collect();
    EntropyStream {
        values,
        source_len: file_bytes.len(),
        segment_len: config.segment_len,
    }
}

/// Linear interpolation of `src` onto `dst_len` evenly spaced points.
///
/// Endpoints map to endpoints; a single-element source is treated as
/// constant. `src` must be non-empty.
pub fn resample_linear(src: &[f64], dst_len: usize) -> Vec<f64> {
    assert!(!src.is_empty(), "resample of an empty stream");
    if dst_len == 0 {
        return Vec::new();
    }
    let n = src.len();
    if n == 1 {
        return vec![src[0]; dst_len];
    }
    if dst_len == 1 {
        return vec![src[0]];
    }
    let scale = (n - 1) as f64 / (dst_len - 1) as f64;
    (0..dst_len)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = pos.floor() as usize;
            if lo >= n - 1 {
                return src[n - 1];
            }
            let frac = pos - lo as f64;
            src[lo] + (src[lo + 1] - src[lo]) * frac
        })
        .collect()
}

/// Assemble the fixed-size entropy graph from a stream.
///
/// An empty stream produces an all-zero graph flagged `empty_source`.
pub fn build_entropy_graph(stream: &EntropyStream, config: &ExtractConfig) -> EntropyGraph {
    let (h, w) = (config.graph_h, config.graph_w);
    let cells = h * w;
    if stream.values.is_empty() {
        let mut g = EntropyGraph::new(h, w, vec![0.0; cells], config.fill_policy, String::new())
            .expect("zero graph is valid");
        g.empty_source = true;
        return g;
    }
    let data64: Vec<f64> = match config.fill_policy {
        FillPolicy::Resample => resample_linear(&stream.values, cells),
        FillPolicy::PadTruncate => {
            let mut v = Vec::with_capacity(cells);
            v.extend(stream.values.iter().take(cells).copied());
            v.resize(cells, 0.0);
            v
        }
    };
    // Interpolation between in-range values cannot leave [0, 8]; the clamp
    // only guards the f32 rounding step.
    let data: Vec<f32> = data64
        .into_iter()
        .map(|v| (v as f32).clamp(0.0, ENTROPY_MAX as f32))
        .collect();
    EntropyGraph::new(h, w, data, config.fill_policy, String::new()).expect("cells in range")
}

/// Extraction byproducts recorded into the corpus manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractMeta {
    pub source_len: usize,
    pub n_segments: usize,
    pub warnings: Vec<String>,
}

/// Extract one file into an entropy graph. Deterministic: identical bytes and
/// config produce an identical graph.
pub fn extract_file(path: &Path, config: &ExtractConfig) -> Result<(EntropyGraph, ExtractMeta)> {
    config.validate()?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let stream = entropy_stream(&bytes, config);
    let mut graph = build_entropy_graph(&stream, config);
    graph.sample_id = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut warnings = Vec::new();
    if graph.empty_source {
        warnings.push("empty source file: graph is all zeros".to_string());
    }
    Ok((
        graph,
        ExtractMeta {
            source_len: bytes.len(),
            n_segments: stream.values.len(),
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG2_200: f64 = 7.643856189774724; // 200f64.log2()

    #[test]
    fn segments_exact_division() {
        let bytes = vec![7u8; 400];
        let segs: Vec<&[u8]> = segment_bytes(&bytes, 200).collect();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.len() == 200));
    }

    #[test]
    fn segments_remainder() {
        let bytes = vec![7u8; 450];
        let lens: Vec<usize> = segment_bytes(&bytes, 200).map(|s| s.len()).collect();
        assert_eq!(lens, vec![200, 200, 50]);
    }

    #[test]
    fn segments_empty_input() {
        assert_eq!(segment_bytes(&[], 200).count(), 0);
    }

    #[test]
    fn segments_concatenation_identity() {
        let bytes: Vec<u8> = (0..=255u8).cycle().take(777).collect();
        let joined: Vec<u8> = segment_bytes(&bytes, 200).flatten().copied().collect();
        assert_eq!(joined, bytes);
    }

    #[test]
    fn entropy_constant_segment_is_zero() {
        assert_eq!(segment_entropy(&[0x41; 200]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_all_256_values_is_eight() {
        let bytes: Vec<u8> = (0..=255u8).collect();
        assert_eq!(segment_entropy(&bytes).unwrap(), 8.0);
    }

    #[test]
    fn entropy_two_symbols_is_one_bit() {
        assert_eq!(segment_entropy(&[0x00, 0x00, 0x01, 0x01]).unwrap(), 1.0);
    }

    #[test]
    fn entropy_200_distinct_values() {
        let bytes: Vec<u8> = (0..200u8).collect();
        let e = segment_entropy(&bytes).unwrap();
        assert!((e - LOG2_200).abs() < 1e-12, "got {e}, want {LOG2_200}");
    }

    #[test]
    fn entropy_empty_segment_errors() {
        assert!(segment_entropy(&[]).is_err());
    }

    #[test]
    fn stream_composition() {
        let mut bytes = vec![0u8; 200];
        bytes.extend(0..200u8);
        let cfg = ExtractConfig::default();
        let stream = entropy_stream(&bytes, &cfg);
        assert_eq!(stream.values.len(), 2);
        assert_eq!(stream.values[0], 0.0);
        assert!((stream.values[1] - LOG2_200).abs() < 1e-12);
    }

    #[test]
    fn stream_empty_file() {
        let stream = entropy_stream(&[], &ExtractConfig::default());
        assert!(stream.values.is_empty());
        assert_eq!(stream.source_len, 0);
    }

    #[test]
    fn stream_single_segment() {
        let stream = entropy_stream(&[0xFF; 200], &ExtractConfig::default());
        assert_eq!(stream.values, vec![0.0]);
    }

    #[test]
    fn stream_length_is_ceil() {
        let cfg = ExtractConfig::default();
        for len in [1usize, 199, 200, 201, 399, 400, 401] {
            let stream = entropy_stream(&vec![0u8; len], &cfg);
            assert_eq!(stream.values.len(), len.div_ceil(200), "len={len}");
        }
    }

    #[test]
    fn graph_resample_constant_stream() {
        let cfg = ExtractConfig {
            graph_h: 3,
            graph_w: 5,
            ..ExtractConfig::default()
        };
        for n in [1usize, 2, 7, 100] {
            let stream = EntropyStream {
                values: vec![3.0; n],
                source_len: n * 200,
                segment_len: 200,
            };
            let g = build_entropy_graph(&stream, &cfg);
            assert!(g.cells().iter().all(|&c| c == 3.0), "n={n}");
        }
    }

    #[test]
    fn graph_pad_truncate_identity_when_exact() {
        let cfg = ExtractConfig {
            graph_h: 2,
            graph_w: 3,
            fill_policy: FillPolicy::PadTruncate,
            ..ExtractConfig::default()
        };
        let values = vec![0.5, 1.5, 2.5, 3.5, 4.5, 5.5];
        let stream = EntropyStream {
            values: values.clone(),
            source_len: 1200,
            segment_len: 200,
        };
        let g = build_entropy_graph(&stream, &cfg);
        let expect: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        assert_eq!(g.cells(), expect.as_slice());
        assert_eq!(g.at(1, 0), 3.5);
    }

    #[test]
    fn graph_resample_two_points_to_two_by_two() {
        // Hand interpolation of [0, 8] onto 4 points: 0, 8/3, 16/3, 8.
        let cfg = ExtractConfig {
            graph_h: 2,
            graph_w: 2,
            ..ExtractConfig::default()
        };
        let stream = EntropyStream {
            values: vec![0.0, 8.0],
            source_len: 400,
            segment_len: 200,
        };
        let g = build_entropy_graph(&stream, &cfg);
        let want = [0.0f32, (8.0f64 / 3.0) as f32, (16.0f64 / 3.0) as f32, 8.0];
        for (got, want) in g.cells().iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn graph_empty_stream_is_flagged_zero() {
        let cfg = ExtractConfig::desk();
        let stream = EntropyStream {
            values: vec![],
            source_len: 0,
            segment_len: 200,
        };
        let g = build_entropy_graph(&stream, &cfg);
        assert!(g.empty_source);
        assert_eq!(g.cells().len(), 64 * 64);
        assert!(g.cells().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn graph_pad_policy_truncates() {
        let cfg = ExtractConfig {
            graph_h: 1,
            graph_w: 2,
            fill_policy: FillPolicy::PadTruncate,
            ..ExtractConfig::default()
        };
        let stream = EntropyStream {
            values: vec![1.0, 2.0, 3.0, 4.0],
            source_len: 800,
            segment_len: 200,
        };
        let g = build_entropy_graph(&stream, &cfg);
        assert_eq!(g.cells(), &[1.0, 2.0]);
    }

    #[test]
    fn extract_file_deterministic_and_meta() {
        let dir = std::env::temp_dir().join("entrosim_entropy_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.bin");
        let bytes: Vec<u8> = (0..40_960u32).map(|i| (i % 251) as u8).collect();
        std::fs::write(&path, &bytes).unwrap();
        let cfg = ExtractConfig::desk();
        let (g1, meta) = extract_file(&path, &cfg).unwrap();
        let (g2, _) = extract_file(&path, &cfg).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(meta.n_segments, 205); // ceil(40960 / 200)
        assert_eq!(meta.source_len, 40_960);
        assert!(meta.warnings.is_empty());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn extract_40kb_has_200_segments() {
        let cfg = ExtractConfig::default();
        let stream = entropy_stream(&vec![0u8; 40_000], &cfg);
        assert_eq!(stream.values.len(), 200);
    }

    #[test]
    fn extract_directory_errors() {
        let dir = std::env::temp_dir();
        assert!(extract_file(&dir, &ExtractConfig::desk()).is_err());
    }

    #[test]
    fn resample_endpoints_preserved() {
        let src = [1.0, 5.0, 2.0, 7.0];
        let out = resample_linear(&src, 11);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[10], 7.0);
        assert_eq!(out.len(), 11);
    }
}

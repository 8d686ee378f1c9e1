//! The `.egr` entropy-graph file format.
//!
//! Layout: magic `EGR1`, little-endian `u32` height, `u32` width, `u8` fill
//! policy (0 = resample, 1 = pad/truncate), three reserved zero bytes, then
//! `H*W` little-endian IEEE-754 `f32` cells, row-major.

use std::path::Path;

use crate::entropy::{EntropyGraph, FillPolicy, ENTROPY_MAX};
use crate::error::{Error, Result};

pub const EGR_MAGIC: [u8; 4] = *b"EGR1";
const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 3;

/// Serialize a graph to `.egr` bytes.
pub fn encode_egr(graph: &EntropyGraph) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + graph.cells().len() * 4);
    out.extend_from_slice(&EGR_MAGIC);
    out.extend_from_slice(&(graph.h() as u32).to_le_bytes());
    out.extend_from_slice(&(graph.w() as u32).to_le_bytes());
    out.push(graph.fill_policy().to_byte());
    out.extend_from_slice(&[0u8; 3]);
    for &cell in graph.cells() {
        out.extend_from_slice(&cell.to_le_bytes());
    }
    out
}

/// Parse `.egr` bytes. Rejects bad magic, nonzero reserved bytes, dimension
/// mismatches, and cells outside `[0, 8]`.
///
/// The returned graph carries an empty `sample_id`; callers attach identity
/// from the surrounding manifest or path.
pub fn parse_egr_bytes(bytes: &[u8]) -> Result<EntropyGraph> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "egr: truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if bytes[0..4] != EGR_MAGIC {
        return Err(Error::Format("egr: bad magic".into()));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let policy = FillPolicy::from_byte(bytes[12])?;
    if bytes[13..16] != [0, 0, 0] {
        return Err(Error::Format("egr: nonzero reserved bytes".into()));
    }
    if h == 0 || w == 0 {
        return Err(Error::Format("egr: zero dimension".into()));
    }
    let cells = h
        .checked_mul(w)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Format("egr: dimension overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != cells {
        return Err(Error::Format(format!(
            "egr: body is {} bytes, header implies {}",
            body.len(),
            cells
        )));
    }
    let mut data = Vec::with_capacity(h * w);
    for chunk in body.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() || !(0.0..=ENTROPY_MAX as f32).contains(&v) {
            return Err(Error::Format(format!("egr: cell {v} outside [0, 8]")));
        }
        data.push(v);
    }
    EntropyGraph::new(h, w, data, policy, String::new())
}

pub fn write_egr(path: &Path, graph: &EntropyGraph) -> Result<()> {
    std::fs::write(path, encode_egr(graph)).map_err(|e| Error::io(path, e))
}

pub fn read_egr(path: &Path) -> Result<EntropyGraph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_egr_bytes(&bytes)
}
